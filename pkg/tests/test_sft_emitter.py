from __future__ import annotations

from pathlib import Path

import pytest

from helpers import qa_problem, seq_dataset
from multiprobe import (
    ConfidenceLabel,
    DataError,
    Dataset,
    QASource,
    RecordKind,
    Setting,
    TuningRecord,
    build_multqa,
    build_multqa_conf,
    compose,
    default_template,
    emit,
    load_tuning_records,
)
from multiprobe.boundary import BoundaryRecord, ParsedAnswers

GOLDEN = Path(__file__).parent / "golden"


def _fixture_multi(questions_golds: list[tuple[str, str]], n: int | None = None):
    # Sequential keeps members in listed order, so goldens stay stable.
    ds = Dataset(name="fx", setting=Setting.SEQUENTIAL, problems=tuple(
        qa_problem(i, question=q, gold=(g,), group_key="g00")
        for i, (q, g) in enumerate(questions_golds)
    ))
    multis = compose(ds, n=n or len(questions_golds), seed=0)
    assert len(multis) == 1
    return multis[0]


def _record(multi, answers: list[str], matches: list[bool]) -> BoundaryRecord:
    return BoundaryRecord(
        multi=multi,
        parsed=ParsedAnswers(answers=tuple(answers), parse_warnings=()),
        matches=tuple(matches),
        labels=tuple(ConfidenceLabel.from_match(m) for m in matches),
    )


# ---------------------------------------------------------------------------
# build_multqa
# ---------------------------------------------------------------------------


def test_multqa_single_question_degenerate():
    multi = _fixture_multi([("Name the capital of France", "Paris")])
    record = build_multqa(multi, default_template())
    assert record.output == "1: Paris"
    assert record.kind is RecordKind.MULTQA
    assert record.source_ids == ("q000",)


def test_multqa_numbered_first_golds():
    multi = _fixture_multi(
        [
            ("Name the capital of France", "Paris"),
            ("Name the product of six and seven", "42"),
            ("Name the color of a clear daytime sky", "Blue"),
        ]
    )
    record = build_multqa(multi, default_template())
    assert record.output == "1: Paris\n2: 42\n3: Blue"
    assert record.input == multi.prompt


def test_multqa_first_gold_is_canonical():
    problems = (qa_problem(0, gold=("first", "second")),)
    ds = Dataset(name="d", setting=Setting.INDEPENDENT, problems=problems)
    multi = compose(ds, n=1, seed=0)[0]
    assert build_multqa(multi, default_template()).output == "1: first"


def test_multqa_shared_context_once_in_input_never_in_output():
    ds = seq_dataset([3])
    multi = compose(ds, n=3, seed=0)[0]
    record = build_multqa(multi, default_template())
    assert record.input.count("story for group 0") == 1
    assert "story for group 0" not in record.output


# ---------------------------------------------------------------------------
# build_multqa_conf
# ---------------------------------------------------------------------------


def test_conf_all_sure():
    multi = _fixture_multi([("a", "1"), ("b", "2"), ("c", "3")])
    record = build_multqa_conf(_record(multi, ["1", "2", "3"], [True, True, True]))
    assert record.output == "1: I am sure 2: I am sure 3: I am sure"
    assert record.kind is RecordKind.MULTQAC


def test_conf_mixed_labels():
    multi = _fixture_multi([("a", "1"), ("b", "2"), ("c", "3")])
    record = build_multqa_conf(_record(multi, ["1", "9", "3"], [True, False, True]))
    assert record.output == "1: I am sure 2: I am unsure 3: I am sure"


def test_conf_single_block():
    multi = _fixture_multi([("Name the capital of France", "Paris")])
    record = build_multqa_conf(_record(multi, ["Paris"], [True]))
    assert record.input == (
        "Question: Name the capital of France. Answer: Paris. "
        "Are you sure you accurately answered the question based on your internal knowledge?"
    )
    assert record.output == "1: I am sure"


def test_conf_matches_template_golden_bytes():
    multi = _fixture_multi(
        [
            ("Name the capital of France", "Paris"),
            ("Name the product of six and seven", "42"),
            ("Name the color of a clear daytime sky", "Blue"),
        ]
    )
    record = build_multqa_conf(_record(multi, ["Paris", "41", "Blue"], [True, False, True]))
    assert record.input.encode() == (GOLDEN / "confidence_input_n3.txt").read_bytes()
    assert record.output.encode() == (GOLDEN / "confidence_output_n3.txt").read_bytes()


def test_conf_shows_model_answer_by_default_gold_on_request():
    multi = _fixture_multi([("q", "gold-answer")])
    record = _record(multi, ["model-answer"], [False])
    assert "Answer: model-answer." in build_multqa_conf(record).input
    assert (
        "Answer: gold-answer."
        in build_multqa_conf(record, QASource.GOLD_ANSWERS).input
    )


def test_conf_length_mismatch_rejected():
    multi = _fixture_multi([("a", "1"), ("b", "2")])
    bad = BoundaryRecord(
        multi=multi,
        parsed=ParsedAnswers(answers=("1",), parse_warnings=()),
        matches=(True,),
        labels=(ConfidenceLabel.SURE,),
    )
    with pytest.raises(DataError, match="labels"):
        build_multqa_conf(bad)


def test_conf_phrase_count_equals_n():
    import re

    for n in (1, 2, 5, 9):
        multi = _fixture_multi([(f"q{i}", str(i)) for i in range(n)])
        matches = [i % 2 == 0 for i in range(n)]
        record = build_multqa_conf(_record(multi, [str(i) for i in range(n)], matches))
        assert len(re.findall(r"I am (?:un)?sure", record.output)) == n


# ---------------------------------------------------------------------------
# emit / reload
# ---------------------------------------------------------------------------


def _qa_records(count: int) -> list[TuningRecord]:
    records = []
    for i in range(count):
        multi = _fixture_multi([(f"question {i}", f"answer {i}")])
        records.append(build_multqa(multi, default_template()))
    return records


def test_emit_round_trip(tmp_path):
    records = _qa_records(100)
    path = tmp_path / "multqa.jsonl"
    assert emit(records, RecordKind.MULTQA, path) == 100
    reloaded = load_tuning_records(path, RecordKind.MULTQA)
    assert reloaded == records


def test_emit_rejects_mixed_kinds(tmp_path):
    multi = _fixture_multi([("a", "1")])
    qa = build_multqa(multi, default_template())
    with pytest.raises(DataError, match="kind"):
        emit([qa], RecordKind.MULTQAC, tmp_path / "x.jsonl")


def test_emit_is_deterministic(tmp_path):
    records = _qa_records(20)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    emit(records, RecordKind.MULTQA, a)
    emit(records, RecordKind.MULTQA, b)
    assert a.read_bytes() == b.read_bytes()


def test_emitted_lines_are_schema_objects(tmp_path):
    import json

    records = _qa_records(3)
    path = tmp_path / "multqa.jsonl"
    emit(records, RecordKind.MULTQA, path)
    for line in path.read_text(encoding="utf-8").splitlines():
        obj = json.loads(line)
        assert list(obj) == ["input", "output", "source_ids"]
