from __future__ import annotations

from collections import Counter

import pytest

from helpers import qa_dataset, qa_problem, seq_dataset
from multiprobe import Dataset, PromptTemplate, Setting, compose, default_template, render_prompt
from multiprobe.composer import load_template, template_from_text


def test_six_problems_n3_partition():
    multis = compose(qa_dataset(6), n=3, seed=0)
    assert len(multis) == 2
    ids = [p.id for m in multis for p in m.members]
    assert Counter(ids) == Counter(f"q{i:03d}" for i in range(6))
    assert all(m.n == 3 for m in multis)


def test_n1_wraps_single_problem():
    multis = compose(qa_dataset(2), n=1, seed=0)
    assert all(m.n == 1 for m in multis)
    prompt = multis[0].prompt
    assert prompt.count("1:") == 1
    assert "2:" not in prompt


def test_sequential_group_of_five_kept_in_table_order():
    ds = seq_dataset([5])
    multis = compose(ds, n=5, seed=123)
    assert len(multis) == 1
    assert [p.id for p in multis[0].members] == [p.id for p in ds.problems]
    assert multis[0].shared_context == "story for group 0"


def test_same_seed_byte_identical():
    a = compose(qa_dataset(20), n=3, seed=42)
    b = compose(qa_dataset(20), n=3, seed=42)
    assert a == b


def test_different_seed_changes_order():
    a = compose(qa_dataset(50), n=5, seed=1)
    b = compose(qa_dataset(50), n=5, seed=2)
    assert [p.id for m in a for p in m.members] != [p.id for m in b for p in m.members]


def test_n_zero_rejected():
    with pytest.raises(ValueError):
        compose(qa_dataset(3), n=0, seed=0)


def test_empty_dataset_yields_empty_list():
    empty = Dataset(name="e", setting=Setting.INDEPENDENT, problems=())
    assert compose(empty, n=3, seed=0) == []


def test_final_short_group_emitted():
    multis = compose(qa_dataset(7), n=3, seed=0)
    sizes = sorted(m.n for m in multis)
    assert sizes == [1, 3, 3]
    ids = [p.id for m in multis for p in m.members]
    assert Counter(ids) == Counter(f"q{i:03d}" for i in range(7))


def test_sequential_chunks_never_mix_groups():
    ds = seq_dataset([5, 2, 7])
    multis = compose(ds, n=3, seed=9)
    for m in multis:
        assert len({p.group_key for p in m.members}) == 1
    ids = [p.id for m in multis for p in m.members]
    assert Counter(ids) == Counter(p.id for p in ds.problems)
    # In-group order preserved after chunking.
    for m in multis:
        member_ids = [int(p.id[1:]) for p in m.members]
        assert member_ids == sorted(member_ids)


def test_undersized_sequential_group_forms_one_instance():
    multis = compose(seq_dataset([2]), n=5, seed=0)
    assert len(multis) == 1
    assert multis[0].n == 2


def test_render_markers_appear_exactly_once():
    multis = compose(qa_dataset(3), n=3, seed=0)
    prompt = multis[0].prompt
    for marker in ("1:", "2:", "3:"):
        assert prompt.count(marker) == 1


def test_render_exemplar_precedes_questions():
    template = default_template(exemplar="Example: for a question, give its answer.")
    multis = compose(qa_dataset(2), n=2, seed=0, template=template)
    prompt = multis[0].prompt
    assert prompt.index("Example:") < prompt.index("1:")


def test_render_without_context_emits_no_context_block():
    multis = compose(qa_dataset(2), n=2, seed=0)
    assert multis[0].shared_context is None
    assert "story" not in multis[0].prompt


def test_render_shared_context_appears_once():
    ds = seq_dataset([3])
    multis = compose(ds, n=3, seed=0)
    assert multis[0].prompt.count("story for group 0") == 1


def test_mixed_member_contexts_stay_inline():
    problems = (
        qa_problem(0, context="ctx-a"),
        qa_problem(1, context="ctx-b"),
    )
    ds = Dataset(name="d", setting=Setting.INDEPENDENT, problems=problems)
    multis = compose(ds, n=2, seed=3)
    m = multis[0]
    assert m.shared_context is None
    assert "ctx-a" in m.prompt and "ctx-b" in m.prompt


def test_template_file_round_trip(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(
        "{exemplar}Read the context.\n{context}\n{questions}\nReply with numbered answers.\n",
        encoding="utf-8",
    )
    template = load_template(path, exemplar="demo text")
    assert template.header == "Read the context."
    assert template.answer_directive == "Reply with numbered answers."
    assert template.exemplar == "demo text"


def test_template_without_questions_placeholder_rejected():
    with pytest.raises(ValueError, match="questions"):
        template_from_text("no placeholder here")


def test_item_format_placeholders_required():
    with pytest.raises(ValueError, match="item_format"):
        PromptTemplate(header="h", item_format="{question}")


def test_default_template_headers_are_golden():
    t = default_template()
    assert t.header == "Below are several numbered questions. Answer all of them."
    assert (
        t.answer_directive
        == "Answer every question, one line per question, numbering each answer to match its question."
    )


def test_render_is_pure():
    multis = compose(qa_dataset(3), n=3, seed=5)
    t = default_template()
    assert render_prompt(multis[0], t) == render_prompt(multis[0], t)
    assert render_prompt(multis[0], t) == multis[0].prompt
