from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import mc_problem, qa_dataset, qa_problem
from multiprobe import (
    AnswerFormat,
    Choice,
    ConfidenceLabel,
    MockBackend,
    MockModelSpec,
    ModelClient,
    compose,
    default_template,
    extract_choice,
    match_answer,
    normalize,
    parse_answers,
    probe,
)
from multiprobe.boundary import label_record, parse_for_multi
from multiprobe.data_model import Dataset, Setting

CHOICES_AD = tuple(Choice(letter=ch, text=t) for ch, t in zip("ABCD", ["London", "Paris", "Rome", "Oslo"]))


# ---------------------------------------------------------------------------
# parse_answers
# ---------------------------------------------------------------------------


def test_parse_colon_markers():
    parsed = parse_answers("1: Paris 2: 42 3: Blue", n=3)
    assert parsed.answers == ("Paris", "42", "Blue")
    assert parsed.parse_warnings == ()


def test_parse_missing_slots_warn():
    parsed = parse_answers("1: Paris", n=3)
    assert parsed.answers == ("Paris", "", "")
    assert len(parsed.parse_warnings) == 2


def test_parse_dot_marker_mc_reduces_to_letter():
    parsed = parse_answers(
        "1. The answer is (B) Paris",
        n=1,
        format=AnswerFormat.MC,
        choices_per_slot=[CHOICES_AD],
    )
    assert parsed.answers == ("B",)


def test_parse_multiline_generation():
    text = "1: first answer\n2: second answer\n3: third answer"
    assert parse_answers(text, n=3).answers == ("first answer", "second answer", "third answer")


def test_parse_decimal_not_mistaken_for_marker():
    parsed = parse_answers("1: the ratio is 3.14 exactly 2: done", n=2)
    assert parsed.answers == ("the ratio is 3.14 exactly", "done")


def test_parse_ignores_numbers_beyond_n():
    parsed = parse_answers("1: born in 1999 2: fine", n=2)
    assert parsed.answers == ("born in 1999", "fine")


def test_parse_unparseable_text_yields_empty_slots():
    parsed = parse_answers("no structure at all", n=2)
    assert parsed.answers == ("", "")
    assert len(parsed.parse_warnings) == 2


@settings(max_examples=200)
@given(st.text(max_size=300), st.integers(min_value=1, max_value=8))
def test_parse_length_contract_holds_for_any_input(text, n):
    parsed = parse_answers(text, n=n)
    assert len(parsed.answers) == n


# ---------------------------------------------------------------------------
# extract_choice
# ---------------------------------------------------------------------------


def test_extract_standalone_letter():
    assert extract_choice("B", CHOICES_AD) == "B"


def test_extract_choice_text_match():
    assert extract_choice("the capital is Paris", CHOICES_AD) == "B"


def test_extract_no_match_returns_none():
    assert extract_choice("neither of these", CHOICES_AD) is None


def test_extract_longest_text_wins():
    choices = (Choice("A", "York"), Choice("B", "New York"))
    assert extract_choice("I'd say New York", choices) == "B"


def test_extract_letter_case_insensitive():
    assert extract_choice("(b)", CHOICES_AD) == "B"


def test_extract_requires_choices():
    with pytest.raises(ValueError):
        extract_choice("B", ())


# ---------------------------------------------------------------------------
# match_answer
# ---------------------------------------------------------------------------


def test_match_exact():
    assert match_answer("Paris", ["Paris"])


def test_match_normalized_article_and_punctuation():
    assert match_answer("The Eiffel Tower.", ["Eiffel Tower"])


def test_match_token_boundary_rejects_partial_word():
    assert not match_answer("Parisian", ["Paris"])


def test_match_gold_phrase_inside_prediction():
    assert match_answer("I believe it is the Eiffel Tower in France", ["Eiffel Tower"])


def test_match_any_of_gold_variants():
    assert match_answer("Shakespeare", ["William Shakespeare", "Shakespeare"])


def test_match_numeric_uses_last_number():
    assert match_answer("6 times 7 makes 42", ["42"])
    assert not match_answer("42 items cost 100", ["42"])
    assert match_answer("so the total is 1,234", ["1234"])
    assert not match_answer("no digits here", ["42"])


def test_match_numeric_exact_decimal():
    assert match_answer("the result is 42.0", ["42"])
    assert not match_answer("the result is 42.5", ["42"])


def test_match_mc_by_letter():
    assert match_answer("B", ["B"], AnswerFormat.MC, CHOICES_AD)
    assert not match_answer("A", ["B"], AnswerFormat.MC, CHOICES_AD)


def test_match_mc_gold_text_maps_to_letter():
    assert match_answer("Paris", ["Paris"], AnswerFormat.MC, CHOICES_AD)


def test_match_empty_prediction_false():
    assert not match_answer("", ["Paris"])


def test_match_requires_gold():
    with pytest.raises(ValueError):
        match_answer("x", [])


@settings(max_examples=300)
@given(st.text(min_size=1, max_size=60))
def test_match_reflexive_under_normalization(gold):
    assert match_answer(gold, [gold])


# ---------------------------------------------------------------------------
# normalize
# ---------------------------------------------------------------------------


def test_normalize_rules():
    assert normalize("The  Quick,   브라운 Fox!") == "quick 브라운 fox"
    assert normalize("A cat") == "cat"
    assert normalize("an apple") == "apple"
    assert normalize("theater") == "theater"  # not a leading article


# ---------------------------------------------------------------------------
# probe
# ---------------------------------------------------------------------------


def _probe_with(accuracy: float, count: int = 9, seed: int = 0, prefix: str = "q"):
    ds = Dataset(
        name="synth",
        setting=Setting.INDEPENDENT,
        problems=tuple(qa_problem(i, prefix=prefix) for i in range(count)),
    )
    multis = compose(ds, n=3, seed=1)
    backend = MockBackend(MockModelSpec(accuracy=accuracy, seed=seed), list(ds.problems))
    return probe(multis, ModelClient(backend), default_template())


def test_probe_perfect_model_all_sure():
    records = _probe_with(1.0)
    assert all(label is ConfidenceLabel.SURE for r in records for label in r.labels)
    assert all(all(r.matches) for r in records)


def test_probe_zero_accuracy_all_unsure():
    records = _probe_with(0.0)
    assert all(label is ConfidenceLabel.UNSURE for r in records for label in r.labels)


def test_probe_half_accuracy_sure_fraction_within_binomial_bound():
    records = _probe_with(0.5, count=200, seed=2, prefix="p")
    labels = [label for r in records for label in r.labels]
    fraction = sum(label is ConfidenceLabel.SURE for label in labels) / len(labels)
    assert abs(fraction - 0.5) <= 0.1


def test_probe_label_soundness():
    for record in _probe_with(0.5, count=30, seed=5):
        for matched, label in zip(record.matches, record.labels):
            assert (label is ConfidenceLabel.SURE) == matched


def test_probe_mc_members():
    problems = tuple(mc_problem(i, gold_letter="ABCD"[i % 4]) for i in range(4))
    ds = Dataset(name="mc", setting=Setting.INDEPENDENT, problems=problems)
    multis = compose(ds, n=2, seed=0)
    backend = MockBackend(MockModelSpec(accuracy=1.0, seed=0), list(problems))
    records = probe(multis, ModelClient(backend), default_template())
    assert all(all(r.matches) for r in records)
    for r in records:
        for slot in r.parsed.answers:
            assert slot in "ABCD"


def test_probe_error_names_multi_index():
    from multiprobe import BackendError

    class Boom:
        backend_id = "boom"

        def generate(self, request):
            raise BackendError("nope")

    ds = qa_dataset(3)
    multis = compose(ds, n=3, seed=0)
    with pytest.raises(BackendError, match="index 0"):
        probe(multis, ModelClient(Boom()), default_template())


def test_parse_for_multi_mixed_formats():
    members = (qa_problem(0, gold=("Paris",)), mc_problem(1, gold_letter="B"))
    ds = Dataset(name="mix", setting=Setting.INDEPENDENT, problems=members)
    multis = compose(ds, n=2, seed=0)
    multi = multis[0]
    order = {p.id: k for k, p in enumerate(multi.members, start=1)}
    text_parts = []
    for p in multi.members:
        if p.format is AnswerFormat.MC:
            text_parts.append(f"{order[p.id]}: the answer is option-1-B")
        else:
            text_parts.append(f"{order[p.id]}: Paris")
    parsed = parse_for_multi(" ".join(sorted(text_parts)), multi)
    record = label_record(multi, parsed)
    assert all(record.matches)
