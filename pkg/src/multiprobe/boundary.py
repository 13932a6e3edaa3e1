"""Knowledge-boundary probing: parse multi-answer generations, match them
against gold, and assign sure/unsure labels.

Matching here is deliberately the same function evaluation uses, so training
labels and test scoring share one definition of "correct".
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Sequence

from ._phrases import SURE_PHRASE, UNSURE_PHRASE
from .composer import MultiProblem, PromptTemplate, render_prompt
from .data_model import AnswerFormat, Choice
from .model_client import BackendError, CompletionRequest, ModelClient


class ConfidenceLabel(Enum):
    SURE = SURE_PHRASE
    UNSURE = UNSURE_PHRASE

    @property
    def rendered(self) -> str:
        return self.value

    @classmethod
    def from_match(cls, matched: bool) -> "ConfidenceLabel":
        return cls.SURE if matched else cls.UNSURE


@dataclass(frozen=True)
class ParsedAnswers:
    answers: tuple[str, ...]
    parse_warnings: tuple[str, ...]


@dataclass(frozen=True)
class BoundaryRecord:
    multi: MultiProblem
    parsed: ParsedAnswers
    matches: tuple[bool, ...]
    labels: tuple[ConfidenceLabel, ...]


# ---------------------------------------------------------------------------
# Answer extraction
# ---------------------------------------------------------------------------

# "3:" or "3: " or "3. " — the dot form requires trailing whitespace so that
# decimals like 3.14 inside an answer are never read as markers.
_MARKER_RE = re.compile(r"(?:^|(?<=\s))(\d{1,3})(?::[ \t]*|\.\s+)", re.MULTILINE)
_UPPER_LETTER_RE = re.compile(r"(?<![A-Za-z])([A-Z])(?![A-Za-z])")
_WRAPPED_LETTER_RE = re.compile(r"[(\[]([A-Za-z])[)\]]|(?<![A-Za-z])([A-Za-z])\)")


def parse_answers(
    generation: str,
    n: int,
    format: AnswerFormat = AnswerFormat.QA,
    choices_per_slot: Sequence[tuple[Choice, ...] | None] | None = None,
) -> ParsedAnswers:
    """Extract the answer following each numbered marker ``k:`` / ``k.``.

    Always returns exactly n slots; a slot with no marker is an empty string
    plus a warning. Pure function of its inputs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    markers = [(int(m.group(1)), m.start(), m.end()) for m in _MARKER_RE.finditer(generation)]
    usable = [(num, start, end) for num, start, end in markers if 1 <= num <= n]

    answers: list[str] = []
    warnings: list[str] = []
    cursor = 0
    for k in range(1, n + 1):
        hit = next((m for m in usable if m[0] == k and m[1] >= cursor), None)
        if hit is None:
            answers.append("")
            warnings.append(f"slot {k}: no numbered marker found")
            continue
        _, _, content_start = hit
        following = [m for m in usable if m[1] >= content_start]
        content_end = following[0][1] if following else len(generation)
        slot = generation[content_start:content_end].strip()
        cursor = content_start
        if format is AnswerFormat.MC:
            choices = None
            if choices_per_slot is not None and k - 1 < len(choices_per_slot):
                choices = choices_per_slot[k - 1]
            letter = extract_choice(slot, choices) if choices else _standalone_letter(slot)
            if letter is None:
                warnings.append(f"slot {k}: no choice letter or option text found")
                slot = ""
            else:
                slot = letter
        answers.append(slot)
    return ParsedAnswers(answers=tuple(answers), parse_warnings=tuple(warnings))


def _standalone_letter(text: str, allowed: str | None = None) -> str | None:
    """A letter token: the whole slot, a wrapped form like "(b)", or a bare
    capital. Bare lowercase is never a letter ("a red apple" is not choice A)."""

    def permitted(letter: str) -> str | None:
        upper = letter.upper()
        return upper if allowed is None or upper in allowed else None

    stripped = text.strip()
    if len(stripped) == 1 and stripped.isalpha():
        return permitted(stripped)
    for m in _WRAPPED_LETTER_RE.finditer(text):
        hit = permitted(m.group(1) or m.group(2))
        if hit is not None:
            return hit
    for m in _UPPER_LETTER_RE.finditer(text):
        hit = permitted(m.group(1))
        if hit is not None:
            return hit
    return None


def extract_choice(slot_text: str, choices: Sequence[Choice]) -> str | None:
    """Resolve a generation slot to a choice letter.

    A standalone letter token wins; otherwise the choice whose text appears
    in the slot (case-insensitive, longest text wins); otherwise None.
    """
    if not choices:
        raise ValueError("choices must be non-empty")
    allowed = "".join(c.letter.upper() for c in choices)
    letter = _standalone_letter(slot_text, allowed=allowed)
    if letter is not None:
        for c in choices:
            if c.letter.upper() == letter:
                return c.letter
    lowered = slot_text.lower()
    best: Choice | None = None
    for c in sorted(choices, key=lambda c: len(c.text), reverse=True):
        if c.text and c.text.lower() in lowered:
            best = c
            break
    return best.letter if best is not None else None


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

_PUNCT_TABLE = str.maketrans({p: " " for p in string.punctuation})
_ARTICLES = {"a", "an", "the"}

# Plain decimal literals only: exponents, infinities, and NaN take the text path.
_PLAIN_NUMBER_RE = re.compile(r"-?(?:\d[\d,]*(?:\.\d+)?|\.\d+)")


def normalize(text: str) -> str:
    """Lowercase, punctuation to spaces, collapse whitespace, drop a leading article."""
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    if tokens and tokens[0] in _ARTICLES:
        tokens = tokens[1:]
    return " ".join(tokens)


def _as_number(text: str) -> Decimal | None:
    if _PLAIN_NUMBER_RE.fullmatch(text.strip()) is None:
        return None
    try:
        return Decimal(text.strip().replace(",", ""))
    except (InvalidOperation, ValueError):
        return None


def _last_number(text: str) -> Decimal | None:
    hits = _PLAIN_NUMBER_RE.findall(text)
    for raw in reversed(hits):
        value = _as_number(raw)
        if value is not None:
            return value
    return None


def match_answer(
    predicted: str,
    gold: Sequence[str],
    format: AnswerFormat = AnswerFormat.QA,
    choices: Sequence[Choice] | None = None,
) -> bool:
    """Decide whether a predicted slot counts as correct.

    QA: normalized equality with any gold, or a gold occurring as a
    token-bounded phrase inside the prediction ("Paris" never matches
    "Parisian"). All-numeric golds compare against the last number in the
    slot as exact decimals, since chain-of-thought text precedes the final
    answer. MC: the extracted letter must equal the gold letter.
    """
    if not gold:
        raise ValueError("gold must be non-empty")

    if format is AnswerFormat.MC:
        predicted_letter = (
            extract_choice(predicted, choices) if choices else _standalone_letter(predicted)
        )
        if predicted_letter is None:
            return False
        gold_letters = _gold_letters(gold, choices)
        return predicted_letter.upper() in gold_letters

    numeric_golds = [_as_number(g) for g in gold]
    if all(v is not None for v in numeric_golds):
        predicted_value = _last_number(predicted)
        return predicted_value is not None and any(
            predicted_value == v for v in numeric_golds
        )

    predicted_norm = normalize(predicted)
    predicted_tokens = predicted_norm.split()
    for g in gold:
        g_norm = normalize(g)
        if predicted_norm == g_norm:
            return True
        g_tokens = g_norm.split()
        if g_tokens and _contains_phrase(predicted_tokens, g_tokens):
            return True
    return False


def _gold_letters(gold: Sequence[str], choices: Sequence[Choice] | None) -> set[str]:
    letters: set[str] = set()
    for g in gold:
        stripped = g.strip()
        if len(stripped) == 1 and stripped.isalpha():
            letters.add(stripped.upper())
        if choices:
            for c in choices:
                if stripped.lower() == c.text.strip().lower():
                    letters.add(c.letter.upper())
    return letters


def _contains_phrase(tokens: list[str], phrase: list[str]) -> bool:
    span = len(phrase)
    return any(tokens[i : i + span] == phrase for i in range(len(tokens) - span + 1))


# ---------------------------------------------------------------------------
# Probing
# ---------------------------------------------------------------------------


def parse_for_multi(generation: str, multi: MultiProblem) -> ParsedAnswers:
    """Parse a generation, reducing each slot per its own member's format."""
    raw = parse_answers(generation, multi.n, AnswerFormat.QA)
    answers = list(raw.answers)
    warnings = list(raw.parse_warnings)
    for i, member in enumerate(multi.members):
        if member.format is not AnswerFormat.MC or not member.choices:
            continue
        letter = extract_choice(answers[i], member.choices) if answers[i] else None
        if letter is None:
            if answers[i]:
                warnings.append(f"slot {i + 1}: no choice letter or option text found")
            answers[i] = ""
        else:
            answers[i] = letter
    return ParsedAnswers(answers=tuple(answers), parse_warnings=tuple(warnings))


def label_record(multi: MultiProblem, parsed: ParsedAnswers) -> BoundaryRecord:
    """Match each parsed slot against its member's gold and label it."""
    matches = tuple(
        match_answer(parsed.answers[i], member.gold, member.format, member.choices)
        for i, member in enumerate(multi.members)
    )
    labels = tuple(ConfidenceLabel.from_match(m) for m in matches)
    return BoundaryRecord(multi=multi, parsed=parsed, matches=matches, labels=labels)


def probe(
    multis: Sequence[MultiProblem],
    client: ModelClient,
    template: PromptTemplate,
    parallelism: int = 4,
    max_tokens: int = 512,
) -> list[BoundaryRecord]:
    """Generate answers for every MultiProblem and label the knowledge boundary."""
    requests = [
        CompletionRequest(prompt=render_prompt(m, template), max_tokens=max_tokens)
        for m in multis
    ]
    responses = client.complete_batch(requests, parallelism=parallelism)
    records: list[BoundaryRecord] = []
    for i, (multi, response) in enumerate(zip(multis, responses)):
        if isinstance(response, Exception):
            raise BackendError(f"probe failed at MultiProblem index {i}: {response}") from response
        records.append(label_record(multi, parse_for_multi(response.text, multi)))
    return records
