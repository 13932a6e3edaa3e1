"""Domain types and JSONL ingestion.

One normalized schema covers every source corpus; converters live outside
this package. A dataset line looks like:

    {"id": str, "question": str, "context": str|null, "gold": [str, ...],
     "format": "QA"|"MC", "choices": [{"letter": str, "text": str}]|null,
     "group_key": str|null}

Unknown keys are rejected unless loading leniently.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class DataError(Exception):
    """A dataset file or record violates the schema or an invariant."""


class AnswerFormat(str, Enum):
    QA = "QA"
    MC = "MC"


class Setting(str, Enum):
    INDEPENDENT = "Independent"
    SEQUENTIAL = "Sequential"


_SCHEMA_KEYS = ("id", "question", "context", "gold", "format", "choices", "group_key")
_REQUIRED_KEYS = ("id", "question", "gold", "format")
_LETTERS = string.ascii_uppercase


@dataclass(frozen=True)
class Choice:
    letter: str
    text: str


@dataclass(frozen=True)
class Problem:
    """A single question with its gold answer(s)."""

    id: str
    question: str
    gold: tuple[str, ...]
    format: AnswerFormat
    dataset: str
    context: str | None = None
    choices: tuple[Choice, ...] | None = None
    group_key: str | None = None


@dataclass(frozen=True)
class Dataset:
    name: str
    setting: Setting
    problems: tuple[Problem, ...]


def _parse_problem(obj: dict, dataset_name: str, line_no: int, lenient: bool) -> Problem:
    if not isinstance(obj, dict):
        raise DataError(f"line {line_no}: expected a JSON object")
    unknown = set(obj) - set(_SCHEMA_KEYS)
    if unknown and not lenient:
        raise DataError(f"line {line_no}: unknown keys {sorted(unknown)}")
    missing = [k for k in _REQUIRED_KEYS if k not in obj]
    if missing:
        raise DataError(f"line {line_no}: missing keys {missing}")

    if not isinstance(obj["id"], str) or not isinstance(obj["question"], str):
        raise DataError(f"line {line_no}: id and question must be strings")
    gold = obj["gold"]
    if not isinstance(gold, list) or not all(isinstance(g, str) for g in gold):
        raise DataError(f"line {line_no}: gold must be a list of strings")
    try:
        fmt = AnswerFormat(obj["format"])
    except ValueError:
        raise DataError(f"line {line_no}: format must be 'QA' or 'MC'") from None

    choices_raw = obj.get("choices")
    choices: tuple[Choice, ...] | None = None
    if choices_raw is not None:
        if not isinstance(choices_raw, list):
            raise DataError(f"line {line_no}: choices must be a list")
        parsed = []
        for c in choices_raw:
            if not isinstance(c, dict) or "letter" not in c or "text" not in c:
                raise DataError(f"line {line_no}: each choice needs 'letter' and 'text'")
            parsed.append(Choice(letter=str(c["letter"]), text=str(c["text"])))
        choices = tuple(parsed)

    context = obj.get("context")
    group_key = obj.get("group_key")
    if context is not None and not isinstance(context, str):
        raise DataError(f"line {line_no}: context must be a string or null")
    if group_key is not None and not isinstance(group_key, str):
        raise DataError(f"line {line_no}: group_key must be a string or null")

    return Problem(
        id=obj["id"],
        question=obj["question"],
        gold=tuple(gold),
        format=fmt,
        dataset=dataset_name,
        context=context,
        choices=choices,
        group_key=group_key,
    )


def load_dataset(
    path: str | Path,
    setting: Setting | str,
    name: str | None = None,
    lenient: bool = False,
) -> Dataset:
    """Read a JSONL dataset, enforcing every type invariant.

    Raises DataError naming the offending line or problem; never repairs
    (silent reordering would corrupt sequential semantics).
    """
    path = Path(path)
    setting = Setting(setting)
    dataset_name = name if name is not None else path.stem
    problems: list[Problem] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            problems.append(_parse_problem(obj, dataset_name, line_no, lenient))

    dataset = Dataset(name=dataset_name, setting=setting, problems=tuple(problems))
    violations = validate(dataset)
    if violations:
        raise DataError("; ".join(violations))
    return dataset


def validate(dataset: Dataset) -> list[str]:
    """Check every invariant, returning human-readable violations.

    Violations are data, not errors: an empty list means the dataset is valid.
    """
    violations: list[str] = []
    seen_ids: set[str] = set()
    for p in dataset.problems:
        if p.id in seen_ids:
            violations.append(f"{p.id}: duplicate id")
        seen_ids.add(p.id)
        if not p.gold:
            violations.append(f"{p.id}: gold is empty")
        elif any(not g.strip() for g in p.gold):
            violations.append(f"{p.id}: gold contains a blank entry")
        if p.format is AnswerFormat.MC:
            violations.extend(_check_mc(p))
        elif p.choices is not None:
            violations.append(f"{p.id}: QA problem must not carry choices")
        if dataset.setting is Setting.SEQUENTIAL and p.group_key is None:
            violations.append(f"{p.id}: sequential problem missing group_key")

    if dataset.setting is Setting.SEQUENTIAL:
        violations.extend(_check_contiguity(dataset.problems))
    return violations


def _check_mc(p: Problem) -> list[str]:
    if p.choices is None:
        return [f"{p.id}: MC problem has no choices"]
    out = []
    if not 2 <= len(p.choices) <= 26:
        out.append(f"{p.id}: MC needs 2-26 choices, got {len(p.choices)}")
    letters = [c.letter for c in p.choices]
    if len(set(letters)) != len(letters):
        out.append(f"{p.id}: duplicate choice letters")
    if p.gold and not any(_gold_hits_choice(g, p.choices) for g in p.gold):
        out.append(f"{p.id}: no gold entry matches a choice letter or text")
    return out


def _gold_hits_choice(gold: str, choices: tuple[Choice, ...]) -> bool:
    g = gold.strip()
    for c in choices:
        if g.upper() == c.letter.upper() or g.lower() == c.text.strip().lower():
            return True
    return False


def _check_contiguity(problems: tuple[Problem, ...]) -> list[str]:
    # A group_key reappearing after a different key means interleaving.
    out = []
    closed: set[str] = set()
    current: str | None = None
    for p in problems:
        if p.group_key is None:
            continue
        if p.group_key != current:
            if p.group_key in closed:
                out.append(f"{p.id}: group_key {p.group_key!r} is not contiguous")
            if current is not None:
                closed.add(current)
            current = p.group_key
    return out


def problem_to_dict(p: Problem) -> dict:
    """Schema-ordered dict for one problem (byte-stable serialization)."""
    return {
        "id": p.id,
        "question": p.question,
        "context": p.context,
        "gold": list(p.gold),
        "format": p.format.value,
        "choices": [{"letter": c.letter, "text": c.text} for c in p.choices]
        if p.choices is not None
        else None,
        "group_key": p.group_key,
    }


def problem_from_dict(
    obj: dict, dataset_name: str, lenient: bool = False, line_no: int = 0
) -> Problem:
    return _parse_problem(obj, dataset_name, line_no=line_no, lenient=lenient)


def serialize(dataset: Dataset, path: str | Path) -> int:
    """Write the dataset back to JSONL; inverse of load_dataset."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in dataset.problems:
            fh.write(json.dumps(problem_to_dict(p), ensure_ascii=False) + "\n")
    return len(dataset.problems)
