"""Load and guard the emitted tuning JSONL before any training step.

The wire schema is one object per line: {"input": str, "output": str,
"source_ids": [str, ...]}. The two stages share that schema, so stage kind
is recognized from the output shape: a stage-2 (confidence) output consists
solely of numbered "I am sure" / "I am unsure" phrases.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

_CONFIDENCE_OUTPUT_RE = re.compile(
    r"\s*\d+: I am (?:un)?sure(?:\s+\d+: I am (?:un)?sure)*\s*"
)


class SchemaError(Exception):
    """A stage file violates the wire schema or carries the wrong kind."""


@dataclass(frozen=True)
class TuningExample:
    input: str
    output: str
    source_ids: tuple[str, ...]


def load_stage_file(path: str | Path) -> list[TuningExample]:
    examples = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or set(obj) != {"input", "output", "source_ids"}:
                raise SchemaError(
                    f"{path}: line {line_no}: expected keys input/output/source_ids"
                )
            if not isinstance(obj["input"], str) or not isinstance(obj["output"], str):
                raise SchemaError(f"{path}: line {line_no}: input and output must be strings")
            if not isinstance(obj["source_ids"], list):
                raise SchemaError(f"{path}: line {line_no}: source_ids must be a list")
            examples.append(
                TuningExample(
                    input=obj["input"],
                    output=obj["output"],
                    source_ids=tuple(str(s) for s in obj["source_ids"]),
                )
            )
    if not examples:
        raise SchemaError(f"{path}: no records")
    return examples


def detect_kind(example: TuningExample) -> str:
    """"qa-conf" when the output is purely numbered confidence phrases."""
    if _CONFIDENCE_OUTPUT_RE.fullmatch(example.output):
        return "qa-conf"
    return "qa"


def check_stage_kind(examples: list[TuningExample], expected: str, path: str | Path) -> None:
    for i, example in enumerate(examples):
        kind = detect_kind(example)
        if kind != expected:
            raise SchemaError(
                f"{path}: record {i} looks like {kind!r} data, expected {expected!r}"
            )
