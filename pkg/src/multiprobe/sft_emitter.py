"""Build the two stepwise tuning datasets and emit them as training JSONL.

Stage 1 pairs multi-question prompts with numbered gold answers; stage 2
pairs question-answer blocks with numbered confidence phrases. Both stages
are built from the same composition so the questions coincide across stages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ._phrases import CERTAINTY_QUESTION
from .boundary import BoundaryRecord
from .composer import MultiProblem, PromptTemplate, render_prompt
from .data_model import DataError


class RecordKind(str, Enum):
    MULTQA = "MultQA"
    MULTQAC = "MultQAC"


class QASource(str, Enum):
    MODEL_ANSWERS = "ModelAnswers"
    GOLD_ANSWERS = "GoldAnswers"


@dataclass(frozen=True)
class TuningRecord:
    input: str
    output: str
    kind: RecordKind
    source_ids: tuple[str, ...]


def build_multqa(multi: MultiProblem, template: PromptTemplate) -> TuningRecord:
    """Stage-1 record: rendered prompt in, numbered first-gold answers out."""
    output = "\n".join(
        f"{k}: {member.gold[0]}" for k, member in enumerate(multi.members, start=1)
    )
    return TuningRecord(
        input=render_prompt(multi, template),
        output=output,
        kind=RecordKind.MULTQA,
        source_ids=tuple(m.id for m in multi.members),
    )


def build_multqa_conf(
    record: BoundaryRecord, qa_source: QASource = QASource.MODEL_ANSWERS
) -> TuningRecord:
    """Stage-2 record: question-answer blocks plus the certainty question in,
    numbered confidence phrases out.

    The answer shown is the model's own probed answer by default; confidence
    about its own output is what the second tuning stage conditions on.
    """
    multi = record.multi
    if len(record.labels) != len(multi.members):
        raise DataError(
            f"{multi.multi_id}: {len(record.labels)} labels for {len(multi.members)} members"
        )
    blocks = []
    for i, member in enumerate(multi.members):
        answer = (
            record.parsed.answers[i]
            if qa_source is QASource.MODEL_ANSWERS
            else member.gold[0]
        )
        blocks.append(f"Question: {member.question}. Answer: {answer}.")
    input_text = " ".join(blocks) + " " + CERTAINTY_QUESTION
    output = " ".join(
        f"{k}: {label.rendered}" for k, label in enumerate(record.labels, start=1)
    )
    return TuningRecord(
        input=input_text,
        output=output,
        kind=RecordKind.MULTQAC,
        source_ids=tuple(m.id for m in multi.members),
    )


def emit(records: list[TuningRecord], stage: RecordKind, path: str | Path) -> int:
    """Write one stage's records as JSONL; refuses mixed kinds."""
    for r in records:
        if r.kind is not stage:
            raise DataError(f"record of kind {r.kind.value} in a {stage.value} emission")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            obj = {"input": r.input, "output": r.output, "source_ids": list(r.source_ids)}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return len(records)


def load_tuning_records(path: str | Path, kind: RecordKind) -> list[TuningRecord]:
    """Inverse of emit for one stage file."""
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            try:
                records.append(
                    TuningRecord(
                        input=obj["input"],
                        output=obj["output"],
                        kind=kind,
                        source_ids=tuple(obj["source_ids"]),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise DataError(f"line {line_no}: bad tuning record ({exc})") from exc
    return records
