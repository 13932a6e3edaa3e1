"""Two sequential supervised fine-tunes over the emitted stage files.

Stage 1 maximizes answer likelihood on the multi-question data starting from
the base model; stage 2 maximizes confidence likelihood starting from the
stage-1 checkpoint, never from base. Loss is computed on output tokens only;
prompt tokens carry the ignore label.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.optim import AdamW

from .data import TuningExample, check_stage_kind, load_stage_file
from .modeling import (
    apply_lora,
    build_base_model,
    load_checkpoint,
    load_lora_state,
    lora_parameters,
    merge_lora,
    save_checkpoint,
)
from .tokenizer import ByteTokenizer

IGNORE_INDEX = -100
PROMPT_SEPARATOR = "\n"


class StageOrderError(Exception):
    """Stage 2 was pointed at something other than a stage-1 checkpoint."""


@dataclass
class TrainSpec:
    base_model: str
    stage1_path: str
    stage2_path: str
    stage1_output_dir: str
    stage2_output_dir: str
    epochs: int = 3
    learning_rate: float = 1e-5
    lora_rank: int = 8
    lora_alpha: float = 32.0
    batch_size: int = 1
    seed: int = 0
    max_length: int = 1024
    merge_between_stages: bool = False

    def hyperparameters(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "batch_size": self.batch_size,
        }


@dataclass
class StageResult:
    checkpoint_path: str
    manifest_path: str
    initial_loss: float
    final_loss: float
    epoch_losses: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Batching with output-only loss masking
# ---------------------------------------------------------------------------


def encode_example(
    tokenizer: ByteTokenizer, example: TuningExample, max_length: int
) -> tuple[list[int], list[int]]:
    """Returns (input_ids, labels); prompt positions are IGNORE_INDEX."""
    prompt_ids = [tokenizer.BOS] + tokenizer.encode(example.input + PROMPT_SEPARATOR)
    output_ids = tokenizer.encode(example.output) + [tokenizer.EOS]
    input_ids = (prompt_ids + output_ids)[:max_length]
    labels = ([IGNORE_INDEX] * len(prompt_ids) + output_ids)[:max_length]
    return input_ids, labels


def collate(
    batch: list[tuple[list[int], list[int]]], pad_id: int
) -> dict[str, torch.Tensor]:
    width = max(len(ids) for ids, _ in batch)
    input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    attention_mask = torch.zeros((len(batch), width), dtype=torch.long)
    for row, (ids, lab) in enumerate(batch):
        input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        labels[row, : len(lab)] = torch.tensor(lab, dtype=torch.long)
        attention_mask[row, : len(ids)] = 1
    return {"input_ids": input_ids, "labels": labels, "attention_mask": attention_mask}


def _batches(encoded, batch_size: int, rng: random.Random | None):
    order = list(range(len(encoded)))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [encoded[i] for i in order[start : start + batch_size]]


def dataset_loss(model, encoded, batch_size: int) -> float:
    """Mean loss over the full set without gradient updates."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in _batches(encoded, batch_size, rng=None):
            out = model(**collate(batch, pad_id=ByteTokenizer.PAD))
            total += float(out.loss) * len(batch)
            count += len(batch)
    return total / count


def train_stage(
    model,
    examples: list[TuningExample],
    spec: TrainSpec,
    stage_name: str,
) -> tuple[float, float, list[float]]:
    """Optimize adapter parameters; returns (initial, final, per-epoch) losses."""
    tokenizer = ByteTokenizer()
    encoded = [encode_example(tokenizer, e, spec.max_length) for e in examples]
    initial = dataset_loss(model, encoded, spec.batch_size)

    optimizer = AdamW(lora_parameters(model), lr=spec.learning_rate)
    rng = random.Random(spec.seed)
    epoch_losses = []
    model.train()
    for _ in range(spec.epochs):
        total, count = 0.0, 0
        for batch in _batches(encoded, spec.batch_size, rng):
            optimizer.zero_grad()
            out = model(**collate(batch, pad_id=ByteTokenizer.PAD))
            out.loss.backward()
            optimizer.step()
            total += float(out.loss.detach()) * len(batch)
            count += len(batch)
        epoch_losses.append(total / count)

    final = dataset_loss(model, encoded, spec.batch_size)
    return initial, final, epoch_losses


# ---------------------------------------------------------------------------
# Stage orchestration
# ---------------------------------------------------------------------------


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_stage(
    model,
    examples,
    spec: TrainSpec,
    stage_name: str,
    output_dir: str,
    data_path: str,
    initialization: dict,
) -> StageResult:
    started = time.monotonic()
    initial, final, epoch_losses = train_stage(model, examples, spec, stage_name)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / "adapter.pt"
    meta = {"stage": stage_name, "base_model": spec.base_model}
    save_checkpoint(model, checkpoint_path, meta)
    manifest_path = out / "manifest.json"
    _write_manifest(
        manifest_path,
        {
            "stage": stage_name,
            "base_model": spec.base_model,
            "hyperparameters": spec.hyperparameters(),
            "data_sha256": _sha256_file(data_path),
            "initialization": initialization,
            "checkpoint_sha256": _sha256_file(checkpoint_path),
            "losses": {"initial": initial, "final": final, "per_epoch": epoch_losses},
            "wall_seconds": round(time.monotonic() - started, 3),
        },
    )
    return StageResult(
        checkpoint_path=str(checkpoint_path),
        manifest_path=str(manifest_path),
        initial_loss=initial,
        final_loss=final,
        epoch_losses=epoch_losses,
    )


def load_stage_inputs(spec: TrainSpec) -> tuple[list[TuningExample], list[TuningExample]]:
    """Schema and kind guards run here, before any model is built."""
    stage1 = load_stage_file(spec.stage1_path)
    stage2 = load_stage_file(spec.stage2_path)
    check_stage_kind(stage1, "qa", spec.stage1_path)
    check_stage_kind(stage2, "qa-conf", spec.stage2_path)
    return stage1, stage2


def verify_stage1_checkpoint(path: str | Path) -> str:
    """Confirm a checkpoint came from stage 1; returns its content hash."""
    manifest_path = Path(path).parent / "manifest.json"
    if not manifest_path.exists():
        raise StageOrderError(f"{path}: no manifest next to checkpoint")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("stage") != "stage1":
        raise StageOrderError(
            f"{path}: manifest says stage {manifest.get('stage')!r}, stage 2 must "
            "initialize from a stage-1 checkpoint, never from base"
        )
    return _sha256_file(path)


def train_two_stage(spec: TrainSpec) -> tuple[StageResult, StageResult]:
    """Run both fine-tunes in order and chain the checkpoints."""
    stage1_examples, stage2_examples = load_stage_inputs(spec)

    model = build_base_model(spec.base_model, seed=spec.seed)
    apply_lora(model, spec.lora_rank, spec.lora_alpha)
    stage1 = _run_stage(
        model,
        stage1_examples,
        spec,
        "stage1",
        spec.stage1_output_dir,
        spec.stage1_path,
        initialization={"from": "base"},
    )

    stage1_hash = verify_stage1_checkpoint(stage1.checkpoint_path)
    # Rebuild from base and load the stage-1 adapter so stage 2 provably
    # starts from the persisted checkpoint, not whatever is in memory.
    model = build_base_model(spec.base_model, seed=spec.seed)
    apply_lora(model, spec.lora_rank, spec.lora_alpha)
    _, adapter = load_checkpoint(stage1.checkpoint_path)
    load_lora_state(model, adapter)
    if spec.merge_between_stages:
        merge_lora(model)
        apply_lora(model, spec.lora_rank, spec.lora_alpha)

    stage2 = _run_stage(
        model,
        stage2_examples,
        spec,
        "stage2",
        spec.stage2_output_dir,
        spec.stage2_path,
        initialization={"from": "stage1", "stage1_checkpoint_sha256": stage1_hash},
    )
    return stage1, stage2


def train_stage2_only(spec: TrainSpec, init_checkpoint: str | None) -> StageResult:
    """Guarded stage-2 entry point: an initialization checkpoint is mandatory."""
    if init_checkpoint is None:
        raise StageOrderError(
            "stage 2 requires --init-checkpoint pointing at a stage-1 checkpoint; "
            "initializing from base is forbidden"
        )
    stage2_examples = load_stage_file(spec.stage2_path)
    check_stage_kind(stage2_examples, "qa-conf", spec.stage2_path)
    stage1_hash = verify_stage1_checkpoint(init_checkpoint)

    model = build_base_model(spec.base_model, seed=spec.seed)
    apply_lora(model, spec.lora_rank, spec.lora_alpha)
    _, adapter = load_checkpoint(init_checkpoint)
    load_lora_state(model, adapter)
    if spec.merge_between_stages:
        merge_lora(model)
        apply_lora(model, spec.lora_rank, spec.lora_alpha)
    return _run_stage(
        model,
        stage2_examples,
        spec,
        "stage2",
        spec.stage2_output_dir,
        spec.stage2_path,
        initialization={"from": "stage1", "stage1_checkpoint_sha256": stage1_hash},
    )
