"""Standalone training command: the answer/confidence pipeline never links
against this package; it only hands over JSONL files."""

from __future__ import annotations

import argparse
import sys

from .data import SchemaError
from .training import StageOrderError, TrainSpec, train_stage2_only, train_two_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steptuner", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run both fine-tuning stages in sequence")
    _common_args(p)

    p = sub.add_parser("stage2", help="run only stage 2 from a stage-1 checkpoint")
    _common_args(p)
    p.add_argument("--init-checkpoint", help="stage-1 adapter checkpoint (required)")
    return parser


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base-model", default="tiny-llama-64")
    p.add_argument("--stage1", required=True, help="stage-1 (answers) JSONL")
    p.add_argument("--stage2", required=True, help="stage-2 (confidence) JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--lora-rank", type=int, default=8)
    p.add_argument("--lora-alpha", type=float, default=32.0)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--merge-between-stages", action="store_true")


def _spec(args: argparse.Namespace) -> TrainSpec:
    return TrainSpec(
        base_model=args.base_model,
        stage1_path=args.stage1,
        stage2_path=args.stage2,
        stage1_output_dir=f"{args.out_dir}/stage1",
        stage2_output_dir=f"{args.out_dir}/stage2",
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        lora_rank=args.lora_rank,
        lora_alpha=args.lora_alpha,
        batch_size=args.batch_size,
        seed=args.seed,
        merge_between_stages=args.merge_between_stages,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            stage1, stage2 = train_two_stage(_spec(args))
            for result in (stage1, stage2):
                print(
                    f"{result.checkpoint_path}: loss {result.initial_loss:.4f} -> "
                    f"{result.final_loss:.4f}"
                )
        else:
            result = train_stage2_only(_spec(args), args.init_checkpoint)
            print(
                f"{result.checkpoint_path}: loss {result.initial_loss:.4f} -> "
                f"{result.final_loss:.4f}"
            )
        return 0
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (SchemaError, StageOrderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
