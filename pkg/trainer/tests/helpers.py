"""Fixture builders matching the emitted JSONL wire schema."""

from __future__ import annotations

import json
from pathlib import Path


def answer_record(i: int) -> dict:
    return {
        "input": (
            f"1: What is the codeword for item {i}?\n"
            f"2: What is the codeword for item {i + 100}?"
        ),
        "output": f"1: codeword-{i}\n2: codeword-{i + 100}",
        "source_ids": [f"q{i:03d}", f"q{i + 100:03d}"],
    }


def confidence_record(i: int) -> dict:
    phrases = ["I am sure", "I am unsure"]
    return {
        "input": (
            f"Question: What is the codeword for item {i}?. Answer: codeword-{i}. "
            f"Question: What is the codeword for item {i + 100}?. Answer: wrong. "
            "Are you sure you accurately answered the question based on your "
            "internal knowledge?"
        ),
        "output": f"1: {phrases[i % 2]} 2: {phrases[(i + 1) % 2]}",
        "source_ids": [f"q{i:03d}", f"q{i + 100:03d}"],
    }


def write_stage_files(directory: Path, count: int = 20) -> tuple[Path, Path]:
    stage1 = directory / "multqa.jsonl"
    stage2 = directory / "multqa_conf.jsonl"
    with stage1.open("w", encoding="utf-8") as fh:
        for i in range(count):
            fh.write(json.dumps(answer_record(i)) + "\n")
    with stage2.open("w", encoding="utf-8") as fh:
        for i in range(count):
            fh.write(json.dumps(confidence_record(i)) + "\n")
    return stage1, stage2
