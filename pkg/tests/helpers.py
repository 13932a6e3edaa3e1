"""Shared builders for synthetic datasets and problems."""

from __future__ import annotations

import json
from pathlib import Path

from multiprobe import AnswerFormat, Choice, Dataset, Problem, Setting


def qa_problem(
    i: int,
    dataset: str = "synth",
    question: str | None = None,
    gold: tuple[str, ...] | None = None,
    context: str | None = None,
    group_key: str | None = None,
    prefix: str = "q",
) -> Problem:
    return Problem(
        id=f"{prefix}{i:03d}",
        question=question if question is not None else f"What is the codeword for item {i}?",
        gold=gold if gold is not None else (f"codeword-{i}",),
        format=AnswerFormat.QA,
        dataset=dataset,
        context=context,
        group_key=group_key,
    )


def mc_problem(i: int, gold_letter: str = "B", dataset: str = "synth") -> Problem:
    choices = tuple(Choice(letter=ch, text=f"option-{i}-{ch}") for ch in "ABCD")
    return Problem(
        id=f"m{i:03d}",
        question=f"Which option is marked for item {i}?",
        gold=(gold_letter,),
        format=AnswerFormat.MC,
        dataset=dataset,
        choices=choices,
    )


def qa_dataset(count: int, name: str = "synth") -> Dataset:
    return Dataset(
        name=name,
        setting=Setting.INDEPENDENT,
        problems=tuple(qa_problem(i, dataset=name) for i in range(count)),
    )


def seq_dataset(group_sizes: list[int], name: str = "seq") -> Dataset:
    problems = []
    i = 0
    for g, size in enumerate(group_sizes):
        for _ in range(size):
            problems.append(
                qa_problem(
                    i,
                    dataset=name,
                    context=f"story for group {g}",
                    group_key=f"g{g:02d}",
                )
            )
            i += 1
    return Dataset(name=name, setting=Setting.SEQUENTIAL, problems=tuple(problems))


def problem_line(i: int, **overrides) -> dict:
    obj = {
        "id": f"q{i:03d}",
        "question": f"What is the codeword for item {i}?",
        "context": None,
        "gold": [f"codeword-{i}"],
        "format": "QA",
        "choices": None,
        "group_key": None,
    }
    obj.update(overrides)
    return obj


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def write_qa_file(path: Path, count: int) -> Path:
    return write_jsonl(path, [problem_line(i) for i in range(count)])
