"""Compose multi-problem instances and render their prompts.

Independent datasets are shuffled with a seeded PRNG and chunked; sequential
datasets are chunked group by group in original order so that logically
chained questions never mix.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .data_model import AnswerFormat, Dataset, Problem, Setting

_QUESTIONS_SLOT = "{questions}"
_CONTEXT_SLOT = "{context}"
_EXEMPLAR_SLOT = "{exemplar}"


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt layout: exemplar (if any), header, context block, numbered items, directive."""

    header: str
    item_format: str = "{index}: {question}"
    answer_directive: str = "Answer every question, one line per question, numbering each answer to match its question."
    exemplar: str | None = None

    def __post_init__(self) -> None:
        if "{index}" not in self.item_format or "{question}" not in self.item_format:
            raise ValueError("item_format needs {index} and {question} placeholders")


def load_template(path: str | Path, exemplar: str | None = None) -> PromptTemplate:
    """Parse a plain-text template file.

    The file is the full prompt layout containing a ``{questions}`` placeholder
    and optionally ``{context}`` / ``{exemplar}`` markers. Text before
    ``{questions}`` becomes the header, text after it the answer directive.
    """
    text = Path(path).read_text(encoding="utf-8")
    return template_from_text(text, exemplar=exemplar)


def template_from_text(text: str, exemplar: str | None = None) -> PromptTemplate:
    if _QUESTIONS_SLOT not in text:
        raise ValueError("template file must contain a {questions} placeholder")
    before, after = text.split(_QUESTIONS_SLOT, 1)
    for slot in (_CONTEXT_SLOT, _EXEMPLAR_SLOT):
        before = before.replace(slot, "")
        after = after.replace(slot, "")
    return PromptTemplate(
        header=before.strip(),
        answer_directive=after.strip(),
        exemplar=exemplar,
    )


def default_template(exemplar: str | None = None) -> PromptTemplate:
    """The wording fixed in the repo golden file (templates/default.txt)."""
    text = resources.files("multiprobe").joinpath("templates/default.txt").read_text("utf-8")
    return template_from_text(text, exemplar=exemplar)


@dataclass(frozen=True)
class MultiProblem:
    multi_id: str
    members: tuple[Problem, ...]
    n: int
    setting: Setting
    shared_context: str | None
    prompt: str


def _item_text(member: Problem, shared_context: str | None) -> str:
    parts = []
    if member.context is not None and member.context != shared_context:
        parts.append(member.context)
    parts.append(member.question)
    if member.format is AnswerFormat.MC and member.choices:
        parts.append(" ".join(f"({c.letter}) {c.text}" for c in member.choices))
    return " ".join(parts)


def render_prompt(multi: MultiProblem, template: PromptTemplate) -> str:
    """Pure rendering: context appears once, questions are numbered 1..n."""
    blocks: list[str] = []
    if template.exemplar:
        blocks.append(template.exemplar.strip())
    if template.header:
        blocks.append(template.header)
    if multi.shared_context:
        blocks.append(multi.shared_context)
    items = [
        template.item_format.format(index=k, question=_item_text(m, multi.shared_context))
        for k, m in enumerate(multi.members, start=1)
    ]
    blocks.append("\n".join(items))
    if template.answer_directive:
        blocks.append(template.answer_directive)
    return "\n\n".join(blocks)


def _common_context(members: tuple[Problem, ...]) -> str | None:
    contexts = {m.context for m in members}
    if len(contexts) == 1:
        return next(iter(contexts))
    return None


def _build(
    index: int,
    members: list[Problem],
    setting: Setting,
    template: PromptTemplate,
) -> MultiProblem:
    multi = MultiProblem(
        multi_id=f"multi-{index:05d}",
        members=tuple(members),
        n=len(members),
        setting=setting,
        shared_context=_common_context(tuple(members)),
        prompt="",
    )
    return replace(multi, prompt=render_prompt(multi, template))


def compose(
    dataset: Dataset,
    n: int,
    seed: int,
    template: PromptTemplate | None = None,
) -> list[MultiProblem]:
    """Partition the dataset into MultiProblems of (up to) n members.

    Every problem lands in exactly one MultiProblem; a final group smaller
    than n is emitted rather than dropped so evaluation covers everything.
    Deterministic bit-for-bit for fixed (dataset, n, seed).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if template is None:
        template = default_template()
    if not dataset.problems:
        return []

    chunks: list[list[Problem]]
    if dataset.setting is Setting.INDEPENDENT:
        pool = list(dataset.problems)
        random.Random(seed).shuffle(pool)
        chunks = [pool[i : i + n] for i in range(0, len(pool), n)]
    else:
        # Groups smaller than n form one undersized instance; larger groups
        # are chunked in order. Groups never mix.
        chunks = []
        for group in _groups_in_order(dataset.problems):
            chunks.extend(group[i : i + n] for i in range(0, len(group), n))

    return [
        _build(i, members, dataset.setting, template)
        for i, members in enumerate(chunks)
    ]


def _groups_in_order(problems: tuple[Problem, ...]) -> list[list[Problem]]:
    groups: list[list[Problem]] = []
    current_key: object = object()
    for p in problems:
        if p.group_key != current_key:
            groups.append([])
            current_key = p.group_key
        groups[-1].append(p)
    return groups
