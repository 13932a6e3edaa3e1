"""Confidence-calibration scoring: AP, ECE, accuracy-among-certain.

AP is the non-interpolated area under the precision-recall curve,
AP = sum_k (R_k - R_{k-1}) * P_k with records ranked by descending
confidence. ECE uses equal-width bins over [0, 1]: bin m covers
[m/bins, (m+1)/bins), the last bin closed at 1.0, and contributes
|B_m|/n * |mean confidence - empirical accuracy|.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ._phrases import SURE_PHRASE, UNSURE_PHRASE
from .boundary import ConfidenceLabel
from .model_client import CompletionResponse


class MetricError(ValueError):
    """A metric's precondition does not hold for the given records."""


@dataclass(frozen=True)
class PredictionRecord:
    question_id: str
    correct: bool
    confidence: float
    label: ConfidenceLabel

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    size: int
    mean_confidence: float
    empirical_accuracy: float


@dataclass(frozen=True)
class CalibrationReport:
    ap: float
    ece: float
    accuracy_among_certain: float
    bins: tuple[CalibrationBin, ...]
    total: int
    sure_count: int
    correct_count: int


# ---------------------------------------------------------------------------
# Per-slot confidence scoring
# ---------------------------------------------------------------------------

PHRASE_RE = re.compile(r"I am (un)?sure")
SURE_TOKEN = "sure"
UNSURE_TOKEN = "unsure"


def confidence_score(response: CompletionResponse, slot_index: int) -> float:
    """Score one slot's confidence in [0, 1].

    When token logprobs cover the slot's phrase, the probability mass of the
    discriminating token ("sure" vs "unsure") is renormalized against the
    complementary phrase; without logprobs the parsed phrase falls back to
    binary 1.0 / 0.0.
    """
    occurrences = list(PHRASE_RE.finditer(response.text))
    if slot_index >= len(occurrences):
        raise MetricError(
            f"slot {slot_index}: no confidence phrase in response text"
        )
    match = occurrences[slot_index]
    is_sure = match.group(1) is None

    chosen_p = _discriminating_probability(response, match.start() + len("I am "))
    if chosen_p is None:
        return 1.0 if is_sure else 0.0
    p_sure = chosen_p if is_sure else 1.0 - chosen_p
    p_unsure = 1.0 - p_sure
    return p_sure / (p_sure + p_unsure)


def _discriminating_probability(response: CompletionResponse, offset: int) -> float | None:
    # Token strings must concatenate to the text for offsets to line up.
    if response.token_logprobs is None:
        return None
    cursor = 0
    for token, logprob in response.token_logprobs:
        end = cursor + len(token)
        if cursor <= offset < end:
            return min(math.exp(logprob), 1.0)
        cursor = end
    return None


# ---------------------------------------------------------------------------
# Aggregate metrics
# ---------------------------------------------------------------------------


def average_precision(records: Sequence[PredictionRecord]) -> float:
    """AP over correctness ranked by confidence.

    Ties are broken by question_id so the step-function sum is deterministic;
    the result depends only on the ranking, not the confidence magnitudes.
    """
    if not records:
        raise MetricError("average_precision needs at least one record")
    positives = sum(1 for r in records if r.correct)
    if positives == 0:
        raise MetricError("average_precision undefined with zero correct records")

    ranked = sorted(records, key=lambda r: (-r.confidence, r.question_id))
    ap = 0.0
    seen_correct = 0
    recall_prev = 0.0
    for k, record in enumerate(ranked, start=1):
        if record.correct:
            seen_correct += 1
        precision_k = seen_correct / k
        recall_k = seen_correct / positives
        ap += (recall_k - recall_prev) * precision_k
        recall_prev = recall_k
    return ap


def ece(records: Sequence[PredictionRecord], bins: int = 10) -> float:
    """Expected calibration error over equal-width confidence bins."""
    if not records:
        raise MetricError("ece needs at least one record")
    if bins < 1:
        raise MetricError("bins must be >= 1")
    total = 0.0
    for b in compute_bins(records, bins):
        if b.size == 0:
            continue
        total += (b.size / len(records)) * abs(b.mean_confidence - b.empirical_accuracy)
    return total


def compute_bins(records: Sequence[PredictionRecord], bins: int = 10) -> list[CalibrationBin]:
    """Reliability-diagram data: per-bin size, mean confidence, accuracy."""
    edges = [m / bins for m in range(bins + 1)]
    grouped: list[list[PredictionRecord]] = [[] for _ in range(bins)]
    for r in records:
        for m in range(bins):
            closed_top = m == bins - 1  # the last bin includes 1.0
            if edges[m] <= r.confidence and (
                r.confidence < edges[m + 1] or (closed_top and r.confidence <= 1.0)
            ):
                grouped[m].append(r)
                break
    out = []
    for m, members in enumerate(grouped):
        size = len(members)
        mean_conf = sum(r.confidence for r in members) / size if size else 0.0
        accuracy = sum(1 for r in members if r.correct) / size if size else 0.0
        out.append(
            CalibrationBin(
                lower=m / bins,
                upper=(m + 1) / bins,
                size=size,
                mean_confidence=mean_conf,
                empirical_accuracy=accuracy,
            )
        )
    return out


def accuracy_among_certain(records: Sequence[PredictionRecord]) -> float:
    """Fraction of correct responses among records labeled sure."""
    sure = [r for r in records if r.label is ConfidenceLabel.SURE]
    if not sure:
        raise MetricError("accuracy_among_certain undefined with zero sure records")
    return sum(1 for r in sure if r.correct) / len(sure)


def build_report(records: Sequence[PredictionRecord], bins: int = 10) -> CalibrationReport:
    if not records:
        raise MetricError("build_report needs at least one record")
    return CalibrationReport(
        ap=average_precision(records),
        ece=ece(records, bins),
        accuracy_among_certain=accuracy_among_certain(records),
        bins=tuple(compute_bins(records, bins)),
        total=len(records),
        sure_count=sum(1 for r in records if r.label is ConfidenceLabel.SURE),
        correct_count=sum(1 for r in records if r.correct),
    )


# ---------------------------------------------------------------------------
# Serialization and rendering
# ---------------------------------------------------------------------------


def report_to_dict(report: CalibrationReport) -> dict:
    return {
        "ap": report.ap,
        "ece": report.ece,
        "accuracy_among_certain": report.accuracy_among_certain,
        "total": report.total,
        "sure_count": report.sure_count,
        "correct_count": report.correct_count,
        "bins": [
            {
                "lower": b.lower,
                "upper": b.upper,
                "size": b.size,
                "mean_confidence": b.mean_confidence,
                "empirical_accuracy": b.empirical_accuracy,
            }
            for b in report.bins
        ],
    }


def report_from_dict(obj: dict) -> CalibrationReport:
    return CalibrationReport(
        ap=obj["ap"],
        ece=obj["ece"],
        accuracy_among_certain=obj["accuracy_among_certain"],
        bins=tuple(CalibrationBin(**b) for b in obj["bins"]),
        total=obj["total"],
        sure_count=obj["sure_count"],
        correct_count=obj["correct_count"],
    )


def render_table(report: CalibrationReport) -> str:
    """Plain-text summary with percentages at one decimal."""
    rows = [
        ("AP", report.ap),
        ("ECE", report.ece),
        ("Accuracy (among certain)", report.accuracy_among_certain),
    ]
    lines = [f"{'Metric':<26}{'Value (%)':>10}"]
    lines.extend(f"{name:<26}{100 * value:>10.1f}" for name, value in rows)
    lines.append(
        f"n={report.total}  sure={report.sure_count}  correct={report.correct_count}"
    )
    return "\n".join(lines) + "\n"


def write_bins_csv(report: CalibrationReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lower", "upper", "size", "mean_confidence", "empirical_accuracy"])
        for b in report.bins:
            writer.writerow([b.lower, b.upper, b.size, b.mean_confidence, b.empirical_accuracy])


def label_from_text(text: str) -> ConfidenceLabel:
    if text == SURE_PHRASE:
        return ConfidenceLabel.SURE
    if text == UNSURE_PHRASE:
        return ConfidenceLabel.UNSURE
    raise ValueError(f"not a confidence phrase: {text!r}")
