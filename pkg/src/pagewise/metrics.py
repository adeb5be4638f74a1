"""Predictive, calibration and selective-prediction metrics.

ECE uses equal-width bins on top-1 confidence, the last bin closed at 1.0.
The risk-coverage curve ranks predictions by descending confidence (ties by
ascending doc_id) and reports the error rate of every prefix; AURC is the
discrete mean of those risks over all N coverage points. Risk is computed
as 1 - correct/k so that the risk at full coverage equals 1 - accuracy
bit-for-bit.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .model import DocPrediction, LabelSpace, PagewiseError


class BinRow(NamedTuple):
    bin_lo: float
    bin_hi: float
    count: int
    mean_confidence: float
    empirical_accuracy: float


class RCPoint(NamedTuple):
    coverage: float
    risk: float


@dataclass(frozen=True)
class MetricsReport:
    """All metrics for one strategy on one corpus."""

    strategy: str
    n_documents: int
    accuracy: float
    f1_weighted: float
    f1_macro: float
    ece: float
    aurc: float
    bin_table: tuple[BinRow, ...]
    rc_points: tuple[RCPoint, ...]


def _checked(
    predictions: Sequence[DocPrediction], labels: Mapping[str, int]
) -> list[DocPrediction]:
    preds = list(predictions)
    if not preds:
        raise PagewiseError("no documents")
    for pred in preds:
        if pred.doc_id not in labels:
            raise PagewiseError(f"no label for document {pred.doc_id}")
    return preds


def accuracy(
    predictions: Sequence[DocPrediction], labels: Mapping[str, int]
) -> float:
    preds = _checked(predictions, labels)
    hits = sum(1 for p in preds if p.label == labels[p.doc_id])
    return hits / len(preds)


def f1_scores(
    predictions: Sequence[DocPrediction],
    labels: Mapping[str, int],
    space: LabelSpace,
) -> tuple[float, float, tuple[float, ...]]:
    """Support-weighted and macro F1 plus the per-class values.

    Per-class F1 is 2PR/(P+R), defined as 0 when the denominator vanishes.
    The macro mean covers only classes present in the labels; weighted uses
    support weights, so absent classes contribute nothing to either.
    """
    preds = _checked(predictions, labels)
    tp = [0] * space.size
    fp = [0] * space.size
    fn = [0] * space.size
    support = [0] * space.size
    for pred in preds:
        truth = labels[pred.doc_id]
        if not 0 <= truth < space.size:
            raise PagewiseError(f"{pred.doc_id}: label {truth} outside label space")
        support[truth] += 1
        if pred.label == truth:
            tp[truth] += 1
        else:
            fp[pred.label] += 1
            fn[truth] += 1

    per_class = []
    for k in range(space.size):
        denom = 2 * tp[k] + fp[k] + fn[k]
        per_class.append(2 * tp[k] / denom if denom else 0.0)

    n = len(preds)
    weighted = sum(support[k] * per_class[k] for k in range(space.size)) / n
    present = [k for k in range(space.size) if support[k] > 0]
    macro = sum(per_class[k] for k in present) / len(present)
    return weighted, macro, tuple(per_class)


def ece(
    predictions: Sequence[DocPrediction],
    labels: Mapping[str, int],
    n_bins: int = 10,
) -> tuple[float, tuple[BinRow, ...]]:
    """Expected calibration error of top-1 confidences with a full bin table.

    Empty bins appear in the table with count 0 and zeroed statistics; they
    contribute nothing to the ECE sum.
    """
    if n_bins < 1:
        raise PagewiseError("n_bins must be >= 1")
    preds = _checked(predictions, labels)
    edges = [i / n_bins for i in range(n_bins + 1)]
    bin_confs: list[list[float]] = [[] for _ in range(n_bins)]
    hit_counts = [0] * n_bins
    for pred in preds:
        b = min(bisect_right(edges, pred.confidence) - 1, n_bins - 1)
        bin_confs[b].append(pred.confidence)
        if pred.label == labels[pred.doc_id]:
            hit_counts[b] += 1

    n = len(preds)
    total = 0.0
    rows = []
    for b in range(n_bins):
        count = len(bin_confs[b])
        if count:
            # fsum is correctly rounded, keeping ECE independent of input order
            mean_conf = math.fsum(bin_confs[b]) / count
            emp_acc = hit_counts[b] / count
            total += (count / n) * abs(emp_acc - mean_conf)
        else:
            mean_conf = 0.0
            emp_acc = 0.0
        rows.append(BinRow(edges[b], edges[b + 1], count, mean_conf, emp_acc))
    return total, tuple(rows)


def risk_coverage_curve(
    predictions: Sequence[DocPrediction], labels: Mapping[str, int]
) -> tuple[RCPoint, ...]:
    """Risk of every confidence-ranked prefix, from coverage 1/N to 1."""
    preds = _checked(predictions, labels)
    order = sorted(preds, key=lambda p: (-p.confidence, p.doc_id))
    n = len(order)
    points = []
    hits = 0
    for k, pred in enumerate(order, start=1):
        if pred.label == labels[pred.doc_id]:
            hits += 1
        points.append(RCPoint(k / n, 1.0 - hits / k))
    return tuple(points)


def aurc(rc_points: Sequence[RCPoint]) -> float:
    """Discrete mean of the risks over all coverage points."""
    if not rc_points:
        raise PagewiseError("no risk-coverage points")
    return sum(p.risk for p in rc_points) / len(rc_points)


def evaluate(
    predictions: Sequence[DocPrediction],
    labels: Mapping[str, int],
    space: LabelSpace,
    n_bins: int = 10,
) -> MetricsReport:
    """Assemble every metric into one report for a single strategy."""
    preds = _checked(predictions, labels)
    strategies = {p.strategy for p in preds}
    if len(strategies) != 1:
        raise PagewiseError(f"mixed strategies in one evaluation: {sorted(strategies)}")
    acc = accuracy(preds, labels)
    f1_w, f1_m, _ = f1_scores(preds, labels, space)
    ece_value, bins = ece(preds, labels, n_bins)
    points = risk_coverage_curve(preds, labels)
    return MetricsReport(
        strategy=strategies.pop(),
        n_documents=len(preds),
        accuracy=acc,
        f1_weighted=f1_w,
        f1_macro=f1_m,
        ece=ece_value,
        aurc=aurc(points),
        bin_table=bins,
        rc_points=points,
    )
