"""Best-case (oracle) combination of strategies via OR over correctness bits.

The union accuracy of a set of strategies is the accuracy a perfect selector
would reach if it could pick, per document, any strategy that happens to be
right. It is an upper bound, not a classifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .model import DocPrediction, PagewiseError


@dataclass(frozen=True)
class CorrectnessVector:
    """One bit per document (sorted by doc_id): 1 iff the prediction was right."""

    strategy: str
    doc_ids: tuple[str, ...]
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if len(self.bits) != len(self.doc_ids):
            raise PagewiseError("bits and doc_ids differ in length")
        if any(b not in (0, 1) for b in self.bits):
            raise PagewiseError("correctness bits must be 0 or 1")
        if list(self.doc_ids) != sorted(self.doc_ids):
            raise PagewiseError("doc_ids must be sorted")

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def accuracy(self) -> float:
        return sum(self.bits) / self.n


class BestcaseRow(NamedTuple):
    combo: str
    accuracy: float
    delta: float


def correctness(
    predictions: Sequence[DocPrediction],
    labels: Mapping[str, int],
    strategy: str | None = None,
) -> CorrectnessVector:
    """Correctness bits for a strategy's predictions, ordered by doc_id."""
    preds = sorted(predictions, key=lambda p: p.doc_id)
    if not preds:
        raise PagewiseError("no documents")
    for pred in preds:
        if pred.doc_id not in labels:
            raise PagewiseError(f"no label for document {pred.doc_id}")
    return CorrectnessVector(
        strategy=strategy if strategy is not None else preds[0].strategy,
        doc_ids=tuple(p.doc_id for p in preds),
        bits=tuple(1 if p.label == labels[p.doc_id] else 0 for p in preds),
    )


def combine(
    vectors: Sequence[CorrectnessVector],
) -> tuple[CorrectnessVector, float]:
    """Element-wise OR; all vectors must share length and doc ordering."""
    if not vectors:
        raise PagewiseError("no vectors to combine")
    first = vectors[0]
    bits = list(first.bits)
    for vec in vectors[1:]:
        if vec.n != first.n:
            raise PagewiseError(
                f"length mismatch: {vec.strategy} has {vec.n}, expected {first.n}"
            )
        if vec.doc_ids != first.doc_ids:
            raise PagewiseError(f"doc ordering mismatch with {vec.strategy}")
        for i, b in enumerate(vec.bits):
            if b:
                bits[i] = 1
    union = CorrectnessVector(
        strategy="+".join(v.strategy for v in vectors),
        doc_ids=first.doc_ids,
        bits=tuple(bits),
    )
    return union, union.accuracy


def bestcase_table(
    strategy_vectors: Mapping[str, CorrectnessVector],
    combos: Sequence[Sequence[str]],
    baseline: str,
) -> list[BestcaseRow]:
    """Union accuracy per combo and its delta against the baseline strategy."""
    if baseline not in strategy_vectors:
        raise PagewiseError(f"unknown baseline strategy: {baseline!r}")
    base_acc = strategy_vectors[baseline].accuracy
    rows = []
    for combo in combos:
        names = list(combo)
        for name in names:
            if name not in strategy_vectors:
                raise PagewiseError(f"unknown strategy in combo: {name!r}")
        _, acc = combine([strategy_vectors[name] for name in names])
        rows.append(BestcaseRow("+".join(names), acc, acc - base_acc))
    return rows
