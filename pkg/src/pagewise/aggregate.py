"""Inference strategies that reduce per-page probabilities to one document label.

Sampling strategies pick a single page (first, second, last, or an explicit
index, clamped to the last page when the document is shorter). The sequence
strategies consume every page: max_conf takes the globally most confident
(page, class) cell, soft_vote averages the probability vectors, hard_vote
lets each page cast a one-hot vote for its own argmax.

Tie-breaking is fixed everywhere: lowest class id first, then lowest page
index. Confidences are per strategy: the selected page's top-1 probability
for sampling, the winning cell for max_conf, the maximal averaged score for
soft_vote and the winning vote share for hard_vote.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    DocPrediction,
    DocumentRecord,
    PagePrediction,
    PagewiseError,
    PredictionSet,
    argmax_lowest,
)

STRATEGY_IDS = (
    "first",
    "second",
    "last",
    "index",
    "max_conf",
    "soft_vote",
    "hard_vote",
    "external_document",
)

_SAMPLE_OFFSETS = {"first": 0, "second": 1}


@dataclass(frozen=True)
class Strategy:
    """Strategy identifier; only `index` carries a parameter."""

    id: str
    index: int | None = None

    def __post_init__(self) -> None:
        if self.id not in STRATEGY_IDS:
            raise PagewiseError(f"unknown strategy: {self.id!r}")
        if self.id == "index":
            if self.index is None or self.index < 0:
                raise PagewiseError("index strategy requires a page index >= 0")
        elif self.index is not None:
            raise PagewiseError(f"strategy {self.id!r} takes no index parameter")

    @property
    def name(self) -> str:
        if self.id == "index":
            return f"index:{self.index}"
        return self.id

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """Parse a strategy name like "soft_vote" or "index:3"."""
        if text.startswith("index:"):
            raw = text.split(":", 1)[1]
            try:
                return cls("index", int(raw))
            except ValueError:
                raise PagewiseError(f"bad index strategy: {text!r}") from None
        return cls(text)


def _checked_pages(doc_preds: Sequence[PagePrediction]) -> list[PagePrediction]:
    """Enforce the shared precondition: non-empty, one doc, contiguous from 0."""
    pages = list(doc_preds)
    if not pages:
        raise PagewiseError("empty document")
    doc_id = pages[0].doc_id
    width = len(pages[0].probs)
    for i, page in enumerate(pages):
        if page.doc_id != doc_id:
            raise PagewiseError(f"mixed doc_ids: {doc_id!r} and {page.doc_id!r}")
        if page.page_index != i:
            raise PagewiseError(
                f"{doc_id}: pages not contiguous from 0 (got index "
                f"{page.page_index} at position {i})"
            )
        if len(page.probs) != width:
            raise PagewiseError(f"{doc_id}: inconsistent vector lengths")
    return pages


def sample_page(
    doc_preds: Sequence[PagePrediction], position: int | str
) -> DocPrediction:
    """Classify by a single page: "first", "second", "last" or a 0-based index.

    Requests past the last page clamp to the last page and set fallback_used.
    """
    pages = _checked_pages(doc_preds)
    last = len(pages) - 1
    if isinstance(position, str):
        if position == "last":
            requested = last
        elif position in _SAMPLE_OFFSETS:
            requested = _SAMPLE_OFFSETS[position]
        else:
            raise PagewiseError(f"unknown sample position: {position!r}")
        name = position
    else:
        if position < 0:
            raise PagewiseError(f"negative page index: {position}")
        requested = position
        name = f"index:{position}"

    idx = min(requested, last)
    page = pages[idx]
    label = argmax_lowest(page.probs)
    return DocPrediction(
        doc_id=page.doc_id,
        strategy=name,
        label=label,
        confidence=min(1.0, page.probs[label]),
        scores=page.probs,
        fallback_used=requested > last,
    )


def max_conf(doc_preds: Sequence[PagePrediction]) -> DocPrediction:
    """Take the class of the globally maximal (page, class) entry."""
    pages = _checked_pages(doc_preds)
    best_page = 0
    best_class = argmax_lowest(pages[0].probs)
    best_value = pages[0].probs[best_class]
    for l in range(1, len(pages)):
        k = argmax_lowest(pages[l].probs)
        if pages[l].probs[k] > best_value:
            best_page, best_class, best_value = l, k, pages[l].probs[k]
    return DocPrediction(
        doc_id=pages[0].doc_id,
        strategy="max_conf",
        label=best_class,
        confidence=min(1.0, best_value),
        scores=pages[best_page].probs,
    )


def soft_vote(doc_preds: Sequence[PagePrediction]) -> DocPrediction:
    """Average the page probability vectors (ascending page order) and argmax.

    Dividing by the page count does not change the argmax but keeps the
    confidence in [0, 1] for calibration metrics.
    """
    pages = _checked_pages(doc_preds)
    sums = [0.0] * len(pages[0].probs)
    for page in pages:
        for k, p in enumerate(page.probs):
            sums[k] += p
    scores = tuple(s / len(pages) for s in sums)
    label = argmax_lowest(scores)
    return DocPrediction(
        doc_id=pages[0].doc_id,
        strategy="soft_vote",
        label=label,
        confidence=min(1.0, scores[label]),
        scores=scores,
    )


def hard_vote(doc_preds: Sequence[PagePrediction]) -> DocPrediction:
    """Each page votes for its own argmax; scores are vote shares."""
    pages = _checked_pages(doc_preds)
    counts = [0] * len(pages[0].probs)
    for page in pages:
        counts[argmax_lowest(page.probs)] += 1
    scores = tuple(c / len(pages) for c in counts)
    label = argmax_lowest(scores)
    return DocPrediction(
        doc_id=pages[0].doc_id,
        strategy="hard_vote",
        label=label,
        confidence=scores[label],
        scores=scores,
    )


def external_scores(doc_id: str, scores: Sequence[float]) -> DocPrediction:
    """Wrap an externally produced document-level vector (e.g. the grid path)."""
    probs = tuple(float(s) for s in scores)
    label = argmax_lowest(probs)
    return DocPrediction(
        doc_id=doc_id,
        strategy="external_document",
        label=label,
        confidence=min(1.0, probs[label]),
        scores=probs,
    )


def aggregate_document(
    doc_preds: Sequence[PagePrediction], strategy: Strategy
) -> DocPrediction:
    """Apply one page-consuming strategy to one document's predictions."""
    if strategy.id in ("first", "second", "last"):
        return sample_page(doc_preds, strategy.id)
    if strategy.id == "index":
        return sample_page(doc_preds, strategy.index)
    if strategy.id == "max_conf":
        return max_conf(doc_preds)
    if strategy.id == "soft_vote":
        return soft_vote(doc_preds)
    if strategy.id == "hard_vote":
        return hard_vote(doc_preds)
    raise PagewiseError(
        f"strategy {strategy.name!r} does not consume page predictions"
    )


def aggregate_all(
    prediction_set: PredictionSet,
    manifest: Iterable[DocumentRecord],
    strategies: Sequence[Strategy],
    jobs: int = 1,
) -> dict[str, list[DocPrediction]]:
    """One DocPrediction per (document, strategy), sorted by doc_id.

    Documents are independent, so they may be processed by a worker pool;
    the merge is ordered, making the output identical for any job count.
    """
    records = sorted(manifest, key=lambda r: r.doc_id)
    grouped = prediction_set.by_document()

    def run_one(record: DocumentRecord) -> list[DocPrediction]:
        out = []
        for strategy in strategies:
            try:
                if strategy.id == "external_document":
                    scores = prediction_set.doc_scores.get(record.doc_id)
                    if scores is None:
                        raise PagewiseError("no document-level prediction")
                    out.append(external_scores(record.doc_id, scores))
                else:
                    pages = grouped.get(record.doc_id)
                    if not pages:
                        raise PagewiseError("no page predictions")
                    if len(pages) != record.page_count:
                        raise PagewiseError(
                            f"{len(pages)} predictions for "
                            f"{record.page_count} pages"
                        )
                    out.append(aggregate_document(pages, strategy))
            except PagewiseError as exc:
                raise PagewiseError(f"{record.doc_id}: {exc}") from None
        return out

    if jobs > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_doc = list(pool.map(run_one, records))
    else:
        per_doc = [run_one(r) for r in records]

    result: dict[str, list[DocPrediction]] = {s.name: [] for s in strategies}
    for doc_out in per_doc:
        for pred in doc_out:
            result[pred.strategy].append(pred)
    return result
