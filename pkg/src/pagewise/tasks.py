"""Task-level composers: streams, PSS two-stage, bundles, label mapping, counts.

Boundary bit semantics: a 1 marks the first page of a new document, and
position 0 always starts a segment no matter what its bit says. Segments of
one stream are contiguous, non-overlapping and cover every page.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .aggregate import Strategy, aggregate_document, _checked_pages
from .model import (
    BundleRecord,
    DocPrediction,
    DocumentRecord,
    LabelMap,
    LabelSpace,
    PagePrediction,
    PagewiseError,
    StreamRecord,
    argmax_lowest,
)

# Returned by map_pages_to_document when pages disagree (or tie) on the
# document label; a first-class value so callers can triage, not an error.
CONFLICT = -1


@dataclass(frozen=True)
class Segment:
    """Contiguous page range of a stream, inclusive bounds."""

    stream_id: str
    start: int
    end: int
    predicted_label: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise PagewiseError(
                f"{self.stream_id}: bad segment bounds [{self.start}, {self.end}]"
            )

    @property
    def page_count(self) -> int:
        return self.end - self.start + 1


def classify_stream(page_preds: Sequence[PagePrediction]) -> list[int]:
    """Per-page argmax labels for a fully covered stream, order preserved."""
    pages = _checked_pages(page_preds)
    return [argmax_lowest(p.probs) for p in pages]


def map_pages_to_document(
    page_labels: Sequence[int], label_map: LabelMap, rule: str = "unanimous"
) -> int:
    """Collapse page-level labels into one document label through the C->K map.

    unanimous: all pages must map to the same target, otherwise CONFLICT.
    majority: most frequent target wins; ties are CONFLICT.
    """
    if not page_labels:
        raise PagewiseError("no page labels")
    mapped = [label_map.apply(p) for p in page_labels]
    if rule == "unanimous":
        targets = set(mapped)
        return mapped[0] if len(targets) == 1 else CONFLICT
    if rule == "majority":
        counts = Counter(mapped)
        top = counts.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            return CONFLICT
        return top[0][0]
    raise PagewiseError(f"unknown mapping rule: {rule!r}")


def segment_by_boundaries(
    boundary_bits: Sequence[int], stream_id: str = "stream"
) -> list[Segment]:
    """Split a stream on boundary bits; bit 1 at i starts a segment at i."""
    bits = list(boundary_bits)
    if not bits:
        raise PagewiseError("empty stream")
    if any(b not in (0, 1) for b in bits):
        raise PagewiseError("boundary bits must be 0 or 1")
    starts = [0] + [i for i in range(1, len(bits)) if bits[i] == 1]
    ends = [s - 1 for s in starts[1:]] + [len(bits) - 1]
    return [Segment(stream_id, s, e) for s, e in zip(starts, ends)]


def two_stage_classify(
    boundary_preds: Sequence[PagePrediction],
    class_preds: Sequence[PagePrediction],
    strategy: Strategy,
) -> list[Segment]:
    """PSS then per-segment document classification.

    boundary_preds are binary-space vectors over the stream's pages;
    class_preds cover the same pages in the document label space. Each
    recovered segment is classified by applying the aggregation strategy to
    its pages' class predictions.
    """
    boundary = _checked_pages(boundary_preds)
    classes = _checked_pages(class_preds)
    if len(boundary) != len(classes):
        raise PagewiseError(
            f"coverage mismatch: {len(boundary)} boundary predictions vs "
            f"{len(classes)} class predictions"
        )
    if len(boundary[0].probs) != 2:
        raise PagewiseError("boundary predictions must be binary")
    if strategy.id == "external_document":
        raise PagewiseError("two-stage classification needs a page-level strategy")

    bits = [argmax_lowest(p.probs) for p in boundary]
    segments = segment_by_boundaries(bits, stream_id=boundary[0].doc_id)
    out = []
    for seg in segments:
        sub = [
            replace(page, page_index=i)
            for i, page in enumerate(classes[seg.start : seg.end + 1])
        ]
        pred = aggregate_document(sub, strategy)
        out.append(replace(seg, predicted_label=pred.label))
    return out


def evaluate_bundle(
    bundle_predictions: Mapping[str, DocPrediction],
    bundle: BundleRecord,
    labels: Mapping[str, int],
) -> tuple[float, bool]:
    """Per-document accuracy inside one bundle and the all-correct flag."""
    hits = 0
    for doc_id in bundle.documents:
        if doc_id not in bundle_predictions:
            raise PagewiseError(f"{bundle.bundle_id}: no prediction for {doc_id}")
        if doc_id not in labels:
            raise PagewiseError(f"{bundle.bundle_id}: no label for {doc_id}")
        if bundle_predictions[doc_id].label == labels[doc_id]:
            hits += 1
    per_doc = hits / bundle.document_count
    return per_doc, hits == bundle.document_count


def count_page_types(
    region_preds: Sequence[PagePrediction], space: LabelSpace
) -> list[int]:
    """Count argmax classes over the localized regions of a multi-page image.

    An empty region list is valid (an image with no recognized pages) and
    yields the zero vector.
    """
    counts = [0] * space.size
    for pred in region_preds:
        if len(pred.probs) != space.size:
            raise PagewiseError(
                f"{pred.doc_id}: vector length {len(pred.probs)} does not "
                f"match label space size {space.size}"
            )
        counts[argmax_lowest(pred.probs)] += 1
    return counts


def build_streams(
    records: Iterable[DocumentRecord], label_mode: str = "boundary"
) -> list[StreamRecord]:
    """Assemble StreamRecords from manifest records sharing a stream_id.

    label_mode "boundary" derives boundary bits (1 at each document start);
    "page" concatenates the documents' page_labels and requires them all.
    """
    if label_mode not in ("boundary", "page"):
        raise PagewiseError(f"unknown label mode: {label_mode!r}")
    groups: dict[str, list[DocumentRecord]] = {}
    for record in records:
        if record.stream_id is not None:
            groups.setdefault(record.stream_id, []).append(record)

    streams = []
    for stream_id in sorted(groups):
        docs = sorted(
            groups[stream_id],
            key=lambda r: (
                r.stream_position if r.stream_position is not None else 0,
                r.doc_id,
            ),
        )
        pages: list[tuple[str, int]] = []
        labels: list[int] = []
        for doc in docs:
            for i in range(doc.page_count):
                pages.append((doc.doc_id, i))
                if label_mode == "boundary":
                    labels.append(1 if i == 0 else 0)
            if label_mode == "page":
                if doc.page_labels is None:
                    raise PagewiseError(f"{doc.doc_id}: page_labels required")
                labels.extend(doc.page_labels)
        streams.append(StreamRecord(stream_id, tuple(pages), tuple(labels)))
    return streams
