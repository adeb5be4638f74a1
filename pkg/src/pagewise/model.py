"""Domain types for label spaces, documents, bundles, streams and predictions.

Everything is immutable after construction so values can be shared freely
across workers. Page indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

# Probability vectors whose sum deviates from 1 by more than this are
# rejected; smaller deviations are silently renormalized at ingest.
PROB_SUM_TOLERANCE = 1e-4

PAGE_LEVEL = "page_level"
DOCUMENT_LEVEL = "document_level"
BINARY_BOUNDARY = "binary_boundary"
LABEL_SPACE_KINDS = (PAGE_LEVEL, DOCUMENT_LEVEL, BINARY_BOUNDARY)

# The binary boundary space is fixed: class 0 = continuation, class 1 = a
# page that starts a new document.
BOUNDARY_CLASSES = ("no_boundary", "boundary")


class PagewiseError(Exception):
    """Invalid domain value or inconsistent input data."""


class FormatError(PagewiseError):
    """Malformed file content; the message carries path and line number."""


def argmax_lowest(values: Sequence[float]) -> int:
    """Index of the maximum entry; the lowest index wins ties."""
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def renormalize(probs: Sequence[float], where: str = "probability vector") -> tuple[float, ...]:
    """Validate a probability vector and scale it to sum exactly to 1.

    Raises if the sum deviates from 1 by more than PROB_SUM_TOLERANCE;
    vectors already summing to exactly 1.0 are returned unchanged.
    """
    probs = tuple(float(p) for p in probs)
    if not probs:
        raise PagewiseError(f"{where}: empty vector")
    if any(p < 0 for p in probs):
        raise PagewiseError(f"{where}: negative entry")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_SUM_TOLERANCE:
        raise PagewiseError(f"{where}: entries sum to {total!r}, not 1")
    if total == 1.0:
        return probs
    return tuple(p / total for p in probs)


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of class names; the position of a name is its class id."""

    kind: str
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.kind not in LABEL_SPACE_KINDS:
            raise PagewiseError(f"unknown label space kind: {self.kind!r}")
        if len(self.classes) < 1:
            raise PagewiseError("label space must have at least one class")
        if any(not c for c in self.classes):
            raise PagewiseError("class names must be non-empty")
        if len(set(self.classes)) != len(self.classes):
            raise PagewiseError("class names must be unique")
        if self.kind == BINARY_BOUNDARY and self.classes != BOUNDARY_CLASSES:
            raise PagewiseError(
                f"binary_boundary space must have classes {BOUNDARY_CLASSES}"
            )

    @property
    def size(self) -> int:
        return len(self.classes)

    def index_of(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise PagewiseError(f"unknown class name: {name!r}") from None


def boundary_space() -> LabelSpace:
    return LabelSpace(BINARY_BOUNDARY, BOUNDARY_CLASSES)


@dataclass(frozen=True)
class LabelMap:
    """Total many-to-one mapping from page-level class ids to document-level ids."""

    source: LabelSpace
    target: LabelSpace
    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mapping", tuple(int(m) for m in self.mapping))
        if len(self.mapping) != self.source.size:
            raise PagewiseError(
                f"mapping has {len(self.mapping)} entries for "
                f"{self.source.size} source classes"
            )
        for src, dst in enumerate(self.mapping):
            if not 0 <= dst < self.target.size:
                raise PagewiseError(
                    f"source class {src} maps to out-of-range target {dst}"
                )

    @property
    def reachable(self) -> tuple[int, ...]:
        """Sorted target ids that at least one source class maps onto."""
        return tuple(sorted(set(self.mapping)))

    def apply(self, source_id: int) -> int:
        if not 0 <= source_id < len(self.mapping):
            raise PagewiseError(f"source class id out of range: {source_id}")
        return self.mapping[source_id]


@dataclass(frozen=True)
class PagePrediction:
    """Probability vector emitted by a page classifier for one page."""

    doc_id: str
    page_index: int
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if not self.doc_id:
            raise PagewiseError("doc_id must be non-empty")
        if self.page_index < 0:
            raise PagewiseError(f"{self.doc_id}: negative page_index")
        if not self.probs:
            raise PagewiseError(f"{self.doc_id}: empty probability vector")
        if any(p < 0 for p in self.probs):
            raise PagewiseError(
                f"{self.doc_id} page {self.page_index}: negative probability"
            )


@dataclass(frozen=True)
class DocumentRecord:
    """One document: ordered page references plus optional ground truth."""

    doc_id: str
    pages: tuple[str, ...]
    label: int | None = None
    page_labels: tuple[int, ...] | None = None
    bundle_id: str | None = None
    stream_id: str | None = None
    stream_position: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pages", tuple(self.pages))
        if self.page_labels is not None:
            object.__setattr__(
                self, "page_labels", tuple(int(x) for x in self.page_labels)
            )
        if not self.doc_id:
            raise PagewiseError("doc_id must be non-empty")
        if len(self.pages) < 1:
            raise PagewiseError(f"{self.doc_id}: documents must have at least one page")
        if self.page_labels is not None and len(self.page_labels) != len(self.pages):
            raise PagewiseError(
                f"{self.doc_id}: {len(self.page_labels)} page labels for "
                f"{len(self.pages)} pages"
            )

    @property
    def page_count(self) -> int:
        return len(self.pages)


@dataclass(frozen=True)
class BundleRecord:
    """Ordered collection of documents arriving together."""

    bundle_id: str
    documents: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))
        if len(self.documents) < 1:
            raise PagewiseError(f"{self.bundle_id}: bundles must contain a document")

    @property
    def document_count(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class StreamRecord:
    """Ordered pages drawn from one or more source documents."""

    stream_id: str
    pages: tuple[tuple[str, int], ...]
    page_labels: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "pages", tuple((str(d), int(i)) for d, i in self.pages)
        )
        object.__setattr__(self, "page_labels", tuple(int(x) for x in self.page_labels))
        if len(self.page_labels) != len(self.pages):
            raise PagewiseError(
                f"{self.stream_id}: {len(self.page_labels)} labels for "
                f"{len(self.pages)} pages"
            )


@dataclass(frozen=True)
class DocPrediction:
    """One aggregated document-level prediction with strategy provenance."""

    doc_id: str
    strategy: str
    label: int
    confidence: float
    scores: tuple[float, ...]
    fallback_used: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if not 0 <= self.label < len(self.scores):
            raise PagewiseError(f"{self.doc_id}: label {self.label} out of range")
        if self.label != argmax_lowest(self.scores):
            raise PagewiseError(
                f"{self.doc_id}: label {self.label} is not the lowest-index "
                f"argmax of scores"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise PagewiseError(
                f"{self.doc_id}: confidence {self.confidence!r} outside [0, 1]"
            )


@dataclass(frozen=True)
class PredictionSet:
    """Parsed prediction file: page-level records plus any document-level vectors."""

    space: LabelSpace
    pages: tuple[PagePrediction, ...]
    doc_scores: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pages", tuple(self.pages))
        seen: set[tuple[str, int]] = set()
        for pred in self.pages:
            key = (pred.doc_id, pred.page_index)
            if key in seen:
                raise PagewiseError(f"duplicate prediction for {key}")
            seen.add(key)

    def by_document(self) -> dict[str, list[PagePrediction]]:
        """Page predictions grouped by doc_id, each group sorted by page index."""
        grouped: dict[str, list[PagePrediction]] = {}
        for pred in self.pages:
            grouped.setdefault(pred.doc_id, []).append(pred)
        for preds in grouped.values():
            preds.sort(key=lambda p: p.page_index)
        return grouped


@dataclass(frozen=True)
class DocIssues:
    """Per-document validation problems; empty tuples mean a clean document."""

    doc_id: str
    missing: tuple[int, ...] = ()
    extra: tuple[int, ...] = ()
    bad_length: tuple[int, ...] = ()
    bad_sum: tuple[int, ...] = ()

    @property
    def clean(self) -> bool:
        return not (self.missing or self.extra or self.bad_length or self.bad_sum)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    n_documents: int
    n_predictions: int
    issues: tuple[DocIssues, ...]
    orphans: tuple[tuple[str, int], ...]

    def summary(self) -> str:
        lines = [
            f"documents: {self.n_documents}  predictions: {self.n_predictions}  "
            f"ok: {self.ok}"
        ]
        for issue in self.issues:
            parts = []
            if issue.missing:
                parts.append(f"missing pages {list(issue.missing)}")
            if issue.extra:
                parts.append(f"extra page indices {list(issue.extra)}")
            if issue.bad_length:
                parts.append(f"wrong vector length at {list(issue.bad_length)}")
            if issue.bad_sum:
                parts.append(f"non-normalized vectors at {list(issue.bad_sum)}")
            lines.append(f"  {issue.doc_id}: " + "; ".join(parts))
        if self.orphans:
            lines.append(f"  orphan predictions: {list(self.orphans)}")
        return "\n".join(lines)


def validate(
    predictions: PredictionSet | Iterable[PagePrediction],
    manifest: Iterable[DocumentRecord],
    space: LabelSpace,
) -> ValidationReport:
    """Check that a prediction set exactly covers a manifest.

    Lists, per document, missing and extra page predictions, vector-length
    mismatches and normalization violations. Predictions for unknown doc_ids
    are reported as orphans. Duplicate (doc_id, page_index) pairs are a hard
    error. The report is deterministic: documents and index lists are sorted.
    """
    if isinstance(predictions, PredictionSet):
        preds = list(predictions.pages)
    else:
        preds = list(predictions)

    records = {r.doc_id: r for r in manifest}
    by_doc: dict[str, dict[int, PagePrediction]] = {}
    orphans: list[tuple[str, int]] = []
    seen: set[tuple[str, int]] = set()
    for pred in preds:
        key = (pred.doc_id, pred.page_index)
        if key in seen:
            raise PagewiseError(f"duplicate prediction for {key}")
        seen.add(key)
        if pred.doc_id not in records:
            orphans.append(key)
        else:
            by_doc.setdefault(pred.doc_id, {})[pred.page_index] = pred

    issues: list[DocIssues] = []
    for doc_id in sorted(records):
        record = records[doc_id]
        present = by_doc.get(doc_id, {})
        missing = tuple(i for i in range(record.page_count) if i not in present)
        extra = tuple(sorted(i for i in present if i >= record.page_count))
        bad_length = tuple(
            sorted(i for i, p in present.items() if len(p.probs) != space.size)
        )
        bad_sum = tuple(
            sorted(
                i
                for i, p in present.items()
                if len(p.probs) == space.size
                and abs(math.fsum(p.probs) - 1.0) > PROB_SUM_TOLERANCE
            )
        )
        doc = DocIssues(doc_id, missing, extra, bad_length, bad_sum)
        if not doc.clean:
            issues.append(doc)

    ok = not issues and not orphans
    return ValidationReport(
        ok=ok,
        n_documents=len(records),
        n_predictions=len(preds),
        issues=tuple(issues),
        orphans=tuple(sorted(orphans)),
    )
