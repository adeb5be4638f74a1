"""Deterministic distribution-shift generators over document manifests.

Each operation works per document with its own sub-seeded generator (see
rng.document_rng), so results do not depend on manifest order or worker
count. Every move is appended to a provenance log record so perturbations
can be audited and, where applicable, reversed.

Out-of-scope pages injected from a donor pool are marked with page label -1
when the receiving document carries page_labels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .model import DocumentRecord, PagewiseError
from .rng import SplitMix64, document_rng

OUT_OF_SCOPE_LABEL = -1

PERTURB_OPS = ("shuffle_pages", "duplicate_pages", "drop_pages", "inject_pages")


@dataclass(frozen=True)
class PerturbSpec:
    """One perturbation: operation, rate in [0, 1], mandatory seed.

    For shuffle_pages the rate is the per-document probability of shuffling;
    for the other ops it is the per-page event probability. inject_pages
    additionally needs a non-empty donor manifest to draw pages from.
    """

    op: str
    rate: float
    seed: int
    donors: tuple[DocumentRecord, ...] | None = None

    def __post_init__(self) -> None:
        if self.op not in PERTURB_OPS:
            raise PagewiseError(f"unknown perturbation op: {self.op!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise PagewiseError(f"rate must be in [0, 1], got {self.rate!r}")
        if self.op == "inject_pages":
            if not self.donors:
                raise PagewiseError("inject_pages requires a non-empty donor pool")
            object.__setattr__(self, "donors", tuple(self.donors))


def _shuffle(record: DocumentRecord, rng: SplitMix64, rate: float, log: list[dict]):
    if rng.random() >= rate:
        return record
    perm = list(range(record.page_count))
    rng.shuffle(perm)
    pages = tuple(record.pages[perm[i]] for i in range(len(perm)))
    page_labels = (
        tuple(record.page_labels[perm[i]] for i in range(len(perm)))
        if record.page_labels is not None
        else None
    )
    log.append({"doc_id": record.doc_id, "op": "shuffle", "permutation": perm})
    return replace(record, pages=pages, page_labels=page_labels)


def _duplicate(record: DocumentRecord, rng: SplitMix64, rate: float, log: list[dict]):
    pages: list[str] = []
    labels: list[int] | None = [] if record.page_labels is not None else None
    for i, ref in enumerate(record.pages):
        pages.append(ref)
        if labels is not None:
            labels.append(record.page_labels[i])
        if rng.random() < rate:
            log.append(
                {
                    "doc_id": record.doc_id,
                    "op": "duplicate",
                    "page_index": i,
                    "insert_at": len(pages),
                }
            )
            pages.append(ref)
            if labels is not None:
                labels.append(record.page_labels[i])
    return replace(
        record,
        pages=tuple(pages),
        page_labels=tuple(labels) if labels is not None else None,
    )


def _drop(record: DocumentRecord, rng: SplitMix64, rate: float, log: list[dict]):
    marked = [rng.random() < rate for _ in record.pages]
    if all(marked):
        # never empty a document: keep the first page and log the exception
        marked[0] = False
        log.append({"doc_id": record.doc_id, "op": "retain_forced", "page_index": 0})
    pages = []
    labels: list[int] | None = [] if record.page_labels is not None else None
    for i, ref in enumerate(record.pages):
        if marked[i]:
            log.append({"doc_id": record.doc_id, "op": "drop", "page_index": i})
            continue
        pages.append(ref)
        if labels is not None:
            labels.append(record.page_labels[i])
    return replace(
        record,
        pages=tuple(pages),
        page_labels=tuple(labels) if labels is not None else None,
    )


def _inject(
    record: DocumentRecord,
    rng: SplitMix64,
    rate: float,
    pool: Sequence[tuple[str, int, str]],
    log: list[dict],
):
    n_events = sum(1 for _ in record.pages if rng.random() < rate)
    pages = list(record.pages)
    labels = list(record.page_labels) if record.page_labels is not None else None
    for _ in range(n_events):
        donor_doc, donor_page, donor_ref = pool[rng.below(len(pool))]
        at = rng.below(len(pages) + 1)
        pages.insert(at, donor_ref)
        if labels is not None:
            labels.insert(at, OUT_OF_SCOPE_LABEL)
        log.append(
            {
                "doc_id": record.doc_id,
                "op": "inject",
                "donor_doc": donor_doc,
                "donor_page": donor_page,
                "insert_at": at,
            }
        )
    return replace(
        record,
        pages=tuple(pages),
        page_labels=tuple(labels) if labels is not None else None,
    )


def apply(
    manifest: Sequence[DocumentRecord], spec: PerturbSpec
) -> tuple[list[DocumentRecord], list[dict]]:
    """Perturb every document in the manifest; returns (records, provenance log).

    Deterministic: identical (manifest, spec) pairs produce identical output
    regardless of platform, run or processing order.
    """
    pool: list[tuple[str, int, str]] = []
    if spec.op == "inject_pages":
        pool = [
            (d.doc_id, i, ref)
            for d in spec.donors
            for i, ref in enumerate(d.pages)
        ]

    out = []
    log: list[dict] = []
    for record in manifest:
        rng = document_rng(spec.seed, record.doc_id)
        if spec.op == "shuffle_pages":
            out.append(_shuffle(record, rng, spec.rate, log))
        elif spec.op == "duplicate_pages":
            out.append(_duplicate(record, rng, spec.rate, log))
        elif spec.op == "drop_pages":
            out.append(_drop(record, rng, spec.rate, log))
        else:
            out.append(_inject(record, rng, spec.rate, pool, log))
    return out, log
