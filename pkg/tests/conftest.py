from __future__ import annotations

import random

import pytest

from pagewise import DocumentRecord, LabelSpace, PagePrediction


@pytest.fixture
def page_space():
    return LabelSpace("page_level", ("id_front", "id_back", "payslip_page"))


@pytest.fixture
def doc_space_2():
    return LabelSpace("document_level", ("alpha", "beta"))


def make_doc_preds(doc_id: str, vectors) -> list[PagePrediction]:
    return [
        PagePrediction(doc_id, i, tuple(v)) for i, v in enumerate(vectors)
    ]


def random_simplex(rng: random.Random, size: int) -> tuple[float, ...]:
    raw = [rng.random() + 1e-9 for _ in range(size)]
    total = sum(raw)
    return tuple(x / total for x in raw)


def random_corpus(rng: random.Random, n_docs: int, n_classes: int, max_pages: int = 6):
    """Synthetic (records, predictions) with truth-leaning page vectors."""
    records = []
    preds = []
    for d in range(n_docs):
        doc_id = f"d{d:04d}"
        label = rng.randrange(n_classes)
        n_pages = rng.randint(1, max_pages)
        records.append(
            DocumentRecord(
                doc_id=doc_id,
                pages=tuple(f"{doc_id}/p{i}.png" for i in range(n_pages)),
                label=label,
            )
        )
        for i in range(n_pages):
            base = list(random_simplex(rng, n_classes))
            if rng.random() < 0.7:
                # tilt the mass toward the true label
                base[label] += 2.0
                total = sum(base)
                base = [x / total for x in base]
            preds.append(PagePrediction(doc_id, i, tuple(base)))
    return records, preds
