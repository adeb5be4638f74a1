"""Batch prediction production over a manifest.

The adapter walks the manifest in canonical (doc_id, page_index) order and
asks the configured predictor for one probability vector per page, so a
given (config, manifest) pair always yields the same file bytes.
"""

from __future__ import annotations

import importlib
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .formats import AdapterError, read_label_space_size, read_manifest, write_predictions

PREDICTORS = ("dummy_uniform", "dummy_seeded_dirichlet", "external_model")


@dataclass(frozen=True)
class AdapterConfig:
    manifest: Path
    space: Path
    out: Path
    predictor: str = "dummy_uniform"
    seed: int | None = None
    batch_size: int = 32
    device: str = "cpu"
    entry_point: str | None = None
    root: Path | None = None
    strict: bool = True

    def __post_init__(self) -> None:
        if self.predictor not in PREDICTORS:
            raise AdapterError(f"unknown predictor: {self.predictor!r}")
        if self.predictor.startswith("dummy") and self.seed is None:
            raise AdapterError(f"{self.predictor} requires a seed")
        if self.predictor == "external_model" and not self.entry_point:
            raise AdapterError("external_model requires an entry point module:function")
        if self.batch_size < 1:
            raise AdapterError("batch_size must be >= 1")


def load_hook(entry_point: str) -> Callable[[bytes], Sequence[float]]:
    """Resolve a "module:function" scoring hook (image bytes -> probabilities)."""
    module_name, _, func_name = entry_point.partition(":")
    if not module_name or not func_name:
        raise AdapterError(f"bad entry point {entry_point!r}, expected module:function")
    try:
        module = importlib.import_module(module_name)
        return getattr(module, func_name)
    except (ImportError, AttributeError) as exc:
        raise AdapterError(f"cannot load hook {entry_point!r}: {exc}") from None


def _page_items(records) -> list[tuple[str, int, str]]:
    items = []
    for record in records:
        for i, ref in enumerate(record["pages"]):
            items.append((record["doc_id"], i, ref))
    items.sort(key=lambda t: (t[0], t[1]))
    return items


def produce(config: AdapterConfig) -> Path:
    """Run the configured predictor over every page and write the file."""
    records = read_manifest(config.manifest)
    n_classes = read_label_space_size(config.space)
    items = _page_items(records)

    rows: list[tuple[str, int, Sequence[float]]] = []
    if config.predictor == "dummy_uniform":
        vector = [1.0 / n_classes] * n_classes
        rows = [(doc_id, i, vector) for doc_id, i, _ in items]
    elif config.predictor == "dummy_seeded_dirichlet":
        rng = np.random.default_rng(config.seed)
        for doc_id, i, _ in items:
            rows.append((doc_id, i, rng.dirichlet(np.ones(n_classes)).tolist()))
    else:
        hook = load_hook(config.entry_point)
        for start in range(0, len(items), config.batch_size):
            for doc_id, i, ref in items[start : start + config.batch_size]:
                path = Path(config.root, ref) if config.root else Path(ref)
                try:
                    payload = path.read_bytes()
                except OSError as exc:
                    message = f"{doc_id} page {i}: cannot read image {ref}: {exc}"
                    if config.strict:
                        raise AdapterError(message) from None
                    warnings.warn(message)
                    continue
                probs = [float(p) for p in hook(payload)]
                if len(probs) != n_classes:
                    raise AdapterError(
                        f"{doc_id} page {i}: hook returned {len(probs)} scores "
                        f"for {n_classes} classes"
                    )
                rows.append((doc_id, i, probs))

    return write_predictions(rows, config.out)
