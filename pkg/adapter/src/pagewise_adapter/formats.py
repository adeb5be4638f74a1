"""Readers and writer for the engine's file formats.

Deliberately self-contained: the adapter talks to the evaluation engine only
through files (and its CLI), never through its Python API. Prediction files
are written in the engine's canonical form: one compact JSON object per line,
keys sorted, records sorted by (doc_id, page_index), UTF-8 with LF endings.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence


class AdapterError(Exception):
    pass


def read_manifest(path: Path) -> list[dict]:
    """Minimal manifest parse: doc_id and pages per record."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(obj, dict) or "doc_id" not in obj or "pages" not in obj:
                raise AdapterError(f"{path}:{lineno}: not a manifest record")
            if not obj["pages"]:
                raise AdapterError(f"{path}:{lineno}: document without pages")
            records.append(obj)
    return records


def read_label_space_size(path: Path) -> int:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    classes = obj.get("classes")
    if not isinstance(classes, list) or not classes:
        raise AdapterError(f"{path}: no classes in label space file")
    return len(classes)


def write_predictions(
    rows: Iterable[tuple[str, int, Sequence[float]]], path: Path
) -> Path:
    """rows: (doc_id, page_index, probs); written in canonical order."""
    lines = []
    for doc_id, page_index, probs in sorted(rows, key=lambda r: (r[0], r[1])):
        obj = {
            "doc_id": doc_id,
            "level": "page",
            "page_index": page_index,
            "probs": [float(p) for p in probs],
        }
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in lines))
    return Path(path)
