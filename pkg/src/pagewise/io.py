"""Bit-exact file formats.

Line-delimited records (UTF-8, LF) for manifests, predictions and provenance
logs; single JSON documents for label spaces, label maps and metric reports;
CSV for curves and tables. Writers canonicalize: records sorted by doc_id
(then page_index), object keys sorted, floats in shortest round-trip decimal
(up to 17 significant digits). Rewriting a read value is byte-identical.

Strict mode rejects unknown fields and non-normalized vectors at parse time;
lenient mode warns and defers normalization problems to validate().
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .bestcase import BestcaseRow
from .metrics import BinRow, MetricsReport, RCPoint
from .model import (
    PROB_SUM_TOLERANCE,
    DocPrediction,
    DocumentRecord,
    FormatError,
    LabelMap,
    LabelSpace,
    PagePrediction,
    PredictionSet,
)

_MANIFEST_REQUIRED = {"doc_id", "pages"}
_MANIFEST_FIELDS = _MANIFEST_REQUIRED | {
    "label",
    "page_labels",
    "bundle_id",
    "stream_id",
    "stream_position",
}
_PREDICTION_FIELDS = {"doc_id", "level", "page_index", "probs"}
_REPORT_FIELDS = {
    "strategy",
    "n_documents",
    "accuracy",
    "f1_weighted",
    "f1_macro",
    "ece",
    "aurc",
    "bin_table",
    "rc_points",
}

RC_HEADER = ["coverage", "risk"]
RELIABILITY_HEADER = [
    "bin_lo",
    "bin_hi",
    "count",
    "mean_confidence",
    "empirical_accuracy",
]
BESTCASE_HEADER = ["combo", "accuracy", "delta"]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _read_lines(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                raise FormatError(f"{path}:{lineno}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: record is not an object")
            yield lineno, obj


def _check_fields(
    obj: dict, allowed: set, required: set, where: str, strict: bool
) -> None:
    missing = required - obj.keys()
    if missing:
        raise FormatError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = obj.keys() - allowed
    if unknown:
        if strict:
            raise FormatError(f"{where}: unknown field(s) {sorted(unknown)}")
        warnings.warn(f"{where}: ignoring unknown field(s) {sorted(unknown)}")


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise FormatError(f"{where}: {message}")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# manifests

def read_manifest(path: Path, strict: bool = True) -> list[DocumentRecord]:
    records = []
    seen = set()
    for lineno, obj in _read_lines(Path(path)):
        where = f"{path}:{lineno}"
        _check_fields(obj, _MANIFEST_FIELDS, _MANIFEST_REQUIRED, where, strict)
        doc_id = obj["doc_id"]
        _require(isinstance(doc_id, str) and doc_id, where, "doc_id must be a string")
        _require(doc_id not in seen, where, f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        pages = obj["pages"]
        _require(
            isinstance(pages, list)
            and len(pages) >= 1
            and all(isinstance(p, str) for p in pages),
            where,
            "pages must be a non-empty list of strings",
        )
        label = obj.get("label")
        _require(label is None or isinstance(label, int), where, "label must be an int")
        page_labels = obj.get("page_labels")
        if page_labels is not None:
            _require(
                isinstance(page_labels, list)
                and all(isinstance(x, int) for x in page_labels),
                where,
                "page_labels must be a list of ints",
            )
            _require(
                len(page_labels) == len(pages),
                where,
                f"{len(page_labels)} page_labels for {len(pages)} pages",
            )
        stream_position = obj.get("stream_position")
        _require(
            stream_position is None or isinstance(stream_position, int),
            where,
            "stream_position must be an int",
        )
        records.append(
            DocumentRecord(
                doc_id=doc_id,
                pages=tuple(pages),
                label=label,
                page_labels=tuple(page_labels) if page_labels is not None else None,
                bundle_id=obj.get("bundle_id"),
                stream_id=obj.get("stream_id"),
                stream_position=stream_position,
            )
        )
    return records


def write_manifest(records: Iterable[DocumentRecord], path: Path) -> Path:
    lines = []
    for r in sorted(records, key=lambda r: r.doc_id):
        obj = {"doc_id": r.doc_id, "pages": list(r.pages)}
        if r.label is not None:
            obj["label"] = r.label
        if r.page_labels is not None:
            obj["page_labels"] = list(r.page_labels)
        if r.bundle_id is not None:
            obj["bundle_id"] = r.bundle_id
        if r.stream_id is not None:
            obj["stream_id"] = r.stream_id
        if r.stream_position is not None:
            obj["stream_position"] = r.stream_position
        lines.append(_dumps(obj))
    _write_text(Path(path), "".join(line + "\n" for line in lines))
    return Path(path)


# ---------------------------------------------------------------------------
# label spaces and maps

def read_label_space(path: Path, strict: bool = True) -> LabelSpace:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc.msg}") from None
    return _space_from_obj(obj, str(path), strict)


def _space_from_obj(obj, where: str, strict: bool) -> LabelSpace:
    _require(isinstance(obj, dict), where, "label space must be an object")
    _check_fields(obj, {"kind", "classes"}, {"kind", "classes"}, where, strict)
    classes = obj["classes"]
    _require(
        isinstance(classes, list) and all(isinstance(c, str) for c in classes),
        where,
        "classes must be a list of strings",
    )
    return LabelSpace(obj["kind"], tuple(classes))


def write_label_space(space: LabelSpace, path: Path) -> Path:
    obj = {"kind": space.kind, "classes": list(space.classes)}
    _write_text(Path(path), json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return Path(path)


def read_label_map(path: Path, strict: bool = True) -> LabelMap:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc.msg}") from None
    where = str(path)
    _require(isinstance(obj, dict), where, "label map must be an object")
    _check_fields(
        obj, {"source", "target", "mapping"}, {"source", "target", "mapping"},
        where, strict,
    )
    mapping = obj["mapping"]
    _require(
        isinstance(mapping, list) and all(isinstance(m, int) for m in mapping),
        where,
        "mapping must be a list of ints",
    )
    return LabelMap(
        source=_space_from_obj(obj["source"], where + ":source", strict),
        target=_space_from_obj(obj["target"], where + ":target", strict),
        mapping=tuple(mapping),
    )


def write_label_map(label_map: LabelMap, path: Path) -> Path:
    obj = {
        "source": {"kind": label_map.source.kind, "classes": list(label_map.source.classes)},
        "target": {"kind": label_map.target.kind, "classes": list(label_map.target.classes)},
        "mapping": list(label_map.mapping),
    }
    _write_text(Path(path), json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# predictions

def read_predictions(
    path: Path, space: LabelSpace, strict: bool = True
) -> PredictionSet:
    pages = []
    doc_scores: dict[str, tuple[float, ...]] = {}
    seen_pages = set()
    for lineno, obj in _read_lines(Path(path)):
        where = f"{path}:{lineno}"
        _check_fields(
            obj, _PREDICTION_FIELDS, {"doc_id", "level", "probs"}, where, strict
        )
        doc_id = obj["doc_id"]
        _require(isinstance(doc_id, str) and doc_id, where, "doc_id must be a string")
        level = obj["level"]
        _require(level in ("page", "document"), where, f"bad level {level!r}")
        probs = obj["probs"]
        _require(
            isinstance(probs, list)
            and all(isinstance(p, (int, float)) for p in probs),
            where,
            "probs must be a list of numbers",
        )
        _require(
            len(probs) == space.size,
            where,
            f"vector length {len(probs)} does not match label space size {space.size}",
        )
        _require(all(p >= 0 for p in probs), where, "negative probability")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            if strict:
                raise FormatError(f"{where}: entries sum to {total!r}, not 1")
            warnings.warn(f"{where}: entries sum to {total!r}, not 1")
        if level == "page":
            _require("page_index" in obj, where, "page record needs page_index")
            page_index = obj["page_index"]
            _require(
                isinstance(page_index, int) and page_index >= 0,
                where,
                "page_index must be a non-negative int",
            )
            key = (doc_id, page_index)
            _require(key not in seen_pages, where, f"duplicate prediction for {key}")
            seen_pages.add(key)
            pages.append(PagePrediction(doc_id, page_index, tuple(probs)))
        else:
            if "page_index" in obj:
                if strict:
                    raise FormatError(
                        f"{where}: document-level record must not carry page_index"
                    )
                warnings.warn(f"{where}: ignoring page_index on document record")
            _require(
                doc_id not in doc_scores,
                where,
                f"duplicate document-level prediction for {doc_id!r}",
            )
            doc_scores[doc_id] = tuple(float(p) for p in probs)
    return PredictionSet(space=space, pages=tuple(pages), doc_scores=doc_scores)


def write_predictions(prediction_set: PredictionSet, path: Path) -> Path:
    lines = []
    keyed = [(p.doc_id, 1, p.page_index, p) for p in prediction_set.pages]
    keyed += [
        (doc_id, 0, 0, scores) for doc_id, scores in prediction_set.doc_scores.items()
    ]
    for doc_id, kind, page_index, payload in sorted(keyed, key=lambda t: t[:3]):
        if kind == 1:
            obj = {
                "doc_id": doc_id,
                "level": "page",
                "page_index": page_index,
                "probs": list(payload.probs),
            }
        else:
            obj = {"doc_id": doc_id, "level": "document", "probs": list(payload)}
        lines.append(_dumps(obj))
    _write_text(Path(path), "".join(line + "\n" for line in lines))
    return Path(path)


def read_doc_predictions(path: Path, strict: bool = True) -> list[DocPrediction]:
    fields = {"doc_id", "strategy", "label", "confidence", "scores", "fallback_used"}
    required = {"doc_id", "strategy", "label", "confidence", "scores"}
    preds = []
    seen = set()
    for lineno, obj in _read_lines(Path(path)):
        where = f"{path}:{lineno}"
        _check_fields(obj, fields, required, where, strict)
        _require(isinstance(obj["label"], int), where, "label must be an int")
        _require(
            isinstance(obj["scores"], list), where, "scores must be a list"
        )
        key = (obj["doc_id"], obj["strategy"])
        _require(key not in seen, where, f"duplicate prediction for {key}")
        seen.add(key)
        preds.append(
            DocPrediction(
                doc_id=obj["doc_id"],
                strategy=obj["strategy"],
                label=obj["label"],
                confidence=float(obj["confidence"]),
                scores=tuple(obj["scores"]),
                fallback_used=bool(obj.get("fallback_used", False)),
            )
        )
    return preds


def write_doc_predictions(preds: Iterable[DocPrediction], path: Path) -> Path:
    lines = []
    for p in sorted(preds, key=lambda p: (p.doc_id, p.strategy)):
        obj = {
            "doc_id": p.doc_id,
            "strategy": p.strategy,
            "label": p.label,
            "confidence": p.confidence,
            "scores": list(p.scores),
            "fallback_used": p.fallback_used,
        }
        lines.append(_dumps(obj))
    _write_text(Path(path), "".join(line + "\n" for line in lines))
    return Path(path)


# ---------------------------------------------------------------------------
# reports and curves

def write_report(report: MetricsReport, path: Path) -> Path:
    obj = {
        "strategy": report.strategy,
        "n_documents": report.n_documents,
        "accuracy": report.accuracy,
        "f1_weighted": report.f1_weighted,
        "f1_macro": report.f1_macro,
        "ece": report.ece,
        "aurc": report.aurc,
        "bin_table": [list(row) for row in report.bin_table],
        "rc_points": [list(p) for p in report.rc_points],
    }
    _write_text(Path(path), json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return Path(path)


def read_report(path: Path, strict: bool = True) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc.msg}") from None
    where = str(path)
    _require(isinstance(obj, dict), where, "report must be an object")
    _check_fields(obj, _REPORT_FIELDS, _REPORT_FIELDS, where, strict)
    try:
        return MetricsReport(
            strategy=obj["strategy"],
            n_documents=obj["n_documents"],
            accuracy=obj["accuracy"],
            f1_weighted=obj["f1_weighted"],
            f1_macro=obj["f1_macro"],
            ece=obj["ece"],
            aurc=obj["aurc"],
            bin_table=tuple(BinRow(*row) for row in obj["bin_table"]),
            rc_points=tuple(RCPoint(*p) for p in obj["rc_points"]),
        )
    except TypeError as exc:
        raise FormatError(f"{where}: {exc}") from None


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with LF endings; floats rendered in round-trip decimal."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return Path(path)


def write_rc_curve(points: Sequence[RCPoint], path: Path) -> Path:
    return write_csv(Path(path), RC_HEADER, points)


def write_reliability(bins: Sequence[BinRow], path: Path) -> Path:
    return write_csv(Path(path), RELIABILITY_HEADER, bins)


def write_bestcase(rows: Sequence[BestcaseRow], path: Path) -> Path:
    return write_csv(Path(path), BESTCASE_HEADER, rows)


def write_curves(report: MetricsReport, out_dir: Path) -> list[Path]:
    """Write <strategy>_rc.csv and <strategy>_reliability.csv into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        write_rc_curve(report.rc_points, out_dir / f"{report.strategy}_rc.csv"),
        write_reliability(report.bin_table, out_dir / f"{report.strategy}_reliability.csv"),
    ]


# ---------------------------------------------------------------------------
# provenance logs

def write_provenance(log: Sequence[Mapping], path: Path) -> Path:
    _write_text(Path(path), "".join(_dumps(dict(rec)) + "\n" for rec in log))
    return Path(path)


def read_provenance(path: Path) -> list[dict]:
    return [obj for _, obj in _read_lines(Path(path))]
