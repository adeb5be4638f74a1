"""Command-line surface. Exit codes: 0 success, 1 data/validation failure,
2 usage error. Identical inputs and flags always produce byte-identical
output files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import io
from .aggregate import Strategy, aggregate_all
from .bestcase import bestcase_table, correctness
from .grid import GridConfig, write_grids
from .metrics import evaluate
from .model import BundleRecord, PagewiseError, boundary_space, validate
from .perturb import PERTURB_OPS, PerturbSpec, apply as perturb_apply
from .tasks import (
    classify_stream,
    count_page_types,
    evaluate_bundle,
    map_pages_to_document,
    two_stage_classify,
)


def _input_file(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def _strategy(text: str) -> Strategy:
    try:
        return Strategy.parse(text)
    except PagewiseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size {text!r}, expected HxW") from None


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _labels_from_manifest(records) -> dict[str, int]:
    return {r.doc_id: r.label for r in records if r.label is not None}


def cmd_validate(args) -> int:
    space = io.read_label_space(args.space, strict=args.strict)
    records = io.read_manifest(args.manifest, strict=args.strict)
    preds = io.read_predictions(args.predictions, space, strict=args.strict)
    report = validate(preds, records, space)
    _say(args, report.summary())
    return 0 if report.ok else 1


def cmd_aggregate(args) -> int:
    space = io.read_label_space(args.space, strict=args.strict)
    records = io.read_manifest(args.manifest, strict=args.strict)
    preds = io.read_predictions(args.predictions, space, strict=args.strict)
    strategy = args.strategy
    if strategy.id != "external_document":
        report = validate(preds, records, space)
        if not report.ok:
            print(report.summary(), file=sys.stderr)
            return 1
    result = aggregate_all(preds, records, [strategy], jobs=args.jobs)
    doc_preds = result[strategy.name]
    io.write_doc_predictions(doc_preds, args.out)
    _say(args, f"wrote {len(doc_preds)} predictions ({strategy.name}) to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    space = io.read_label_space(args.space, strict=args.strict)
    preds = io.read_doc_predictions(args.doc_preds, strict=args.strict)
    labels = _labels_from_manifest(records)
    report = evaluate(preds, labels, space, n_bins=args.bins)
    io.write_report(report, args.out)
    if args.rc_curve:
        io.write_rc_curve(report.rc_points, args.rc_curve)
    if args.reliability:
        io.write_reliability(report.bin_table, args.reliability)
    _say(args, f"{'strategy':<20} {'Acc':>8} {'F1':>8} {'F1_M':>8} {'ECE':>10} {'AURC':>10}")
    _say(
        args,
        f"{report.strategy:<20} {report.accuracy * 100:>8.3f} "
        f"{report.f1_weighted * 100:>8.3f} {report.f1_macro * 100:>8.3f} "
        f"{report.ece:>10.6f} {report.aurc:>10.6f}",
    )
    return 0


def cmd_bestcase(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    labels = _labels_from_manifest(records)
    vectors = {}
    for path in args.doc_preds:
        preds = io.read_doc_predictions(path, strict=args.strict)
        strategies = {p.strategy for p in preds}
        if len(strategies) != 1:
            print(f"error: {path} mixes strategies {sorted(strategies)}", file=sys.stderr)
            return 1
        name = strategies.pop()
        if name in vectors:
            print(f"error: strategy {name!r} supplied twice", file=sys.stderr)
            return 1
        vectors[name] = correctness(preds, labels)
    combos = [combo.split("+") for combo in args.combos.split(",") if combo]
    known = set(vectors)
    for combo in combos:
        for name in combo:
            if name not in known:
                print(
                    f"error: combo names strategy {name!r} with no prediction file "
                    f"(have: {sorted(known)})",
                    file=sys.stderr,
                )
                return 2
    if args.baseline not in known:
        print(
            f"error: baseline {args.baseline!r} with no prediction file "
            f"(have: {sorted(known)})",
            file=sys.stderr,
        )
        return 2
    rows = bestcase_table(vectors, combos, args.baseline)
    io.write_bestcase(rows, args.out)
    _say(args, f"baseline: {args.baseline}")
    _say(args, f"{'combo':<28} {'Acc':>8} {'delta':>8}")
    for row in rows:
        _say(args, f"{row.combo:<28} {row.accuracy * 100:>8.3f} {row.delta * 100:>+8.3f}")
    return 0


def cmd_segment(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    space = io.read_label_space(args.space, strict=args.strict)
    boundary = io.read_predictions(args.boundary_preds, boundary_space(), strict=args.strict)
    classes = io.read_predictions(args.class_preds, space, strict=args.strict)
    boundary_by_doc = boundary.by_document()
    classes_by_doc = classes.by_document()
    rows = []
    for record in sorted(records, key=lambda r: r.doc_id):
        b = boundary_by_doc.get(record.doc_id)
        c = classes_by_doc.get(record.doc_id)
        if not b or not c:
            raise PagewiseError(f"{record.doc_id}: missing stream predictions")
        for seg in two_stage_classify(b, c, args.strategy):
            rows.append((seg.stream_id, seg.start, seg.end, seg.predicted_label))
    io.write_csv(args.out, ["stream_id", "start", "end", "label"], rows)
    _say(args, f"wrote {len(rows)} segments to {args.out}")
    return 0


def cmd_bundle_eval(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    labels = _labels_from_manifest(records)
    preds = io.read_doc_predictions(args.doc_preds, strict=args.strict)
    strategies = {p.strategy for p in preds}
    if len(strategies) > 1:
        raise PagewiseError(f"mixed strategies in {args.doc_preds}: {sorted(strategies)}")
    by_doc = {p.doc_id: p for p in preds}
    grouped: dict[str, list[str]] = {}
    for record in records:
        if record.bundle_id is not None:
            grouped.setdefault(record.bundle_id, []).append(record.doc_id)
    if not grouped:
        raise PagewiseError("no bundles in manifest")
    rows = []
    exact_count = 0
    for bundle_id in sorted(grouped):
        bundle = BundleRecord(bundle_id, tuple(sorted(grouped[bundle_id])))
        per_doc, exact = evaluate_bundle(by_doc, bundle, labels)
        exact_count += exact
        rows.append((bundle_id, bundle.document_count, per_doc, "true" if exact else "false"))
    io.write_csv(
        args.out,
        ["bundle_id", "n_documents", "per_document_accuracy", "exact_match"],
        rows,
    )
    _say(
        args,
        f"{len(rows)} bundles, exact-match rate "
        f"{exact_count / len(rows):.4f} -> {args.out}",
    )
    return 0


def cmd_count_types(args) -> int:
    space = io.read_label_space(args.space, strict=args.strict)
    preds = io.read_predictions(args.predictions, space, strict=args.strict)
    rows = []
    for doc_id, regions in sorted(preds.by_document().items()):
        rows.append((doc_id, *count_page_types(regions, space)))
    io.write_csv(args.out, ["doc_id", *space.classes], rows)
    _say(args, f"wrote counts for {len(rows)} images to {args.out}")
    return 0


def cmd_perturb(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    donors = None
    if args.op == "inject_pages":
        if not args.donors:
            print("error: inject_pages requires --donors", file=sys.stderr)
            return 2
        donors = tuple(io.read_manifest(args.donors, strict=args.strict))
    spec = PerturbSpec(op=args.op, rate=args.rate, seed=args.seed, donors=donors)
    perturbed, log = perturb_apply(records, spec)
    io.write_manifest(perturbed, args.out)
    if args.log:
        io.write_provenance(log, args.log)
    _say(args, f"perturbed {len(perturbed)} documents ({args.op}) to {args.out}")
    return 0


def cmd_grid(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    if len(args.background) not in (1, 3):
        print("error: --background takes one grayscale or three RGB values", file=sys.stderr)
        return 2
    background = tuple(args.background) if len(args.background) == 3 else args.background[0]
    config = GridConfig(output_size=args.size, background=background, scaling=args.mode)
    written = write_grids(records, config, args.out_dir, root=args.root)
    _say(args, f"wrote {len(written)} grid images to {args.out_dir}")
    return 0


def cmd_map_labels(args) -> int:
    records = io.read_manifest(args.manifest, strict=args.strict)
    label_map = io.read_label_map(args.map, strict=args.strict)
    page_labels_by_doc: dict[str, list[int]] = {}
    if args.predictions:
        preds = io.read_predictions(args.predictions, label_map.source, strict=args.strict)
        for doc_id, pages in preds.by_document().items():
            page_labels_by_doc[doc_id] = classify_stream(pages)
    rows = []
    for record in sorted(records, key=lambda r: r.doc_id):
        if record.doc_id in page_labels_by_doc:
            page_labels = page_labels_by_doc[record.doc_id]
        elif record.page_labels is not None:
            page_labels = list(record.page_labels)
        else:
            raise PagewiseError(f"{record.doc_id}: no page labels or predictions")
        rows.append((record.doc_id, map_pages_to_document(page_labels, label_map, args.rule)))
    io.write_csv(args.out, ["doc_id", "label"], rows)
    _say(args, f"wrote {len(rows)} document labels to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagewise",
        description="Multi-page document classification: inference strategies "
        "and evaluation metrics over prediction files.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--strict", action="store_true", help="reject unknown fields")
    common.add_argument("--quiet", action="store_true", help="suppress console summaries")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check prediction coverage")
    p.add_argument("--predictions", type=_input_file, required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--space", type=_input_file, required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("aggregate", parents=[common], help="page probs -> document predictions")
    p.add_argument("--predictions", type=_input_file, required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--space", type=_input_file, required=True)
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("evaluate", parents=[common], help="metrics report for doc predictions")
    p.add_argument("--doc-preds", type=_input_file, required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--space", type=_input_file, required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--rc-curve", type=Path)
    p.add_argument("--reliability", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bestcase", parents=[common], help="OR-combined upper-bound accuracy")
    p.add_argument("--doc-preds", type=_input_file, nargs="+", required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--combos", required=True, help='e.g. "first+second,first+last"')
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bestcase)

    p = sub.add_parser("segment", parents=[common], help="two-stage stream segmentation")
    p.add_argument("--boundary-preds", type=_input_file, required=True)
    p.add_argument("--class-preds", type=_input_file, required=True)
    p.add_argument("--space", type=_input_file, required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bundle-eval", parents=[common], help="per-bundle accuracy and exact match")
    p.add_argument("--doc-preds", type=_input_file, required=True)
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_bundle_eval)

    p = sub.add_parser("count-types", parents=[common], help="page-type counts per multi-page image")
    p.add_argument("--predictions", type=_input_file, required=True)
    p.add_argument("--space", type=_input_file, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_count_types)

    p = sub.add_parser("perturb", parents=[common], help="deterministic manifest perturbations")
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--op", choices=PERTURB_OPS, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--log", type=Path)
    p.add_argument("--donors", type=_input_file)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("grid", parents=[common], help="compose page images into grid images")
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--size", type=_size, default=(224, 224))
    p.add_argument("--mode", choices=("stretch", "letterbox"), default="stretch")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--root", type=Path, help="directory page paths are relative to")
    p.add_argument(
        "--background", type=int, nargs="+", default=[255],
        help="grayscale value or three RGB values",
    )
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("map-labels", parents=[common], help="collapse page labels to document labels")
    p.add_argument("--manifest", type=_input_file, required=True)
    p.add_argument("--map", type=_input_file, required=True)
    p.add_argument("--rule", choices=("unanimous", "majority"), default="unanimous")
    p.add_argument("--predictions", type=_input_file, help="page predictions over the source space")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_map_labels)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PagewiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
