from __future__ import annotations

import json
from pathlib import Path

import pytest
from PIL import Image

from pagewise import LabelMap, LabelSpace, boundary_space
from pagewise import io as pio
from pagewise.cli import main

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def run(*argv) -> int:
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture
def workdir(tmp_path):
    return tmp_path


class TestPipeline:
    def test_full_pipeline_matches_golden(self, workdir):
        docpreds = workdir / "docpreds.jsonl"
        report = workdir / "report.json"
        rc = workdir / "rc.csv"
        rel = workdir / "rel.csv"
        assert run(
            "validate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strict", "--quiet",
        ) == 0
        assert run(
            "aggregate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strategy", "soft_vote",
            "--out", docpreds,
            "--strict", "--quiet",
        ) == 0
        assert run(
            "evaluate",
            "--doc-preds", docpreds,
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--bins", "10",
            "--out", report,
            "--rc-curve", rc,
            "--reliability", rel,
            "--strict", "--quiet",
        ) == 0
        assert docpreds.read_bytes() == (FIXTURES / "golden_docpreds.jsonl").read_bytes()
        assert report.read_bytes() == (FIXTURES / "golden_report.json").read_bytes()
        assert rc.read_bytes() == (FIXTURES / "golden_rc.csv").read_bytes()
        assert rel.read_bytes() == (FIXTURES / "golden_reliability.csv").read_bytes()

    def test_repeat_runs_byte_identical(self, workdir):
        outs = []
        for name in ("a", "b"):
            out = workdir / f"{name}.jsonl"
            assert run(
                "aggregate",
                "--predictions", FIXTURES / "predictions.jsonl",
                "--manifest", FIXTURES / "manifest.jsonl",
                "--space", FIXTURES / "space.json",
                "--strategy", "max_conf",
                "--out", out,
                "--quiet",
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_jobs_flag_does_not_change_output(self, workdir):
        outs = []
        for jobs in ("1", "4"):
            out = workdir / f"j{jobs}.jsonl"
            assert run(
                "aggregate",
                "--predictions", FIXTURES / "predictions.jsonl",
                "--manifest", FIXTURES / "manifest.jsonl",
                "--space", FIXTURES / "space.json",
                "--strategy", "soft_vote",
                "--jobs", jobs,
                "--out", out,
                "--quiet",
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestUsageErrors:
    def test_evaluate_without_doc_preds(self):
        assert run("evaluate", "--manifest", FIXTURES / "manifest.jsonl") == 2

    def test_unknown_strategy(self, workdir):
        assert run(
            "aggregate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strategy", "psychic",
            "--out", workdir / "x.jsonl",
        ) == 2

    def test_bestcase_missing_file_named(self, workdir, capsys):
        code = run(
            "bestcase",
            "--doc-preds", workdir / "missing.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--baseline", "first",
            "--combos", "first",
            "--out", workdir / "bc.csv",
        )
        assert code == 2
        assert "missing.jsonl" in capsys.readouterr().err

    def test_bestcase_unknown_combo_strategy(self, workdir, capsys):
        docpreds = workdir / "dp.jsonl"
        run(
            "aggregate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strategy", "first",
            "--out", docpreds, "--quiet",
        )
        code = run(
            "bestcase",
            "--doc-preds", docpreds,
            "--manifest", FIXTURES / "manifest.jsonl",
            "--baseline", "first",
            "--combos", "first+psychic",
            "--out", workdir / "bc.csv",
        )
        assert code == 2
        assert "psychic" in capsys.readouterr().err

    def test_seed_rejected_where_inapplicable(self, workdir):
        assert run(
            "aggregate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strategy", "first",
            "--out", workdir / "x.jsonl",
            "--seed", "7",
        ) == 2

    def test_unknown_perturb_op(self, workdir):
        assert run(
            "perturb",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--op", "melt_pages",
            "--rate", "0.5",
            "--seed", "1",
            "--out", workdir / "m.jsonl",
        ) == 2


class TestValidationFailure:
    def test_incomplete_predictions_exit_1(self, workdir):
        partial = workdir / "partial.jsonl"
        lines = (FIXTURES / "predictions.jsonl").read_text().splitlines()
        partial.write_text("".join(line + "\n" for line in lines[:-3]))
        assert run(
            "validate",
            "--predictions", partial,
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--quiet",
        ) == 1


class TestBestcase:
    def test_table_and_schema(self, workdir):
        files = []
        for strategy in ("first", "second", "last"):
            out = workdir / f"{strategy}.jsonl"
            assert run(
                "aggregate",
                "--predictions", FIXTURES / "predictions.jsonl",
                "--manifest", FIXTURES / "manifest.jsonl",
                "--space", FIXTURES / "space.json",
                "--strategy", strategy,
                "--out", out, "--quiet",
            ) == 0
            files.append(out)
        table = workdir / "bestcase.csv"
        assert run(
            "bestcase",
            "--doc-preds", *files,
            "--manifest", FIXTURES / "manifest.jsonl",
            "--baseline", "first",
            "--combos", "first+second,first+last,second+last,first+second+last",
            "--out", table, "--quiet",
        ) == 0
        lines = table.read_text().splitlines()
        assert lines[0] == "combo,accuracy,delta"
        assert [row.split(",")[0] for row in lines[1:]] == [
            "first+second",
            "first+last",
            "second+last",
            "first+second+last",
        ]
        three_way = float(lines[4].split(",")[1])
        assert all(three_way >= float(row.split(",")[1]) for row in lines[1:4])


class TestPerturbCommand:
    def test_shuffle_deterministic(self, workdir):
        outs = []
        for name in ("a", "b"):
            out = workdir / f"{name}.jsonl"
            log = workdir / f"{name}_log.jsonl"
            assert run(
                "perturb",
                "--manifest", FIXTURES / "manifest.jsonl",
                "--op", "shuffle_pages",
                "--rate", "1.0",
                "--seed", "7",
                "--out", out,
                "--log", log,
                "--quiet",
            ) == 0
            outs.append((out.read_bytes(), log.read_bytes()))
        assert outs[0] == outs[1]

    def test_inject_requires_donors(self, workdir):
        assert run(
            "perturb",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--op", "inject_pages",
            "--rate", "0.5",
            "--seed", "3",
            "--out", workdir / "m.jsonl",
        ) == 2


class TestGridCommand:
    def test_writes_one_png_per_document(self, workdir):
        pages = workdir / "pages"
        pages.mkdir()
        manifest = workdir / "m.jsonl"
        records = []
        from pagewise import DocumentRecord

        for d in range(3):
            refs = []
            for i in range(d + 1):
                ref = f"doc{d}_p{i}.png"
                Image.new("L", (30, 40), 40 * d + 10 * i).save(pages / ref)
                refs.append(ref)
            records.append(DocumentRecord(f"doc{d}", tuple(refs), label=0))
        pio.write_manifest(records, manifest)
        out_dir = workdir / "grids"
        assert run(
            "grid",
            "--manifest", manifest,
            "--size", "224x224",
            "--mode", "stretch",
            "--out-dir", out_dir,
            "--root", pages,
            "--quiet",
        ) == 0
        files = sorted(p.name for p in out_dir.iterdir())
        assert files == ["doc0.png", "doc1.png", "doc2.png"]
        assert Image.open(out_dir / "doc0.png").size == (224, 224)


class TestSegmentCommand:
    def test_two_stage(self, workdir):
        from pagewise import DocumentRecord, PagePrediction, PredictionSet

        space = LabelSpace("document_level", ("a", "b"))
        manifest = workdir / "m.jsonl"
        pio.write_manifest(
            [DocumentRecord("s1", ("p0", "p1", "p2"), label=0)], manifest
        )
        bpath = workdir / "boundary.jsonl"
        bits = [1, 0, 1]
        pio.write_predictions(
            PredictionSet(
                boundary_space(),
                tuple(
                    PagePrediction("s1", i, (0.1, 0.9) if b else (0.9, 0.1))
                    for i, b in enumerate(bits)
                ),
            ),
            bpath,
        )
        cpath = workdir / "classes.jsonl"
        pio.write_predictions(
            PredictionSet(
                space,
                (
                    PagePrediction("s1", 0, (0.8, 0.2)),
                    PagePrediction("s1", 1, (0.7, 0.3)),
                    PagePrediction("s1", 2, (0.1, 0.9)),
                ),
            ),
            cpath,
        )
        out = workdir / "segments.csv"
        spath = workdir / "space.json"
        pio.write_label_space(space, spath)
        assert run(
            "segment",
            "--boundary-preds", bpath,
            "--class-preds", cpath,
            "--space", spath,
            "--manifest", manifest,
            "--strategy", "soft_vote",
            "--out", out,
            "--quiet",
        ) == 0
        assert out.read_text().splitlines() == [
            "stream_id,start,end,label",
            "s1,0,1,0",
            "s1,2,2,1",
        ]


class TestBundleEvalCommand:
    def test_rows(self, workdir):
        docpreds = workdir / "dp.jsonl"
        run(
            "aggregate",
            "--predictions", FIXTURES / "predictions.jsonl",
            "--manifest", FIXTURES / "manifest.jsonl",
            "--space", FIXTURES / "space.json",
            "--strategy", "soft_vote",
            "--out", docpreds, "--quiet",
        )
        out = workdir / "bundles.csv"
        assert run(
            "bundle-eval",
            "--doc-preds", docpreds,
            "--manifest", FIXTURES / "manifest.jsonl",
            "--out", out,
            "--quiet",
        ) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "bundle_id,n_documents,per_document_accuracy,exact_match"
        assert len(lines) == 5  # 20 docs in bundles of 5


class TestCountTypesCommand:
    def test_counts(self, workdir):
        from pagewise import PagePrediction, PredictionSet

        space = LabelSpace("page_level", ("receipt", "ticket", "invoice"))
        spath = workdir / "space.json"
        pio.write_label_space(space, spath)
        ppath = workdir / "regions.jsonl"
        pio.write_predictions(
            PredictionSet(
                space,
                (
                    PagePrediction("img1", 0, (0.8, 0.1, 0.1)),
                    PagePrediction("img1", 1, (0.7, 0.2, 0.1)),
                    PagePrediction("img1", 2, (0.2, 0.7, 0.1)),
                ),
            ),
            ppath,
        )
        out = workdir / "counts.csv"
        assert run(
            "count-types",
            "--predictions", ppath,
            "--space", spath,
            "--out", out,
            "--quiet",
        ) == 0
        assert out.read_text().splitlines() == [
            "doc_id,receipt,ticket,invoice",
            "img1,2,1,0",
        ]


class TestMapLabelsCommand:
    def test_manifest_page_labels(self, workdir):
        from pagewise import DocumentRecord

        source = LabelSpace("page_level", ("id_front", "id_back", "payslip_page"))
        target = LabelSpace("document_level", ("id_card", "payslip"))
        mpath = workdir / "map.json"
        pio.write_label_map(LabelMap(source, target, (0, 0, 1)), mpath)
        manifest = workdir / "m.jsonl"
        pio.write_manifest(
            [
                DocumentRecord("d1", ("p0", "p1"), page_labels=(0, 1)),
                DocumentRecord("d2", ("p0",), page_labels=(2,)),
                DocumentRecord("d3", ("p0", "p1"), page_labels=(0, 2)),
            ],
            manifest,
        )
        out = workdir / "labels.csv"
        assert run(
            "map-labels",
            "--manifest", manifest,
            "--map", mpath,
            "--rule", "unanimous",
            "--out", out,
            "--quiet",
        ) == 0
        assert out.read_text().splitlines() == [
            "doc_id,label",
            "d1,0",
            "d2,1",
            "d3,-1",  # conflict marker
        ]


class TestExternalDocumentStrategy:
    def test_grid_style_document_records(self, workdir):
        from pagewise import DocumentRecord, PredictionSet

        space = LabelSpace("document_level", ("a", "b"))
        spath = workdir / "space.json"
        pio.write_label_space(space, spath)
        manifest = workdir / "m.jsonl"
        pio.write_manifest(
            [DocumentRecord("d1", ("p0",), label=1), DocumentRecord("d2", ("p0",), label=0)],
            manifest,
        )
        ppath = workdir / "doc_scores.jsonl"
        pio.write_predictions(
            PredictionSet(space, (), {"d1": (0.3, 0.7), "d2": (0.6, 0.4)}),
            ppath,
        )
        out = workdir / "dp.jsonl"
        assert run(
            "aggregate",
            "--predictions", ppath,
            "--manifest", manifest,
            "--space", spath,
            "--strategy", "external_document",
            "--out", out,
            "--quiet",
        ) == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [(r["doc_id"], r["label"]) for r in rows] == [("d1", 1), ("d2", 0)]
