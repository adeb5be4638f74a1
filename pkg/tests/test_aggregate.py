from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pagewise import (
    DocumentRecord,
    PagePrediction,
    PagewiseError,
    PredictionSet,
    Strategy,
    aggregate_all,
    aggregate_document,
    external_scores,
    hard_vote,
    max_conf,
    sample_page,
    soft_vote,
)
from pagewise.model import argmax_lowest

from conftest import make_doc_preds, random_simplex
from oracles import ref_hard_vote, ref_max_conf, ref_sample, ref_soft_vote


class TestStrategy:
    def test_parse_plain(self):
        assert Strategy.parse("soft_vote") == Strategy("soft_vote")

    def test_parse_index(self):
        s = Strategy.parse("index:3")
        assert s.id == "index" and s.index == 3 and s.name == "index:3"

    def test_unknown_rejected(self):
        with pytest.raises(PagewiseError):
            Strategy.parse("grid")

    def test_negative_index_rejected(self):
        with pytest.raises(PagewiseError):
            Strategy("index", -1)

    def test_index_param_only_for_index(self):
        with pytest.raises(PagewiseError):
            Strategy("first", 2)


class TestSamplePage:
    def test_first(self):
        # [[0.6,0.4],[0.2,0.8]], first -> label 0, confidence 0.6
        preds = make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)])
        out = sample_page(preds, "first")
        assert (out.label, out.confidence) == (0, 0.6)
        assert not out.fallback_used
        assert (out.label, out.confidence) == ref_sample([p.probs for p in preds], 0)[:2]

    def test_last(self):
        preds = make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)])
        out = sample_page(preds, "last")
        assert (out.label, out.confidence) == (1, 0.8)

    def test_second_clamps_on_single_page(self):
        preds = make_doc_preds("d1", [(1.0, 0.0)])
        out = sample_page(preds, "second")
        assert (out.label, out.confidence, out.fallback_used) == (0, 1.0, True)

    def test_index_clamps_past_end(self):
        preds = make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)])
        out = sample_page(preds, 7)
        assert out.label == 1 and out.fallback_used
        assert out.strategy == "index:7"

    def test_empty_document(self):
        with pytest.raises(PagewiseError, match="empty document"):
            sample_page([], "first")

    def test_non_contiguous_rejected(self):
        preds = [PagePrediction("d1", 1, (0.5, 0.5))]
        with pytest.raises(PagewiseError):
            sample_page(preds, "first")


class TestMaxConf:
    def test_global_max(self):
        preds = make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)])
        out = max_conf(preds)
        assert (out.label, out.confidence) == (1, 0.8)
        assert out.scores == (0.2, 0.8)  # winning page's vector

    def test_class_tie_breaks_low(self):
        out = max_conf(make_doc_preds("d1", [(0.5, 0.5)]))
        assert (out.label, out.confidence) == (0, 0.5)

    def test_page_tie_breaks_low(self):
        out = max_conf(make_doc_preds("d1", [(0.9, 0.1), (0.9, 0.1)]))
        assert (out.label, out.confidence) == (0, 0.9)
        assert out.scores == (0.9, 0.1)


class TestSoftVote:
    def test_hand_example(self):
        # sums [0.8, 1.2] -> normalized [0.4, 0.6]
        out = soft_vote(make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)]))
        assert out.label == 1
        assert out.confidence == pytest.approx(0.6, abs=1e-12)
        assert out.scores[0] == pytest.approx(0.4, abs=1e-12)

    def test_single_page_identity(self):
        out = soft_vote(make_doc_preds("d1", [(0.3, 0.7)]))
        assert (out.label, out.confidence) == (1, 0.7)

    def test_tie_breaks_low(self):
        out = soft_vote(make_doc_preds("d1", [(0.5, 0.5), (0.5, 0.5)]))
        assert out.label == 0


class TestHardVote:
    def test_vote_count(self):
        # page argmaxes [0, 1, 1] -> label 1, confidence 2/3
        preds = make_doc_preds("d1", [(0.9, 0.1), (0.4, 0.6), (0.3, 0.7)])
        out = hard_vote(preds)
        assert out.label == 1
        assert out.confidence == pytest.approx(2 / 3, abs=1e-12)

    def test_tie_breaks_low(self):
        out = hard_vote(make_doc_preds("d1", [(0.9, 0.1), (0.2, 0.8)]))
        assert out.label == 0

    def test_single_voter_matches_first(self):
        preds = make_doc_preds("d1", [(0.2, 0.8)])
        assert hard_vote(preds).label == sample_page(preds, "first").label


class TestExternalScores:
    def test_wraps_vector(self):
        out = external_scores("d1", (0.1, 0.9))
        assert (out.label, out.confidence, out.strategy) == (1, 0.9, "external_document")


def _random_documents(seed, n_docs, choices_c=(2, 16), max_pages=12):
    rng = random.Random(seed)
    docs = []
    for d in range(n_docs):
        n_classes = rng.choice(choices_c)
        n_pages = rng.randint(1, max_pages)
        vectors = [random_simplex(rng, n_classes) for _ in range(n_pages)]
        docs.append((f"d{d:05d}", vectors))
    return docs


class TestOracleEquivalence:
    def test_brute_force_oracle_on_random_fixture(self):
        # independent loop-based oracle, 100 documents
        for doc_id, vectors in _random_documents(seed=99, n_docs=100):
            preds = make_doc_preds(doc_id, vectors)
            label, conf, _ = ref_max_conf(vectors)
            out = max_conf(preds)
            assert (out.label, out.confidence) == (label, conf)
            label, conf, _ = ref_soft_vote(vectors)
            out = soft_vote(preds)
            assert out.label == label
            assert out.confidence == pytest.approx(conf, abs=1e-12)
            label, conf, _ = ref_hard_vote(vectors)
            out = hard_vote(preds)
            assert (out.label, out.confidence) == (label, conf)


class TestAggregateAll:
    def _pset(self, space, preds):
        return PredictionSet(space, tuple(preds))

    def test_cardinality_and_order(self, doc_space_2):
        records = [
            DocumentRecord("d2", ("p0",)),
            DocumentRecord("d1", ("p0", "p1")),
        ]
        preds = make_doc_preds("d1", [(0.6, 0.4), (0.2, 0.8)]) + make_doc_preds(
            "d2", [(0.9, 0.1)]
        )
        strategies = [Strategy("first"), Strategy("soft_vote"), Strategy("hard_vote")]
        result = aggregate_all(self._pset(doc_space_2, preds), records, strategies)
        assert sum(len(v) for v in result.values()) == 6
        for preds_out in result.values():
            assert [p.doc_id for p in preds_out] == ["d1", "d2"]

    def test_single_page_corpus_first_is_page_argmax(self, doc_space_2):
        records = [DocumentRecord("d1", ("p0",))]
        preds = [PagePrediction("d1", 0, (0.3, 0.7))]
        result = aggregate_all(
            self._pset(doc_space_2, preds), records, [Strategy("first")]
        )
        assert result["first"][0].label == argmax_lowest((0.3, 0.7))

    def test_missing_pages_error_names_document(self, doc_space_2):
        records = [DocumentRecord("d1", ("p0", "p1"))]
        preds = [PagePrediction("d1", 0, (0.3, 0.7))]
        with pytest.raises(PagewiseError, match="d1"):
            aggregate_all(self._pset(doc_space_2, preds), records, [Strategy("soft_vote")])

    def test_external_document_path(self, doc_space_2):
        records = [DocumentRecord("d1", ("p0",))]
        pset = PredictionSet(doc_space_2, (), {"d1": (0.2, 0.8)})
        result = aggregate_all(pset, records, [Strategy("external_document")])
        assert result["external_document"][0].label == 1

    def test_external_document_missing_scores(self, doc_space_2):
        records = [DocumentRecord("d1", ("p0",))]
        with pytest.raises(PagewiseError, match="d1"):
            aggregate_all(
                PredictionSet(doc_space_2, ()), records, [Strategy("external_document")]
            )

    def test_jobs_do_not_change_output(self, doc_space_2):
        rng = random.Random(7)
        records, preds = [], []
        for d in range(40):
            doc_id = f"d{d:03d}"
            n_pages = rng.randint(1, 5)
            records.append(DocumentRecord(doc_id, tuple(f"p{i}" for i in range(n_pages))))
            preds += make_doc_preds(doc_id, [random_simplex(rng, 2) for _ in range(n_pages)])
        strategies = [Strategy("first"), Strategy("max_conf"), Strategy("soft_vote")]
        pset = self._pset(doc_space_2, preds)
        assert aggregate_all(pset, records, strategies, jobs=1) == aggregate_all(
            pset, records, strategies, jobs=4
        )


class TestProperties:
    def test_permutation_invariance_quick(self):
        rng = random.Random(3)
        kept = 0
        for doc_id, vectors in _random_documents(seed=3, n_docs=200, max_pages=6):
            preds = make_doc_preds(doc_id, vectors)
            outs = {
                "max_conf": max_conf(preds),
                "soft_vote": soft_vote(preds),
                "hard_vote": hard_vote(preds),
            }
            # only margin-protected trials are required to be stable
            soft_sorted = sorted(outs["soft_vote"].scores, reverse=True)
            if len(soft_sorted) > 1 and soft_sorted[0] - soft_sorted[1] <= 1e-6:
                continue
            kept += 1
            shuffled = list(vectors)
            rng.shuffle(shuffled)
            sp = make_doc_preds(doc_id, shuffled)
            assert max_conf(sp).label == outs["max_conf"].label
            assert soft_vote(sp).label == outs["soft_vote"].label
            assert hard_vote(sp).label == outs["hard_vote"].label
        assert kept > 100

    def test_soft_vote_reordered_sum_tolerance(self):
        rng = random.Random(5)
        for doc_id, vectors in _random_documents(seed=5, n_docs=50, max_pages=12):
            base = soft_vote(make_doc_preds(doc_id, vectors)).scores
            shuffled = list(vectors)
            rng.shuffle(shuffled)
            redone = soft_vote(make_doc_preds(doc_id, shuffled)).scores
            assert all(abs(a - b) < 1e-9 for a, b in zip(base, redone))

    def test_sample_first_not_permutation_invariant(self):
        vectors = [(0.9, 0.1), (0.1, 0.9)]
        before = sample_page(make_doc_preds("d1", vectors), "first").label
        after = sample_page(make_doc_preds("d1", vectors[::-1]), "first").label
        assert before != after

    def test_single_page_equivalences(self):
        rng = random.Random(11)
        for _ in range(50):
            vector = random_simplex(rng, rng.choice((2, 16)))
            preds = make_doc_preds("d1", [vector])
            sample = sample_page(preds, "first")
            soft = soft_vote(preds)
            mc = max_conf(preds)
            hard = hard_vote(preds)
            assert sample.label == soft.label == mc.label == hard.label
            # identical confidences where the definitions coincide; hard_vote's
            # vote share is 1.0 for any single-page document by definition
            assert sample.confidence == mc.confidence
            assert abs(sample.confidence - soft.confidence) < 1e-15
            assert hard.confidence == 1.0

    def test_scaling_invariance_of_labels(self):
        rng = random.Random(17)
        for doc_id, vectors in _random_documents(seed=17, n_docs=50, max_pages=6):
            factor = rng.choice((0.25, 0.5, 0.9))
            scaled = [tuple(p * factor for p in v) for v in vectors]
            for fn in (max_conf, soft_vote, hard_vote):
                assert (
                    fn(make_doc_preds(doc_id, vectors)).label
                    == fn(make_doc_preds(doc_id, scaled)).label
                )
            assert (
                sample_page(make_doc_preds(doc_id, vectors), "first").label
                == sample_page(make_doc_preds(doc_id, scaled), "first").label
            )

    @given(
        st.lists(
            st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
            min_size=1,
            max_size=8,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_every_strategy_satisfies_argmax_contract(self, raw):
        vectors = []
        for row in raw:
            total = sum(row)
            vectors.append(tuple(x / total for x in row))
        preds = make_doc_preds("d1", vectors)
        for strategy in ("first", "second", "last", "max_conf", "soft_vote", "hard_vote"):
            out = aggregate_document(preds, Strategy.parse(strategy))
            assert out.label == argmax_lowest(out.scores)
            assert 0.0 <= out.confidence <= 1.0
