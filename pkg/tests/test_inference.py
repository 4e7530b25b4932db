import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmtl.inference import (
    InferenceError,
    ScoreRecord,
    ScoreTable,
    argmax_pair,
    check_alpha,
    dmtl_predict_main,
    gmtl_predict,
    joint_log_posterior,
    predict_batch,
    predict_table,
    rescore,
    score_matrix,
)
from gmtl.priors import JointPrior, estimate_prior

L = math.log


def record(main, aux, label_main=0, label_aux=0, eid="e0"):
    return ScoreRecord(eid, np.log(main), np.log(aux), label_main, label_aux)


def random_record(rng, k_main=3, k_aux=4, eid="r"):
    main = rng.dirichlet(np.ones(k_main))
    aux = rng.dirichlet(np.ones(k_aux))
    return ScoreRecord(eid, np.log(main), np.log(aux),
                       int(rng.integers(k_main)), int(rng.integers(k_aux)))


def random_prior(rng, shape=(3, 4)):
    return estimate_prior(rng.integers(0, 30, size=shape), 1.0)


class TestScoreRecord:
    def test_rejects_unnormalized(self):
        with pytest.raises(InferenceError, match="normalize"):
            ScoreRecord("x", np.log([0.5, 0.6]), np.log([0.5, 0.5]), 0, 0)

    def test_tolerates_small_drift(self):
        ScoreRecord("x", np.log([0.5, 0.5 + 5e-7]), np.log([0.5, 0.5]), 0, 0)

    def test_label_range(self):
        with pytest.raises(InferenceError):
            record([0.5, 0.5], [0.5, 0.5], label_main=2)


class TestAlpha:
    @pytest.mark.parametrize("a", [0.0, 0.5, 1.0])
    def test_closed_interval(self, a):
        assert check_alpha(a) == a

    @pytest.mark.parametrize("a", [-1e-9, 1.0000001, 2])
    def test_outside(self, a):
        with pytest.raises(InferenceError):
            check_alpha(a)


class TestJointLogPosterior:
    def test_independent_uniform(self):
        np.testing.assert_allclose(joint_log_posterior(record([.5, .5], [.5, .5])), L(.25))

    def test_row_structure(self):
        got = joint_log_posterior(record([.9, .1], [.5, .5]))
        np.testing.assert_allclose(got, [[L(.45), L(.45)], [L(.05), L(.05)]], rtol=1e-14)

    def test_is_a_distribution(self):
        rng = np.random.default_rng(0)
        for i in range(50):
            joint = joint_log_posterior(random_record(rng))
            assert (joint <= 0).all()
            assert abs(np.exp(joint).sum() - 1) < 1e-6


class TestGmtlPredict:
    joint = np.array([[-1.0, -2.0], [-0.5, -3.0]])

    def test_alpha_zero_is_plain_argmax(self):
        assert argmax_pair(rescore(self.joint, JointPrior.uniform(2, 2), 0.0)) == (1, 0)

    def test_alpha_one_hand_computed(self):
        prior = JointPrior(np.array([[-0.1, -3.0], [-2.0, -3.0]]))
        scores = rescore(self.joint, prior, 1.0)
        # the prior is renormalized, which shifts every score by the same constant
        shift = scores - np.array([[-0.9, 1.0], [1.5, 0.0]])
        np.testing.assert_allclose(shift, shift[0, 0], atol=1e-12)
        assert argmax_pair(scores) == (1, 0)

    def test_ties_go_to_smallest_index(self):
        assert argmax_pair(np.zeros((2, 3))) == (0, 0)
        assert argmax_pair(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]])) == (0, 1)

    def test_unsmoothed_prior_rejected(self):
        prior = JointPrior.from_probs([[0.5, 0.0], [0.25, 0.25]])
        r = record([.5, .5], [.5, .5])
        assert gmtl_predict(r, prior, 0.0)[:2] == (0, 0)
        with pytest.raises(InferenceError, match="unsmoothed"):
            gmtl_predict(r, prior, 0.3)

    def test_shape_mismatch(self):
        with pytest.raises(InferenceError):
            gmtl_predict(record([.5, .5], [.5, .5]), JointPrior.uniform(2, 3), 0.5)

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(-1e3, 1e3))
    def test_constant_shift_invariance(self, seed, alpha, c):
        rng = np.random.default_rng(seed)
        r, prior = random_record(rng), random_prior(rng)
        scores = score_matrix(r, prior, alpha)
        assert argmax_pair(scores + c) == gmtl_predict(r, prior, alpha)[:2]

    @given(st.integers(0, 2**32 - 1))
    def test_scores_affine_in_alpha(self, seed):
        rng = np.random.default_rng(seed)
        r, prior = random_record(rng), random_prior(rng)
        mid = score_matrix(r, prior, 0.5)
        ends = 0.5 * score_matrix(r, prior, 0.0) + 0.5 * score_matrix(r, prior, 1.0)
        np.testing.assert_allclose(mid, ends, atol=1e-12, rtol=0)

    def test_uniform_prior_collapse(self):
        rng = np.random.default_rng(1)
        prior = JointPrior.uniform(3, 4)
        for i in range(200):
            r = random_record(rng)
            base = gmtl_predict(r, prior, 0.0)[:2]
            for alpha in (0.1, 0.5, 1.0):
                assert gmtl_predict(r, prior, alpha)[:2] == base

    def test_alpha_zero_main_matches_dmtl(self):
        rng = np.random.default_rng(2)
        prior = random_prior(rng)
        for i in range(500):
            r = random_record(rng)
            assert gmtl_predict(r, prior, 0.0).y == dmtl_predict_main(r)


class TestDmtl:
    @pytest.mark.parametrize("main,expected", [([.9, .1], 0), ([.5, .5], 0), ([.1, .9], 1)])
    def test_argmax(self, main, expected):
        assert dmtl_predict_main(record(main, [.5, .5])) == expected


class TestBatch:
    @pytest.fixture
    def corpus(self):
        rng = np.random.default_rng(3)
        return [random_record(rng, eid=f"r{i}") for i in range(300)], random_prior(rng)

    def test_singleton(self, corpus):
        records, prior = corpus
        single = gmtl_predict(records[0], prior, 0.7)
        (batched,) = predict_batch(records[:1], prior, 0.7)
        assert batched[:2] == single[:2]

    def test_workers_do_not_change_output(self, corpus):
        records, prior = corpus
        one = [p[:2] for p in predict_batch(records, prior, 0.4, workers=1)]
        four = [p[:2] for p in predict_batch(records, prior, 0.4, workers=4)]
        assert one == four

    def test_empty(self):
        with pytest.raises(InferenceError):
            predict_batch([], JointPrior.uniform(2, 2), 0.5)

    def test_error_names_example(self):
        prior = JointPrior.uniform(3, 3)
        with pytest.raises(InferenceError, match="^bad-7:"):
            predict_batch([record([.5, .5], [.5, .5], eid="bad-7")], prior, 0.5)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
    def test_vectorized_matches_scalar(self, corpus, alpha):
        records, prior = corpus
        table = ScoreTable.from_records(records)
        expected = [p[:2] for p in predict_batch(records, prior, alpha)]
        assert [tuple(p) for p in predict_table(table, prior, alpha).tolist()] == expected

    def test_table_roundtrip(self, corpus):
        records, _ = corpus
        back = ScoreTable.from_records(records).records()
        assert [r.example_id for r in back] == [r.example_id for r in records]
        np.testing.assert_array_equal(back[5].log_post_aux, records[5].log_post_aux)
