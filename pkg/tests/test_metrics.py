"""Accuracy and rank-based AUROC against an all-pairs oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memefusion.metrics import EvalResult, accuracy, auroc, evaluate

from util import auroc_brute_force


class TestAccuracy:
    def test_threshold_is_inclusive(self):
        # score exactly at threshold counts as the positive class
        assert accuracy(np.array([0.5]), np.array([1])) == 1.0
        assert accuracy(np.array([0.5]), np.array([0])) == 0.0

    def test_mean_over_examples(self):
        s = np.array([0.9, 0.2, 0.7, 0.1])
        y = np.array([1, 0, 0, 0])
        assert accuracy(s, y) == pytest.approx(0.75)

    def test_custom_threshold(self):
        s = np.array([0.3, 0.6])
        y = np.array([1, 1])
        assert accuracy(s, y, threshold=0.25) == 1.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            accuracy(np.array([]), np.array([]))


class TestAurocExact:
    def test_perfect_ranking_is_one(self):
        s = np.array([0.1, 0.2, 0.8, 0.9])
        y = np.array([0, 0, 1, 1])
        assert auroc(s, y) == 1.0

    def test_inverted_ranking_is_zero(self):
        s = np.array([0.9, 0.8, 0.2, 0.1])
        y = np.array([0, 0, 1, 1])
        assert auroc(s, y) == 0.0

    def test_all_scores_tied_is_half(self):
        s = np.full(10, 0.42)
        y = np.array([0, 1] * 5)
        assert auroc(s, y) == 0.5

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            auroc(np.array([0.1, 0.9]), np.array([1, 1]))
        with pytest.raises(ValueError):
            auroc(np.array([0.1, 0.9]), np.array([0, 0]))

    def test_small_case_by_hand(self):
        # pairs: (0.7,0.3) win, (0.7,0.7) tie, (0.2,0.3) loss, (0.2,0.7) loss
        s = np.array([0.7, 0.2, 0.3, 0.7])
        y = np.array([1, 1, 0, 0])
        assert auroc(s, y) == pytest.approx(1.5 / 4, abs=1e-15)

    def test_matches_brute_force_with_heavy_ties(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = rng.integers(2, 60)
            s = rng.integers(0, 4, size=n) / 4.0  # only 4 distinct values
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            assert auroc(s, y) == pytest.approx(
                auroc_brute_force(s, y), abs=1e-12
            )


@settings(max_examples=300, deadline=None)
@given(
    scores=st.lists(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=32),
        min_size=2,
        max_size=50,
    ),
    raw_labels=st.lists(st.integers(0, 1), min_size=2, max_size=50),
)
def test_auroc_property_matches_oracle(scores, raw_labels):
    n = min(len(scores), len(raw_labels))
    s = np.array(scores[:n])
    y = np.array(raw_labels[:n])
    if y.min() == y.max():
        y[0] = 1 - y[0]
    assert auroc(s, y) == pytest.approx(auroc_brute_force(s, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    raw=st.lists(st.integers(-5000, 5000), min_size=4, max_size=30),
    seed=st.integers(0, 10_000),
)
def test_auroc_invariant_under_monotone_transform(raw, seed):
    # rank statistic: strictly increasing maps leave it unchanged; a grid
    # of 1e-3 keeps distinct inputs distinct through exp(s/3) in float64
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=len(raw))
    if y.min() == y.max():
        y[0] = 1 - y[0]
    s = np.array(raw) / 1000.0
    assert auroc(s, y) == pytest.approx(auroc(np.exp(s / 3), y), abs=1e-12)


def test_complement_symmetry():
    rng = np.random.default_rng(5)
    s = rng.random(40)
    y = rng.integers(0, 2, size=40)
    y[0], y[1] = 0, 1
    assert auroc(s, y) + auroc(-s, y) == pytest.approx(1.0, abs=1e-12)


class TestEvaluate:
    def test_bundles_both_metrics(self):
        s = np.array([0.9, 0.8, 0.1, 0.2])
        y = np.array([1, 1, 0, 0])
        res = evaluate(s, y)
        assert isinstance(res, EvalResult)
        assert res.accuracy == 1.0
        assert res.auroc == 1.0
        assert res.n == 4
        assert res.threshold == 0.5
