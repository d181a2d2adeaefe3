import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tginfluence.errors import ContractError, UndefinedCorrelationError
from tginfluence.metrics import (
    evaluate_method,
    hit_rate,
    kendall_tau,
    top_fraction,
)
from tginfluence.sir import InfluenceLabel

from oracles import kendall_tau_brute


class TestKendall:
    def test_identical_distinct(self):
        a = np.array([3.0, 1.0, 2.0, 5.0])
        assert kendall_tau(a, a) == 1.0

    def test_reversed(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        assert kendall_tau(a, -a) == -1.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=30), rng.normal(size=30)
        assert kendall_tau(a, b) == pytest.approx(kendall_tau(b, a), abs=1e-15)

    def test_all_tied_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(UndefinedCorrelationError):
            kendall_tau([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_too_short(self):
        with pytest.raises(ContractError):
            kendall_tau([1.0], [2.0])

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            kendall_tau([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(2, 201))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            if trial % 2:
                # coarse quantization creates tie groups
                a = np.round(a * 2) / 2
                b = np.round(b * 2) / 2
            if np.all(a == a[0]) or np.all(b == b[0]):
                continue
            assert kendall_tau(a, b) == pytest.approx(
                kendall_tau_brute(a, b), abs=1e-12)

    def test_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = np.round(rng.normal(size=50), 1)
            b = np.round(rng.normal(size=50), 1)
            expected = scipy_stats.kendalltau(a, b).statistic
            assert kendall_tau(a, b) == pytest.approx(expected, abs=1e-12)

    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=60),
           st.data())
    @settings(max_examples=60, deadline=None)
    def test_property_monotone_transform_invariance(self, values, data):
        # 3-decimal grid keeps the affine/exp transforms injective in float64
        a = np.round(np.asarray(values), 3)
        b = np.round(np.asarray(data.draw(
            st.lists(st.floats(-50, 50, allow_nan=False),
                     min_size=len(values), max_size=len(values)))), 3)
        if np.all(a == a[0]) or np.all(b == b[0]):
            return
        base = kendall_tau(a, b)
        assert kendall_tau(3.0 * a + 7.0, b) == pytest.approx(base, abs=1e-12)
        assert kendall_tau(a, np.exp(b / 50.0)) == pytest.approx(base, abs=1e-9)


class TestHitRate:
    def test_perfect(self):
        scores = np.arange(20.0)
        assert hit_rate(scores, scores, 0.5) == 1.0

    def test_disjoint(self):
        pred = np.arange(10.0)
        truth = -np.arange(10.0)
        assert hit_rate(pred, truth, 0.3) == 0.0

    def test_three_of_ten(self):
        n = 100
        truth = np.arange(n, dtype=float)           # top-10: 90..99
        pred = truth.copy()
        # demote seven of the true top ten below everything else
        pred[93:] = -np.arange(7) - 1
        assert hit_rate(pred, truth, 0.10) == pytest.approx(0.3)

    def test_ceiling_k(self):
        scores = np.array([1.0, 2.0, 3.0])
        # ceil(0.5 * 3) = 2
        assert top_fraction(scores, 0.5) == {1, 2}

    def test_tie_break_ascending_id(self):
        scores = np.array([5.0, 5.0, 5.0, 1.0])
        assert top_fraction(scores, 0.5) == {0, 1}

    def test_empty_raises(self):
        with pytest.raises(ContractError):
            hit_rate(np.array([]), np.array([]), 0.5)

    def test_bad_fraction(self):
        with pytest.raises(ContractError):
            top_fraction(np.arange(4.0), 0.0)

    def test_swap_inside_intersection_invariant(self):
        rng = np.random.default_rng(3)
        truth = rng.permutation(30).astype(float)
        pred = truth.copy()
        top = sorted(top_fraction(pred, 0.2))
        pred[top[0]], pred[top[1]] = pred[top[1]], pred[top[0]]
        assert hit_rate(pred, truth, 0.2) == 1.0


class TestEvaluateMethod:
    def _labels(self, values):
        return {u: InfluenceLabel(u, 1, float(v)) for u, v in enumerate(values)}

    def test_perfect_prediction(self):
        values = [3.0, 1.0, 4.0, 1.5, 9.0]
        report = evaluate_method(np.array(values), self._labels(values),
                                 fractions=(0.2, 0.4), method="x", beta=0.1)
        assert report.tau == 1.0
        assert all(v == 1.0 for v in report.hit_rates.values())
        assert report.n == 5
        assert report.beta == 0.1

    def test_constant_predictions_surface_error(self):
        labels = self._labels([1.0, 2.0, 3.0])
        with pytest.raises(UndefinedCorrelationError):
            evaluate_method(np.zeros(3), labels)

    def test_missing_labels_listed(self):
        labels = self._labels([1.0, 2.0, 3.0])
        del labels[1]
        with pytest.raises(ContractError, match="1"):
            evaluate_method(np.arange(3.0), labels)

    def test_monotone_transform_leaves_report_unchanged(self):
        rng = np.random.default_rng(11)
        truth = rng.normal(size=40)
        pred = rng.normal(size=40)
        base = evaluate_method(pred, self._labels(truth))
        warped = evaluate_method(np.tanh(pred) * 5 + 2, self._labels(truth))
        assert warped.tau == pytest.approx(base.tau, abs=1e-12)
        assert warped.hit_rates == base.hit_rates
