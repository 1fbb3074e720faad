import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from nsw.errors import DegenerateWindow, NegativeVariance, NonPositiveEquity, NotPSD, TooShort, WindowTooShort
from nsw.portfolio import (
    MomentEstimate,
    ParcelWeights,
    estimate_moments,
    higher_moment_diagnostic,
    log_returns,
    objective_P,
    optimize_parcel,
    project_weights,
)


def moment(x, lam, window=256, horizon=8):
    return MomentEstimate(np.asarray(x, float), np.asarray(lam, float), window, horizon)


def parcel_grid_points(m_count, step=0.01):
    k = int(round(1.0 / step))
    pts = [
        np.array(c, dtype=float) / k
        for c in itertools.product(range(k + 1), repeat=m_count)
        if sum(c) <= k
    ]
    return np.array(pts)


def parcel_grid_search(m, theta, step=0.01):
    """Brute-force oracle over the weight grid: best P and all near-tied maximizers."""
    w = parcel_grid_points(m.n_instruments, step)
    z = w @ m.mean_returns
    var = np.einsum("ni,ij,nj->n", w, m.covariance, w)
    sigma = np.sqrt(np.maximum(var, 0.0))
    margin = (1.0 - theta) * z
    p = np.where(
        sigma > 0,
        ndtr(np.divide(margin, sigma, out=np.zeros_like(margin), where=sigma > 0)),
        np.where(margin > 0, 1.0, np.where(margin == 0, 0.5, 0.0)),
    )
    best = p.max()
    return best, w[p >= best - 1e-9]


def canonical_weights(w, best_p):
    """P fixes only the weight direction; compare points scaled to the
    full-investment face whenever the margin is positive."""
    w = np.asarray(w, dtype=float)
    if best_p > 0.5 + 1e-12 and w.sum() > 0:
        return w / w.sum()
    return w


class TestLogReturns:
    def test_constant_equity(self):
        assert np.allclose(log_returns(np.ones(10), 2), 0.0, atol=0)

    def test_doubling(self):
        eq = 2.0 ** np.arange(6)
        assert np.allclose(log_returns(eq, 1), math.log(2), atol=1e-15)

    def test_example_values(self):
        out = log_returns([1.0, 1.1, 1.21], 1)
        assert np.allclose(out, [math.log(1.1), math.log(1.1)], atol=1e-12)

    def test_errors(self):
        with pytest.raises(NonPositiveEquity):
            log_returns([1.0, -0.5, 1.0], 1)
        with pytest.raises(TooShort):
            log_returns([1.0, 1.1], 5)


class TestEstimateMoments:
    def test_identical_sequences(self, rng):
        x = rng.normal(size=300)
        m = estimate_moments([x, x], window=256, horizon=8)
        var = x[-256:].var()
        assert m.covariance[0, 0] == pytest.approx(var, rel=1e-12)
        assert m.covariance[0, 1] == pytest.approx(var, rel=1e-12)

    def test_negation_antisymmetry(self, rng):
        x = rng.normal(size=300)
        m = estimate_moments([x, -x], window=256, horizon=8)
        assert m.covariance[0, 1] == pytest.approx(-m.covariance[0, 0], abs=1e-12)

    def test_independent_streams_decorrelate(self, rng):
        a = rng.normal(size=10_000)
        b = rng.normal(size=10_000)
        m = estimate_moments([a, b], window=10_000, horizon=8)
        corr = m.covariance[0, 1] / math.sqrt(m.covariance[0, 0] * m.covariance[1, 1])
        assert abs(corr) < 0.05

    def test_population_normalization(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        m = estimate_moments([x], window=4, horizon=1)
        assert m.covariance[0, 0] == pytest.approx(x.var(), abs=1e-15)  # 1/T, not 1/(T-1)

    def test_window_too_short(self):
        with pytest.raises(WindowTooShort):
            estimate_moments([np.ones(10)], window=20, horizon=1)


class TestObjective:
    def test_zero_mean_gives_half(self):
        m = moment([0.0, 0.0], np.eye(2) * 0.01)
        assert objective_P([0.4, 0.3], m, 0.25) == 0.5

    def test_closed_form_example(self):
        m = moment([0.1], [[0.04]])
        # Z = 0.1, sigma = 0.2, theta = 1/4: Phi(0.075/0.2) = Phi(0.375)
        assert objective_P([1.0], m, 0.25) == pytest.approx(0.6461697666, abs=1e-9)

    def test_theta_one_gives_half(self):
        m = moment([0.2, 0.1], np.eye(2) * 0.01)
        assert objective_P([0.5, 0.5], m, 1.0) == 0.5

    def test_sigma_zero_branches(self):
        up = moment([0.1], [[0.0]])
        assert objective_P([1.0], up, 0.25) == 1.0
        down = moment([-0.1], [[0.0]])
        assert objective_P([1.0], down, 0.25) == 0.0
        flat = moment([0.0], [[0.0]])
        assert objective_P([1.0], flat, 0.25) == 0.5

    def test_negative_variance(self):
        m = moment([0.1, 0.1], [[1.0, -2.0], [-2.0, 1.0]])
        with pytest.raises(NegativeVariance):
            objective_P([0.5, 0.5], m, 0.25)

    @given(scale=st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=40, deadline=None)
    def test_scale_invariance(self, scale):
        m1 = moment([0.05, 0.01], [[0.01, 0.002], [0.002, 0.02]])
        m2 = moment(
            np.array([0.05, 0.01]) * scale,
            np.array([[0.01, 0.002], [0.002, 0.02]]) * scale**2,
        )
        w = [0.3, 0.5]
        assert objective_P(w, m2, 0.25) == pytest.approx(objective_P(w, m1, 0.25), rel=1e-9)

    @given(a=st.floats(0, 1), b=st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_bounds(self, a, b):
        if a + b > 1:
            a, b = a / 2, b / 2
        m = moment([0.1, -0.05], [[0.02, 0.001], [0.001, 0.01]])
        assert 0.0 <= objective_P([a, b], m, 0.25) <= 1.0


class TestProjection:
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
    @settings(max_examples=150, deadline=None)
    def test_feasible_and_idempotent(self, v):
        w = project_weights(np.array(v))
        assert np.all(w >= 0)
        assert w.sum() <= 1.0 + 1e-12
        assert np.allclose(project_weights(w), w, atol=1e-12)

    def test_interior_point_unchanged(self):
        v = np.array([0.2, 0.3])
        assert np.array_equal(project_weights(v), v)

    def test_simplex_projection(self):
        w = project_weights(np.array([0.9, 0.9]))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert w[0] == pytest.approx(w[1], abs=1e-12)


class TestOptimizer:
    def test_single_asset_full_investment(self):
        m = moment([0.1], [[0.04]])
        res = optimize_parcel(m, 0.25, tol=1e-8)
        assert res.weights.n[0] == pytest.approx(1.0, abs=1e-6)
        assert res.converged

    def test_identical_assets_symmetric(self):
        lam = np.eye(2) * 0.04
        m = moment([0.05, 0.05], lam)
        res = optimize_parcel(m, 0.25)
        assert abs(res.weights.n[0] - res.weights.n[1]) < 1e-6

    def test_two_asset_example_vs_grid(self):
        m = moment([0.10, 0.02], np.diag([0.04, 0.0004]))
        res = optimize_parcel(m, 0.25, tol=1e-8)
        best_p, maximizers = parcel_grid_search(m, 0.25)
        assert res.p_theta >= best_p - 1e-6
        dists = [np.abs(canonical_weights(w, best_p) - res.weights.n).max() for w in maximizers]
        assert min(dists) <= 0.02

    def test_never_below_start(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.normal(size=(3, 3))
            lam = a @ a.T * 0.001 + np.eye(3) * 1e-5
            x = rng.normal(0.02, 0.05, size=3)
            m = moment(x, lam)
            res = optimize_parcel(m, 0.25)
            start = objective_P(np.full(3, 1 / 3), m, 0.25)
            assert res.p_theta >= start - 1e-12

    def test_kkt_residual_small(self):
        m = moment([0.08, 0.03], [[0.02, 0.004], [0.004, 0.01]])
        res = optimize_parcel(m, 0.25, tol=1e-7)
        assert res.kkt_residual < 1e-7

    def test_all_negative_means_goes_to_cash(self):
        m = moment([-0.05, -0.02], np.eye(2) * 0.01)
        res = optimize_parcel(m, 0.25)
        assert np.allclose(res.weights.n, 0.0, atol=0)
        assert res.p_theta == 0.5

    def test_zero_moments_keep_equal_weights(self):
        m = moment([0.0, 0.0, 0.0], np.zeros((3, 3)))
        res = optimize_parcel(m, 0.25)
        assert np.allclose(res.weights.n, 1 / 3, atol=0)

    def test_not_psd(self):
        m = moment([0.1, 0.1], [[1.0, -2.0], [-2.0, 1.0]])
        with pytest.raises(NotPSD):
            optimize_parcel(m, 0.25)

    def test_random_instances_against_grid(self):
        rng = np.random.default_rng(77)
        for m_count in (2, 3):
            for _ in range(2):
                a = rng.normal(size=(m_count, m_count))
                lam = a @ a.T * 4e-4 + np.eye(m_count) * 1e-6
                x = np.abs(rng.normal(0.03, 0.03, size=m_count)) + 0.005
                m = moment(x, lam)
                for theta in (0.1, 0.5):
                    res = optimize_parcel(m, theta, tol=1e-7)
                    best_p, maximizers = parcel_grid_search(m, theta)
                    assert res.p_theta >= best_p - 1e-6
                    dists = [np.abs(canonical_weights(w, best_p) - res.weights.n).max() for w in maximizers]
                    assert min(dists) <= 0.02

    def test_argmax_scale_invariant(self):
        x = np.array([0.06, 0.02])
        lam = np.array([[0.01, 0.002], [0.002, 0.02]])
        a = optimize_parcel(moment(x, lam), 0.25, tol=1e-8)
        b = optimize_parcel(moment(3.0 * x, 9.0 * lam), 0.25, tol=1e-8)
        assert np.abs(a.weights.n - b.weights.n).max() < 1e-6

    def test_feasibility_always(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = rng.normal(size=(3, 3))
            lam = a @ a.T * 1e-3 + np.eye(3) * 1e-7
            m = moment(rng.normal(0, 0.05, size=3), lam)
            res = optimize_parcel(m, rng.uniform(0, 1))
            assert np.all(res.weights.n >= 0)
            assert res.weights.n.sum() <= 1 + 1e-12


class TestParcelWeights:
    def test_slack(self):
        w = ParcelWeights(np.array([0.2, 0.3]))
        assert w.slack == pytest.approx(0.5, abs=1e-15)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ParcelWeights(np.array([-0.2, 0.3]))

    def test_rejects_oversum(self):
        with pytest.raises(ValueError):
            ParcelWeights(np.array([0.7, 0.7]))


class TestHigherMoments:
    def test_gaussian_ratios_small(self):
        rng = np.random.default_rng(11)
        streams = rng.normal(size=(2, 1_000_000))
        diag = higher_moment_diagnostic(streams)
        assert diag.max_third < 0.01
        assert diag.max_fourth < 0.01

    def test_exponential_skew_detected(self):
        rng = np.random.default_rng(12)
        stream = rng.exponential(scale=1.0, size=200_000)
        diag = higher_moment_diagnostic([stream])
        assert diag.max_third > 0.1

    def test_constant_stream_degenerate(self):
        with pytest.raises(DegenerateWindow):
            higher_moment_diagnostic([np.ones(500)])

    def test_too_short(self):
        with pytest.raises(TooShort):
            higher_moment_diagnostic([np.ones(50)])
