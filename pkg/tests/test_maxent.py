import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpcop import FitConfig, fit_pairs, fit_table
from lpcop.comoments import CoMomentTable, SelectionResult
from lpcop.lp_basis import build, max_degree_default
from lpcop.marginals import Marginal, from_samples
from lpcop.maxent import (
    FitError,
    discrete_kernel,
    fit,
    log_partition,
    model_from_theta,
    model_moments,
    smooth_cells,
)


def random_marginal(rng, k):
    p = rng.uniform(0.05, 1.0, size=k)
    return Marginal(np.arange(k, dtype=float), p / p.sum())


def random_model_inputs(rng, kx, ky):
    bx = build(random_marginal(rng, kx), kx - 1)
    by = build(random_marginal(rng, ky), ky - 1)
    idx = [(j, k) for j in range(1, bx.degree + 1) for k in range(1, by.degree + 1)]
    theta = rng.normal(scale=0.5, size=len(idx))
    return bx, by, idx, theta


def naive_log_z(bx, by, indices, theta):
    """Double loop over cells, no vectorisation and no max shift."""
    px, py = bx.marginal.probs, by.marginal.probs
    total = 0.0
    for a in range(px.size):
        for b in range(py.size):
            e = 0.0
            for (j, k), t in zip(indices, theta):
                e += t * bx.table[j - 1, a] * by.table[k - 1, b]
            total += px[a] * py[b] * math.exp(e)
    return math.log(total)


class TestLogPartition:
    def test_zero_theta(self):
        b = build(from_samples([0, 1, 2]), 2)
        assert log_partition(b, b, [(1, 1)], [0.0]) == 0.0

    def test_four_cell_closed_form(self):
        p, q, c = 0.3, 0.6, 0.7
        bx = build(Marginal(np.array([0.0, 1.0]), np.array([1 - p, p])), 1)
        by = build(Marginal(np.array([0.0, 1.0]), np.array([1 - q, q])), 1)
        tx = [-math.sqrt(p / (1 - p)), math.sqrt((1 - p) / p)]
        ty = [-math.sqrt(q / (1 - q)), math.sqrt((1 - q) / q)]
        z = sum(px * py * math.exp(c * a * b)
                for px, a in zip([1 - p, p], tx) for py, b in zip([1 - q, q], ty))
        assert log_partition(bx, by, [(1, 1)], [c]) == pytest.approx(math.log(z), abs=1e-14)

    @pytest.mark.parametrize("kx, ky", [(2, 2), (2, 5), (3, 4), (5, 5), (4, 3)])
    def test_naive_oracle(self, rng, kx, ky):
        for _ in range(5):
            bx, by, idx, theta = random_model_inputs(rng, kx, ky)
            assert abs(log_partition(bx, by, idx, theta) - naive_log_z(bx, by, idx, theta)) < 1e-12

    def test_overflow_safe(self):
        b = build(from_samples(np.arange(10)), 1)
        assert np.isfinite(log_partition(b, b, [(1, 1)], [800.0]))

    @pytest.mark.parametrize("h", [1e-5, 1e-6])
    def test_gradient_is_model_mean(self, rng, h):
        bx, by, idx, theta = random_model_inputs(rng, 4, 3)
        mean, _ = model_moments(bx, by, idx, theta)
        for i in range(len(idx)):
            e = np.zeros(len(idx))
            e[i] = h
            fd = (log_partition(bx, by, idx, theta + e) - log_partition(bx, by, idx, theta - e)) / (2 * h)
            assert abs(fd - mean[i]) < 1e-6

    def test_hessian_is_covariance(self, rng):
        bx, by, idx, theta = random_model_inputs(rng, 3, 3)
        _, cov = model_moments(bx, by, idx, theta)
        h = 1e-4
        for i in range(len(idx)):
            e = np.zeros(len(idx))
            e[i] = h
            up, _ = model_moments(bx, by, idx, theta + e)
            down, _ = model_moments(bx, by, idx, theta - e)
            np.testing.assert_allclose((up - down) / (2 * h), cov[i], atol=1e-6)
        assert np.min(np.linalg.eigvalsh(cov)) > -1e-12

    def test_midpoint_convexity(self, rng):
        bx, by, idx, _ = random_model_inputs(rng, 4, 4)
        target = rng.normal(scale=0.1, size=len(idx))

        def obj(th):
            return log_partition(bx, by, idx, th) - th @ target

        for _ in range(50):
            a = rng.normal(size=len(idx))
            b = rng.normal(size=len(idx))
            assert obj((a + b) / 2) <= (obj(a) + obj(b)) / 2 + 1e-12


def fitted(rng, n=400):
    x = rng.integers(0, 5, n)
    y = np.clip(x + rng.integers(-1, 2, n), 0, 5)
    return fit_pairs(x, y, FitConfig(penalty="none", max_order=3))


class TestFit:
    def test_moment_matching(self, rng):
        m = fitted(rng)
        assert len(m.indices) == 9
        np.testing.assert_allclose(m.expected_comeans(), m.targets, atol=1e-6)
        assert m.fit_report.converged and m.fit_report.grad_norm < 1e-8

    def test_normalisation(self, rng):
        m = fitted(rng)
        assert abs(m.joint_cells().sum() - 1.0) < 1e-10

    def test_monotone_invariance(self, rng):
        x = np.round(rng.normal(size=150), 1)
        y = x + np.round(rng.normal(size=150), 1)
        a = fit_pairs(x, y)
        b = fit_pairs(np.exp(x), y ** 3)
        assert a.indices == b.indices
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_zero_comeans_give_uniform(self):
        b = build(from_samples([0, 1, 2]), 2)
        t = CoMomentTable(values=np.zeros((2, 2)), n=10)
        m = fit(t, SelectionResult(chosen=(), pensum_trace=(), gamma=2.0), b, b)
        assert m.is_uniform and m.log_z == 0.0
        assert m.density(0.3, 0.9) == 1.0

    def test_selected_zero_comean(self):
        b = build(from_samples([0, 1, 2]), 2)
        t = CoMomentTable(values=np.zeros((2, 2)), n=10)
        m = fit(t, SelectionResult(chosen=((1, 1),), pensum_trace=(), gamma=2.0), b, b)
        assert m.theta[0] == 0.0 and m.log_z == 0.0

    def test_unreachable_targets_raise(self):
        # a comean of 1.5 lies outside the moment polytope of a Bernoulli pair
        b = build(Marginal(np.array([0.0, 1.0]), np.array([0.5, 0.5])), 1)
        t = CoMomentTable(values=np.array([[1.5]]), n=10)
        with pytest.raises(FitError) as info:
            fit(t, SelectionResult(chosen=((1, 1),), pensum_trace=(), gamma=2.0), b, b)
        assert info.value.grad_norm > 0

    def test_hellman(self, hellman):
        m = fit_table(hellman)
        assert m.indices == ((1, 1),)
        assert m.theta[0] == pytest.approx(0.234, abs=0.02)
        assert m.log_z == pytest.approx(0.03, abs=0.01)

    def test_display(self, hellman):
        s = fit_table(hellman).display()
        assert s.startswith("cop(u,v) = exp{0.226·S1(u;X)·S1(v;Y) - 0.026}")


class TestDensity:
    def test_odds_identity(self):
        p, q, c = 0.4, 0.25, 0.6
        bx = build(Marginal(np.array([0.0, 1.0]), np.array([1 - p, p])), 1)
        by = build(Marginal(np.array([0.0, 1.0]), np.array([1 - q, q])), 1)
        m = model_from_theta(bx, by, [(1, 1)], [c])
        d = m.cell_density()
        dx = bx.table[0, 1] - bx.table[0, 0]
        dy = by.table[0, 1] - by.table[0, 0]
        assert d[1, 1] * d[0, 0] / (d[0, 1] * d[1, 0]) == pytest.approx(math.exp(c * dx * dy), rel=1e-12)

    def test_out_of_range(self, rng):
        m = fitted(rng)
        with pytest.raises(ValueError):
            m.density(0.0, 0.5)
        with pytest.raises(ValueError):
            m.density(0.5, 1.2)

    def test_slice_masses_average_to_one(self, rng):
        # raw slices need not be proper densities; their marginal-weighted average is
        m = fitted(rng)
        d = m.cell_density()
        mass = d @ m.by.marginal.probs
        assert abs(m.bx.marginal.probs @ mass - 1.0) < 1e-10
        for cond in m.bx.marginal.atoms:
            s = m.ccd_slice("y|x", cond)
            assert abs(s.atoms() @ m.by.marginal.probs - 1.0) < 1e-12

    def test_grid_integrates_to_one(self, rng):
        m = fitted(rng)
        _, vals = m.grid(37)
        assert abs(vals.mean() - 1.0) < 1e-10


class TestCcdSlice:
    def ckd_like(self):
        mu = 79 / 203
        by = build(Marginal(np.array([0.0, 1.0]), np.array([1 - mu, mu])), 1)
        bx = build(from_samples(np.arange(12) ** 1.5), 4)
        return model_from_theta(bx, by, [(1, 1), (2, 1), (4, 1)], [-0.76, 0.18, -0.19])

    def test_slice_coefficients_at_y1(self):
        s = self.ckd_like().ccd_slice("x|y", 1)
        np.testing.assert_allclose(s.coefficients[[0, 1, 3]], [-0.95, 0.23, -0.24], atol=0.005)
        assert s.coefficients[2] == 0.0

    def test_binary_log_ratio(self):
        m = self.ckd_like()
        mu = m.by.marginal.probs[1]
        d1, d0 = m.ccd_slice("x|y", 1), m.ccd_slice("x|y", 0)
        np.testing.assert_allclose(d1.coefficients - d0.coefficients,
                                   m.theta_matrix()[:, 0] / math.sqrt(mu * (1 - mu)), atol=1e-12)

    def test_renormalised_and_raw(self, rng):
        m = fitted(rng)
        for cond in m.by.marginal.atoms:
            s = m.ccd_slice("x|y", cond)
            assert abs(s.atoms() @ m.bx.marginal.probs - 1.0) < 1e-12
            np.testing.assert_allclose(s.raw_atoms(), m.cell_density()[:, m.by.marginal.locate(cond)[0]],
                                       rtol=1e-12)
            assert s.constant == -m.log_z

    def test_uniform_slice(self):
        b = build(from_samples([0, 1, 2]), 2)
        m = model_from_theta(b, b, [], [])
        s = m.ccd_slice("y|x", 1)
        assert s(0.5) == 1.0

    def test_off_support(self, rng):
        with pytest.raises(ValueError):
            fitted(rng).ccd_slice("x|y", 2.5)


class TestSmoothing:
    def test_uniform_is_independence(self, hellman):
        m = fit_table(hellman, FitConfig(penalty=1e6))
        assert m.is_uniform
        p = smooth_cells(m, hellman)
        np.testing.assert_allclose(p, np.outer(hellman.row_totals, hellman.col_totals) / hellman.n ** 2,
                                   atol=1e-15)

    def test_kernel_normalisation(self, draft):
        m = fit_table(draft)
        k = discrete_kernel(m)
        n = draft.n
        val = np.sum(k * np.outer(draft.row_totals, draft.col_totals)) / n ** 2
        assert abs(val - 1.0) < 1e-8
        assert abs(smooth_cells(m, draft).sum() - 1.0) < 1e-8

    def test_dimension_mismatch(self, draft, hellman):
        with pytest.raises(ValueError, match="dimension mismatch"):
            smooth_cells(fit_table(draft), hellman)

    def test_accident_cells(self, shunter):
        m = fit_table(shunter, FitConfig(marginals="negbin"))
        p = smooth_cells(m, shunter, restrict=True)
        assert p[0, 0] == pytest.approx(0.19, abs=0.015)
        assert p[1, 1] == pytest.approx(0.10, abs=0.015)
        assert p[0, 1] == pytest.approx(0.13, abs=0.015)
        assert abs(smooth_cells(m).sum() - 1.0) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_random_fits_match_moments(kx, ky, seed):
    rng = np.random.default_rng(seed)
    n = 200
    x = rng.integers(0, kx, n)
    y = (x + rng.integers(0, ky, n)) % ky
    if np.unique(x).size < 2 or np.unique(y).size < 2:
        return
    m = fit_pairs(x, y, FitConfig(penalty="none", max_order=3))
    if m.is_uniform:
        return
    np.testing.assert_allclose(m.expected_comeans(), m.targets, atol=1e-6)
    assert abs(m.joint_cells().sum() - 1.0) < 1e-10
