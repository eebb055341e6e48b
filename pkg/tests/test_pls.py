import numpy as np
import pytest
from scipy.integrate import dblquad

from autorho.bandla import RowBlockMatrix
from autorho.basis import KnotVector, design_matrix
from autorho.errors import DegenerateEdf, NumericallyUnsolvable, RankDeficientDesign
from autorho.interval import auto_interval, redf
from autorho.penalty import general_diff, standard_diff
from autorho.pls import PlsFit, gcv_of, new_problem, pls_objective, reml_of, solve_at

from helpers import dense_parts, dense_spectrum, make_problem


def dense_fit(prob, rho):
    B, y, D = dense_parts(prob)
    C = B.T @ B + np.exp(rho) * D.T @ D
    beta = np.linalg.solve(C, B.T @ y)
    H = B @ np.linalg.solve(C, B.T)
    return B, y, D, C, beta, np.trace(H)


def reml_oracle(prob, rho):
    """log(c1 c2 c3) - PLS(beta_hat) / (2 sigma^2) at the Pearson sigma^2, all dense."""
    B, y, D, C, beta, edf = dense_fit(prob, rho)
    n, p = B.shape
    m = p - D.shape[0]
    r = y - B @ beta
    s2 = (r @ r) / (n - edf)
    pls = r @ r + np.exp(rho) * np.sum((D @ beta) ** 2)
    log_c1 = -0.5 * n * np.log(2 * np.pi * s2)
    log_c2 = (-0.5 * (p - m) * np.log(2 * np.pi * s2) + 0.5 * (p - m) * rho
              + 0.5 * np.linalg.slogdet(D @ D.T)[1])
    log_c3 = 0.5 * p * np.log(2 * np.pi * s2) - 0.5 * np.linalg.slogdet(C)[1]
    return log_c1 + log_c2 + log_c3 - pls / (2 * s2)


class TestNewProblem:
    def test_unit_weights(self):
        a = make_problem(20, seed=1)
        b = new_problem(a.design, a.y, np.ones(a.n), a.penalty)
        np.testing.assert_array_equal(a.L.toarray(), b.L.toarray())
        np.testing.assert_array_equal(a.bty, b.bty)

    def test_identity_design(self):
        B = RowBlockMatrix(np.arange(5), np.ones((5, 1)), 5)
        prob = new_problem(B, np.arange(5.0), None, standard_diff(5, 2))
        np.testing.assert_array_equal(prob.L.toarray(), np.eye(5))

    def test_unsupported_basis_function(self):
        kv = KnotVector(np.arange(12.0), 4)
        xs = np.linspace(3, 4.9, 30)  # no data under the last splines
        B = design_matrix(kv, xs)
        with pytest.raises(RankDeficientDesign):
            new_problem(B, np.zeros(30), None, general_diff(kv, 2))

    def test_bad_inputs(self):
        prob = make_problem(15, seed=2)
        with pytest.raises(ValueError):
            new_problem(prob.design, prob.y[:-1], None, prob.penalty)
        with pytest.raises(ValueError):
            new_problem(prob.design, prob.y, -np.ones(prob.n), prob.penalty)
        with pytest.raises(ValueError):
            new_problem(prob.design, prob.y, None, standard_diff(prob.p + 1, 2))

    def test_log_det_outer(self):
        prob = make_problem(30, derivative=True, seed=3)
        D = prob.penalty.toarray()
        assert prob.log_det_ddt == pytest.approx(np.linalg.slogdet(D @ D.T)[1], rel=1e-10)


class TestSolveAt:
    def test_dense_hat_matrix(self):
        rng = np.random.default_rng(0)
        kv = KnotVector(np.sort(np.concatenate([[0, 0, 0], np.linspace(0, 1, 13), [1, 1, 1]])), 4)
        xs = np.sort(rng.uniform(0, 1, 60))
        prob = new_problem(design_matrix(kv, xs), rng.normal(size=60), None, general_diff(kv, 2))
        assert prob.p == 15
        fit = solve_at(prob, 0.0)
        _, _, _, _, beta, edf = dense_fit(prob, 0.0)
        assert fit.edf == pytest.approx(edf, abs=1e-8)
        np.testing.assert_allclose(fit.beta_hat, beta, rtol=1e-8, atol=1e-10)

    @pytest.mark.parametrize("weighted", [False, True])
    def test_normal_equations(self, weighted):
        prob = make_problem(40, weighted=weighted, seed=4)
        fit = solve_at(prob, 1.3)
        B, y, D, C, _, _ = dense_fit(prob, 1.3)
        res = C @ fit.beta_hat - B.T @ y
        assert np.abs(res).max() < 1e-9 * np.abs(B.T @ y).max()

    def test_limits(self):
        prob = make_problem(25, seed=5)
        assert solve_at(prob, -30.0).edf == pytest.approx(prob.p, abs=0.01)
        hi = auto_interval(prob, mode="wide").rho_hi + 8.0
        fit = solve_at(prob, hi)
        assert fit.edf == pytest.approx(prob.m, abs=0.01)
        assert np.abs(prob.penalty.matvec(fit.beta_hat)).max() < 1e-3 * np.abs(fit.beta_hat).max()

    def test_edf_ignores_y(self):
        prob = make_problem(30, seed=6)
        other = new_problem(prob.design, 10 * prob.y + 3, None, prob.penalty)
        for rho in (-3.0, 0.0, 4.0):
            assert solve_at(prob, rho).edf == solve_at(other, rho).edf

    def test_edf_monotone(self):
        prob = make_problem(30, weighted=True, seed=7)
        iv = auto_interval(prob, mode="wide")
        edf = [solve_at(prob, r).edf for r in np.linspace(iv.rho_lo, iv.rho_hi, 50)]
        assert np.all(np.diff(edf) < 0)

    def test_edf_is_m_plus_redf(self):
        prob = make_problem(35, derivative=True, seed=8)
        lam = dense_spectrum(prob)
        for rho in (-2.0, 1.0, 5.0):
            assert solve_at(prob, rho).edf == pytest.approx(prob.m + redf(rho, lam), abs=1e-8)

    def test_unsolvable(self):
        prob = make_problem(20, seed=9)
        with pytest.raises(NumericallyUnsolvable):
            solve_at(prob, 200.0)

    def test_nonfinite_rho(self):
        with pytest.raises(ValueError):
            solve_at(make_problem(10, seed=0), np.inf)


class TestGcv:
    def fit(self, rss, edf):
        return PlsFit(0.0, None, None, edf, 0.0, 0.0, 0.0, rss, 0.0, 0.0)

    def test_examples(self):
        assert gcv_of(self.fit(0.0, 3.0), 10) == 0.0
        assert gcv_of(self.fit(2.0, 2.0), 4) == 2.0

    def test_degenerate(self):
        with pytest.raises(DegenerateEdf):
            gcv_of(self.fit(1.0, 4.0), 4)

    def test_dense(self):
        prob = make_problem(30, weighted=True, seed=10)
        fit = solve_at(prob, 0.5)
        B, y, _, _, beta, edf = dense_fit(prob, 0.5)
        r = y - B @ beta
        assert fit.gcv == pytest.approx(prob.n * (r @ r) / (prob.n - edf) ** 2, rel=1e-10)


class TestReml:
    @pytest.mark.parametrize("seed", range(4))
    def test_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        inner = np.sort(rng.uniform(2, 8, 2))
        kv = KnotVector(np.concatenate([[0] * 4, inner, [10] * 4]), 4)
        xs = np.sort(rng.uniform(0, 10, 18))
        prob = new_problem(design_matrix(kv, xs), rng.normal(size=18), None, general_diff(kv, 2))
        for rho in (-2.0, 0.0, 3.0):
            assert reml_of(prob, solve_at(prob, rho)) == pytest.approx(reml_oracle(prob, rho), abs=1e-6)

    def test_two_dimensional_integral(self):
        # p = 2 linear splines, first-order penalty: the integral over beta is done numerically
        rng = np.random.default_rng(11)
        kv = KnotVector([0, 1, 2, 3], 2)
        xs = np.sort(rng.uniform(1, 2, 9))
        prob = new_problem(design_matrix(kv, xs), 1 + xs + rng.normal(0, 0.3, 9), None,
                           general_diff(kv, 1))
        B, y, D = dense_parts(prob)
        for rho in (-1.0, 1.5):
            fit = solve_at(prob, rho)
            s2 = fit.sigma2_hat
            lam = np.exp(rho)
            log_c = (-0.5 * prob.n * np.log(2 * np.pi * s2) - 0.5 * np.log(2 * np.pi * s2)
                     + 0.5 * rho + 0.5 * np.log(np.sum(D ** 2)))

            def log_f(b1, b0):
                b = np.array([b0, b1])
                r = y - B @ b
                return -(r @ r + lam * np.sum((D @ b) ** 2)) / (2 * s2)

            peak = log_f(fit.beta_hat[1], fit.beta_hat[0])
            C = B.T @ B + lam * D.T @ D
            sd = np.sqrt(np.diag(np.linalg.inv(C)) * s2)
            b0, b1 = fit.beta_hat
            val, _ = dblquad(lambda u, v: np.exp(log_f(u, v) - peak),
                             b0 - 12 * sd[0], b0 + 12 * sd[0],
                             b1 - 12 * sd[1], b1 + 12 * sd[1], epsabs=0, epsrel=1e-10)
            assert reml_of(prob, fit) == pytest.approx(log_c + peak + np.log(val), abs=1e-6)

    def test_constant_terms_cancel(self):
        prob = make_problem(20, seed=12)
        scaled = new_problem(prob.design, prob.y, None,
                             type(prob.penalty)(2.0 * prob.penalty.coef, prob.p, prob.m,
                                                prob.penalty.kind))
        # scaling D by 2 shifts rho by -log 4; REML differences over rho are preserved
        r1 = [solve_at(prob, r).reml for r in (0.0, 2.0)]
        r2 = [solve_at(scaled, r - np.log(4.0)).reml for r in (0.0, 2.0)]
        assert r1[1] - r1[0] == pytest.approx(r2[1] - r2[0], abs=1e-8)

    def test_rescaling_y(self):
        prob = make_problem(30, seed=13)
        c = 7.5
        other = new_problem(prob.design, c * prob.y, None, prob.penalty)
        grid = np.linspace(-4, 8, 121)
        a = np.array([solve_at(prob, r).reml for r in grid])
        b = np.array([solve_at(other, r).reml for r in grid])
        # y -> c y multiplies sigma^2 by c^2 and leaves everything else in place
        np.testing.assert_allclose(b - a, -(prob.n - prob.m) * np.log(c), atol=1e-8)
        assert np.argmax(a) == np.argmax(b)


class TestObjective:
    def test_minimum(self):
        prob = make_problem(20, seed=14)
        fit = solve_at(prob, 0.7)
        best = pls_objective(prob, fit.beta_hat, 0.7)
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert best <= pls_objective(prob, fit.beta_hat + 1e-3 * rng.normal(size=prob.p), 0.7)

    def test_decomposition(self):
        prob = make_problem(20, seed=15)
        fit = solve_at(prob, 0.7)
        assert pls_objective(prob, fit.beta_hat, 0.7) == pytest.approx(
            fit.rss + np.exp(0.7) * fit.penalty_sq, rel=1e-12)

    def test_tiny_penalty(self):
        prob = make_problem(20, seed=16)
        beta = np.random.default_rng(1).normal(size=prob.p)
        r = prob.y - prob.design.matvec(beta)
        assert pls_objective(prob, beta, -800.0) == pytest.approx(r @ r, rel=1e-15)
