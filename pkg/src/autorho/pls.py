"""Penalized least squares at a fixed smoothing parameter.

For a log smoothing parameter ``rho`` the coefficients minimize::

    ||y - B beta||^2 + exp(rho) ||D beta||^2

(weights, when present, are absorbed as ``B <- W^1/2 B``, ``y <- W^1/2 y``).
All matrices involved are banded, so a fit costs O(p^2): one band Cholesky of
``C = B'B + exp(rho) D'D``, two band triangular solves for the coefficients and
one multi-right-hand-side band solve for ``edf = ||K^-1 L||_F^2``.
"""

from dataclasses import dataclass

import numpy as np

from .bandla import (BandMatrix, cholesky_band, frobenius_sq, solve_lower_band,
                     solve_upper_band, btb)
from .errors import DegenerateEdf, NotPositiveDefinite, NumericallyUnsolvable, RankDeficientDesign

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class PlsProblem:
    """Design, response, weights and penalty, plus the rho-independent factorizations."""

    design: object
    y: np.ndarray
    weights: object
    penalty: object
    btwb: BandMatrix
    gram: BandMatrix
    bty: np.ndarray
    L: object
    log_det_ddt: float

    @property
    def n(self):
        return self.design.nrows

    @property
    def p(self):
        return self.design.ncols

    @property
    def m(self):
        return self.penalty.order

    @property
    def q(self):
        return self.penalty.q

    def L_dense(self):
        try:
            return self._L_dense
        except AttributeError:
            object.__setattr__(self, "_L_dense", self.L.toarray())
            return self._L_dense


@dataclass(frozen=True)
class PlsFit:
    rho: float
    beta_hat: np.ndarray
    y_hat: np.ndarray
    edf: float
    gcv: float
    reml: float
    sigma2_hat: float
    rss: float
    penalty_sq: float
    log_det_c: float


def new_problem(B, y, weights=None, penalty=None):
    """Validate inputs, absorb weights and factor ``B'WB = LL'`` once."""
    if penalty is None:
        raise ValueError("a penalty factor is required")
    y = np.asarray(y, dtype=float)
    if y.shape != (B.nrows,):
        raise ValueError(f"y must have length {B.nrows}")
    if penalty.p != B.ncols:
        raise ValueError("penalty and design disagree on the number of coefficients")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != y.shape:
            raise ValueError("one weight per observation is required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
    btwb = btb(B, weights)
    try:
        L = cholesky_band(btwb)
    except NotPositiveDefinite as exc:
        raise RankDeficientDesign(
            f"B'WB is not positive definite (pivot {exc.pivot_index}); "
            "the design needs p < n and data under every B-spline") from exc
    wy = y if weights is None else weights * y
    bty = B.rmatvec(wy)
    log_det_ddt = _log_det_outer(penalty)
    return PlsProblem(B, y, weights, penalty, btwb, penalty.gram(), bty, L, log_det_ddt)


def _log_det_outer(penalty):
    """``log|D D'|`` from a diagonally equilibrated band Cholesky.

    Near-tied knots give ``D D'`` a huge dynamic range on its diagonal, which
    the pivot threshold of :func:`cholesky_band` would misread as rank loss.
    """
    M = penalty.outer_gram()
    s = 1.0 / np.sqrt(M.diagonal())
    data = np.array(M.data)
    for k in range(M.lower + 1):
        data[k, : M.ncols - k] *= s[: M.ncols - k] * s[k:]
    scaled = BandMatrix(M.nrows, M.ncols, M.lower, 0, data, symmetric=True)
    base = -2.0 * float(np.sum(np.log(s)))
    try:
        G = cholesky_band(scaled)
    except NotPositiveDefinite:
        sign, logdet = np.linalg.slogdet(scaled.toarray())
        if sign <= 0:
            raise RankDeficientDesign("the penalty factor does not have full row rank") from None
        return base + float(logdet)
    return base + 2.0 * float(np.sum(np.log(G.diagonal())))


def _combine(A, S, scale):
    """``A + scale * S`` for two symmetric band matrices."""
    lower = max(A.lower, S.lower)
    data = np.zeros((lower + 1, A.ncols))
    data[: A.lower + 1] += A.data
    data[: S.lower + 1] += scale * S.data
    return BandMatrix(A.nrows, A.ncols, lower, 0, data, symmetric=True)


def factor_c(prob, rho):
    C = _combine(prob.btwb, prob.gram, np.exp(rho))
    try:
        return cholesky_band(C)
    except NotPositiveDefinite as exc:
        raise NumericallyUnsolvable(
            f"C is numerically singular at rho={rho:g} (pivot {exc.pivot_index})") from exc


def solve_at(prob, rho):
    rho = float(rho)
    if not np.isfinite(rho):
        raise ValueError("rho must be finite")
    K = factor_c(prob, rho)
    beta = solve_upper_band(K, solve_lower_band(K, prob.bty))
    y_hat = prob.design.matvec(beta)
    resid = prob.y - y_hat
    rss = float(resid @ resid if prob.weights is None else prob.weights @ (resid * resid))
    edf = frobenius_sq(solve_lower_band(K, prob.L_dense()))
    Dbeta = prob.penalty.matvec(beta)
    penalty_sq = float(Dbeta @ Dbeta)
    log_det_c = 2.0 * float(np.sum(np.log(K.diagonal())))
    n = prob.n
    gcv = _gcv(rss, edf, n)
    reml = _reml(prob, rho, rss, edf, log_det_c, penalty_sq)
    return PlsFit(rho, beta, y_hat, edf, gcv, reml, rss / (n - edf), rss, penalty_sq, log_det_c)


def _gcv(rss, edf, n):
    if not edf < n:
        raise DegenerateEdf(f"edf={edf:g} leaves no residual degrees of freedom (n={n})")
    return n * rss / (n - edf) ** 2


def gcv_of(fit, n):
    """GCV error ``n * ||y - y_hat||^2 / (n - edf)^2``."""
    return _gcv(fit.rss, fit.edf, n)


def _reml(prob, rho, rss, edf, log_det_c, penalty_sq):
    n, m, q = prob.n, prob.m, prob.q
    if not edf < n:
        raise DegenerateEdf(f"edf={edf:g} leaves no residual degrees of freedom (n={n})")
    sigma2 = rss / (n - edf)
    return float(0.5 * prob.log_det_ddt + 0.5 * q * rho - 0.5 * log_det_c
                 - 0.5 * (n - m) * (LOG_2PI + np.log(sigma2)) - 0.5 * (n - edf)
                 - np.exp(rho) * penalty_sq / (2.0 * sigma2))


def reml_of(prob, fit):
    """Restricted log-likelihood of ``rho`` with ``sigma^2`` at its Pearson estimate.

    The coefficient of ``rho`` is ``q / 2`` (from the prior normalizing constant
    ``exp((p - m) rho / 2)``), not ``(n - m) / 2``.
    """
    return _reml(prob, fit.rho, fit.rss, fit.edf, fit.log_det_c, fit.penalty_sq)


def pls_objective(prob, beta, rho):
    beta = np.asarray(beta, dtype=float)
    resid = prob.y - prob.design.matvec(beta)
    rss = resid @ resid if prob.weights is None else prob.weights @ (resid * resid)
    Db = prob.penalty.matvec(beta)
    return float(rss + np.exp(rho) * (Db @ Db))
