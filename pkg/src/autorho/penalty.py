"""Penalty factors ``D_m`` with ``S = D_m.T @ D_m``.

Three constructions are provided:

* :func:`standard_diff` -- the m-th order difference matrix of standard P-splines;
* :func:`general_diff` -- the general difference matrix, i.e. the exact map
  from B-spline coefficients to the coefficients of the m-th derivative in the
  order ``d - m`` basis, which reduces to :func:`standard_diff` on unit-spaced
  knots;
* :func:`derivative_factor` -- a factor of the derivative Gram matrix
  ``S_jk = int B_j^(m) B_k^(m) dx`` (O-splines).

Every row starts at its own column (row ``i`` is supported on columns
``i .. i + w - 1``) and has a positive leading coefficient.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .bandla import BandMatrix, RowBlockMatrix, btb, cholesky_band
from .basis import _values, eval_basis
from .errors import DegenerateKnots, FactorizationFailure, InvalidOrder, NotPositiveDefinite

KINDS = ("standard_diff", "general_diff", "derivative")


@dataclass(frozen=True, eq=False)
class PenaltyFactor:
    """A ``(p - m) x p`` banded penalty factor.

    ``coef[i, c]`` is the entry in row ``i``, column ``i + c``.
    """

    coef: np.ndarray
    p: int
    order: int
    kind: str

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if coef.shape[0] != self.p - self.order:
            raise ValueError("penalty factor must have p - m rows")

    @property
    def q(self):
        return self.p - self.order

    @property
    def rows(self):
        w = self.coef.shape[1]
        i = np.arange(self.q)
        first = np.minimum(i, self.p - w)
        # bottom rows run past the last column; their trailing entries are zero
        shift = i - first
        values = np.zeros_like(self.coef)
        for s in np.unique(shift):
            sel = shift == s
            values[sel, s:] = self.coef[sel, : w - s]
        return RowBlockMatrix(first, values, self.p)

    @property
    def matrix(self):
        w = self.coef.shape[1]
        data = np.zeros((w, self.p))
        for c in range(w):
            n = min(self.q, self.p - c)
            data[w - 1 - c, c : c + n] = self.coef[:n, c]
        return BandMatrix(self.q, self.p, 0, w - 1, data)

    def toarray(self):
        return self.rows.toarray()

    def matvec(self, beta):
        return self.rows.matvec(beta)

    def rmatvec(self, v):
        return self.rows.rmatvec(v)

    def gram(self):
        """``S = D.T @ D`` as a symmetric band matrix."""
        return btb(self.rows)

    def outer_gram(self):
        """``D @ D.T`` (q x q) as a symmetric band matrix."""
        C, q = self.coef, self.q
        w = C.shape[1]
        lower = min(w - 1, q - 1)
        data = np.zeros((lower + 1, q))
        for s in range(lower + 1):
            # (D D^T)[r + s, r] = sum_c C[r, c] C[r + s, c - s]
            acc = np.zeros(q - s)
            for c in range(s, w):
                acc += C[: q - s, c] * C[s:, c - s]
            data[s, : q - s] = acc
        return BandMatrix(q, q, lower, 0, data, symmetric=True)


def _check_order(m, upper):
    if not 1 <= m <= upper:
        raise InvalidOrder(f"penalty order m={m} must lie in [1, {upper}]")


def standard_diff(p, m):
    _check_order(m, p - 1)
    row = np.array([(-1) ** j * comb(m, j) for j in range(m + 1)], dtype=float)
    return PenaltyFactor(np.tile(row, (p - m, 1)), p, m, "standard_diff")


def _derivative_map(kv, m):
    """Coefficient blocks of the exact m-th derivative map (before sign normalization)."""
    t, d, p = kv.knots, kv.order, kv.p
    C = np.ones((p, 1))
    for k in range(1, m + 1):
        r = np.arange(p - k)
        span = t[r + d] - t[r + k]
        prev = C
        diff = np.zeros((p - k, k + 1))
        diff[:, :k] -= prev[:-1]
        diff[:, 1:] += prev[1:]
        nonzero = np.any(diff != 0, axis=1)
        if np.any((span <= 0) & nonzero):
            bad = int(np.flatnonzero((span <= 0) & nonzero)[0])
            raise DegenerateKnots(f"zero knot span in difference row {bad} at step {k}")
        scale = np.divide(d - k, span, out=np.zeros_like(span), where=span > 0)
        C = diff * scale[:, None]
    return C


def general_diff(kv, m):
    _check_order(m, kv.order - 1)
    C = (-1) ** m * _derivative_map(kv, m)
    return PenaltyFactor(C, kv.p, m, "general_diff")


def _gauss_nodes(kv, npts):
    """Gauss-Legendre nodes/weights on every nonempty interval of the domain."""
    t, d, p = kv.knots, kv.order, kv.p
    mu = np.arange(d - 1, p)
    mu = mu[t[mu + 1] > t[mu]]
    z, w = np.polynomial.legendre.leggauss(npts)
    a, b = t[mu][:, None], t[mu + 1][:, None]
    x = 0.5 * (b - a) * z + 0.5 * (a + b)
    wt = 0.5 * (b - a) * w
    return np.repeat(mu, npts), x.ravel(), wt.ravel()


def _band_gram(first, V, weights, size):
    return btb(RowBlockMatrix(first, V, size), weights)


def derivative_gram(kv, m):
    """Exact ``int B_j^(m)(x) B_k^(m)(x) dx`` over the spline domain, as a band matrix."""
    d = kv.order
    _check_order(m, d - 1)
    # integrand has degree 2(d - m - 1); d - m Gauss points are exact
    _, x, wt = _gauss_nodes(kv, d - m)
    first, V = eval_basis(kv, x, deriv=m)
    return _band_gram(first, V, wt, kv.p)


def lower_order_gram(kv, m):
    """Gram matrix of the ``q`` order-``(d - m)`` B-splines that carry ``f^(m)``."""
    d, p = kv.order, kv.p
    mu, x, wt = _gauss_nodes(kv, d - m)
    V = _values(kv.knots, mu, x, d - m)
    return _band_gram(mu - d + 1, V, wt, p - m)


def derivative_factor(kv, m):
    """Banded ``D`` with ``D.T @ D`` equal to the derivative Gram matrix.

    ``D = U @ G_m`` where ``G_m`` is the general difference matrix and ``U`` the
    upper Cholesky factor of :func:`lower_order_gram`.  ``D`` is upper
    trapezoidal with positive leading entries, i.e. it is the nonzero part of
    the pivot-free Cholesky factor of ``S`` whose last ``m`` pivots vanish.
    """
    d = kv.order
    _check_order(m, d - 1)
    Cg = general_diff(kv, m).coef
    try:
        G = cholesky_band(lower_order_gram(kv, m))
    except NotPositiveDefinite as exc:
        raise FactorizationFailure(f"derivative Gram has numerical rank below q: {exc}") from exc
    q = kv.p - m
    C = np.zeros((q, d))
    for s in range(G.lower + 1):
        # U[i, i + s] = G[i + s, i]
        u = G.data[s, : q - s]
        for c in range(s, s + m + 1):
            C[: q - s, c] += u * Cg[s:, c - s]
    return PenaltyFactor(C, kv.p, m, "derivative")


def make_penalty(kind, kv, m):
    """Dispatch on the short names used by the command line (``sps``, ``gps``, ``os``)."""
    if kind in ("sps", "standard_diff"):
        return standard_diff(kv.p, m)
    if kind in ("gps", "general_diff"):
        return general_diff(kv, m)
    if kind in ("os", "derivative"):
        return derivative_factor(kv, m)
    raise ValueError(f"unknown penalty kind {kind!r}")
