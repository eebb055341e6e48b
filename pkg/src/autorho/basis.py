"""Knot vectors and B-spline design matrices."""

from dataclasses import dataclass

import numpy as np

from .bandla import RowBlockMatrix
from .errors import DegenerateData, InvalidDimensions, OutOfDomain


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Non-decreasing knots ``xi_1 .. xi_{p+d}`` of a B-spline basis of order ``d``.

    The basis has ``p = len(knots) - d`` functions and lives on
    ``[xi_d, xi_{p+1}]``.
    """

    knots: np.ndarray
    order: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        d = int(self.order)
        object.__setattr__(self, "order", d)
        if d < 2:
            raise InvalidDimensions("B-spline order must be at least 2")
        if knots.ndim != 1 or knots.size < 2 * d:
            raise InvalidDimensions(f"need at least {2 * d} knots for order {d}")
        if np.any(np.diff(knots) < 0):
            raise InvalidDimensions("knots must be non-decreasing")
        lo, hi = self.domain
        if not lo < hi:
            raise InvalidDimensions("empty spline domain")

    @property
    def p(self):
        return self.knots.size - self.order

    @property
    def domain(self):
        return float(self.knots[self.order - 1]), float(self.knots[self.knots.size - self.order])

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.order == other.order
                and np.array_equal(self.knots, other.knots))

    __hash__ = None


class DesignMatrix(RowBlockMatrix):
    """B-spline design matrix ``B[i, j] = B_j(x_i)`` stored as row blocks of width ``d``."""

    def __init__(self, first, values, ncols, x):
        super().__init__(first, values, ncols)
        self.x = np.asarray(x, dtype=float)


def equidistant_knots(p, d):
    if p < d:
        raise InvalidDimensions(f"p={p} must be at least d={d}")
    return KnotVector(np.arange(1, p + d + 1, dtype=float), d)


def random_knots(p, d, seed=None):
    """Knots ``xi_k ~ N(k, ((p + d) / 10)^2)``, sorted."""
    if p < d:
        raise InvalidDimensions(f"p={p} must be at least d={d}")
    rng = np.random.default_rng(seed)
    k = np.arange(1, p + d + 1, dtype=float)
    return KnotVector(np.sort(rng.normal(k, (p + d) / 10.0)), d)


def quantile_knots(x, k, d):
    """Clamped knot vector with ``k`` distinct knots at equally spaced quantiles of ``x``.

    Quantiles interpolate linearly between order statistics (the "type 7"
    rule).  The two boundary knots are repeated ``d`` times, so the basis has
    ``p = k + d - 2`` functions and spans exactly ``[min(x), max(x)]``.
    """
    x = np.asarray(x, dtype=float)
    if np.unique(x).size < 2:
        raise DegenerateData("need at least two distinct x values")
    if k < 2:
        raise InvalidDimensions("need at least the two boundary knots")
    q = np.quantile(x, np.linspace(0.0, 1.0, int(k)), method="linear")
    q = np.maximum.accumulate(q)
    knots = np.concatenate([np.repeat(q[0], d - 1), q, np.repeat(q[-1], d - 1)])
    return KnotVector(knots, d)


def _locate(kv, x):
    """Index ``mu`` (0-based) with ``t[mu] <= x < t[mu + 1]``, ``d-1 <= mu <= p-1``."""
    t, d, p = kv.knots, kv.order, kv.p
    lo, hi = kv.domain
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= lo) & (x <= hi))):
        raise OutOfDomain(f"x outside the spline domain [{lo}, {hi}]")
    mu = np.searchsorted(t, x, side="right") - 1
    # right end of the domain belongs to the last nonempty interval
    last = np.searchsorted(t, hi, side="left") - 1
    return np.clip(mu, d - 1, min(last, p - 1))


def _values(t, mu, x, order):
    """Values of the ``order`` B-splines ``B_{mu-order+1} .. B_mu`` (de Boor's BSPLVB)."""
    n = x.shape[0]
    N = np.zeros((n, order))
    N[:, 0] = 1.0
    left = np.zeros((n, order))
    right = np.zeros((n, order))
    for j in range(1, order):
        left[:, j] = x - t[mu + 1 - j]
        right[:, j] = t[mu + j] - x
        saved = np.zeros(n)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            temp = np.divide(N[:, r], den, out=np.zeros(n), where=den != 0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def _lift_derivative(t, mu, V, k):
    """Differentiate: map order-(k-1) values ``V`` to the derivative values of order ``k``."""
    n = V.shape[0]
    out = np.zeros((n, k))
    # out[:, r] belongs to B_{j,k} with j = mu - k + 1 + r
    for r in range(k):
        j = mu - k + 1 + r
        if r >= 1:
            den = t[j + k - 1] - t[j]
            out[:, r] += np.divide(V[:, r - 1], den, out=np.zeros(n), where=den != 0)
        if r <= k - 2:
            den = t[j + k] - t[j + 1]
            out[:, r] -= np.divide(V[:, r], den, out=np.zeros(n), where=den != 0)
        out[:, r] *= k - 1
    return out


def eval_basis(kv, x, deriv=0):
    """Nonzero basis values (or ``deriv``-th derivatives) at every point of ``x``.

    Returns ``(first, values)`` where ``values[i]`` holds ``B_{first[i]} ..
    B_{first[i] + d - 1}`` evaluated at ``x[i]`` (0-based function indices).
    """
    d = kv.order
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if deriv >= d:
        raise InvalidDimensions("derivative order must be below the spline order")
    mu = _locate(kv, x)
    t = kv.knots
    V = _values(t, mu, x, d - deriv)
    for k in range(d - deriv + 1, d + 1):
        V = _lift_derivative(t, mu, V, k)
    return mu - d + 1, V


def eval_row(kv, x):
    first, values = eval_basis(kv, [x])
    return int(first[0]), values[0]


def design_matrix(kv, xs):
    xs = np.asarray(xs, dtype=float)
    first, values = eval_basis(kv, xs)
    return DesignMatrix(first, values, kv.p, xs)


def xs_between_knots(kv, count_per_interval, seed=None):
    """``count_per_interval`` uniform draws in every nonempty knot interval of the domain."""
    if count_per_interval < 1:
        raise ValueError("count_per_interval must be positive")
    rng = np.random.default_rng(seed)
    t, d = kv.knots, kv.order
    inner = t[d - 1 : kv.p + 1]
    lo, hi = inner[:-1], inner[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    draws = rng.uniform(lo[:, None], hi[:, None], size=(lo.size, count_per_interval))
    return np.sort(draws.ravel())
