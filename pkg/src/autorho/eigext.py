"""Demmler-Reinsch eigenvalues of ``A = E'E`` with ``E = L^-1 D'``.

Only the extremes and the mean are needed for the wide search interval.  The
largest eigenvalue comes from power iteration that never forms ``E`` (it
applies ``D``, ``L^-1`` and ``L^-T`` as band operations).  The smallest comes
from inverse iteration in which ``A^-1 v`` is evaluated through the
trapezoidal split ``E = [E1; E2]`` and the Woodbury identity::

    A^-1 = (E1'E1)^-1 - F (I + R'R)^-1 F',   R = E1^-T E2',  F = E1^-1 R

so that each step needs only triangular solves with ``E1`` and an ``m x m``
Cholesky factor.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .bandla import EPS, dense_sym_eigenvalues, frobenius_sq, solve_lower_band, solve_upper_band
from .errors import ConvergenceFailure, SingularFactor

RTOL = 1e-6
ITER_FACTOR = 10
BLOCK = 6


@dataclass(frozen=True, eq=False)
class TrapezoidFactor:
    E: np.ndarray

    @property
    def q(self):
        return self.E.shape[1]

    @property
    def m(self):
        return self.E.shape[0] - self.E.shape[1]

    @property
    def E1(self):
        return self.E[: self.q]

    @property
    def E2(self):
        return self.E[self.q :]


@dataclass(frozen=True)
class EigenSummary:
    lambda_max: float
    lambda_min: float
    lambda_mean: float
    q: int
    singular: bool


def build_E(L, penalty):
    """``E = L^-1 D'`` via one band triangular solve with ``q`` right-hand sides."""
    diag = L.diagonal()
    if np.any(diag == 0):
        raise SingularFactor("L has a zero diagonal entry")
    E = solve_lower_band(L, penalty.toarray().T)
    return TrapezoidFactor(np.ascontiguousarray(E))


def _start_vector(q, seed):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, q)


def max_eigen(L, penalty, seed=0, full_output=False, block=BLOCK):
    """Largest eigenvalue of ``E'E`` by power iteration on ``V -> D L^-T L^-1 D' V``.

    A small block of vectors is iterated with a Rayleigh-Ritz step each
    sweep; ``block=1`` is plain power iteration.  Near-ties at the top of the
    spectrum stall a single vector long before its Rayleigh quotient is
    accurate, while the block converges at the rate of the first eigenvalue
    outside it.  The relative change test must hold on two consecutive sweeps.
    """
    q = penalty.q
    b = max(1, min(int(block), q))

    def apply(V):
        return penalty.matvec(solve_upper_band(L, solve_lower_band(L, penalty.rmatvec(V))))

    for attempt in range(2):
        V = np.linalg.qr(np.random.default_rng(seed + attempt).uniform(-1.0, 1.0, (q, b)))[0]
        lam = 0.0
        passes = 0
        for it in range(1, ITER_FACTOR * q + 1):
            U = apply(V)
            H = V.T @ U
            w, Z = np.linalg.eigh(0.5 * (H + H.T))
            lam_new = float(w[-1])
            passes = passes + 1 if abs(lam_new - lam) < lam * RTOL else 0
            if passes >= 2 or (passes and b == q):
                return (lam_new, it) if full_output else lam_new
            lam = lam_new
            if it >= 3 and lam <= 0.0:
                # start block orthogonal to the dominant eigenspace
                break
            V = np.linalg.qr(U @ Z[:, ::-1])[0]
        else:
            raise ConvergenceFailure(f"power iteration did not converge in {ITER_FACTOR * q} steps")
    raise ConvergenceFailure("power iteration stagnated at zero after a restart")


class _WoodburyInverse:
    """Apply ``(E'E)^-1`` using the trapezoidal split of ``E``."""

    def __init__(self, tf):
        E1, E2 = tf.E1, tf.E2
        self.E1 = E1
        m = E2.shape[0]
        with np.errstate(all="ignore"):
            self.R = solve_triangular(E1, E2.T, lower=True, trans="T", check_finite=False)
            self.F = solve_triangular(E1, self.R, lower=True, check_finite=False)
            H = np.eye(m) + self.R.T @ self.R
        self.G = cholesky(H, lower=True) if m else np.zeros((0, 0))

    def __call__(self, v):
        E1 = self.E1
        a1 = solve_triangular(E1, v, lower=True, trans="T", check_finite=False)
        a2 = solve_triangular(E1, a1, lower=True, check_finite=False)
        if self.G.size == 0:
            return a2
        c1 = self.F.T @ v
        b1 = solve_triangular(self.G, c1, lower=True, check_finite=False)
        b2 = solve_triangular(self.G, b1, lower=True, trans="T", check_finite=False)
        return a2 - self.F @ b2


def min_eigen(tf, lambda_max, seed=0, full_output=False):
    """Smallest eigenvalue of ``E'E`` by Woodbury-accelerated inverse iteration.

    Returns ``(lambda_min, singular)``.  When ``E'E`` is numerically singular,
    either because the Rayleigh quotient of the inverse turns negative or
    because ``lambda_min < lambda_max * eps``, the value is reset to
    ``lambda_max * eps`` and ``singular`` is True.
    """
    q = tf.q
    floor = lambda_max * EPS
    if np.any(np.diag(tf.E1) == 0):
        result = (floor, True)
        return (*result, 0) if full_output else result
    with np.errstate(all="ignore"):
        apply_inv = _WoodburyInverse(tf)
        u = _start_vector(q, seed)
        lam = 0.0
        singular = False
        for it in range(1, ITER_FACTOR * q + 1):
            v = u / np.linalg.norm(u)
            u = apply_inv(v)
            lam_new = float(v @ u)
            if not np.isfinite(lam_new) or lam_new < 0:
                singular = True
                break
            if abs(lam_new - lam) < lam * RTOL:
                break
            lam = lam_new
        else:
            raise ConvergenceFailure(f"inverse iteration did not converge in {ITER_FACTOR * q} steps")
    lam_q = floor if singular else 1.0 / lam_new
    if lam_q < floor:
        lam_q, singular = floor, True
    result = (lam_q, singular)
    return (*result, it) if full_output else result


def mean_eigen(tf):
    return frobenius_sq(tf.E) / tf.q


def all_eigenvalues(tf):
    """All ``q`` eigenvalues of ``E'E`` (descending) from a dense symmetric eigensolver."""
    E = tf.E
    return dense_sym_eigenvalues(E.T @ E)


def eigen_summary(L, penalty, seed=0, tf=None):
    if tf is None:
        tf = build_E(L, penalty)
    lam1 = max_eigen(L, penalty, seed=seed)
    lamq, singular = min_eigen(tf, lam1, seed=seed)
    lam_mean = mean_eigen(tf)
    # keep the ordering invariant under rounding of the three estimates
    lam_mean = min(max(lam_mean, lamq), lam1)
    return EigenSummary(lam1, lamq, lam_mean, tf.q, singular)
