"""Search intervals for the log smoothing parameter ``rho``.

Everything here is driven by the restricted degrees of freedom::

    redf(rho) = sum_j 1 / (1 + exp(rho) * lambda_j)

which falls from ``q`` to ``0`` as ``rho`` grows.  An interval mapping onto the
redf range ``[kappa q, (1 - kappa) q]`` is

* exact -- both endpoints solved on the full spectrum;
* wide -- closed-form bounds from the mean and smallest eigenvalue, which
  always contain the exact interval;
* heuristic -- the wide lower endpoint with an upper endpoint solved on an
  approximate spectrum built from ``lambda_1``, ``lambda_q`` and the mean.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .bandla import EPS
from .eigext import EigenSummary, all_eigenvalues, build_E, eigen_summary
from .errors import ApproximationFailure, AutorhoError, MaxIterationsExceeded, ZeroDerivative

KINDS = ("exact", "wide", "heuristic")
MODES = ("exact", "wide", "heuristic")
DEFAULT_KAPPA = 0.01
NEWTON_RTOL = 1e-6
STEP_FLOOR = 1e-12
DELTA_MAX = 20.0
BRACKET_PAD = 5.0
GAMMAS = np.linspace(0.0, 1.0, 21)


@dataclass(frozen=True)
class SearchInterval:
    """``[rho_lo, rho_hi]`` plus the quantities it was derived from.

    ``rho_star_min``/``rho_star_max`` are the wide bounds, ``rho_hat_max`` and
    ``rho_hat_min`` the heuristic ones (``None`` when not computed or when the
    spectrum approximation failed).
    """

    rho_lo: float
    rho_hi: float
    kind: str
    kappa: float
    q: int
    rho_star_min: float = None
    rho_star_max: float = None
    rho_hat_min: float = None
    rho_hat_max: float = None
    summary: EigenSummary = None
    heuristic_failed: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown interval kind {self.kind!r}")
        _check_kappa(self.kappa)
        if not self.rho_lo < self.rho_hi:
            raise ValueError(f"empty interval [{self.rho_lo}, {self.rho_hi}]")

    @property
    def width(self):
        return self.rho_hi - self.rho_lo


@dataclass(frozen=True, eq=False)
class ApproxSpectrum:
    lambda_hat: np.ndarray
    n_successes: int

    @property
    def q(self):
        return self.lambda_hat.size


def _check_kappa(kappa):
    if not 0.0 < kappa < 0.5:
        raise ValueError(f"kappa must lie in (0, 0.5), got {kappa}")


def _shares(rho, lambdas):
    # 1 / (1 + e^rho lambda) without overflow
    return expit(-(rho + np.log(lambdas)))


def redf(rho, lambdas):
    """Restricted degrees of freedom at ``rho`` for eigenvalues ``lambdas``."""
    lambdas = np.asarray(lambdas, dtype=float)
    return float(np.sum(_shares(float(rho), lambdas)))


def redf_prime(rho, lambdas):
    """``d redf / d rho = -sum e^rho lambda_j / (1 + e^rho lambda_j)^2``."""
    s = _shares(float(rho), np.asarray(lambdas, dtype=float))
    return float(-np.sum(s * (1.0 - s)))


def newton_root(g, g_prime, x0, delta_max, max_iter=100, max_halvings=60):
    """Safeguarded Newton iteration for ``g(x) = 0``.

    Each step ``-g/g'`` is clamped to ``delta_max`` and halved until ``|g|``
    decreases.  The iteration stops when the step is below ``1e-6 |g|`` or
    below an absolute floor of ``1e-12``, or when no halving reduces ``|g|``
    any further (the root is then resolved to working precision).
    """
    if not delta_max > 0:
        raise ValueError("delta_max must be positive")
    x = float(x0)
    gx = float(g(x))
    for _ in range(max_iter):
        if gx == 0.0:
            return x
        gp = float(g_prime(x))
        if gp == 0.0 or not np.isfinite(gp):
            raise ZeroDerivative(f"derivative vanishes at x={x:g} where g={gx:g}")
        delta = -gx / gp
        if abs(delta) < abs(gx) * NEWTON_RTOL or abs(delta) < STEP_FLOOR:
            return x
        delta = np.copysign(min(abs(delta), delta_max), delta)
        for _ in range(max_halvings):
            x_new = x + delta
            g_new = float(g(x_new))
            if abs(g_new) < abs(gx):
                break
            delta /= 2.0
        else:
            return x
        x, gx = x_new, g_new
    raise MaxIterationsExceeded(f"Newton iteration did not converge in {max_iter} steps")


def _wide_bounds(lam_mean, lam_min, kappa):
    lo = float(np.log(kappa / ((1.0 - kappa) * lam_mean)))
    hi = float(np.log((1.0 - kappa) / (kappa * lam_min)))
    return lo, hi


def _clamped(lambdas):
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    if lambdas.size == 0 or not lambdas[0] > 0:
        raise ValueError("eigenvalues must be positive")
    return np.maximum(lambdas, lambdas[0] * EPS)


def _solve_redf(lambdas, target, x0, bracket):
    """Root of ``redf - target``: Newton from ``x0``, bisection on ``bracket`` as fallback."""
    q = lambdas.size

    def g(r):
        return redf(r, lambdas) - target

    def gp(r):
        return redf_prime(r, lambdas)

    try:
        x = newton_root(g, gp, x0, DELTA_MAX)
        if abs(g(x)) <= 1e-9 * q:
            return x
    except (ArithmeticError, AutorhoError):
        pass
    lo, hi = bracket
    return float(brentq(g, lo, hi, xtol=1e-14, rtol=4 * EPS, maxiter=500))


def _targets(q, kappa):
    return (1.0 - kappa) * q, kappa * q


def exact_interval(lambdas, kappa=DEFAULT_KAPPA):
    """Solve ``redf(rho_lo) = (1 - kappa) q`` and ``redf(rho_hi) = kappa q`` on the full spectrum.

    Eigenvalues below ``lambda_1 * eps`` are raised to that floor, matching the
    clamp applied to the smallest eigenvalue estimate.
    """
    _check_kappa(kappa)
    lam = _clamped(lambdas)
    q = lam.size
    star_lo, star_hi = _wide_bounds(lam.mean(), lam[-1], kappa)
    bracket = (star_lo - BRACKET_PAD, star_hi + BRACKET_PAD)
    t_lo, t_hi = _targets(q, kappa)
    rho_lo = _solve_redf(lam, t_lo, star_lo, bracket)
    rho_hi = _solve_redf(lam, t_hi, star_hi, bracket)
    return SearchInterval(rho_lo, rho_hi, "exact", kappa, q,
                          rho_star_min=star_lo, rho_star_max=star_hi)


def wide_interval(summary, kappa=DEFAULT_KAPPA):
    """``rho*_min = log(kappa / ((1 - kappa) mean))``, ``rho*_max = log((1 - kappa) / (kappa lambda_q))``."""
    _check_kappa(kappa)
    lo, hi = _wide_bounds(summary.lambda_mean, summary.lambda_min, kappa)
    return SearchInterval(lo, hi, "wide", kappa, summary.q, rho_star_min=lo,
                          rho_star_max=hi, summary=summary)


def _fit_alpha(theta, h, target, a_lo, a_hi):
    """Root of ``sum exp(theta + h alpha) - target`` on ``[a_lo, a_hi]``, or None."""
    def g(alpha):
        return float(np.sum(np.exp(theta + h * alpha))) - target

    def gp(alpha):
        return float(np.sum(h * np.exp(theta + h * alpha)))

    g_lo, g_hi = g(a_lo), g(a_hi)
    if not g_lo * g_hi <= 0:
        return None
    if g_lo == 0:
        return a_lo
    if g_hi == 0:
        return a_hi
    try:
        alpha = newton_root(g, gp, 0.5 * (a_lo + a_hi), (a_hi - a_lo) / 4.0)
        if a_lo <= alpha <= a_hi and abs(g(alpha)) <= 1e-10 * target:
            return alpha
    except (ArithmeticError, AutorhoError):
        pass
    return float(brentq(g, a_lo, a_hi, xtol=1e-15, rtol=4 * EPS, maxiter=500))


def _decay_grid(q, gamma):
    t = np.arange(1, q + 1) / (q + 1.0)
    zp = np.log1p(-t) - gamma * np.log(t)
    return (zp - zp[-1]) / (zp[0] - zp[-1])


def approx_spectrum(q, lambda_max, lambda_min, lambda_mean):
    """Approximate the full spectrum from its extremes and mean.

    ``log(lambda_hat_j)`` is modelled as ``Q(z_j, alpha)`` on the decay grid
    ``z_j = log(1 - t_j) - gamma log(t_j)`` (rescaled to ``[0, 1]``), pinned so
    that the end values match ``lambda_max`` and ``lambda_min``; ``alpha`` is
    chosen so that the values average to ``lambda_mean``.  A quadratic and a
    cubic Bernstein form are tried for each ``gamma`` in ``0, 0.05, ..., 1``
    and all accepted fits are averaged.
    """
    q = int(q)
    if q < 2:
        raise ValueError("approx_spectrum needs q >= 2")
    if not 0 < lambda_min <= lambda_max:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    a, b = float(np.log(lambda_min)), float(np.log(lambda_max))
    target = q * float(lambda_mean)
    acc = np.zeros(q)
    n = 0
    for gamma in GAMMAS:
        z = _decay_grid(q, gamma)
        # quadratic, increasing and convex for alpha in [0, b - a]
        theta = a + (b - a) * z
        h = z * z - z
        alpha = _fit_alpha(theta, h, target, 0.0, b - a)
        if alpha is not None:
            acc += np.exp(theta + h * alpha)
            n += 1
        # cubic Bernstein, S-shaped for alpha in [a, (2a + b) / 3]
        c0, c1 = (1 - z) ** 3, 3 * z * (1 - z) ** 2
        c2, c3 = 3 * z * z * (1 - z), z ** 3
        theta = a * (c0 + c2) + b * (c2 + c3)
        h = c1 - c2
        alpha = _fit_alpha(theta, h, target, a, (2 * a + b) / 3.0)
        if alpha is not None:
            acc += np.exp(theta + h * alpha)
            n += 1
    if n == 0:
        raise ApproximationFailure("no (gamma, Q) combination matches the mean eigenvalue")
    lam_hat = acc / n
    lam_hat[0], lam_hat[-1] = lambda_max, lambda_min
    return ApproxSpectrum(lam_hat, n)


def heuristic_bounds(spec, kappa=DEFAULT_KAPPA):
    """``(rho_hat_min, rho_hat_max)``: the exact interval of the approximate spectrum."""
    iv = exact_interval(spec.lambda_hat, kappa)
    return iv.rho_lo, iv.rho_hi


def heuristic_upper_bound(spec, kappa=DEFAULT_KAPPA):
    """``rho_hat_max`` solving ``redf(rho; lambda_hat) = kappa q``."""
    _check_kappa(kappa)
    lam = _clamped(spec.lambda_hat)
    star_lo, star_hi = _wide_bounds(lam.mean(), lam[-1], kappa)
    return _solve_redf(lam, kappa * lam.size, star_hi,
                       (star_lo - BRACKET_PAD, star_hi + BRACKET_PAD))


def auto_interval(prob, kappa=DEFAULT_KAPPA, mode="heuristic", seed=0):
    """Search interval for a :class:`~autorho.pls.PlsProblem`.

    ``mode`` is ``"exact"`` (full spectrum), ``"wide"`` (closed-form bounds) or
    ``"heuristic"`` (wide lower bound with the heuristic upper bound, falling
    back to the wide upper bound when the spectrum approximation fails).
    """
    if mode == "heuristic-preferred":
        mode = "heuristic"
    if mode not in MODES:
        raise ValueError(f"unknown interval mode {mode!r}")
    _check_kappa(kappa)
    tf = build_E(prob.L, prob.penalty)
    if mode == "exact":
        # the full spectrum supplies the extremes and the mean directly
        lam = all_eigenvalues(tf)
        summary = spectrum_summary(lam)
        ex = exact_interval(lam, kappa)
        return SearchInterval(ex.rho_lo, ex.rho_hi, "exact", kappa, summary.q,
                              rho_star_min=ex.rho_star_min, rho_star_max=ex.rho_star_max,
                              summary=summary)
    summary = eigen_summary(prob.L, prob.penalty, seed=seed, tf=tf)
    if mode == "wide":
        return wide_interval(summary, kappa)
    return heuristic_interval(summary, kappa)


def spectrum_summary(lambdas):
    """:class:`EigenSummary` of a full spectrum, with the same clamp as the iterative path."""
    lam = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    floor = lam[0] * EPS
    singular = bool(lam[-1] < floor)
    lam = np.maximum(lam, floor)
    return EigenSummary(float(lam[0]), float(lam[-1]), float(lam.mean()), lam.size, singular)


def heuristic_interval(summary, kappa=DEFAULT_KAPPA):
    """``[rho*_min, rho_hat_max]``, or the wide interval flagged as a fallback."""
    wide = wide_interval(summary, kappa)
    if summary.q < 2:
        return _fallback(wide)
    try:
        spec = approx_spectrum(summary.q, summary.lambda_max, summary.lambda_min,
                               summary.lambda_mean)
        hat_lo, hat_hi = heuristic_bounds(spec, kappa)
    except ApproximationFailure:
        return _fallback(wide)
    if not hat_hi > wide.rho_lo:
        return _fallback(wide)
    return SearchInterval(wide.rho_lo, hat_hi, "heuristic", kappa, summary.q,
                          rho_star_min=wide.rho_lo, rho_star_max=wide.rho_hi,
                          rho_hat_min=hat_lo, rho_hat_max=hat_hi, summary=summary)


def _fallback(wide):
    return SearchInterval(wide.rho_lo, wide.rho_hi, "wide", wide.kappa, wide.q,
                          rho_star_min=wide.rho_lo, rho_star_max=wide.rho_hi,
                          summary=wide.summary, heuristic_failed=True)


def coverage(rho, lambdas):
    """``P(rho) = 1 - redf(rho) / q``, the share of ``[0, q]`` covered by ``[redf(rho), q]``."""
    lambdas = np.asarray(lambdas, dtype=float)
    return 1.0 - redf(rho, lambdas) / lambdas.size
