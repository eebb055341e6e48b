"""Grid search over ``rho`` for GCV (minimized) and REML (maximized)."""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import AllPointsFailed, AutorhoError
from .pls import solve_at

CRITERIA = ("gcv", "reml")
DEFAULT_GRID = 100

Selection = namedtuple("Selection", ["rho_star", "index", "value"])


@dataclass(frozen=True, eq=False)
class CriterionCurve:
    """Criterion values along an ascending ``rho`` grid; failed points hold NaN."""

    rhos: np.ndarray
    edf: np.ndarray
    gcv: np.ndarray
    reml: np.ndarray
    failures: tuple = ()

    def __len__(self):
        return self.rhos.size

    @property
    def ok(self):
        mask = np.ones(self.rhos.size, dtype=bool)
        mask[list(self.failures)] = False
        return mask

    def values(self, criterion):
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}")
        return getattr(self, criterion)


def make_grid(interval, n=DEFAULT_GRID):
    """``n`` equally spaced values from ``interval.rho_lo`` to ``interval.rho_hi`` inclusive.

    ``interval`` may also be a ``(lo, hi)`` pair.
    """
    n = int(n)
    if n < 2:
        raise ValueError("a grid needs at least two points")
    lo, hi = (interval.rho_lo, interval.rho_hi) if hasattr(interval, "rho_lo") else interval
    return np.linspace(float(lo), float(hi), n)


def evaluate(prob, grid):
    """Fit at every grid point; numerical failures are recorded instead of raised."""
    rhos = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(np.diff(rhos) <= 0):
        raise ValueError("grid must be strictly increasing")
    out = np.full((3, rhos.size), np.nan)
    failures = []
    for i, rho in enumerate(rhos):
        try:
            fit = solve_at(prob, rho)
        except (AutorhoError, ArithmeticError):
            failures.append(i)
            continue
        out[:, i] = fit.edf, fit.gcv, fit.reml
    if len(failures) == rhos.size:
        raise AllPointsFailed(f"all {rhos.size} grid points failed")
    return CriterionCurve(rhos, out[0], out[1], out[2], tuple(failures))


def select_optimum(curve, criterion="gcv"):
    """Grid optimum: smallest GCV or largest REML; ties go to the larger ``rho``."""
    vals = curve.values(criterion)
    ok = curve.ok & np.isfinite(vals)
    if not ok.any():
        raise AllPointsFailed("no successful grid point to select from")
    score = np.where(ok, vals if criterion == "gcv" else -vals, np.inf)
    best = score.min()
    index = int(np.flatnonzero(score == best)[-1])
    return Selection(float(curve.rhos[index]), index, float(vals[index]))


def boundary_warning(curve, selection):
    """Message when the optimum sits on the first or last grid point, else None."""
    n = len(curve)
    if selection.index == 0:
        return (f"optimum at the lower grid end (rho={selection.rho_star:g}); "
                "the true extremum may lie below the interval")
    if selection.index == n - 1:
        return (f"optimum at the upper grid end (rho={selection.rho_star:g}); "
                "the true extremum may lie above the interval")
    return None


def count_local_minima(values):
    """Number of interior local minima in a sequence, from sign changes of its differences.

    NaN entries are dropped and flat runs count once.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    d = np.sign(np.diff(v))
    d = d[d != 0]
    return int(np.sum((d[:-1] < 0) & (d[1:] > 0)))
