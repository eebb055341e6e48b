"""Simulation study of interval coverage and a runtime benchmark.

A replication draws knots (equidistant or jittered), ten uniform ``x`` per
knot interval, optional Beta(3, 3) weights and a difference or derivative
penalty, then compares the wide and heuristic upper bounds against the true
spectrum through the coverage statistic ``P(rho) = 1 - redf(rho) / q``.
"""

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import design_matrix, equidistant_knots, random_knots, xs_between_knots
from .eigext import all_eigenvalues, build_E, eigen_summary
from .errors import AutorhoError, TooFewSamples
from .gridsearch import evaluate, make_grid
from .interval import (DEFAULT_KAPPA, auto_interval, coverage, heuristic_interval,
                       wide_interval)
from .penalty import derivative_factor, general_diff
from .pls import new_problem


@dataclass(frozen=True)
class Scenario:
    id: int
    derivative_penalty: bool
    equidistant_knots: bool
    weighted_data: bool


# rows of the scenario table: penalty varies fastest, then knots, then weights
SCENARIOS = tuple(
    Scenario(i + 1, bool(i & 1), bool(i & 2), bool(i & 4)) for i in range(8)
)


def scenario(sid):
    if not 1 <= sid <= 8:
        raise ValueError(f"scenario id must be 1..8, got {sid}")
    return SCENARIOS[sid - 1]


@dataclass
class CoverageReport:
    scenario: int
    p: int
    d: int
    m: int
    replications: int
    seed: int
    kappa: float
    p_hat: np.ndarray = field(repr=False)
    p_star: np.ndarray = field(repr=False)
    heuristic_failures: int = 0
    construction_failures: int = 0

    @property
    def p_hat_valid(self):
        return self.p_hat[np.isfinite(self.p_hat)]

    def fraction_within(self, lower=0.99):
        """Share of replications with ``lower <= P(rho_hat) <= P(rho*)`` (failures count as misses)."""
        ok = np.isfinite(self.p_hat) & (self.p_hat >= lower) & (self.p_hat <= self.p_star)
        return float(np.mean(ok)) if ok.size else float("nan")

    def to_dict(self):
        return {
            "schema": 1,
            "scenario": self.scenario,
            "p": self.p, "d": self.d, "m": self.m,
            "replications": self.replications,
            "seed": self.seed,
            "kappa": self.kappa,
            "heuristic_failures": self.heuristic_failures,
            "construction_failures": self.construction_failures,
            "p_hat": [None if not np.isfinite(v) else float(v) for v in self.p_hat],
            "p_star": [float(v) for v in self.p_star],
        }


def build_problem(sc, p, d, m, rng):
    """One random smoothing problem for scenario ``sc`` (the response is irrelevant)."""
    kv = equidistant_knots(p, d) if sc.equidistant_knots else random_knots(p, d, rng)
    xs = xs_between_knots(kv, 10, rng)
    B = design_matrix(kv, xs)
    w = rng.beta(3.0, 3.0, xs.size) if sc.weighted_data else None
    D = derivative_factor(kv, m) if sc.derivative_penalty else general_diff(kv, m)
    return new_problem(B, np.zeros(xs.size), w, D)


def run_scenario(sc, p, d, m, reps=200, seed=0, kappa=DEFAULT_KAPPA):
    """Coverage of the wide and heuristic upper bounds over ``reps`` replications.

    Replication ``r`` uses the generator seeded with ``seed + r``.  Failures to
    build a problem are counted and skipped; failures of the spectrum
    approximation are counted and recorded as NaN in ``p_hat``.
    """
    if isinstance(sc, int):
        sc = scenario(sc)
    if not 1 <= m <= d - 1:
        raise ValueError("need 1 <= m <= d - 1")
    if p < d or reps < 1:
        raise ValueError("need p >= d and reps >= 1")
    p_hat, p_star = [], []
    heur_fail = cons_fail = 0
    for r in range(reps):
        rng = np.random.default_rng(seed + r)
        try:
            prob = build_problem(sc, p, d, m, rng)
            tf = build_E(prob.L, prob.penalty)
            summary = eigen_summary(prob.L, prob.penalty, seed=seed + r, tf=tf)
            lam = np.maximum(all_eigenvalues(tf), summary.lambda_max * np.finfo(float).eps)
        except (AutorhoError, ArithmeticError, ValueError):
            cons_fail += 1
            continue
        wide = wide_interval(summary, kappa)
        p_star.append(coverage(wide.rho_hi, lam))
        heur = heuristic_interval(summary, kappa)
        if heur.heuristic_failed:
            heur_fail += 1
            p_hat.append(np.nan)
        else:
            p_hat.append(coverage(heur.rho_hat_max, lam))
    return CoverageReport(sc.id, p, d, m, reps, seed, kappa, np.array(p_hat), np.array(p_star),
                          heur_fail, cons_fail)


@dataclass(frozen=True)
class CoverageDensity:
    edges: np.ndarray
    density: np.ndarray
    below: int
    above: int
    reference: float
    star_mean: float


def coverage_density(report, bins=50, lo=0.9, hi=1.0):
    """Histogram density of ``P(rho_hat)`` on ``[lo, hi]`` with the two reference lines.

    ``below``/``above`` count samples outside the range; the density integrates
    to the share of samples inside it.
    """
    x = report.p_hat_valid if isinstance(report, CoverageReport) else np.asarray(report, float)
    x = x[np.isfinite(x)]
    if x.size < 2:
        raise TooFewSamples("need at least two successful replications")
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    density = counts / (x.size * width)
    star = float(np.mean(report.p_star)) if isinstance(report, CoverageReport) else float("nan")
    # the right edge is closed, so exactly hi lands inside
    return CoverageDensity(edges, density, int(np.sum(x < lo)), int(np.sum(x > hi)),
                           1.0 - DEFAULT_KAPPA, star)


def _median_time(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_intervals(p_list, reps=5, d=4, m=2, grid_size=20, seed=0, kappa=DEFAULT_KAPPA):
    """Median wall times of the heuristic interval, the exact interval and ``grid_size`` PLS solves.

    One problem (scenario 3: equidistant knots, difference penalty, no
    weights) is built per ``p``.  Returns a list of row dicts in ``p_list`` order.
    """
    p_list = [int(p) for p in p_list]
    if any(b <= a for a, b in zip(p_list, p_list[1:])):
        raise ValueError("p values must be ascending")
    rows = []
    for p in p_list:
        rng = np.random.default_rng(seed + p)
        prob = build_problem(SCENARIOS[2], p, d, m, rng)
        prob = new_problem(prob.design, rng.normal(size=prob.n), None, prob.penalty)
        iv = auto_interval(prob, kappa, "wide")
        grid = make_grid(iv, grid_size)
        t_heur = _median_time(lambda: auto_interval(prob, kappa, "heuristic"), reps)
        t_exact = _median_time(lambda: auto_interval(prob, kappa, "exact"), reps)
        t_grid = _median_time(lambda: evaluate(prob, grid), reps)
        rows.append({"p": p, "heuristic_interval": t_heur, "exact_interval": t_exact,
                     "pls_grid": t_grid, "grid_size": grid_size, "reps": reps})
    return rows


def loglog_slope(ps, times):
    """Least-squares slope of ``log(time)`` against ``log(p)``."""
    return float(np.polyfit(np.log(ps), np.log(times), 1)[0])


def rows_to_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def rows_to_json(rows, **extra):
    return json.dumps({"schema": 1, **extra, "rows": rows}, indent=2)
