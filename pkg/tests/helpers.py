"""Problem builders shared by the test modules."""

import numpy as np

from autorho.basis import design_matrix, equidistant_knots, random_knots, xs_between_knots
from autorho.penalty import derivative_factor, general_diff
from autorho.pls import new_problem

# criterion number -> one-line verdict, printed at the end of the session
ACCEPTANCE = {}


def make_problem(p, d=4, m=2, derivative=False, equidistant=False, weighted=False,
                 seed=0, y=None, per_interval=10):
    """Simulation-style problem: knots, ten x per interval, optional weights."""
    rng = np.random.default_rng(seed)
    kv = equidistant_knots(p, d) if equidistant else random_knots(p, d, rng)
    xs = xs_between_knots(kv, per_interval, rng)
    B = design_matrix(kv, xs)
    w = rng.beta(3.0, 3.0, xs.size) if weighted else None
    D = derivative_factor(kv, m) if derivative else general_diff(kv, m)
    if y is None:
        y = np.sin(xs / xs.max() * 6.0) + rng.normal(0.0, 0.2, xs.size)
    return new_problem(B, y, w, D)


def dense_parts(prob):
    """Dense ``W^1/2 B``, ``W^1/2 y``, ``D`` of a problem."""
    B = prob.design.toarray()
    y = prob.y.copy()
    if prob.weights is not None:
        s = np.sqrt(prob.weights)
        B = B * s[:, None]
        y = y * s
    return B, y, prob.penalty.toarray()


def dense_E(prob):
    L = np.linalg.cholesky(prob.btwb.toarray())
    return np.linalg.solve(L, prob.penalty.toarray().T)


def dense_spectrum(prob):
    E = dense_E(prob)
    return np.sort(np.linalg.eigvalsh(E.T @ E))[::-1]


def setups(count, seed=12345, p_max=100):
    """Random (p, d, m, scenario flags, seed) tuples covering all eight scenarios."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = int(rng.choice([3, 4]))
        m = int(rng.integers(1, d))
        p = int(rng.integers(max(d + 2, 10), p_max + 1))
        sid = i % 8
        out.append(dict(p=p, d=d, m=m, derivative=bool(sid & 1), equidistant=bool(sid & 2),
                        weighted=bool(sid & 4), seed=1000 + i))
    return out


def bimodal_data(n=400, seed=1):
    """A slow sine plus a fast, weaker one: GCV has a smooth and a wiggly local minimum."""
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, 1.0, n))
    y = np.sin(2 * np.pi * x) + 0.3 * np.sin(2 * np.pi * 15 * x) + rng.normal(0.0, 0.3, n)
    return x, y


def bimodal_problem(n=400, seed=1):
    from autorho.basis import quantile_knots
    x, y = bimodal_data(n, seed)
    kv = quantile_knots(x, n // 4 + 2, 4)
    return new_problem(design_matrix(kv, x), y, None, general_diff(kv, 2))
