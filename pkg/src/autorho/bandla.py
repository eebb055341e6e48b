"""Banded and dense linear algebra kernels.

Band storage
------------
A :class:`BandMatrix` with ``lower`` sub-diagonals and ``upper`` super-diagonals
keeps its entries in a ``(lower + upper + 1, ncols)`` array ``data`` with::

    data[upper + i - j, j] == A[i, j]

so every column of ``data`` holds one column of the band and every row of
``data`` one diagonal.  Symmetric matrices store only their lower triangle
(``upper == 0``), which for ``upper == 0`` is exactly the LAPACK lower band
layout used by ``?pbtrf`` and ``?tbtrs``.  Factorization and solves therefore
share a single layout and never convert.
"""

import numpy as np
from scipy.linalg import lapack

from .errors import ConvergenceFailure, NotPositiveDefinite, SingularFactor

EPS = np.finfo(float).eps


class BandMatrix:
    """Banded matrix in diagonal-packed, column-major storage."""

    def __init__(self, nrows, ncols, lower, upper, data, symmetric=False):
        nrows, ncols, lower, upper = int(nrows), int(ncols), int(lower), int(upper)
        data = np.array(data, dtype=float)
        if min(nrows, ncols) < 1 or lower < 0 or upper < 0:
            raise ValueError("invalid band dimensions")
        if lower + upper + 1 > max(nrows, ncols):
            raise ValueError("band wider than the matrix")
        if data.shape != (lower + upper + 1, ncols):
            raise ValueError(f"band data must have shape {(lower + upper + 1, ncols)}, got {data.shape}")
        if symmetric and (nrows != ncols or upper != 0):
            raise ValueError("symmetric band matrices store the lower triangle only")
        self.nrows, self.ncols = nrows, ncols
        self.lower, self.upper = lower, upper
        self.symmetric = bool(symmetric)
        # zero the storage slots that fall outside the matrix
        for k in range(-lower, upper + 1):
            lo, hi = _diag_columns(k, nrows, ncols)
            row = data[upper - k]
            row[:lo] = 0.0
            row[hi:] = 0.0
        data.setflags(write=False)
        self.data = data

    @property
    def shape(self):
        return self.nrows, self.ncols

    @property
    def bandwidth(self):
        return max(self.lower, self.upper)

    @classmethod
    def from_dense(cls, A, lower, upper, symmetric=False):
        A = np.asarray(A, dtype=float)
        nrows, ncols = A.shape
        if symmetric:
            upper = 0
        data = np.zeros((lower + upper + 1, ncols))
        for k in range(-lower, upper + 1):
            lo, hi = _diag_columns(k, nrows, ncols)
            j = np.arange(lo, hi)
            data[upper - k, lo:hi] = A[j - k, j]
        return cls(nrows, ncols, lower, upper, data, symmetric=symmetric)

    def get(self, i, j):
        if self.symmetric and j > i:
            i, j = j, i
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError((i, j))
        if -self.lower <= j - i <= self.upper:
            return float(self.data[self.upper + i - j, j])
        return 0.0

    def toarray(self):
        A = np.zeros(self.shape)
        for k in range(-self.lower, self.upper + 1):
            lo, hi = _diag_columns(k, self.nrows, self.ncols)
            j = np.arange(lo, hi)
            A[j - k, j] = self.data[self.upper - k, lo:hi]
        if self.symmetric:
            A = A + np.tril(A, -1).T
        return A

    def diagonal(self):
        return np.array(self.data[self.upper, : min(self.nrows, self.ncols)])

    def matvec(self, x):
        """Return ``A @ x`` for a vector or a matrix of column vectors."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.nrows,) + x.shape[1:])
        self._accumulate(x, out, transpose=False)
        if self.symmetric:
            self._accumulate(x, out, transpose=True, strict=True)
        return out

    def rmatvec(self, x):
        """Return ``A.T @ x``."""
        if self.symmetric:
            return self.matvec(x)
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.ncols,) + x.shape[1:])
        self._accumulate(x, out, transpose=True)
        return out

    def _accumulate(self, x, out, transpose, strict=False):
        for k in range(-self.lower, self.upper + 1):
            if strict and k == 0:
                continue
            lo, hi = _diag_columns(k, self.nrows, self.ncols)
            if lo >= hi:
                continue
            vals = self.data[self.upper - k, lo:hi]
            if x.ndim > 1:
                vals = vals[:, None]
            if transpose:
                # (A^T x)[j] += A[j-k, j] * x[j-k]
                out[lo:hi] += vals * x[lo - k:hi - k]
            else:
                out[lo - k:hi - k] += vals * x[lo:hi]

    def __repr__(self):
        kind = "symmetric " if self.symmetric else ""
        return f"<{kind}BandMatrix {self.nrows}x{self.ncols} lower={self.lower} upper={self.upper}>"


class LowerBandMatrix(BandMatrix):
    """Square lower-triangular band matrix, e.g. a Cholesky factor."""

    def __init__(self, dim, bandwidth, data):
        bandwidth = min(int(bandwidth), int(dim) - 1)
        data = np.asarray(data, dtype=float)[: bandwidth + 1]
        super().__init__(dim, dim, bandwidth, 0, data)

    @property
    def dim(self):
        return self.nrows

    @classmethod
    def from_dense(cls, A, bandwidth):
        A = np.asarray(A, dtype=float)
        band = BandMatrix.from_dense(A, min(bandwidth, A.shape[0] - 1), 0)
        return cls(A.shape[0], band.lower, band.data)


def _diag_columns(k, nrows, ncols):
    """Column range [lo, hi) touched by diagonal offset ``k = j - i``."""
    return max(0, k), min(ncols, nrows + k)


class RowBlockMatrix:
    """Matrix whose row ``i`` is zero outside ``first[i] .. first[i] + width - 1``.

    This is the natural storage of a B-spline design matrix: every row has at
    most ``width`` consecutive nonzeros.
    """

    def __init__(self, first, values, ncols):
        first = np.asarray(first, dtype=np.intp)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] != first.shape[0]:
            raise ValueError("one block of values per row is required")
        width = values.shape[1]
        if first.size and (first.min() < 0 or first.max() + width > ncols):
            raise ValueError("row blocks fall outside the column range")
        self.first = first
        self.values = values
        self.ncols = int(ncols)

    @property
    def nrows(self):
        return self.first.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.nrows, self.ncols

    def _columns(self):
        return self.first[:, None] + np.arange(self.width)

    def matvec(self, beta):
        beta = np.asarray(beta, dtype=float)
        return np.einsum("ij,ij...->i...", self.values, beta[self._columns()])

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float)
        cols = self._columns().ravel()
        if y.ndim == 1:
            return np.bincount(cols, weights=(self.values * y[:, None]).ravel(), minlength=self.ncols)
        flat = y.reshape(y.shape[0], -1)
        out = np.empty((self.ncols, flat.shape[1]))
        for k in range(flat.shape[1]):
            out[:, k] = np.bincount(cols, weights=(self.values * flat[:, k, None]).ravel(),
                                    minlength=self.ncols)
        return out.reshape((self.ncols,) + y.shape[1:])

    def toarray(self):
        A = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.nrows), self.width)
        A[rows, self._columns().ravel()] = self.values.ravel()
        return A

    def scale_rows(self, s):
        return RowBlockMatrix(self.first, self.values * np.asarray(s, dtype=float)[:, None], self.ncols)


def cholesky_band(A):
    """Cholesky factor ``G`` (lower, banded) of a symmetric positive-definite band matrix.

    A pivot ``G[i, i]**2`` that is not larger than ``dim * eps * max(diag(A))``
    is treated as a breakdown: the matrix is numerically rank deficient even if
    LAPACK would carry on.
    """
    if not A.symmetric:
        raise ValueError("cholesky_band expects a symmetric BandMatrix")
    n = A.nrows
    if not np.all(np.isfinite(A.data)):
        raise NotPositiveDefinite(0, "matrix has non-finite entries")
    c, info = lapack.dpbtrf(A.data, lower=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpbtrf")
    pivots = c[0] ** 2
    threshold = n * EPS * max(float(np.max(A.diagonal())), 0.0)
    bad = np.flatnonzero(~(pivots > threshold))
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]))
    return LowerBandMatrix(n, A.lower, c)


def _tbtrs(G, rhs, trans):
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != G.dim:
        raise ValueError("dimension mismatch")
    diag = G.data[0]
    if np.any(diag == 0.0):
        raise SingularFactor(f"zero diagonal entry at {int(np.flatnonzero(diag == 0.0)[0])}")
    b = rhs.reshape(G.dim, -1)
    x, info = lapack.dtbtrs(G.data, b, uplo="L", trans=trans)
    if info > 0:
        raise SingularFactor(f"zero diagonal entry at {info - 1}")
    return x.reshape(rhs.shape)


def solve_lower_band(G, rhs):
    """Solve ``G X = rhs`` for a lower band factor ``G``."""
    return _tbtrs(G, rhs, "N")


def solve_upper_band(G, rhs):
    """Solve ``G.T X = rhs`` using the lower factor ``G`` as an implicit transpose."""
    return _tbtrs(G, rhs, "T")


def frobenius_sq(X):
    X = np.asarray(X, dtype=float)
    return float(np.sum(X * X))


def dense_sym_eigenvalues(A):
    """All eigenvalues of a symmetric dense matrix, in descending order."""
    A = np.asarray(A, dtype=float)
    try:
        w = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return w[::-1].copy()


def btb(B, weights=None):
    """Form ``B.T W B`` as a symmetric band matrix from a row-block matrix ``B``."""
    vals = B.values
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (B.nrows,):
            raise ValueError("one weight per row is required")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
    width, p = B.width, B.ncols
    lower = min(width - 1, p - 1)
    data = np.zeros((lower + 1, p))
    for a in range(width):
        cols = B.first + a
        wa = vals[:, a] if weights is None else vals[:, a] * weights
        for b in range(a, min(width, a + lower + 1)):
            data[b - a] += np.bincount(cols, weights=wa * vals[:, b], minlength=p)
    return BandMatrix(p, p, lower, 0, data, symmetric=True)
