"""Sparse symmetric positive definite linear algebra.

Cholesky factorization with a fill-reducing ordering, triangular solves,
log-determinants, and sampling of Gaussian vectors specified through their
precision matrix. Matrices are stored lower-triangle-only in
:class:`SparseSymmetric`; factorizations are immutable
:class:`CholeskyFactor` objects that can be reused for many right-hand
sides.

Large problems are factorized with CHOLMOD (through cvxopt); below
``DENSE_LIMIT`` a dense LAPACK factorization with the identity ordering is
used instead, which is faster at call-overhead scale. Both backends are
deterministic for a fixed input matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from cvxopt import cholmod as _cholmod
from cvxopt import matrix as _cvxmat
from cvxopt import spmatrix as _cvxsp
from scipy.linalg import cho_solve, lapack, solve_triangular

__all__ = [
    "DENSE_LIMIT",
    "NotPositiveDefiniteError",
    "SparseSymmetric",
    "CholeskyFactor",
    "ShiftedFactorizer",
    "cholesky",
    "solve",
    "sample_gaussian_precision",
    "quad_form",
    "scale_and_shift",
]

# Dense LAPACK beats the CHOLMOD call overhead below this dimension.
DENSE_LIMIT = 64


class NotPositiveDefiniteError(ArithmeticError):
    """Raised when a Cholesky pivot is not strictly positive.

    ``pivot_index`` is the 0-based index (in the original matrix ordering)
    of the first failing pivot, or -1 when it could not be determined.
    """

    def __init__(self, pivot_index: int = -1):
        self.pivot_index = int(pivot_index)
        super().__init__(
            f"matrix is not positive definite (pivot index {self.pivot_index})"
        )


class SparseSymmetric:
    """Sparse symmetric matrix, stored as its lower triangle in COO form.

    Entries are canonicalized on construction: upper-triangle coordinates
    are mirrored to the lower triangle, duplicates are summed, exact zeros
    are dropped, and the triplets are sorted row-major. Instances are
    immutable; the full symmetric expansion is built once on demand and
    cached.

    Parameters
    ----------
    n : int
        Matrix dimension.
    rows, cols : array_like of int
        Coordinates of stored entries, ``rows >= cols`` after
        canonicalization.
    vals : array_like of float
        Entry values.
    """

    __slots__ = ("n", "rows", "cols", "vals", "_full")

    def __init__(self, n, rows, cols, vals):
        n = int(n)
        if n < 1:
            raise ValueError("dimension must be at least 1")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, vals must be 1-D arrays of equal length")
        if rows.size and (rows.min() < 0 or max(rows.max(), cols.max() if cols.size else 0) >= n):
            raise ValueError("entry index out of range")
        # canonicalize through scipy: mirror to lower triangle, sum
        # duplicates, drop stored zeros, sort row-major
        lo_r = np.maximum(rows, cols)
        lo_c = np.minimum(rows, cols)
        m = sp.coo_array((vals, (lo_r, lo_c)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        coo = m.tocoo()
        self.n = n
        self.rows = coo.row.astype(np.int64)
        self.cols = coo.col.astype(np.int64)
        self.vals = coo.data.astype(np.float64)
        self.rows.setflags(write=False)
        self.cols.setflags(write=False)
        self.vals.setflags(write=False)
        self._full = None

    @property
    def nnz(self) -> int:
        """Number of stored lower-triangle entries."""
        return self.vals.size

    def full(self) -> sp.csr_array:
        """Full symmetric expansion as a scipy CSR array (cached)."""
        if self._full is None:
            lower = sp.coo_array(
                (self.vals, (self.rows, self.cols)), shape=(self.n, self.n)
            )
            diag = sp.dia_array(
                (np.asarray(lower.diagonal()).reshape(1, -1), [0]),
                shape=(self.n, self.n),
            )
            self._full = (lower + lower.T - diag).tocsr()
        return self._full

    def toarray(self) -> np.ndarray:
        """Dense symmetric expansion (small matrices and tests only)."""
        return self.full().toarray()

    def diagonal(self) -> np.ndarray:
        return self.full().diagonal()

    def __repr__(self):
        return f"SparseSymmetric(n={self.n}, nnz={self.nnz})"


def scale_and_shift(a: SparseSymmetric, alpha: float, beta: float) -> SparseSymmetric:
    """Return ``alpha * a + beta * I`` as a new :class:`SparseSymmetric`."""
    if not np.isfinite(alpha) or not np.isfinite(beta):
        raise ValueError("coefficients must be finite")
    idx = np.arange(a.n, dtype=np.int64)
    rows = np.concatenate([a.rows, idx])
    cols = np.concatenate([a.cols, idx])
    vals = np.concatenate([alpha * a.vals, np.full(a.n, float(beta))])
    return SparseSymmetric(a.n, rows, cols, vals)


def quad_form(a: SparseSymmetric, x) -> float:
    """Evaluate the quadratic form ``x' A x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.n,):
        raise ValueError(f"vector has length {x.size}, expected {a.n}")
    return float(x @ a.full().dot(x))


class CholeskyFactor:
    """Cholesky factorization ``P A P' = L L'`` of a sparse SPD matrix.

    Construct with :func:`cholesky`. The object is immutable and safe to
    reuse for any number of solves; when built from a
    :class:`SparseSymmetric` it keeps a reference to the factored matrix
    for verification helpers.
    """

    def __init__(self, n, matrix=None, dense_l=None, cvx=None):
        self.n = int(n)
        self.matrix = matrix
        self._dense_l = dense_l
        self._cvx = cvx  # (spmatrix, cholmod factor) pair, or None
        self._perm = None
        self._lower = None

    @property
    def permutation(self) -> np.ndarray:
        """Fill-reducing permutation P (identity for the dense backend)."""
        if self._perm is None:
            if self._dense_l is not None:
                perm = np.arange(self.n, dtype=np.int64)
            else:
                v = _cvxmat(np.arange(self.n, dtype=np.float64))
                _cholmod.solve(self._cvx[1], v, sys=7)  # v := P v
                perm = np.array(v).ravel().astype(np.int64)
            perm.setflags(write=False)
            self._perm = perm
        return self._perm

    # -- solving ---------------------------------------------------------

    def solve(self, b) -> np.ndarray:
        """Solve ``A x = b``; ``b`` may be a vector or an (n, k) matrix."""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        if self._dense_l is not None:
            return cho_solve((self._dense_l, True), b, check_finite=False)
        rhs = _cvxmat(b if b.ndim > 1 else b.reshape(self.n, 1))
        _cholmod.solve(self._cvx[1], rhs, sys=0)
        out = np.array(rhs).reshape(self.n, -1)
        return out[:, 0] if b.ndim == 1 else out

    def sample(self, mean, rng) -> np.ndarray:
        """Draw ``mean + P' L^{-T} z`` with ``z`` standard normal from ``rng``.

        The result is a draw from N(mean, A^{-1}); it is a pure function of
        (matrix, mean, generator state).
        """
        mean = np.asarray(mean, dtype=np.float64)
        if mean.shape != (self.n,):
            raise ValueError(f"mean has length {mean.size}, expected {self.n}")
        z = rng.standard_normal(self.n)
        if self._dense_l is not None:
            x = solve_triangular(self._dense_l, z, lower=True, trans="T", check_finite=False)
            return mean + x
        w = _cvxmat(z)
        _cholmod.solve(self._cvx[1], w, sys=5)  # L' w = z
        _cholmod.solve(self._cvx[1], w, sys=8)  # w := P' w
        return mean + np.array(w).ravel()

    # -- inspection ------------------------------------------------------

    def lower_triangular(self) -> sp.csr_array:
        """The factor L (in permuted order) as a scipy CSR array.

        Extracted from a throwaway refactorization: cholmod's extraction
        call irreversibly restructures the factor it reads, so the factor
        held for solving is never touched.
        """
        if self._lower is None:
            if self._dense_l is not None:
                self._lower = sp.csr_array(np.tril(self._dense_l))
            else:
                lf = _cholmod.getfactor(_sparse_factor(self._cvx[0]))
                self._lower = sp.csr_array(
                    sp.coo_array(
                        (np.array(lf.V).ravel(), (np.array(lf.I).ravel(), np.array(lf.J).ravel())),
                        shape=(self.n, self.n),
                    )
                )
        return self._lower

    def log_det(self) -> float:
        """Log-determinant of A, computed as ``2 sum(log diag L)``."""
        return 2.0 * float(np.sum(np.log(self.lower_triangular().diagonal())))

    def reconstruction_error(self) -> float:
        """Relative Frobenius error of ``P A P' - L L'`` (dense; tests only)."""
        if self.matrix is None:
            raise ValueError("factor was built without a matrix reference")
        a = self.matrix.toarray()
        l = self.lower_triangular().toarray()
        p = self.permutation
        return float(
            np.linalg.norm(a[np.ix_(p, p)] - l @ l.T) / max(np.linalg.norm(a), 1e-300)
        )


def _cvx_lower(a: SparseSymmetric) -> _cvxsp:
    return _cvxsp(
        _cvxmat(a.vals),
        _cvxmat(a.rows.astype(np.int32)),
        _cvxmat(a.cols.astype(np.int32)),
        (a.n, a.n),
    )


def _pattern_permutation(a: SparseSymmetric) -> np.ndarray:
    """Fill-reducing permutation CHOLMOD picks for a's sparsity pattern.

    Computed by factorizing a diagonally dominant surrogate with the same
    off-diagonal pattern; the ordering depends only on that pattern.
    """
    off = a.rows != a.cols
    strength = np.bincount(a.rows[off], weights=np.abs(a.vals[off]), minlength=a.n)
    strength += np.bincount(a.cols[off], weights=np.abs(a.vals[off]), minlength=a.n)
    idx = np.arange(a.n, dtype=np.int64)
    rows = np.concatenate([a.rows[off], idx])
    cols = np.concatenate([a.cols[off], idx])
    vals = np.concatenate([-np.abs(a.vals[off]), strength + 1.0])
    surrogate = _cvx_lower(SparseSymmetric(a.n, rows, cols, vals))
    f = _cholmod.symbolic(surrogate)
    _cholmod.numeric(surrogate, f)
    v = _cvxmat(np.arange(a.n, dtype=np.float64))
    _cholmod.solve(f, v, sys=7)  # v := P v reveals the permutation
    return np.array(v).ravel().astype(np.int64)


def cholesky(a: SparseSymmetric) -> CholeskyFactor:
    """Factor a symmetric positive definite matrix as ``P A P' = L L'``.

    Parameters
    ----------
    a : SparseSymmetric
        Must be strictly positive definite. Intrinsic (singular) matrices
        are rejected; add a ridge such as ``scale_and_shift(R, lam, 1.0)``
        first.

    Returns
    -------
    CholeskyFactor

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is not strictly positive; the error names the 0-based
        index of the failing pivot in the original ordering.
    """
    if a.n <= DENSE_LIMIT:
        c = _dense_factor(a.toarray())
        _check_pivots(np.diag(c), np.arange(a.n))
        return CholeskyFactor(a.n, matrix=a, dense_l=c)
    mat = _cvx_lower(a)
    try:
        f = _sparse_factor(mat)
    except NotPositiveDefiniteError as exc:
        k = exc.pivot_index  # permuted order; map back through the ordering
        pivot = -1
        if 0 <= k < a.n:
            try:
                pivot = int(_pattern_permutation(a)[k])
            except Exception:
                pivot = -1
        raise NotPositiveDefiniteError(pivot) from exc
    out = CholeskyFactor(a.n, matrix=a, cvx=(mat, f))
    _check_pivots(out.lower_triangular().diagonal(), out.permutation)
    return out


def _check_pivots(diag_l: np.ndarray, perm: np.ndarray):
    """Reject pivots that vanish at working precision.

    Rounding can turn the exactly-zero trailing pivot of a semidefinite
    matrix into a tiny positive number, which the factorization routines
    accept; a scale-relative threshold catches that.
    """
    piv = diag_l * diag_l
    tol = piv.max() * piv.size * np.finfo(np.float64).eps
    bad = np.nonzero(piv <= tol)[0]
    if bad.size:
        raise NotPositiveDefiniteError(int(perm[bad[0]]))


def _dense_factor(arr: np.ndarray) -> np.ndarray:
    c, info = lapack.dpotrf(arr, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError(f"invalid LAPACK argument {-info}")
    return c


def _sparse_factor(mat: _cvxsp):
    f = _cholmod.symbolic(mat)
    try:
        _cholmod.numeric(mat, f)
    except ArithmeticError as exc:
        raise NotPositiveDefiniteError(int(exc.args[0]) if exc.args else -1) from exc
    return f


class ShiftedFactorizer:
    """Amortized factorizations of ``alpha * A + beta * I`` for one fixed A.

    Precomputes the structural work (dense expansion below
    ``DENSE_LIMIT``, assembled triplets above) once, so repeated
    factorizations with changing coefficients cost only the numeric
    factorization. For positive coefficients ``factor(alpha, beta)``
    solves and samples identically to
    ``cholesky(scale_and_shift(a, alpha, beta))``; it skips that
    function's numerical-rank check, since shifted intrinsic matrices are
    strictly positive definite by construction.
    """

    def __init__(self, a: SparseSymmetric):
        self.n = a.n
        if a.n <= DENSE_LIMIT:
            self._dense_a = a.toarray()
            self._diag = np.diag_indices(a.n)
            self._rows = self._cols = self._base = self._is_diag = None
        else:
            self._dense_a = None
            # merged lower-triangle pattern of A plus the full diagonal,
            # sorted row-major like SparseSymmetric canonical storage
            idx = np.arange(a.n, dtype=np.int64)
            off = a.rows != a.cols
            diag_vals = np.zeros(a.n)
            diag_vals[a.rows[~off]] = a.vals[~off]
            rows = np.concatenate([a.rows[off], idx])
            cols = np.concatenate([a.cols[off], idx])
            base = np.concatenate([a.vals[off], diag_vals])
            is_diag = np.concatenate([np.zeros(off.sum()), np.ones(a.n)])
            order = np.lexsort((cols, rows))
            self._rows = _cvxmat(rows[order].astype(np.int32))
            self._cols = _cvxmat(cols[order].astype(np.int32))
            self._base = base[order]
            self._is_diag = is_diag[order]

    def factor(self, alpha: float, beta: float) -> CholeskyFactor:
        """Factor ``alpha * A + beta * I``; must be positive definite."""
        if self._dense_a is not None:
            arr = alpha * self._dense_a
            arr[self._diag] += beta
            return CholeskyFactor(self.n, dense_l=_dense_factor(arr))
        mat = _cvxsp(
            _cvxmat(alpha * self._base + beta * self._is_diag),
            self._rows,
            self._cols,
            (self.n, self.n),
        )
        return CholeskyFactor(self.n, cvx=(mat, _sparse_factor(mat)))


def solve(f: CholeskyFactor, b) -> np.ndarray:
    """Solve ``A x = b`` with a previously computed factor."""
    return f.solve(b)


def sample_gaussian_precision(f: CholeskyFactor, mean, rng) -> np.ndarray:
    """Draw one sample from N(mean, A^{-1}) given a factor of A.

    Consumes exactly ``n`` standard normal variates from ``rng``, so the
    draw is reproducible from the generator state.
    """
    return f.sample(mean, rng)
