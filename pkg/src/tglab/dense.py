"""Dense real linear algebra used throughout tglab.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The two
structured types are :class:`SpdMatrix` (a symmetric positive definite
matrix paired with its Cholesky factor) and :class:`SymEigen` (an ascending
symmetric eigendecomposition).

Norms weighted by an SPD matrix ``M = L L^T`` use the factor ``F = L^T``,
so ``||X||_M = ||L^T X L^{-T}||_2``. Any ``F`` with ``F^T F = M`` gives the
same value; the symmetric root from :func:`spd_inv_sqrt` is only needed
where a caller wants it explicitly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import IndexOutOfRange, InvalidParameter, NoConvergence, NotPositiveDefinite

EPS = np.finfo(float).eps
SYMMETRY_RTOL = 1e-12


def as_matrix(x, name="matrix"):
    """Return `x` as a finite 2-D float64 array or raise InvalidParameter."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidParameter(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter(f"{name} has non-finite entries")
    return a


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_symmetric(s, name="matrix", rtol=SYMMETRY_RTOL):
    s = as_matrix(s, name)
    if s.shape[0] != s.shape[1]:
        raise InvalidParameter(f"{name} must be square, got shape {s.shape}")
    scale = np.max(np.abs(s))
    if np.max(np.abs(s - s.T)) > rtol * scale:
        raise InvalidParameter(f"{name} is not symmetric to relative {rtol:g}")
    return s


def symmetrize(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * (s + s.T)


def cholesky(s):
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot ``L[j, j]**2`` is at or below ``dim * eps * max(diag(S))``.
    """
    s = symmetrize(check_symmetric(s))
    n = s.shape[0]
    dmax = np.max(np.diag(s))
    if dmax <= 0:
        raise NotPositiveDefinite("matrix has no positive diagonal entry")
    try:
        low = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(low) ** 2
    floor = n * EPS * dmax
    bad = np.flatnonzero(pivots <= floor)
    if bad.size:
        raise NotPositiveDefinite(
            f"pivot {bad[0]} = {pivots[bad[0]]:.3e} below {floor:.3e}"
        )
    return low


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive definite matrix with its lower Cholesky factor."""

    base: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_matrix(cls, s):
        s = symmetrize(check_symmetric(s))
        return cls(_frozen(s), _frozen(cholesky(s)))

    @property
    def dim(self):
        return self.base.shape[0]

    def solve(self, b):
        """Apply ``base^{-1}`` to a vector or to the columns of a matrix."""
        y = solve_triangular(self.chol, b, lower=True, check_finite=False)
        return solve_triangular(self.chol, y, lower=True, trans="T", check_finite=False)

    def inv(self):
        return symmetrize(self.solve(np.eye(self.dim)))

    def factor_apply(self, x):
        """``L^T x``: maps vectors into coordinates where the M-norm is Euclidean."""
        return self.chol.T @ x

    def factor_solve(self, x):
        """``L^{-T} x``, the inverse of :meth:`factor_apply`."""
        return solve_triangular(self.chol, x, lower=True, trans="T", check_finite=False)

    def congruence_inv(self, s):
        """``L^{-1} S L^{-T}`` for a square `s`, symmetrized."""
        y = solve_triangular(self.chol, s, lower=True, check_finite=False)
        y = solve_triangular(self.chol, y.T, lower=True, check_finite=False)
        return symmetrize(y)

    def similarity(self, x):
        """``L^T X L^{-T}``, whose 2-norm is the M-norm of `x`."""
        y = self.chol.T @ x
        return solve_triangular(self.chol, y.T, lower=True, check_finite=False).T


def as_spd(b):
    return b if isinstance(b, SpdMatrix) else SpdMatrix.from_matrix(b)


@dataclass(frozen=True, eq=False)
class SymEigen:
    """Eigenpairs of a symmetric matrix, values ascending."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]


def jacobi_eigen(s, max_rotations=None):
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Parameters
    ----------
    s : array
        Symmetric matrix.
    max_rotations : int, optional
        Rotation budget, default ``64 * dim**2``.

    Returns
    -------
    SymEigen
    """
    a = symmetrize(check_symmetric(s)).copy()
    n = a.shape[0]
    v = np.eye(n)
    budget = 64 * n * n if max_rotations is None else max_rotations
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return SymEigen(_frozen(np.zeros(n)), _frozen(v))
    skip = EPS * scale / n
    rotations = 0
    while True:
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 if theta == 0.0 else np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                sn = t * c
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - sn * a[:, q]
                a[:, q] = sn * col_p + c * a[:, q]
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - sn * a[q, :]
                a[q, :] = sn * row_p + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                vec_p = v[:, p].copy()
                v[:, p] = c * vec_p - sn * v[:, q]
                v[:, q] = sn * vec_p + c * v[:, q]
                rotated = True
                rotations += 1
                if rotations > budget:
                    raise NoConvergence(f"Jacobi exceeded {budget} rotations")
        if not rotated:
            break
    order = np.argsort(np.diag(a), kind="stable")
    return SymEigen(_frozen(np.diag(a)[order]), _frozen(v[:, order]))


def sym_eigen(s, method="lapack"):
    """Eigendecomposition of a symmetric matrix with ascending values.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``method="jacobi"`` uses
    :func:`jacobi_eigen`.
    """
    if method == "jacobi":
        return jacobi_eigen(s)
    if method != "lapack":
        raise InvalidParameter(f"unknown eigensolver method {method!r}")
    a = symmetrize(check_symmetric(s))
    try:
        w, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    return SymEigen(_frozen(w), _frozen(q))


def gen_eigen_spd(s, b, method="lapack"):
    """Solve ``S v = mu B v`` with B SPD by Cholesky reduction.

    The returned vectors are B-orthonormal: ``V^T B V = I``.
    """
    b = as_spd(b)
    s = check_symmetric(s)
    if s.shape != b.base.shape:
        raise InvalidParameter(f"shape mismatch {s.shape} vs {b.base.shape}")
    eig = sym_eigen(b.congruence_inv(s), method=method)
    vectors = b.factor_solve(np.asarray(eig.vectors))
    return SymEigen(eig.values, _frozen(vectors))


def spd_inv_sqrt(b):
    """Symmetric inverse square root ``B^{-1/2}``."""
    b = as_spd(b)
    eig = sym_eigen(b.base)
    w = np.asarray(eig.values)
    if np.any(w <= 0):
        raise NotPositiveDefinite("nonpositive eigenvalue in SPD matrix")
    q = np.asarray(eig.vectors)
    return symmetrize((q / np.sqrt(w)) @ q.T)


def psd_sqrt(s, clamp=1e-10):
    """Symmetric PSD square root; eigenvalues in ``[-clamp * scale, 0)`` are set to 0."""
    eig = sym_eigen(s)
    w = np.array(eig.values)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -clamp * scale:
        raise NotPositiveDefinite(f"matrix is indefinite: lambda_min = {w[0]:.3e}")
    w[w < 0] = 0.0
    q = np.asarray(eig.vectors)
    return symmetrize((q * np.sqrt(w)) @ q.T)


def spectral_norm(x):
    x = as_matrix(x)
    return float(np.linalg.norm(x, 2))


def m_operator_norm(x, m):
    """``||X||_M = max ||Xv||_M / ||v||_M`` for square `x`."""
    m = as_spd(m)
    x = as_matrix(x)
    if x.shape != m.base.shape:
        raise InvalidParameter(f"shape mismatch {x.shape} vs {m.base.shape}")
    return spectral_norm(m.similarity(x))


def m_rect_norm(x, m):
    """Norm of an ``n x k`` matrix as a map from Euclidean ``R^k`` into ``(R^n, M)``."""
    m = as_spd(m)
    return spectral_norm(m.factor_apply(as_matrix(x)))


def m_vector_norm(v, m):
    m = as_spd(m)
    return float(np.linalg.norm(m.factor_apply(np.asarray(v, dtype=float))))


def lambda_k(s, k):
    """k-th smallest eigenvalue, 1-based."""
    s = check_symmetric(s)
    if not 1 <= k <= s.shape[0]:
        raise IndexOutOfRange(f"k={k} outside 1..{s.shape[0]}")
    return float(sym_eigen(s).values[k - 1])


def zero_threshold(values, n=None):
    """Rank cutoff ``100 * n * eps * max|lambda|`` for computed eigenvalues."""
    values = np.asarray(values)
    n = values.shape[0] if n is None else n
    return 100.0 * n * EPS * max(float(np.max(np.abs(values))), np.finfo(float).tiny)


def matrix_rank_certified(x):
    """Numerical rank using ``sigma > max(shape) * eps * sigma_max``."""
    sv = np.linalg.svd(as_matrix(x), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > max(x.shape) * EPS * sv[0]))
