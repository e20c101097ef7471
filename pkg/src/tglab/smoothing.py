"""SPD smoothers and the smoothed complement ``A + A^T - A M^{-1} A^T``.

A smoother is *certified* when the pencil ``(tilde_A, M)`` has no eigenvalue
below ``-1e-10``; that is the computable form of ``||I - M^{-1} A||_M <= 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .dense import SpdMatrix, symmetrize, sym_eigen
from .errors import BracketingFailure, InvalidParameter

KINDS = ("scaled-jacobi", "scaled-identity", "sgs-of-sym")
CERTIFY_TOL = 1e-10
BISECTION_STEPS = 30
MAX_DOUBLINGS = 60


@dataclass(frozen=True, eq=False)
class Smoother:
    m: SpdMatrix
    kind: str
    omega: float
    tilde_a: np.ndarray
    pencil_min: float
    certified: bool

    @property
    def n(self):
        return self.m.dim


def base_matrix(problem, kind):
    """The unscaled smoother ``M_0`` of the given kind."""
    a = problem.a
    n = problem.n
    if kind == "scaled-identity":
        return np.eye(n)
    if kind == "scaled-jacobi":
        d = np.diag(a)
        if np.any(d <= 0):
            raise InvalidParameter("scaled-jacobi needs a strictly positive diagonal")
        return np.diag(d)
    if kind == "sgs-of-sym":
        s = problem.sym
        d = np.diag(s)
        if np.any(d <= 0):
            raise InvalidParameter("sgs-of-sym needs a strictly positive diagonal")
        ld = np.tril(s)
        return symmetrize((ld / d) @ ld.T)
    raise InvalidParameter(f"unknown smoother kind {kind!r}; expected one of {KINDS}")


def smoothed_complement(a, m):
    """``A + A^T - A M^{-1} A^T`` for an SpdMatrix `m`, exactly symmetric."""
    y = solve_triangular(m.chol, a.T, lower=True, check_finite=False)
    return symmetrize(a + a.T - y.T @ y)


def smoother_from_matrix(problem, m, kind="custom", omega=1.0):
    """Wrap an arbitrary SPD matrix as a smoother and run the certification test."""
    spd = m if isinstance(m, SpdMatrix) else SpdMatrix.from_matrix(m)
    if spd.dim != problem.n:
        raise InvalidParameter(f"smoother dim {spd.dim} != problem dim {problem.n}")
    tilde = smoothed_complement(problem.a, spd)
    lam = float(sym_eigen(spd.congruence_inv(tilde)).values[0])
    tilde.setflags(write=False)
    return Smoother(spd, kind, float(omega), tilde, lam, lam >= -CERTIFY_TOL)


def build_smoother(problem, kind, omega=1.0):
    """``M = omega * M_0`` for ``kind`` in :data:`KINDS`."""
    if not omega > 0:
        raise InvalidParameter(f"omega must be > 0, got {omega}")
    return smoother_from_matrix(problem, omega * base_matrix(problem, kind), kind, omega)


def auto_scale(problem, kind):
    """Smallest ``omega`` (up to bisection) with ``omega * M_0`` certified.

    The upper bracket starts at 1 and doubles until the smoothed complement is
    PSD; then 30 bisection steps shrink the bracket. Feasibility is monotone in
    ``omega`` because ``A M^{-1} A^T`` decreases as ``M`` grows.
    """
    m0 = SpdMatrix.from_matrix(base_matrix(problem, kind))
    a = problem.a
    # With M = omega M_0 the pencil values are those of (omega*B1 - B2) / omega**2.
    b1 = m0.congruence_inv(a + a.T)
    c = solve_triangular(m0.chol, a.T, lower=True, check_finite=False)
    c = solve_triangular(m0.chol, c.T, lower=True, check_finite=False)
    b2 = symmetrize(c @ c.T)

    def feasible(omega):
        return np.linalg.eigvalsh(omega * b1 - b2)[0] >= 0.0

    lo, hi = 0.0, 1.0
    doublings = 0
    while not feasible(hi):
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise BracketingFailure(f"{problem.label}: no certified omega up to 2**{MAX_DOUBLINGS}")
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    s = build_smoother(problem, kind, hi)
    if not s.certified:
        # Rounding differs between the scaled test and the rebuilt smoother.
        s = build_smoother(problem, kind, hi * (1.0 + 1e-12))
    return s


def smoother_floor(s):
    """``lambda_min(M^{-1} tilde_A)`` clamped to ``[0, 1]``."""
    return float(min(1.0, max(0.0, s.pencil_min)))
