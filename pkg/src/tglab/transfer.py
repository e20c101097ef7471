"""Restrictions, the prolongation ``M^{-1} A^T R^T`` and the coarse-grid projection."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .dense import EPS, SpdMatrix, gen_eigen_spd, m_operator_norm, m_rect_norm, symmetrize
from .errors import InvalidParameter, RankDeficient

RESAMPLE_ATTEMPTS = 8
DEGENERACY_TOL = 1e-10


def _rank_ok(r):
    sv = np.linalg.svd(r, compute_uv=False)
    return sv[-1] > r.shape[1] * EPS * sv[0]


@dataclass(frozen=True, eq=False)
class Restriction:
    """A full-row-rank ``n_c x n`` restriction matrix."""

    r: np.ndarray
    kind: str
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 2:
            raise InvalidParameter("restriction must be 2-D")
        n_c, n = r.shape
        if not 1 <= n_c < n:
            raise InvalidParameter(f"need 1 <= n_c < n, got n_c={n_c}, n={n}")
        if not np.all(np.isfinite(r)):
            raise InvalidParameter("restriction has non-finite entries")
        if not _rank_ok(r):
            raise RankDeficient(f"{self.kind} restriction is not of rank {n_c}")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def n_c(self):
        return self.r.shape[0]

    @property
    def n(self):
        return self.r.shape[1]


def _check_sizes(n, n_c):
    if not (isinstance(n_c, (int, np.integer)) and 1 <= n_c < n):
        raise InvalidParameter(f"need 1 <= n_c < n, got n_c={n_c}, n={n}")


def injection_restriction(n, n_c):
    """Rows ``e_i`` for the 0-based indices ``ceil(k n / n_c) - 1``, ``k = 1..n_c``."""
    _check_sizes(n, n_c)
    idx = [-(-k * n // n_c) - 1 for k in range(1, n_c + 1)]
    r = np.zeros((n_c, n))
    r[np.arange(n_c), idx] = 1.0
    return Restriction(r, "injection")


def aggregation_restriction(n, n_c):
    """Piecewise-constant rows over contiguous blocks; earlier blocks take the remainder."""
    _check_sizes(n, n_c)
    size, extra = divmod(n, n_c)
    r = np.zeros((n_c, n))
    start = 0
    for i in range(n_c):
        stop = start + size + (1 if i < extra else 0)
        r[i, start:stop] = 1.0
        start = stop
    return Restriction(r, "aggregation")


def random_restriction(n, n_c, seed):
    """Gaussian restriction, resampled until rank certification passes."""
    _check_sizes(n, n_c)
    rng = np.random.default_rng(seed)
    for _ in range(RESAMPLE_ATTEMPTS):
        r = rng.standard_normal((n_c, n))
        if _rank_ok(r):
            return Restriction(r, "random")
    raise RankDeficient(f"no rank-{n_c} sample in {RESAMPLE_ATTEMPTS} attempts")


def optimal_restriction(problem, smoother, n_c):
    """``R = V_c^T M A^{-1}`` from the lowest ``n_c`` eigenvectors of ``tilde_A v = mu M v``.

    Then ``R A v_j = V_c^T M v_j`` vanishes exactly for ``j > n_c``, so
    ``Null(RA)`` is spanned by the remaining pencil vectors. The flag
    ``degenerate`` marks ``mu_{n_c}`` and ``mu_{n_c+1}`` agreeing within 1e-10,
    where the optimal coarse space is not unique.
    """
    n = problem.n
    _check_sizes(n, n_c)
    eig = gen_eigen_spd(smoother.tilde_a, smoother.m)
    mu = np.asarray(eig.values)
    vc = np.asarray(eig.vectors)[:, :n_c]
    rt = np.linalg.solve(problem.a.T, smoother.m.base @ vc)
    degenerate = bool(abs(mu[n_c] - mu[n_c - 1]) <= DEGENERACY_TOL)
    return Restriction(rt.T, "optimal", {"degenerate": degenerate, "mu_next": float(mu[n_c])})


@dataclass(frozen=True, eq=False)
class TransferPair:
    restriction: Restriction
    p_star: np.ndarray
    a_c: SpdMatrix
    pi_a: np.ndarray
    # Orthonormal basis of L^{-1} A^T R^T, i.e. of the range of L^T P_star.
    basis: np.ndarray


def build_transfer(problem, smoother, restriction):
    """Assemble ``P_star``, ``A_c = P_star^T M P_star`` and ``Pi_A = P_star A_c^{-1} R A``."""
    if restriction.n != problem.n:
        raise InvalidParameter(f"restriction width {restriction.n} != n {problem.n}")
    a = problem.a
    m = smoother.m
    r = restriction.r
    art = a.T @ r.T
    p_star = m.solve(art)
    y = solve_triangular(m.chol, art, lower=True, check_finite=False)
    a_c = SpdMatrix.from_matrix(symmetrize(y.T @ y))
    pi_a = p_star @ a_c.solve(r @ a)
    q, _ = np.linalg.qr(y)
    for x in (p_star, pi_a, q):
        x.setflags(write=False)
    return TransferPair(restriction, p_star, a_c, pi_a, q)


@dataclass(frozen=True)
class PerturbationDistance:
    ratio: float
    transpose_norm: float
    smoothing_norm: float


def perturbation_distance(tp, smoother, problem):
    """``||P_star - R^T||_M / ||R^T||_M`` next to ``||I - M^{-1}A^T||_M`` and ``||I - M^{-1}A||_M``.

    Rectangular M-norms treat the coarse side as Euclidean, which keeps the
    bound ``||(I - M^{-1}A^T) R^T||_M <= ||I - M^{-1}A^T||_M ||R^T||_M`` valid.
    """
    m = smoother.m
    a = problem.a
    rt = tp.restriction.r.T
    eye = np.eye(problem.n)
    ratio = m_rect_norm(tp.p_star - rt, m) / m_rect_norm(rt, m)
    return PerturbationDistance(
        ratio,
        m_operator_norm(eye - m.solve(a.T), m),
        m_operator_norm(eye - m.solve(a), m),
    )
