"""Coarse solvers: maps ``r_c -> e_c_hat`` approximating ``A_c^{-1} r_c``.

Four modes are provided:

* ``exact``       Cholesky solve with ``A_c``.
* ``linear``      ``B_c^{-1} r_c`` for a fixed nonsingular ``B_c`` (Jacobi,
                  Gauss-Seidel or a user matrix) with ``B_c + B_c^T - A_c`` SPD.
* ``nonlinear``   conjugate gradients stopped at a relative ``A_c``-norm error
                  of at most ``epsilon``.
* ``randomized``  sketch-and-project in the ``A_c`` inner product.
"""

import itertools
import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dense import EPS, SpdMatrix, as_spd, gen_eigen_spd, symmetrize
from .errors import (
    InvalidParameter,
    IterationBudget,
    NotAdmissible,
    NotPositiveDefinite,
    SingularSketch,
)

ROUNDOFF_FLOOR = 1e-12
SKETCH_ATTEMPTS = 8


@dataclass(frozen=True, eq=False)
class LinearDiagnostics:
    """Spectral data of a linear coarse solver ``B_c``.

    ``b_bar = B_c (B_c + B_c^T - A_c)^{-1} B_c^T``; ``alpha1``/``alpha2`` are the
    extreme eigenvalues of ``b_bar^{-1} A_c`` and ``beta1``/``beta2`` those of
    ``B_c^{-1} A_c`` (only for SPD ``B_c``).
    """

    a_c: SpdMatrix
    b_c: np.ndarray
    b_bar: SpdMatrix
    alpha1: float
    alpha2: float
    beta1: Optional[float] = None
    beta2: Optional[float] = None

    @property
    def kappa_beta(self):
        return None if self.beta1 is None else self.beta2 / self.beta1


def alpha_bounds(d):
    eig = gen_eigen_spd(d.a_c.base, d.b_bar)
    return float(eig.values[0]), float(eig.values[-1])


def linear_diagnostics(a_c, b_c):
    """Certify admissibility of `b_c` and compute ``b_bar``, alphas and betas."""
    a_c = as_spd(a_c)
    b_c = np.array(b_c, dtype=float)
    if b_c.shape != a_c.base.shape:
        raise InvalidParameter(f"B_c shape {b_c.shape} != A_c shape {a_c.base.shape}")
    try:
        w = SpdMatrix.from_matrix(symmetrize(b_c + b_c.T - a_c.base))
    except NotPositiveDefinite as exc:
        raise NotAdmissible(f"B_c + B_c^T - A_c is not SPD: {exc}") from None
    b_bar = SpdMatrix.from_matrix(symmetrize(b_c @ w.solve(b_c.T)))
    eig = gen_eigen_spd(a_c.base, b_bar)
    beta1 = beta2 = None
    if np.array_equal(b_c, b_c.T):
        try:
            beig = gen_eigen_spd(a_c.base, SpdMatrix.from_matrix(b_c))
            beta1, beta2 = float(beig.values[0]), float(beig.values[-1])
        except NotPositiveDefinite:
            pass
    b_c.setflags(write=False)
    return LinearDiagnostics(a_c, b_c, b_bar, float(eig.values[0]), float(eig.values[-1]), beta1, beta2)


def beta_to_alpha(beta1, beta2):
    """Extreme eigenvalues of ``(2I - B_c^{-1}A_c) B_c^{-1}A_c`` from those of ``B_c^{-1}A_c``.

    Uses the three-way split ``beta2 <= 1``, ``beta1 <= 1 < beta2`` and
    ``1 < beta1``. In the middle case the upper value 1 is attained only when
    1 is itself an eigenvalue of ``B_c^{-1}A_c``; otherwise it is an upper bound.
    """
    if not (0 < beta1 <= beta2 < 2):
        raise InvalidParameter(f"need 0 < beta1 <= beta2 < 2, got ({beta1}, {beta2})")
    f1 = (2.0 - beta1) * beta1
    f2 = (2.0 - beta2) * beta2
    if beta2 <= 1:
        return f1, f2
    if beta1 <= 1:
        return min(f1, f2), 1.0
    return f2, f1


class CoarseSolver:
    """Base class; subclasses implement :meth:`__call__`."""

    mode = "abstract"

    def __init__(self, a_c):
        self.a_c = as_spd(a_c)
        self.diagnostics = None

    @property
    def n_c(self):
        return self.a_c.dim

    def __call__(self, r_c):
        raise NotImplementedError


class ExactSolver(CoarseSolver):
    mode = "exact"

    def __init__(self, a_c):
        super().__init__(a_c)
        self.diagnostics = LinearDiagnostics(
            self.a_c, np.asarray(self.a_c.base), self.a_c, 1.0, 1.0, 1.0, 1.0
        )

    def __call__(self, r_c):
        return self.a_c.solve(np.asarray(r_c, dtype=float))


class StationarySolver(CoarseSolver):
    """One application of ``B_c^{-1}``."""

    mode = "linear"

    def __init__(self, a_c, b_c, flavor="spd-custom"):
        super().__init__(a_c)
        self.flavor = flavor
        self.diagnostics = linear_diagnostics(self.a_c, b_c)
        self._lu = lu_factor(self.diagnostics.b_c, check_finite=False)

    @property
    def b_c(self):
        return self.diagnostics.b_c

    def __call__(self, r_c):
        return lu_solve(self._lu, np.asarray(r_c, dtype=float), check_finite=False)


def exact_solver(a_c):
    return ExactSolver(a_c)


def stationary_solver(a_c, flavor, omega=1.0, b_c=None):
    """Linear coarse solver.

    ``flavor="jacobi"`` uses ``B_c = omega * diag(A_c)``, ``"gauss-seidel"``
    the lower triangle of ``A_c`` including the diagonal, and ``"spd-custom"``
    the given `b_c`.

    Raises
    ------
    NotAdmissible
        If ``B_c + B_c^T - A_c`` is not SPD.
    """
    a_c = as_spd(a_c)
    if flavor == "jacobi":
        if not omega > 0:
            raise InvalidParameter(f"omega must be > 0, got {omega}")
        b = omega * np.diag(np.diag(a_c.base))
    elif flavor == "gauss-seidel":
        b = np.tril(a_c.base)
    elif flavor == "spd-custom":
        if b_c is None:
            raise InvalidParameter("spd-custom needs b_c")
        b = np.asarray(b_c, dtype=float)
    else:
        raise InvalidParameter(f"unknown stationary flavor {flavor!r}")
    return StationarySolver(a_c, b, flavor)


@dataclass(frozen=True)
class CGInfo:
    iterations: int
    relative_error: Optional[float]


class CGSolver(CoarseSolver):
    """Conjugate gradients from a zero initial guess.

    In oracle mode the exact solution is formed internally and iteration stops
    as soon as ``||e_c - x||_{A_c} <= epsilon ||e_c||_{A_c}``, so the tolerance
    is guaranteed rather than estimated. For ``epsilon = 0`` the target is the
    roundoff floor ``1e-12``. In production mode the iteration count comes from
    the bound ``2 ((sqrt(k)-1)/(sqrt(k)+1))**j`` on the relative energy error,
    capped at ``n_c`` where CG terminates in exact arithmetic.
    """

    mode = "nonlinear"

    def __init__(self, a_c, epsilon, oracle_mode=False):
        super().__init__(a_c)
        if not 0 <= epsilon < 1:
            raise InvalidParameter(f"epsilon must be in [0, 1), got {epsilon}")
        self.epsilon = float(epsilon)
        self.oracle_mode = bool(oracle_mode)
        self.budget = self.n_c + 8
        values = np.linalg.eigvalsh(np.asarray(self.a_c.base))
        self.kappa = float(values[-1] / values[0])

    def planned_iterations(self):
        if self.epsilon == 0.0:
            return self.n_c
        rho = (math.sqrt(self.kappa) - 1.0) / (math.sqrt(self.kappa) + 1.0)
        if rho <= 0.0:
            return 1
        need = math.ceil(math.log(self.epsilon / 2.0) / math.log(rho))
        return max(1, min(need, self.n_c))

    def solve_with_info(self, r_c):
        a = np.asarray(self.a_c.base)
        b = np.asarray(r_c, dtype=float)
        x = np.zeros_like(b)
        if not np.any(b):
            return x, CGInfo(0, 0.0)
        if self.oracle_mode:
            exact = self.a_c.solve(b)
            target = max(self.epsilon, ROUNDOFF_FLOOR) * math.sqrt(exact @ a @ exact)
            limit = self.budget
        else:
            limit = self.planned_iterations()
        r = b.copy()
        p = r.copy()
        rr = r @ r
        for k in range(limit + 1):
            if self.oracle_mode:
                err = exact - x
                err_norm = math.sqrt(max(err @ a @ err, 0.0))
                if err_norm <= target:
                    return x, CGInfo(k, err_norm / math.sqrt(exact @ a @ exact))
            elif k == limit:
                return x, CGInfo(k, None)
            if k == limit:
                break
            ap = a @ p
            pap = p @ ap
            if pap <= 0.0:
                break
            step = rr / pap
            x = x + step * p
            r = r - step * ap
            rr_new = r @ r
            p = r + (rr_new / rr) * p
            rr = rr_new
        if self.oracle_mode:
            raise IterationBudget(
                f"CG did not reach relative A_c-error {self.epsilon:g} in {self.budget} iterations"
            )
        return x, CGInfo(k, None)

    def __call__(self, r_c):
        return self.solve_with_info(r_c)[0]


def cg_solver(a_c, epsilon, oracle_mode=False):
    return CGSolver(a_c, epsilon, oracle_mode)


class RandomizedSolver(CoarseSolver):
    """Sketch-and-project iterations in the ``A_c`` inner product.

    Each step draws a Gaussian sketch ``S`` (``n_c x sketch_dim``) and moves
    the iterate to the ``A_c``-closest point with ``S^T A_c x = S^T r_c``:
    ``x <- x - S (S^T A_c S)^{-1} S^T (A_c x - r_c)``.

    Every invocation (a single call or a batch from :meth:`solve_batch`) takes
    the next value of a thread-safe counter and draws from
    ``default_rng(SeedSequence([seed, counter]))``; a batch of ``T`` trials
    uses ``T`` independent sketch sequences from that one stream.
    """

    mode = "randomized"

    def __init__(self, a_c, steps, sketch_dim, seed):
        super().__init__(a_c)
        if steps < 1:
            raise InvalidParameter(f"steps must be >= 1, got {steps}")
        if not 1 <= sketch_dim <= self.n_c:
            raise InvalidParameter(f"need 1 <= sketch_dim <= {self.n_c}, got {sketch_dim}")
        if seed < 0:
            raise InvalidParameter("seed must be nonnegative")
        self.steps = int(steps)
        self.sketch_dim = int(sketch_dim)
        self.seed = int(seed)
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def _next_index(self):
        with self._lock:
            return next(self._counter)

    def stream(self, index):
        return np.random.default_rng(np.random.SeedSequence([self.seed, index]))

    def _draw(self, rng, trials):
        """Gaussian sketches with nonsingular ``S^T A_c S``, resampling bad ones."""
        n, k = self.n_c, self.sketch_dim
        a = np.asarray(self.a_c.base)
        s = rng.standard_normal((trials, n, k))
        for _ in range(SKETCH_ATTEMPTS):
            gram = np.einsum("tjk,jl,tlm->tkm", s, a, s)
            w = np.linalg.eigvalsh(gram)
            bad = w[:, 0] <= k * EPS * np.maximum(w[:, -1], np.finfo(float).tiny)
            if not np.any(bad):
                return s, gram
            s[bad] = rng.standard_normal((int(bad.sum()), n, k))
        raise SingularSketch(f"singular sketch after {SKETCH_ATTEMPTS} attempts")

    def solve_batch(self, r_c, trials, index=None):
        """Run ``trials`` independent solves of ``A_c x = r_c``; returns ``(trials, n_c)``."""
        r = np.asarray(r_c, dtype=float)
        rng = self.stream(self._next_index() if index is None else index)
        a = np.asarray(self.a_c.base)
        x = np.zeros((trials, self.n_c))
        for _ in range(self.steps):
            s, gram = self._draw(rng, trials)
            res = x @ a - r
            rhs = np.einsum("tjk,tj->tk", s, res)
            y = np.linalg.solve(gram, rhs[..., None])[..., 0]
            x = x - np.einsum("tjk,tk->tj", s, y)
        return x

    def __call__(self, r_c):
        return self.solve_batch(r_c, 1)[0]


def randomized_solver(a_c, steps, sketch_dim, seed):
    return RandomizedSolver(a_c, steps, sketch_dim, seed)
