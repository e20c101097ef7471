"""Convergence quantities of the exact and inexact two-grid methods.

All symmetric computations are carried out in the coordinates ``x -> L^T x``
where ``M = L L^T``. In those coordinates the M-norm is Euclidean, the
coarse-grid correction becomes the orthogonal projection ``Q Q^T`` onto the
range of ``L^{-1} A^T R^T``, and the smoothed complement becomes
``L^{-1} tilde_A L^{-T}``. Eigenvalues are unchanged by this choice of
square-root factor.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import iteration
from .dense import (
    gen_eigen_spd,
    m_operator_norm,
    m_vector_norm,
    psd_sqrt,
    sym_eigen,
    symmetrize,
    zero_threshold,
)
from .errors import BoundViolated, InvalidParameter, NullConditionViolated, NumericalDiagnostic
from .smoothing import smoother_floor
from .transfer import build_transfer, Restriction

log = logging.getLogger(__name__)

DELTA_RANK_TOL = 1e-10
CLAMP_WARN = 1e-8


def sqrt_unit(x, what="radicand"):
    """``sqrt`` of `x` clamped to ``[0, 1]``, logging clamps larger than 1e-8."""
    y = min(1.0, max(0.0, float(x)))
    if abs(y - x) > CLAMP_WARN:
        log.warning("%s %.3e clamped to [0, 1]", what, x)
    return math.sqrt(y)


@dataclass(frozen=True, eq=False)
class TwoGridSetup:
    problem: object
    smoother: object
    transfer: object
    allow_uncertified: bool = False

    def __post_init__(self):
        n = self.problem.n
        if self.smoother.n != n or self.transfer.p_star.shape[0] != n:
            raise InvalidParameter("problem, smoother and transfer dimensions differ")
        if not (self.smoother.certified or self.allow_uncertified):
            raise InvalidParameter(
                f"smoother not certified: lambda_min(M^-1 tilde_A) = {self.smoother.pencil_min:.3e}"
            )

    @property
    def n(self):
        return self.problem.n

    @property
    def n_c(self):
        return self.transfer.restriction.n_c

    @cached_property
    def s_hat(self):
        """``L^{-1} tilde_A L^{-T}``."""
        return self.smoother.m.congruence_inv(self.smoother.tilde_a)

    @cached_property
    def a_hat(self):
        """``L^{-1} A L^{-T}``, the smoothing operator in factor coordinates."""
        chol = self.smoother.m.chol
        y = solve_triangular(chol, self.problem.a, lower=True, check_finite=False)
        return solve_triangular(chol, y.T, lower=True, check_finite=False).T

    @cached_property
    def projection(self):
        """``Q Q^T``: the M-orthogonal coarse projection in factor coordinates."""
        q = self.transfer.basis
        return symmetrize(q @ q.T)

    @cached_property
    def complement_spectrum(self):
        """Eigenvalues of ``(I - Pi) S_hat (I - Pi)``."""
        c = np.eye(self.n) - self.projection
        return np.asarray(sym_eigen(symmetrize(c @ self.s_hat @ c)).values)

    @cached_property
    def null_condition(self):
        """Whether ``rank(tilde_A^{1/2} (I - Pi_A)) = n - n_c``."""
        w = self.complement_spectrum
        return int(np.sum(w > zero_threshold(w))) == self.n - self.n_c


def make_setup(problem, smoother, restriction, allow_uncertified=False):
    transfer = build_transfer(problem, smoother, restriction)
    return TwoGridSetup(problem, smoother, transfer, allow_uncertified)


def e_tg(setup):
    """``(I - Pi_A)(I - M^{-1} A)``."""
    eye = np.eye(setup.n)
    smooth = eye - setup.smoother.m.solve(setup.problem.a)
    return (eye - setup.transfer.pi_a) @ smooth


def measured_factor(e, m):
    return m_operator_norm(e, m)


def _positive_min(values, expected_zeros, what):
    """Smallest eigenvalue above the rank cutoff, cross-checking the zero count."""
    thr = zero_threshold(values)
    zeros = int(np.sum(values <= thr))
    if zeros != expected_zeros:
        return None, zeros
    return float(values[expected_zeros]), zeros


def sigma_tg(setup):
    """``lambda_{n_c+1}`` of ``tilde_A^{1/2} (M^{-1} - P A_c^{-1} P^T) tilde_A^{1/2}``.

    The middle factor is formed as ``L^{-T} (I - Q Q^T) L^{-1}``, which is the
    same matrix built without cancellation.

    Raises
    ------
    NullConditionViolated
        If more than ``n_c`` eigenvalues are numerically zero.
    NumericalDiagnostic
        If fewer than ``n_c`` are.
    """
    root = psd_sqrt(setup.smoother.tilde_a)
    w = solve_triangular(setup.smoother.m.chol, root, lower=True, check_finite=False)
    q = setup.transfer.basis
    z = w - q @ (q.T @ w)
    values = np.asarray(sym_eigen(symmetrize(z.T @ z)).values)
    sigma, zeros = _positive_min(values, setup.n_c, "sigma")
    if sigma is None:
        if zeros > setup.n_c:
            raise NullConditionViolated(
                f"{zeros} zero eigenvalues, expected {setup.n_c}: Null(tilde_A) meets Null(RA)"
            )
        raise NumericalDiagnostic(f"{zeros} zero eigenvalues, expected {setup.n_c}")
    return sigma


def sigma_tg_projected(setup):
    """``lambda_min^+`` of ``(I - Pi) S_hat (I - Pi)``; second route to sigma_TG."""
    values = setup.complement_spectrum
    sigma, zeros = _positive_min(values, setup.n_c, "sigma")
    if sigma is None:
        if zeros > setup.n_c:
            raise NullConditionViolated(f"{zeros} zero eigenvalues, expected {setup.n_c}")
        raise NumericalDiagnostic(f"{zeros} zero eigenvalues, expected {setup.n_c}")
    return sigma


def delta_pencil_min(setup):
    """``lambda_min`` of the pencil ``(P^T tilde_A P, P^T M P)`` with ``P = P_star``."""
    p = setup.transfer.p_star
    top = symmetrize(p.T @ setup.smoother.tilde_a @ p)
    return float(gen_eigen_spd(top, setup.transfer.a_c).values[0])


def delta_tg(setup):
    """``lambda_min^+(M^{-1} tilde_A Pi_A)``, or 0 when ``Null(tilde_A)`` meets ``Range(P_star)``."""
    lam = delta_pencil_min(setup)
    return lam if lam > DELTA_RANK_TOL else 0.0


def delta_tg_projected(setup):
    """``lambda_min^+`` of ``Pi S_hat Pi``, cross-checked against ``n - n_c`` zeros."""
    pi = setup.projection
    values = np.asarray(sym_eigen(symmetrize(pi @ setup.s_hat @ pi)).values)
    lam, zeros = _positive_min(values, setup.n - setup.n_c, "delta")
    return 0.0 if lam is None else lam


@dataclass(frozen=True)
class Lemma41:
    min_complement: float
    max_complement: float
    min_projection: float
    max_projection: float


def lemma41_identities(setup):
    """Extreme eigenvalues of ``K^T (I - Pi) K`` and ``K^T Pi K`` with ``K = I - L^{-1} A L^{-T}``."""
    eye = np.eye(setup.n)
    k = eye - setup.a_hat
    pi = setup.projection
    w1 = np.linalg.eigvalsh(symmetrize(k.T @ (eye - pi) @ k))
    w2 = np.linalg.eigvalsh(symmetrize(k.T @ pi @ k))
    return Lemma41(float(w1[0]), float(w1[-1]), float(w2[0]), float(w2[-1]))


def mu_spectrum(problem, smoother):
    """Ascending eigenvalues of ``tilde_A v = mu M v``."""
    return np.asarray(gen_eigen_spd(smoother.tilde_a, smoother.m).values)


def optimal_bound(mu, n_c):
    """``sqrt(1 - mu_{n_c+1})``, the best factor any rank-``n_c`` restriction can reach."""
    mu = np.asarray(mu)
    if not 1 <= n_c < mu.shape[0]:
        raise InvalidParameter(f"need 1 <= n_c < n, got n_c={n_c}")
    return sqrt_unit(1.0 - mu[n_c], "optimal-bound radicand")


def _check_unit(name, x, slack=1e-10):
    if not (-slack <= x <= 1.0 + slack):
        raise InvalidParameter(f"{name}={x} outside [0, 1]")


def inexact_bounds(sigma, delta, floor, alpha1, alpha2):
    """Lower and upper bounds on ``||E_ITG||_M`` for a linear coarse solver.

    ``L = sqrt(1 - min(sigma, floor + alpha2 (1 - delta)))`` and
    ``U = sqrt(1 - alpha1 sigma - (1 - alpha1) floor)``.
    """
    for name, x in (("sigma", sigma), ("delta", delta), ("floor", floor),
                    ("alpha1", alpha1), ("alpha2", alpha2)):
        _check_unit(name, x)
    if alpha1 > alpha2 + 1e-12:
        raise InvalidParameter(f"alpha1={alpha1} > alpha2={alpha2}")
    lower = sqrt_unit(1.0 - min(sigma, floor + alpha2 * (1.0 - delta)), "L radicand")
    upper = sqrt_unit(1.0 - alpha1 * sigma - (1.0 - alpha1) * floor, "U radicand")
    return lower, upper


def e_itg(setup, d):
    """``(I - P B_c^{-1} P^T M)(I - M^{-1} A)`` for linear diagnostics `d`."""
    eye = np.eye(setup.n)
    m = setup.smoother.m
    p = setup.transfer.p_star
    corr = eye - p @ np.linalg.solve(d.b_c, p.T @ m.base)
    return corr @ (eye - m.solve(setup.problem.a))


def nonlinear_bound(sigma, floor, epsilon):
    """``sqrt(1 - (1 - eps^2) sigma - eps^2 floor)``."""
    if not 0 <= epsilon < 1:
        raise InvalidParameter(f"epsilon must be in [0, 1), got {epsilon}")
    e2 = epsilon * epsilon
    return sqrt_unit(1.0 - (1.0 - e2) * sigma - e2 * floor, "nonlinear radicand")


def randomized_bound_sq(sigma, floor, gamma):
    """Squared contraction ``1 - (1 - gamma) sigma - gamma floor`` for a tolerance factor."""
    return 1.0 - (1.0 - gamma) * sigma - gamma * floor


@dataclass
class NonlinearReport:
    epsilon: float
    bound: float
    max_ratio: float
    trials: int
    worst_trial: int
    passed: bool


def verify_nonlinear(setup, solver, trials, seed, strict=True, rtol=1e-8):
    """Single sweeps of the inexact method from random initial errors against the epsilon bound."""
    sigma = sigma_tg(setup)
    floor = smoother_floor(setup.smoother)
    bound = nonlinear_bound(sigma, floor, solver.epsilon)
    rng = np.random.default_rng(seed)
    m = setup.smoother.m
    a = setup.problem.a
    worst, worst_trial = 0.0, -1
    for t in range(trials):
        u_star = rng.standard_normal(setup.n)
        e0 = rng.standard_normal(setup.n)
        u1 = iteration.two_grid_sweep(setup, solver, a @ u_star, u_star - e0)
        ratio = m_vector_norm(u_star - u1, m) / m_vector_norm(e0, m)
        if ratio > worst:
            worst, worst_trial = ratio, t
    passed = worst <= bound * (1.0 + rtol)
    report = NonlinearReport(solver.epsilon, bound, worst, trials, worst_trial, passed)
    if strict and not passed:
        raise BoundViolated(
            f"ratio {worst:.12g} exceeds bound {bound:.12g}", seed=seed, details=vars(report)
        )
    return report


@dataclass
class RandomizedReport:
    gamma1: list
    gamma2: list
    se1: list
    se2: list
    lhs1: list
    lhs2: list
    bound1: list
    bound2: list
    decomposition_gap: list
    passed_mean: bool
    passed_second_moment: bool
    passed_ordering: bool
    passed_decomposition: bool

    @property
    def passed(self):
        return (self.passed_mean and self.passed_second_moment
                and self.passed_ordering and self.passed_decomposition)


def verify_randomized(setup, solver, trials, seed, initial_errors=20, strict=True,
                      n_se=3.0, rtol=1e-9):
    """Monte Carlo check of both randomized-solver conclusions.

    For each initial error the empirical tolerance factors
    ``g1 = ||mean(e_c - e_hat)||^2_{A_c} / ||e_c||^2_{A_c}`` and
    ``g2 = mean(||e_c - e_hat||^2_{A_c}) / ||e_c||^2_{A_c}`` are inflated by
    ``n_se`` standard errors and fed into the two bounds, which are compared
    with ``||mean(u - u_ITG)||^2_M`` and ``mean(||u - u_ITG||^2_M)``.
    """
    sigma = sigma_tg(setup)
    floor = smoother_floor(setup.smoother)
    rng = np.random.default_rng(seed)
    m = setup.smoother.m
    a = setup.problem.a
    r = setup.transfer.restriction.r
    chol_t = m.chol.T
    p_hat = chol_t @ setup.transfer.p_star
    a_c = np.asarray(setup.transfer.a_c.base)
    out = {k: [] for k in ("gamma1", "gamma2", "se1", "se2", "lhs1", "lhs2",
                           "bound1", "bound2", "decomposition_gap")}
    ok_mean = ok_second = ok_order = ok_decomp = True
    for _ in range(initial_errors):
        e0 = rng.standard_normal(setup.n)
        e1 = e0 - m.solve(a @ e0)
        r_c = r @ (a @ e1)
        e_c = setup.transfer.a_c.solve(r_c)
        ec2 = float(e_c @ a_c @ e_c)
        e0_2 = m_vector_norm(e0, m) ** 2
        e_hat = solver.solve_batch(r_c, trials)
        d = e_c - e_hat
        ad = d @ a_c
        q = np.einsum("tj,tj->t", ad, d)
        d_bar = d.mean(axis=0)
        g1 = float(d_bar @ a_c @ d_bar) / ec2
        g2 = float(q.mean()) / ec2
        se2 = float(q.std(ddof=1)) / math.sqrt(trials) / ec2
        grad = 2.0 * (d @ (a_c @ d_bar))
        se1 = float(grad.std(ddof=1)) / math.sqrt(trials) / ec2
        spread = d - d_bar
        var_term = float(np.einsum("tj,jk,tk->t", spread, a_c, spread).mean()) / ec2
        gap = abs(g2 - (g1 + var_term))
        # Errors after the sweep, in factor coordinates where the M-norm is Euclidean.
        after = (chol_t @ e1)[None, :] - e_hat @ p_hat.T
        lhs1 = float(np.sum(after.mean(axis=0) ** 2)) / e0_2
        lhs2 = float(np.mean(np.sum(after ** 2, axis=1))) / e0_2
        b1 = randomized_bound_sq(sigma, floor, min(1.0, g1 + n_se * se1))
        b2 = randomized_bound_sq(sigma, floor, min(1.0, g2 + n_se * se2))
        ok_mean &= lhs1 <= b1 * (1.0 + rtol)
        ok_second &= lhs2 <= b2 * (1.0 + rtol)
        ok_order &= g2 >= g1 - n_se * se1 - n_se * se2
        ok_decomp &= gap <= max(n_se * se2, 1e-12)
        for k, v in (("gamma1", g1), ("gamma2", g2), ("se1", se1), ("se2", se2),
                     ("lhs1", lhs1), ("lhs2", lhs2), ("bound1", b1), ("bound2", b2),
                     ("decomposition_gap", gap)):
            out[k].append(v)
    report = RandomizedReport(**out, passed_mean=bool(ok_mean), passed_second_moment=bool(ok_second),
                              passed_ordering=bool(ok_order), passed_decomposition=bool(ok_decomp))
    if strict and not report.passed:
        raise BoundViolated("randomized-solver bounds violated", seed=seed, details=vars(report))
    return report


@dataclass
class MonotonicityReport:
    sizes: list
    factors: list
    passed: bool


def verify_monotonicity(setup, extra_rows, seed, levels=3, strict=True, slack=1e-9):
    """Append random rows to R ``levels`` times and check the factors never increase."""
    r0 = setup.transfer.restriction.r
    n_c, n = r0.shape
    if extra_rows < 0 or n_c + levels * extra_rows >= n:
        raise InvalidParameter(
            f"n_c + levels * extra_rows = {n_c + levels * extra_rows} must stay below n = {n}"
        )
    rng = np.random.default_rng(seed)
    problem, smoother = setup.problem, setup.smoother
    m = smoother.m
    rows = r0
    sizes = [n_c]
    factors = [measured_factor(e_tg(setup), m)]
    for _ in range(levels):
        if extra_rows:
            for _attempt in range(8):
                cand = np.vstack([rows, rng.standard_normal((extra_rows, n))])
                try:
                    restriction = Restriction(cand, "expanded")
                    break
                except Exception:  # RankDeficient on unlucky samples
                    continue
            else:
                raise InvalidParameter("could not draw a full-rank expansion")
        else:
            restriction = Restriction(rows.copy(), "expanded")
        rows = restriction.r
        nested = make_setup(problem, smoother, restriction, setup.allow_uncertified)
        sizes.append(rows.shape[0])
        factors.append(measured_factor(e_tg(nested), m))
    passed = all(b <= a + slack for a, b in zip(factors, factors[1:]))
    report = MonotonicityReport(sizes, factors, passed)
    if strict and not passed:
        raise BoundViolated("factor increased under row-space expansion", seed=seed,
                            details=vars(report))
    return report


@dataclass
class ConvergenceReport:
    sigma_tg: float
    delta_tg: float
    delta_pencil_min: float
    mu_spectrum: list
    factor_exact_measured: float
    factor_exact_identity: float
    floor: float
    alpha: Optional[tuple] = None
    beta: Optional[tuple] = None
    bounds: Optional[tuple] = None
    measured_inexact: Optional[float] = None
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        """JSON-ready mapping with the documented report keys."""
        return {
            "sigma_tg": self.sigma_tg,
            "delta_tg": self.delta_tg,
            "delta_pencil_min": self.delta_pencil_min,
            "mu_spectrum": [float(x) for x in self.mu_spectrum],
            "factor_measured": self.factor_exact_measured,
            "factor_identity": self.factor_exact_identity,
            "floor": self.floor,
            "alpha": None if self.alpha is None else {"alpha1": self.alpha[0], "alpha2": self.alpha[1]},
            "beta": None if self.beta is None else {"beta1": self.beta[0], "beta2": self.beta[1]},
            "bounds": None if self.bounds is None else {"L": self.bounds[0], "U": self.bounds[1]},
            "measured_inexact": self.measured_inexact,
            "flags": self.flags,
        }


def _flag(passed, tolerance, **extra):
    return {"passed": bool(passed), "tolerance": tolerance, **extra}


def build_report(setup, diagnostics=None):
    """Exact two-grid quantities, plus linear inexact bounds when `diagnostics` is given."""
    sigma = sigma_tg(setup)
    lam = delta_pencil_min(setup)
    delta = lam if lam > DELTA_RANK_TOL else 0.0
    floor = smoother_floor(setup.smoother)
    measured = measured_factor(e_tg(setup), setup.smoother.m)
    identity = sqrt_unit(1.0 - sigma, "identity radicand")
    lem = lemma41_identities(setup)
    flags = {
        "smoother_certified": _flag(setup.smoother.certified, 1e-10),
        "identity": _flag(abs(measured - identity) <= 1e-8 * (1.0 + measured), 1e-8),
        "lemma41": _flag(
            abs(lem.min_complement) <= 1e-9 and abs(lem.min_projection) <= 1e-9
            and abs(lem.max_complement - (1.0 - sigma)) <= 1e-8
            and abs(lem.max_projection - (1.0 - delta)) <= 1e-8,
            1e-8,
        ),
        "delta_floor": _flag(1.0 - delta + floor >= sigma - 1e-9, 1e-9),
    }
    report = ConvergenceReport(
        sigma, delta, lam, list(mu_spectrum(setup.problem, setup.smoother)),
        measured, identity, floor, flags=flags,
    )
    if diagnostics is not None:
        lower, upper = inexact_bounds(sigma, delta, floor, diagnostics.alpha1, diagnostics.alpha2)
        inexact = measured_factor(e_itg(setup, diagnostics), setup.smoother.m)
        report.alpha = (diagnostics.alpha1, diagnostics.alpha2)
        report.bounds = (lower, upper)
        report.measured_inexact = inexact
        flags["sandwich"] = _flag(lower - 1e-8 <= inexact <= upper + 1e-8, 1e-8)
        if diagnostics.beta1 is not None:
            report.beta = (diagnostics.beta1, diagnostics.beta2)
    return report
