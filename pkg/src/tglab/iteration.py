"""Two-grid sweeps as vector iterations."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .dense import m_vector_norm
from .errors import InvalidParameter, Stagnation

STAGNATION_RATIO = 1.0 + 1e-6


@dataclass
class IterationTrace:
    """Per-sweep history; entry 0 is the initial state."""

    residuals: list = field(default_factory=list)
    errors_m_norm: list = field(default_factory=list)

    @property
    def sweeps(self):
        return max(len(self.residuals) - 1, 0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["sweep", "residual"] + (["m_error"] if self.errors_m_norm else [])
            w.writerow(cols)
            for k, res in enumerate(self.residuals):
                row = [k, f"{res:.12g}"]
                if self.errors_m_norm:
                    row.append(f"{self.errors_m_norm[k]:.12g}")
                w.writerow(row)


def _check_vector(x, n, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise InvalidParameter(f"{name} must have shape ({n},), got {x.shape}")
    return x


def two_grid_sweep(setup, solver, f, u0):
    """Presmoothing, restriction, coarse solve and prolongation with ``P_star``."""
    n = setup.problem.n
    f = _check_vector(f, n, "f")
    u0 = _check_vector(u0, n, "u0")
    a = setup.problem.a
    u1 = u0 + setup.smoother.m.solve(f - a @ u0)
    r_c = setup.transfer.restriction.r @ (f - a @ u1)
    e_c = solver(r_c)
    return u1 + setup.transfer.p_star @ e_c


def solve(setup, solver, f, u0, max_sweeps, rtol, u_star=None):
    """Sweep until ``||f - A u|| <= rtol ||f - A u0||`` or `max_sweeps` are used.

    When `u_star` is given the M-norm error is recorded, and on a certified
    smoother a per-sweep error growth above ``1 + 1e-6`` raises
    :class:`Stagnation`.
    """
    if not rtol > 0:
        raise InvalidParameter(f"rtol must be > 0, got {rtol}")
    if max_sweeps < 0:
        raise InvalidParameter(f"max_sweeps must be >= 0, got {max_sweeps}")
    n = setup.problem.n
    f = _check_vector(f, n, "f")
    u = _check_vector(u0, n, "u0").copy()
    a = setup.problem.a
    m = setup.smoother.m
    if u_star is not None:
        u_star = _check_vector(u_star, n, "u_star")
    trace = IterationTrace()
    res0 = float(np.linalg.norm(f - a @ u))
    trace.residuals.append(res0)
    if u_star is not None:
        trace.errors_m_norm.append(m_vector_norm(u_star - u, m))
    target = rtol * res0
    for k in range(max_sweeps):
        if trace.residuals[-1] <= target:
            break
        u = two_grid_sweep(setup, solver, f, u)
        trace.residuals.append(float(np.linalg.norm(f - a @ u)))
        if u_star is not None:
            err = m_vector_norm(u_star - u, m)
            prev = trace.errors_m_norm[-1]
            trace.errors_m_norm.append(err)
            if setup.smoother.certified and prev > 0 and err > STAGNATION_RATIO * prev:
                raise Stagnation(f"M-norm error grew by {err / prev:.6g} at sweep {k + 1}")
    return u, trace


def manufactured_problem(setup, seed):
    """``(u_star, f)`` with unit-variance Gaussian ``u_star`` and ``f = A u_star``."""
    rng = np.random.default_rng(seed)
    u_star = rng.standard_normal(setup.problem.n)
    return u_star, setup.problem.a @ u_star
