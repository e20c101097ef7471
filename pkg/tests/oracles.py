"""Independent reference computations used only by the tests.

These deliberately avoid the package's factor-coordinate formulation: they
use explicit inverses, the symmetric square root from scipy, and
nonsymmetric eigenvalue solvers.
"""

import numpy as np
import scipy.linalg

# convdiff_1d(8, 1, 4), M = diag(A), aggregation n_c = 2; 40-digit reference.
FROZEN_SIGMA = 0.13615476932036882550
FROZEN_DELTA = 0.52844745425738729710


def sym_sqrt(m):
    w, q = np.linalg.eigh(m)
    return (q * np.sqrt(w)) @ q.T


def m_norm(x, m):
    """``||M^{1/2} X M^{-1/2}||_2`` with the symmetric root."""
    h = sym_sqrt(m)
    return np.linalg.norm(h @ x @ np.linalg.inv(h), 2)


def reassemble(a, m, r):
    """``(tilde_A, P, A_c, Pi_A, E_TG)`` from explicit inverses."""
    n = a.shape[0]
    minv = np.linalg.inv(m)
    tilde = a + a.T - a @ minv @ a.T
    p = minv @ a.T @ r.T
    a_c = r @ a @ p
    pi_a = p @ np.linalg.inv(a_c) @ r @ a
    e = (np.eye(n) - pi_a) @ (np.eye(n) - minv @ a)
    return tilde, p, a_c, pi_a, e


def positive_min(values, zeros):
    v = np.sort(np.real(values))
    return float(v[zeros])


def sigma_nonsymmetric(a, m, r):
    """``lambda_min^+(M^{-1} tilde_A (I - Pi_A))`` from a general eigensolver."""
    tilde, _, _, pi_a, _ = reassemble(a, m, r)
    n_c = r.shape[0]
    k = np.linalg.solve(m, tilde) @ (np.eye(a.shape[0]) - pi_a)
    return positive_min(scipy.linalg.eigvals(k), n_c)


def delta_nonsymmetric(a, m, r):
    tilde, _, _, pi_a, _ = reassemble(a, m, r)
    n, n_c = a.shape[0], r.shape[0]
    k = np.linalg.solve(m, tilde) @ pi_a
    return positive_min(scipy.linalg.eigvals(k), n - n_c)


def random_spd(rng, n, shift=1.0):
    g = rng.standard_normal((n, n))
    return g @ g.T + shift * np.eye(n)


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q


def engineered_null(n=8, seed=0):
    """Symmetric ``A`` and SPD ``M`` whose smoothed complement has null vector ``q1``.

    With ``A = Q diag(lam) Q^T`` and ``M = Q diag(lam1 / 2, lam2, ...) Q^T`` the
    complement ``2A - A M^{-1} A`` has eigenvalues ``0, lam2, ..., lam_n``.
    """
    rng = np.random.default_rng(seed)
    q = random_orthonormal(rng, n, n)
    lam = np.linspace(1.0, 3.0, n)
    mdiag = lam.copy()
    mdiag[0] = lam[0] / 2
    a = (q * lam) @ q.T
    m = (q * mdiag) @ q.T
    return 0.5 * (a + a.T), 0.5 * (m + m.T), q[:, 0]
