"""Nonsymmetric positive definite test matrices.

Convection-diffusion generators use first-order upwinding, which keeps the
symmetric part positive definite at every mesh Peclet number. Matrices are
not scaled by ``1/h**2``; every quantity tglab measures is invariant under
positive scaling of ``A`` once the smoother is rescaled to match.

Random generators use ``numpy.random.default_rng(seed)`` (PCG64), so a seed
reproduces the same matrix bit for bit on every platform numpy supports.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .dense import as_matrix, sym_eigen
from .errors import InvalidParameter, NotPositiveDefinite


@dataclass(frozen=True, eq=False)
class ProblemMatrix:
    """A nonsymmetric positive definite operator and its symmetric/skew split."""

    a: np.ndarray
    sym: np.ndarray
    skew: np.ndarray
    label: str
    lambda_min_sym: float

    @classmethod
    def from_array(cls, a, label="custom"):
        """Split `a` and certify that its symmetric part is positive definite."""
        a = np.array(as_matrix(a, "A"))
        n, n2 = a.shape
        if n != n2 or n < 2:
            raise InvalidParameter(f"A must be square with n >= 2, got {a.shape}")
        sym = 0.5 * (a + a.T)
        skew = 0.5 * (a - a.T)
        # sym + skew reproduces a only up to rounding; store a as given.
        lam = float(sym_eigen(sym).values[0])
        if not lam > 0.0:
            raise NotPositiveDefinite(f"{label}: lambda_min(A_sym) = {lam:.3e} <= 0")
        for x in (a, sym, skew):
            x.setflags(write=False)
        return cls(a, sym, skew, label, lam)

    @property
    def n(self):
        return self.a.shape[0]


def _upwind_1d(m, diffusion, velocity):
    h = 1.0 / (m + 1)
    c = abs(velocity) * h
    main = np.full(m, 2.0 * diffusion + c)
    upstream = np.full(m - 1, -diffusion - c)
    downstream = np.full(m - 1, -diffusion)
    if velocity >= 0:
        return np.diag(main) + np.diag(upstream, -1) + np.diag(downstream, 1)
    return np.diag(main) + np.diag(downstream, -1) + np.diag(upstream, 1)


def convdiff_1d(m, diffusion, velocity):
    """Upwind finite differences for ``-d u'' + v u'`` on ``m`` interior points.

    With ``h = 1/(m+1)`` and ``c = |v| h`` the stencil for ``v >= 0`` is
    ``(-d - c, 2d + c, -d)``; for ``v < 0`` it is mirrored.
    """
    if m < 2:
        raise InvalidParameter(f"m must be >= 2, got {m}")
    if not diffusion > 0:
        raise InvalidParameter(f"diffusion must be > 0, got {diffusion}")
    a = _upwind_1d(m, float(diffusion), float(velocity))
    return ProblemMatrix.from_array(a, f"convdiff_1d(m={m},d={diffusion:g},v={velocity:g})")


def convdiff_2d(mx, my, diffusion, wind):
    """Five-point diffusion plus per-axis upwind convection on an ``mx x my`` grid.

    Unknowns are ordered lexicographically with x fastest. Each axis
    contributes the 1-D stencil of :func:`convdiff_1d` for its own ``h``.
    """
    if mx < 2 or my < 2:
        raise InvalidParameter(f"mx, my must be >= 2, got {mx}, {my}")
    if not diffusion > 0:
        raise InvalidParameter(f"diffusion must be > 0, got {diffusion}")
    wx, wy = (float(w) for w in wind)
    ax = _upwind_1d(mx, float(diffusion), wx)
    ay = _upwind_1d(my, float(diffusion), wy)
    a = np.kron(np.eye(my), ax) + np.kron(ay, np.eye(mx))
    # kron leaves signed zeros; clear them so exports round-trip bit-exactly
    a[a == 0] = 0.0
    return ProblemMatrix.from_array(
        a, f"convdiff_2d({mx}x{my},d={diffusion:g},w=({wx:g},{wy:g}))"
    )


def random_npd(n, skew_scale, seed):
    """``A = G^T G + n I + skew_scale K`` with Gaussian G and skew-symmetric K."""
    if n < 2:
        raise InvalidParameter(f"n must be >= 2, got {n}")
    if skew_scale < 0:
        raise InvalidParameter(f"skew_scale must be >= 0, got {skew_scale}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    s = g.T @ g + n * np.eye(n)
    s = 0.5 * (s + s.T)
    k = (b - b.T) / np.sqrt(2.0)
    a = s + skew_scale * k
    return ProblemMatrix.from_array(a, f"random_npd(n={n},skew={skew_scale:g},seed={seed})")


def write_matrix_market(path, x, fmt="array"):
    """Write a dense matrix as Matrix Market ``array`` or ``coordinate`` real general."""
    x = as_matrix(x)
    if fmt == "array":
        data = x
    elif fmt == "coordinate":
        data = scipy.sparse.coo_matrix(x)
    else:
        raise InvalidParameter(f"unknown Matrix Market format {fmt!r}")
    scipy.io.mmwrite(str(path), data, precision=17, symmetry="general")
    return Path(path)


def read_matrix_market(path):
    """Read either Matrix Market format into a dense float64 array."""
    data = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(data):
        data = data.toarray()
    return as_matrix(np.asarray(data, dtype=float))


def load_problem(path, label=None):
    return ProblemMatrix.from_array(read_matrix_market(path), label or str(path))
