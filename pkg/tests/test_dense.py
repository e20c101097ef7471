import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tglab import dense
from tglab.errors import IndexOutOfRange, InvalidParameter, NotPositiveDefinite

from oracles import m_norm, random_spd


def test_cholesky_identity():
    np.testing.assert_array_equal(dense.cholesky(np.eye(3)), np.eye(3))


def test_cholesky_closed_form():
    np.testing.assert_allclose(dense.cholesky([[4.0, 2.0], [2.0, 5.0]]), [[2.0, 0.0], [1.0, 2.0]])


def test_cholesky_indefinite():
    with pytest.raises(NotPositiveDefinite):
        dense.cholesky([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_rejects_nonsymmetric():
    with pytest.raises(InvalidParameter):
        dense.cholesky([[2.0, 1.0], [0.0, 2.0]])


def test_matrix_rejects_nan():
    with pytest.raises(InvalidParameter):
        dense.as_matrix([[1.0, np.nan]])


def test_spd_reconstruction(rng):
    b = random_spd(rng, 7)
    s = dense.SpdMatrix.from_matrix(b)
    np.testing.assert_allclose(s.chol @ s.chol.T, b, rtol=1e-10, atol=1e-10 * np.abs(b).max())
    assert np.all(np.diag(s.chol) > 0)
    x = rng.standard_normal(7)
    np.testing.assert_allclose(b @ s.solve(x), x, atol=1e-10)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eigen_diagonal(method):
    e = dense.sym_eigen(np.diag([3.0, 1.0, 2.0]), method=method)
    np.testing.assert_allclose(e.values, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eigen_swap(method):
    e = dense.sym_eigen(np.array([[0.0, 1.0], [1.0, 0.0]]), method=method)
    np.testing.assert_allclose(e.values, [-1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eigen_reconstruction(rng, method):
    g = rng.standard_normal((8, 8))
    s = g + g.T
    e = dense.sym_eigen(s, method=method)
    v, w = np.asarray(e.vectors), np.asarray(e.values)
    np.testing.assert_allclose(v.T @ v, np.eye(8), atol=1e-10)
    assert np.abs(s @ v - v * w).max() <= 1e-9 * (1 + np.abs(w).max())
    assert np.all(np.diff(w) >= 0)


def test_jacobi_matches_lapack(rng):
    g = rng.standard_normal((20, 20))
    s = g @ g.T
    np.testing.assert_allclose(dense.jacobi_eigen(s).values, np.linalg.eigvalsh(s), atol=1e-10 * 20)


def test_jacobi_budget():
    from tglab.errors import NoConvergence

    g = np.random.default_rng(3).standard_normal((6, 6))
    with pytest.raises(NoConvergence):
        dense.jacobi_eigen(g + g.T, max_rotations=2)


def test_gen_eigen_identity_pencil(rng):
    b = random_spd(rng, 5)
    e = dense.gen_eigen_spd(b, b)
    np.testing.assert_allclose(e.values, 1.0, atol=1e-12)


def test_gen_eigen_zero(rng):
    b = dense.SpdMatrix.from_matrix(random_spd(rng, 5))
    e = dense.gen_eigen_spd(np.zeros((5, 5)), b)
    np.testing.assert_allclose(e.values, 0.0, atol=1e-14)
    v = np.asarray(e.vectors)
    np.testing.assert_allclose(v.T @ b.base @ v, np.eye(5), atol=1e-9)


def test_gen_eigen_similarity_oracle(desk_setup):
    s = desk_setup.smoother
    e = dense.gen_eigen_spd(s.tilde_a, s.m)
    k = dense.spd_inv_sqrt(s.m)
    ref = np.linalg.eigvalsh(dense.symmetrize(k @ s.tilde_a @ k))
    np.testing.assert_allclose(e.values, ref, atol=1e-8)
    v = np.asarray(e.vectors)
    np.testing.assert_allclose(s.tilde_a @ v, s.m.base @ v * np.asarray(e.values), atol=1e-9)


def test_gen_eigen_jacobi_backend(desk_setup):
    s = desk_setup.smoother
    a = dense.gen_eigen_spd(s.tilde_a, s.m, method="jacobi").values
    b = dense.gen_eigen_spd(s.tilde_a, s.m).values
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_spd_inv_sqrt_cases(rng):
    np.testing.assert_allclose(dense.spd_inv_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(dense.spd_inv_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))
    b = random_spd(rng, 6)
    k = dense.spd_inv_sqrt(b)
    np.testing.assert_allclose(k @ b @ k, np.eye(6), atol=1e-9)
    np.testing.assert_array_equal(k, k.T)


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        dense.psd_sqrt(np.diag([1.0, -0.5]))


def test_psd_sqrt_clamps_noise():
    r = dense.psd_sqrt(np.diag([4.0, -1e-13]))
    np.testing.assert_allclose(r, np.diag([2.0, 0.0]))


def test_spectral_norm_cases():
    assert dense.spectral_norm(np.zeros((3, 2))) == 0.0
    q = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 2)))[0]
    assert dense.spectral_norm(q @ q.T) == pytest.approx(1.0, rel=1e-12)
    assert dense.spectral_norm([[3.0, 0.0], [4.0, 0.0]]) == pytest.approx(5.0)


def test_m_operator_norm_cases(rng):
    m = dense.SpdMatrix.from_matrix(random_spd(rng, 6))
    assert dense.m_operator_norm(np.eye(6), m) == pytest.approx(1.0, rel=1e-12)
    assert dense.m_operator_norm(np.zeros((6, 6)), m) == 0.0
    a = m.base
    assert dense.m_operator_norm(np.eye(6) - m.solve(a), m) <= 1e-10


def test_m_norm_factor_independent(rng):
    """Cholesky factor and symmetric root give the same operator norm."""
    m = random_spd(rng, 9)
    x = rng.standard_normal((9, 9))
    assert dense.m_operator_norm(x, m) == pytest.approx(m_norm(x, m), rel=1e-10)


def test_lambda_k():
    s = np.diag([5.0, 1.0, 3.0])
    assert dense.lambda_k(s, 2) == 3.0
    assert dense.lambda_k(s, 1) == 1.0
    with pytest.raises(IndexOutOfRange):
        dense.lambda_k(s, 4)
    with pytest.raises(IndexOutOfRange):
        dense.lambda_k(s, 0)


def test_rank_certified():
    assert dense.matrix_rank_certified(np.outer([1.0, 2.0, 3.0], [1.0, 1.0])) == 1
    assert dense.matrix_rank_certified(np.zeros((2, 2))) == 0


sym_matrices = st.integers(min_value=2, max_value=12).flatmap(
    lambda n: st.integers(min_value=0, max_value=2**32 - 1).map(lambda seed: (n, seed))
)


@settings(max_examples=40, deadline=None)
@given(sym_matrices)
def test_jacobi_agrees_with_lapack_property(case):
    n, seed = case
    g = np.random.default_rng(seed).standard_normal((n, n))
    s = g + g.T
    j = dense.jacobi_eigen(s)
    np.testing.assert_allclose(j.values, np.linalg.eigvalsh(s), atol=1e-10 * (1 + np.abs(s).max()))
    v = np.asarray(j.vectors)
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)
