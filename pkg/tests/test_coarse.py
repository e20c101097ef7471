import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tglab as t
from tglab import dense
from tglab.coarse import CGSolver, RandomizedSolver
from tglab.errors import InvalidParameter, NotAdmissible

from oracles import random_spd


@pytest.fixture
def a_c(rng):
    return dense.SpdMatrix.from_matrix(random_spd(rng, 8, shift=2.0))


def test_exact_solver(a_c, rng):
    s = t.exact_solver(a_c)
    assert s.mode == "exact"
    np.testing.assert_array_equal(s(np.zeros(8)), np.zeros(8))
    w = rng.standard_normal(8)
    np.testing.assert_allclose(s(a_c.base @ w), w, rtol=1e-10)
    assert (s.diagnostics.alpha1, s.diagnostics.alpha2) == (1.0, 1.0)


def test_exact_diagnostics_consistent(a_c):
    d = t.linear_diagnostics(a_c, a_c.base)
    assert t.alpha_bounds(d) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_alpha_closed_form(a_c):
    d = t.linear_diagnostics(a_c, 2 * a_c.base)
    np.testing.assert_allclose(d.b_bar.base, 4 / 3 * a_c.base, rtol=1e-9)
    assert t.alpha_bounds(d) == pytest.approx((0.75, 0.75), rel=1e-10)


def test_jacobi_on_identity():
    s = t.stationary_solver(np.eye(5), "jacobi", omega=1.0)
    np.testing.assert_array_equal(s.b_c, np.eye(5))
    d = s.diagnostics
    assert (d.alpha1, d.alpha2) == pytest.approx((1.0, 1.0))


def test_gauss_seidel_admissible(a_c):
    s = t.stationary_solver(a_c, "gauss-seidel")
    d = s.diagnostics
    np.testing.assert_allclose(d.b_c + d.b_c.T - a_c.base, np.diag(np.diag(a_c.base)), atol=1e-13)
    assert 0 < d.alpha1 <= d.alpha2 <= 1 + 1e-10
    assert d.beta1 is None


def test_jacobi_not_admissible():
    a = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, 0.9], [0.9, 0.9, 1.0]])
    with pytest.raises(NotAdmissible):
        t.stationary_solver(a, "jacobi", omega=1.0)


def test_linear_invariants(a_c, rng):
    for s in (t.stationary_solver(a_c, "gauss-seidel"), t.stationary_solver(a_c, "jacobi", omega=3.0)):
        d = s.diagnostics
        w = d.b_c + d.b_c.T - a_c.base
        np.testing.assert_allclose(d.b_bar.base, d.b_c @ np.linalg.solve(w, d.b_c.T), rtol=1e-9)
        assert np.linalg.eigvalsh(d.b_bar.base - a_c.base)[0] >= -1e-9
        err_prop = np.eye(8) - np.linalg.solve(d.b_c, a_c.base)
        assert dense.m_operator_norm(err_prop, a_c) < 1
        x, y = rng.standard_normal((2, 8))
        np.testing.assert_allclose(s(x + y), s(x) + s(y), atol=1e-9)
        np.testing.assert_allclose(s(2.5 * x), 2.5 * s(x), atol=1e-9)
        np.testing.assert_allclose(s(x), np.linalg.solve(d.b_c, x), atol=1e-10)


def test_jacobi_betas_and_corollary(a_c):
    d = t.stationary_solver(a_c, "jacobi", omega=3.0).diagnostics
    assert d.beta1 is not None
    a1, a2 = t.beta_to_alpha(d.beta1, d.beta2)
    # omega = 3 forces beta2 <= 1 here, the case with an exact closed form.
    assert d.beta2 <= 1
    assert (a1, a2) == pytest.approx((d.alpha1, d.alpha2), abs=1e-8)


def test_beta_to_alpha_cases():
    assert t.beta_to_alpha(1.0, 1.0) == (1.0, 1.0)
    assert t.beta_to_alpha(0.5, 0.8) == pytest.approx((0.75, 0.96))
    assert t.beta_to_alpha(0.9, 1.5) == pytest.approx((0.75, 1.0))
    assert t.beta_to_alpha(1.2, 1.5) == pytest.approx((0.75, 0.96))
    for bad in ((0.0, 1.0), (1.0, 2.0), (0.8, 0.5)):
        with pytest.raises(InvalidParameter):
            t.beta_to_alpha(*bad)


def test_cg_exact_when_epsilon_zero(a_c, rng):
    s = t.cg_solver(a_c, 0.0, oracle_mode=True)
    b = rng.standard_normal(8)
    np.testing.assert_allclose(s(b), a_c.solve(b), rtol=1e-9)
    prod = t.cg_solver(a_c, 0.0)
    np.testing.assert_allclose(prod(b), a_c.solve(b), rtol=1e-8)


def test_cg_zero_rhs(a_c):
    x, info = t.cg_solver(a_c, 0.3, oracle_mode=True).solve_with_info(np.zeros(8))
    assert info.iterations == 0 and not np.any(x)


def test_cg_oracle_tolerance(a_c, rng):
    s = t.cg_solver(a_c, 0.5, oracle_mode=True)
    a = a_c.base
    for _ in range(100):
        b = rng.standard_normal(8)
        e = a_c.solve(b)
        x = s(b)
        assert np.sqrt((e - x) @ a @ (e - x)) <= 0.5 * np.sqrt(e @ a @ e)


def test_cg_production_guarantee(a_c, rng):
    s = t.cg_solver(a_c, 0.2)
    for _ in range(20):
        b = rng.standard_normal(8)
        e = a_c.solve(b)
        x = s(b)
        err = np.sqrt((e - x) @ a_c.base @ (e - x)) / np.sqrt(e @ a_c.base @ e)
        assert err <= 0.2 + 1e-12


def test_cg_invalid():
    with pytest.raises(InvalidParameter):
        t.cg_solver(np.eye(3), 1.0)


def test_randomized_full_sketch_exact(a_c, rng):
    s = t.randomized_solver(a_c, steps=1, sketch_dim=8, seed=0)
    b = rng.standard_normal(8)
    np.testing.assert_allclose(s(b), a_c.solve(b), rtol=1e-8)
    np.testing.assert_array_equal(s(np.zeros(8)), np.zeros(8))


def test_randomized_reproducible_and_independent(a_c):
    b = np.arange(8.0)
    s1 = t.randomized_solver(a_c, 3, 2, seed=4)
    s2 = t.randomized_solver(a_c, 3, 2, seed=4)
    x1, y1 = s1(b), s1(b)
    x2, y2 = s2(b), s2(b)
    assert x1.tobytes() == x2.tobytes() and y1.tobytes() == y2.tobytes()
    assert not np.array_equal(x1, y1)


def test_randomized_concurrent_streams(a_c):
    b = np.ones(8)
    seq = t.randomized_solver(a_c, 2, 3, seed=9)
    expected = sorted(seq(b).tobytes() for _ in range(16))
    par = t.randomized_solver(a_c, 2, 3, seed=9)
    out = []
    lock = threading.Lock()

    def run():
        x = par(b)
        with lock:
            out.append(x.tobytes())

    threads = [threading.Thread(target=run) for _ in range(16)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert sorted(out) == expected


def test_randomized_error_decays_and_decomposes(a_c):
    b = np.random.default_rng(1).standard_normal(8)
    e = a_c.solve(b)
    a = a_c.base
    means = []
    for steps in (1, 4, 10):
        s = RandomizedSolver(a_c, steps, 2, seed=steps)
        x = s.solve_batch(b, 10_000)
        d = e - x
        q = np.einsum("tj,jk,tk->t", d, a, d)
        d_bar = d.mean(axis=0)
        spread = x - x.mean(axis=0)
        var = np.einsum("tj,jk,tk->t", spread, a, spread).mean()
        se = q.std(ddof=1) / np.sqrt(len(q))
        assert abs(q.mean() - (d_bar @ a @ d_bar + var)) <= 3 * se
        means.append(q.mean())
    assert means[0] > means[1] > means[2]


def test_randomized_invalid(a_c):
    with pytest.raises(InvalidParameter):
        t.randomized_solver(a_c, 0, 1, 0)
    with pytest.raises(InvalidParameter):
        t.randomized_solver(a_c, 1, 9, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["jacobi", "gauss-seidel"]), st.floats(1.0, 4.0))
def test_alpha_range_property(seed, flavor, omega):
    rng = np.random.default_rng(seed)
    a = random_spd(rng, 6, shift=1.0)
    try:
        s = t.stationary_solver(a, flavor, omega=omega)
    except NotAdmissible:
        return
    d = s.diagnostics
    assert 0 < d.alpha1 <= d.alpha2 <= 1 + 1e-10
    if d.beta1 is not None:
        a1, _ = t.beta_to_alpha(d.beta1, d.beta2)
        assert a1 == pytest.approx(d.alpha1, abs=1e-8)
