import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boostcd.dataset import MarginMatrix
from boostcd.objective import (apply_update, example_weights, full_gradient, init_state, loss_F, partial_gradient,
                               refresh)
from oracles import dense_F, dense_grad, fd_grad, random_sparse


def _mm(M):
    return MarginMatrix.from_sparse(np.asarray(M, dtype=float))


def test_zero_start():
    A = _mm([[1, -2], [0.5, 0]])
    s = init_state(A)
    assert np.all(s.r == 0)
    assert s.F == 0.0 and s.f == 1.0


def test_scalar_state():
    s = init_state(_mm([[1.0]]), [2.0])
    assert s.r.tolist() == [2.0]
    assert s.F == pytest.approx(2.0, abs=1e-15)
    assert s.f == pytest.approx(math.e**2, rel=1e-14)


def test_init_rejects_bad_lambda():
    A = _mm([[1.0, 1.0]])
    with pytest.raises(ValueError):
        init_state(A, [0.0, np.nan])
    with pytest.raises(ValueError):
        init_state(A, [0.0])


def test_weights_examples():
    s = init_state(_mm([[1.0], [1.0], [1.0]]))
    np.testing.assert_allclose(example_weights(s), 1 / 3)
    s = init_state(_mm([[0.0, 1.0], [1.0, 0.0]]), [math.log(3), 0.0])
    s.r[:] = [0.0, math.log(3)]
    np.testing.assert_allclose(example_weights(s), [0.25, 0.75], rtol=1e-15)


def test_weights_with_huge_residuals():
    A = _mm(np.eye(4))
    lam = np.array([1e4, 1e4 - 1, -5.0, 0.0])
    s = init_state(A, lam)
    p = example_weights(s)
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    # extended precision reference
    import mpmath
    ex = [mpmath.e ** (mpmath.mpf(v) - mpmath.mpf(1e4)) for v in lam]
    tot = sum(ex)
    np.testing.assert_allclose(p, [float(e / tot) for e in ex], rtol=1e-14)
    assert s.F == pytest.approx(float(mpmath.log(tot) + 1e4 - mpmath.log(4)), rel=1e-15)


def test_gradient_at_zero_is_column_mean():
    M = np.array([[1, 0, 2], [-1, 0.5, 0], [3, 0, 0]], dtype=float)
    A = _mm(M)
    s = init_state(A)
    np.testing.assert_allclose(full_gradient(s, A), M.mean(axis=0), rtol=1e-15)
    assert partial_gradient(s, A, 0) == pytest.approx(1.0)


def test_empty_column_has_zero_gradient():
    A = _mm([[1.0, 0.0], [2.0, 0.0]])
    s = init_state(A, [0.3, 0.0])
    assert partial_gradient(s, A, 1) == 0.0


def test_gradient_matches_finite_differences_on_100_states():
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(100):
        m, n = rng.integers(2, 60), rng.integers(1, 30)
        M = random_sparse(rng, m, n, omega=10)
        A = _mm(M)
        lam = rng.standard_normal(n)
        s = init_state(A, lam)
        g = full_gradient(s, A)
        fd = fd_grad(M, lam)
        err = np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g)))
        worst = max(worst, err)
        for i in range(n):
            assert partial_gradient(s, A, i) == g[i]
    assert worst <= 1e-5


def test_gradient_permutation_equivariance():
    rng = np.random.default_rng(8)
    M = random_sparse(rng, 30, 12, 5)
    perm = rng.permutation(12)
    lam = rng.standard_normal(12)
    A, B = _mm(M), _mm(M[:, perm])
    g = full_gradient(init_state(A, lam), A)
    gp = full_gradient(init_state(B, lam[perm]), B)
    np.testing.assert_allclose(gp, g[perm], rtol=1e-13, atol=1e-16)


def test_zero_delta_only_counts():
    A = _mm([[1.0, 2.0], [0.0, -1.0]])
    s = init_state(A, [0.1, 0.2])
    before = s.copy()
    apply_update(s, A, [0, 1], [0.0, 0.0])
    assert s.iter == 1
    assert np.array_equal(s.lam, before.lam) and np.array_equal(s.r, before.r)
    assert s.F == before.F


def test_single_update():
    A = _mm([[1.0]])
    s = apply_update(init_state(A), A, [0], [-1.0])
    assert s.r.tolist() == [-1.0]
    assert s.F == pytest.approx(-1.0, abs=1e-15)


def test_non_finite_delta_rejected():
    A = _mm([[1.0]])
    with pytest.raises(ValueError):
        apply_update(init_state(A), A, [0], [np.inf])


def test_long_update_sequence_matches_fresh():
    rng = np.random.default_rng(11)
    M = random_sparse(rng, 80, 40, 8)
    A = _mm(M)
    s = init_state(A)
    for _ in range(1000):
        k = rng.integers(1, 6)
        coords = np.sort(rng.choice(40, size=k, replace=False))
        apply_update(s, A, coords, rng.normal(scale=0.3, size=k))
    np.testing.assert_allclose(s.r, M @ s.lam, rtol=0, atol=1e-8)
    fresh = dense_F(M, s.lam)
    assert abs(s.F - fresh) <= 1e-8 * max(1.0, abs(fresh))
    assert abs(refresh(s, A).F - fresh) <= 1e-12 * max(1.0, abs(fresh))


@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 25), st.floats(0.01, 30))
def test_incremental_vs_fresh(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    M = random_sparse(rng, m, n, 6)
    A = _mm(M)
    s = init_state(A, rng.standard_normal(n))
    for _ in range(50):
        k = int(rng.integers(1, n + 1))
        coords = np.sort(rng.choice(n, size=k, replace=False))
        apply_update(s, A, coords, rng.normal(scale=scale, size=k))
    fresh = dense_F(M, s.lam)
    assert abs(s.F - fresh) <= 1e-8 * max(1.0, abs(fresh))
    assert loss_F(A, s.lam) == pytest.approx(fresh, rel=1e-12, abs=1e-12)
    p = example_weights(s)
    assert abs(p.sum() - 1) <= 1e-12 and np.all(p >= 0)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0, exclude_min=True, exclude_max=True))
def test_convexity_witness(seed, theta):
    rng = np.random.default_rng(seed)
    M = random_sparse(rng, 25, 10, 5)
    A = _mm(M)
    a, b = rng.normal(scale=2, size=10), rng.normal(scale=2, size=10)
    lhs = loss_F(A, theta * a + (1 - theta) * b)
    assert lhs <= theta * loss_F(A, a) + (1 - theta) * loss_F(A, b) + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_init_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    M = random_sparse(rng, 30, 15, 7)
    lam = rng.normal(scale=3, size=15)
    s = init_state(_mm(M), lam)
    ref = dense_F(M, lam)
    assert s.F == pytest.approx(ref, rel=1e-12, abs=1e-13)
    np.testing.assert_allclose(full_gradient(s, _mm(M)), dense_grad(M, lam), rtol=1e-11, atol=1e-14)
