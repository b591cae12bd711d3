import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad_vec

from mmph.errors import DimensionError, DomainError, SingularityError
from mmph.matrixnum import mat_exp, mat_inv, mat_pow, van_loan_integral, van_loan_integrals

from conftest import random_subgenerator, taylor_oracle


def test_exp_zero_is_identity():
    np.testing.assert_array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_scalar():
    assert mat_exp(np.array([[-1.0]]))[0, 0] == pytest.approx(0.36787944117144233, rel=1e-15)


def test_exp_triangular_against_series():
    m = np.array([[-2.0, 1.0], [0.0, -3.0]])
    np.testing.assert_allclose(mat_exp(m), taylor_oracle(m), atol=1e-10)
    # frozen from the series oracle
    np.testing.assert_allclose(
        mat_exp(m),
        [[0.1353352832366127, 0.08554821486874157], [0.0, 0.049787068367863944]],
        rtol=1e-13,
    )


def test_exp_batched_matches_scipy(rng):
    stack = np.stack([random_subgenerator(rng, 5) * s for s in (0.01, 1.0, 30.0, 500.0)])
    ours = mat_exp(stack)
    for a, b in zip(ours, stack):
        np.testing.assert_allclose(a, scipy.linalg.expm(b), rtol=1e-11, atol=1e-15)


def test_exp_rejects_bad_input():
    with pytest.raises(DimensionError):
        mat_exp(np.ones((2, 3)))
    with pytest.raises(DomainError):
        mat_exp(np.array([[np.nan]]))


def test_inverse_basics(rng):
    np.testing.assert_array_equal(mat_inv(np.eye(4)), np.eye(4))
    assert mat_inv(np.array([[2.0]]))[0, 0] == 0.5
    m = rng.uniform(-1, 1, (5, 5)) + 6 * np.eye(5)
    np.testing.assert_allclose(m @ mat_inv(m), np.eye(5), atol=1e-9)


def test_inverse_singular_reports_condition():
    with pytest.raises(SingularityError) as info:
        mat_inv(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert info.value.rcond <= 1e-14
    assert "condition" in str(info.value)


def test_power(rng):
    np.testing.assert_array_equal(mat_pow(rng.uniform(size=(3, 3)), 0), np.eye(3))
    assert mat_pow(np.array([[0.5]]), 3)[0, 0] == 0.125
    q = np.array([[0.2, 0.5], [0.3, 0.4]])
    naive = np.eye(2)
    for _ in range(7):
        naive = naive @ q
    np.testing.assert_allclose(mat_pow(q, 7), naive, atol=1e-12)
    with pytest.raises(DimensionError):
        mat_pow(np.ones((2, 3)), 2)
    with pytest.raises(DomainError):
        mat_pow(q, -1)


def test_van_loan_zero_horizon(rng):
    t = random_subgenerator(rng, 3)
    e, j = van_loan_integral(t, -t.sum(axis=1), [1, 0, 0], 0.0)
    np.testing.assert_array_equal(e, np.eye(3))
    np.testing.assert_array_equal(j, np.zeros((3, 3)))


def test_van_loan_scalar_closed_form():
    a, t, alpha, y = 1.3, 0.7, 1.0, 2.2
    _, j = van_loan_integral(np.array([[-a]]), [t], [alpha], y)
    assert j[0, 0] == pytest.approx(t * alpha * y * np.exp(-a * y), rel=1e-12)


def test_van_loan_against_quadrature(rng):
    t = random_subgenerator(rng, 3)
    exit = -t.sum(axis=1)
    init = np.array([0.5, 0.3, 0.2])
    y = 1.5
    e, j = van_loan_integral(t, exit, init, y)
    integrand = lambda u: scipy.linalg.expm(t * (y - u)) @ np.outer(exit, init) @ scipy.linalg.expm(t * u)
    ref, _ = quad_vec(integrand, 0.0, y, epsabs=1e-13, epsrel=1e-12)
    np.testing.assert_allclose(j, ref, atol=1e-8)
    np.testing.assert_allclose(e, scipy.linalg.expm(t * y), atol=1e-10)


def test_van_loan_errors(rng):
    t = random_subgenerator(rng, 2)
    with pytest.raises(DomainError):
        van_loan_integral(t, [1, 1], [1, 0], -1.0)
    with pytest.raises(DimensionError):
        van_loan_integral(t, [1, 1, 1], [1, 0], 1.0)
    with pytest.raises(DomainError):
        van_loan_integrals(t, [1, 1], [1, 0], [1.0, -2.0])


@st.composite
def small_matrices(draw, max_norm=10.0):
    d = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    m = np.random.default_rng(seed).normal(size=(d, d))
    scale = draw(st.floats(0.0, 1.0))
    norm = np.abs(m).sum(axis=0).max()
    return m * (scale * max_norm / norm if norm > 0 else 0.0)


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_exp_inverse_property(m):
    np.testing.assert_allclose(mat_exp(m) @ mat_exp(-m), np.eye(m.shape[0]), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(0.0, 50.0))
def test_exp_of_subgenerator_is_substochastic(seed, p, y):
    t = random_subgenerator(np.random.default_rng(seed), p)
    e = mat_exp(t * y)
    assert e.min() >= -1e-12
    rows = e.sum(axis=1)
    assert rows.min() >= -1e-12 and rows.max() <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.floats(0.0, 20.0))
def test_van_loan_first_block_is_exp(seed, p, y):
    rng = np.random.default_rng(seed)
    t = random_subgenerator(rng, p)
    e, _ = van_loan_integral(t, -t.sum(axis=1), rng.dirichlet(np.ones(p)), y)
    np.testing.assert_allclose(e, mat_exp(t * y), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(0, 30))
def test_power_recursion(seed, d, k):
    m = np.random.default_rng(seed).uniform(0, 1.0 / d, (d, d))
    np.testing.assert_allclose(mat_pow(m, k + 1), m @ mat_pow(m, k), rtol=1e-12, atol=1e-300)
