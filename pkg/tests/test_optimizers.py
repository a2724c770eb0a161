import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmpe.errors import DivergedError, DomainError, InvalidSpectrumError
from rmpe.optimizers import (
    NesterovState,
    StepperSpec,
    chebyshev_polynomial,
    chebyshev_run,
    gradient_step,
    nesterov_conjecture_probe,
    nesterov_eval,
    nesterov_momentum,
    nesterov_polynomial,
    nesterov_step,
)


def cheb_T(k, t):
    """Closed-form first-kind Chebyshev value, independent of any recurrence."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) <= 1
    out = np.empty_like(t)
    out[inside] = np.cos(k * np.arccos(t[inside]))
    ti = t[~inside]
    out[~inside] = np.sign(ti) ** k * np.cosh(k * np.arccosh(np.abs(ti)))
    return out


def grad_of(B, b):
    return lambda x: B @ x - b


# -- gradient ------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["gradient_fixed", "gradient_short"])
def test_unit_quadratic_one_step(kind):
    # f = ||x||^2 / 2 with L = mu = 1: both step sizes equal 1
    x = gradient_step([2.0, 0.0], lambda x: x, StepperSpec(kind, 1.0, 1.0))
    np.testing.assert_array_equal(x, [0.0, 0.0])


def test_short_step_by_hand():
    B = np.diag([4.0, 1.0])
    x = gradient_step([1.0, 1.0], grad_of(B, np.zeros(2)), StepperSpec("gradient_short", 4.0, 1.0))
    np.testing.assert_allclose(x, [0.0, 0.75])


def test_fixed_step_size():
    assert StepperSpec("gradient_fixed", 4.0, 1.0).step_size == pytest.approx(0.4)


def test_nonfinite_gradient_diverges():
    with pytest.raises(DivergedError):
        gradient_step([1.0], lambda x: np.array([np.inf]), StepperSpec("gradient_short", 1.0))


@pytest.mark.parametrize(
    "kind, L, mu",
    [("gradient_fixed", 1.0, 0.0), ("bogus", 1.0, 0.5), ("gradient_short", 0.0, 0.0), ("nesterov_strong", 1.0, 2.0)],
)
def test_stepper_validation(kind, L, mu):
    with pytest.raises(DomainError):
        StepperSpec(kind, L, mu)


# -- Nesterov --------------------------------------------------------------------


def test_momentum_values():
    assert nesterov_momentum(5.0, 5.0) == 0.0
    assert nesterov_momentum(4.0, 1.0) == pytest.approx(1.0 / 3.0)


def test_chebyshev_first_step_example():
    # B = diag(4, 1), L = 4, mu = 1, sigma = 0.75, x0 - x* = (1, 1)
    B = np.diag([4.0, 1.0])
    Y = chebyshev_run(B, np.zeros(2), [1.0, 1.0], 1, L=4.0, mu=1.0)
    a = 1.0 - np.array([4.0, 1.0]) / 4.0
    np.testing.assert_allclose(Y[1], (2 * a - 0.75) / (2 - 0.75), atol=1e-15)


def test_convex_first_step_is_gradient_step():
    B = np.diag([3.0, 1.0])
    b = np.array([1.0, 2.0])
    x0 = np.array([0.5, -0.5])
    s = nesterov_step(NesterovState.start(x0), grad_of(B, b), StepperSpec("nesterov_convex", 3.0))
    g = gradient_step(x0, grad_of(B, b), StepperSpec("gradient_short", 3.0))
    np.testing.assert_allclose(s.x, g, rtol=1e-15)
    np.testing.assert_array_equal(s.y, s.x)  # beta_1 = 0


def test_strong_with_mu_equal_L_is_gradient():
    B = 2.0 * np.eye(3)
    b = np.ones(3)
    state = NesterovState.start(np.zeros(3))
    x = np.zeros(3)
    for _ in range(5):
        state = nesterov_step(state, grad_of(B, b), StepperSpec("nesterov_strong", 2.0, 2.0))
        x = gradient_step(x, grad_of(B, b), StepperSpec("gradient_short", 2.0))
        np.testing.assert_array_equal(state.x, x)


def test_nesterov_matches_eigenbasis_simulation():
    # with 1/L steps on x^T B x / 2 each eigencomponent evolves independently
    rng = np.random.default_rng(4)
    ev = np.linspace(0.1, 1.0, 6)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    B = (Q * ev) @ Q.T
    x0 = rng.standard_normal(6)
    spec = StepperSpec("nesterov_strong", 1.0, 0.1)
    beta = nesterov_momentum(1.0, 0.1)
    state = NesterovState.start(x0)
    for _ in range(12):
        state = nesterov_step(state, lambda y: B @ y, spec)
    a = 1.0 - ev
    coef = Q.T @ x0
    # x_k = A y_{k-1}; direct simulation in the eigenbasis is the oracle
    xs, ys = coef.copy(), coef.copy()
    for _ in range(12):
        xn = a * ys
        ys = xn + beta * (xn - xs)
        xs = xn
    np.testing.assert_allclose(Q.T @ state.x, xs, atol=1e-12)


# -- Chebyshev ---------------------------------------------------------------------


def test_chebyshev_polynomial_low_degrees():
    sigma = 0.5
    np.testing.assert_allclose(chebyshev_polynomial(0, sigma).coeffs, [1.0])
    # T_1 = (2x - sigma) / (2 - sigma)
    np.testing.assert_allclose(chebyshev_polynomial(1, sigma).coeffs, [-sigma / (2 - sigma), 2 / (2 - sigma)])


@pytest.mark.parametrize("k", [2, 5, 9])
@pytest.mark.parametrize("sigma", [0.3, 0.9])
def test_chebyshev_polynomial_matches_closed_form(k, sigma):
    x = np.linspace(-0.2, 1.0, 50)
    t = (2 * x - sigma) / sigma
    t1 = (2 - sigma) / sigma
    expect = cheb_T(k, t) / cheb_T(k, np.array([t1]))[0]
    np.testing.assert_allclose(chebyshev_polynomial(k, sigma)(x), expect, atol=1e-12)
    assert chebyshev_polynomial(k, sigma)(1.0) == pytest.approx(1.0, abs=1e-12)


def test_chebyshev_run_error_polynomial():
    rng = np.random.default_rng(2)
    n = 8
    ev = np.linspace(0.05, 1.0, n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    B = (Q * ev) @ Q.T
    b = rng.standard_normal(n)
    xs = np.linalg.solve(B, b)
    x0 = rng.standard_normal(n)
    Y = chebyshev_run(B, b, x0, 25, L=1.0, mu=0.05)
    sigma = 0.95
    a = 1.0 - ev
    for j in (1, 2, 10, 25):
        p = cheb_T(j, (2 * a - sigma) / sigma) / cheb_T(j, np.array([(2 - sigma) / sigma]))[0]
        expect = xs + Q @ (p * (Q.T @ (x0 - xs)))
        np.testing.assert_allclose(Y[j], expect, atol=1e-10)


def test_chebyshev_invalid_spectrum():
    with pytest.raises(InvalidSpectrumError):
        chebyshev_run(np.eye(2), np.ones(2), np.zeros(2), 3, L=1.0, mu=0.0)
    with pytest.raises(DomainError):
        chebyshev_polynomial(3, 1.0)


def test_chebyshev_long_run_stays_finite():
    Y = chebyshev_run(np.diag([1e-4, 1.0]), np.ones(2), np.zeros(2), 2000, L=1.0, mu=1e-4)
    assert np.isfinite(Y).all()
    np.testing.assert_allclose(Y[-1], [1e4, 1.0], rtol=1e-8)


# -- Nesterov polynomial ----------------------------------------------------------


def test_nesterov_polynomial_low_degrees():
    np.testing.assert_array_equal(nesterov_polynomial(0, 0.5).coeffs, [1.0])
    np.testing.assert_array_equal(nesterov_polynomial(1, 0.5).coeffs, [0.0, 1.0])
    # N_2 = x((1+b)x - b)
    np.testing.assert_allclose(nesterov_polynomial(2, 0.5).coeffs, [0.0, -0.5, 1.5])


def test_nesterov_polynomial_value():
    # N_2(0.9) with beta 0.5: 0.9 * (1.5 * 0.9 - 0.5) = 0.765; N_3 uses N_2 and N_1
    assert nesterov_polynomial(2, 0.5)(0.9) == pytest.approx(0.765)
    assert nesterov_eval(0.9, 3, 0.5) == pytest.approx(0.9 * (1.5 * 0.765 - 0.5 * 0.9))


def test_nesterov_zero_beta_is_power():
    np.testing.assert_allclose(nesterov_eval(0.9, 2, 0.0), 0.81)
    np.testing.assert_allclose(nesterov_polynomial(2, 0.0).coeffs, [0.0, 0.0, 1.0])


def test_nesterov_polynomial_sequence_too_short():
    with pytest.raises(DomainError):
        nesterov_polynomial(4, [0.1, 0.2])
    with pytest.raises(DomainError):
        nesterov_polynomial(1001, 0.5)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(0, 20), beta=st.floats(0.0, 0.95), x=st.floats(-1.0, 1.0))
def test_eval_matches_coefficients(k, beta, x):
    assert nesterov_eval(x, k, beta) == pytest.approx(nesterov_polynomial(k, beta)(x), abs=1e-9)


def test_nesterov_eval_at_one_is_one():
    # N_k(1) = 1 for every momentum sequence
    for beta in (0.3, 0.98, 0.9999):
        assert nesterov_eval(1.0, 50, beta) == pytest.approx(1.0, abs=1e-12)


def test_conjecture_probe_passes():
    sigma = 0.99
    beta = nesterov_momentum(1.0, 1.0 - sigma)
    assert nesterov_conjecture_probe(sigma, beta, 30) == []


def test_nesterov_rate_vs_chebyshev():
    # Chebyshev is optimal: its max on [0, sigma] never exceeds Nesterov's
    sigma = 0.9
    beta = nesterov_momentum(1.0, 1.0 - sigma)
    x = np.linspace(0, sigma, 2001)
    for k in range(1, 15):
        cheb = np.abs(chebyshev_polynomial(k, sigma)(x)).max()
        nest = np.abs(nesterov_eval(x, k, beta)).max()
        assert cheb <= nest + 1e-12
        assert math.isfinite(nest)
