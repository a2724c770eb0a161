import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmpe.bounds import (
    BoundInputs,
    ampe_bound,
    asymptotic_constant,
    bound_report,
    cheby_rate,
    gradient_model_bounds,
    lambda_curve,
    rmpe_bound,
    s_k_alpha,
    speedup_curve,
    write_curve_csv,
    zeta,
)
from rmpe.errors import DomainError
from rmpe.objectives import ProblemSpec

CURVE_SPEC = ProblemSpec(100.0, 10.0, 0.1)


def minimax_oracle(k, sigma, alpha=0.0, m=4000):
    """Brute force over monomial coefficients on a dense uniform grid."""
    x = np.linspace(0.0, sigma, m)
    V = np.vander(x, k + 1, increasing=True)
    q = cp.Variable(k + 1)
    cons = [cp.sum(q) == 1]
    r = cp.multiply(1.0 - x, V @ q)
    if alpha == 0.0:
        prob = cp.Problem(cp.Minimize(cp.norm(r, "inf")), cons)
        prob.solve(solver=cp.CLARABEL)
        return prob.value**2
    prob = cp.Problem(cp.Minimize(cp.max(cp.square(r)) + alpha * cp.sum_squares(q)), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


# -- closed forms ----------------------------------------------------------------


def test_zeta_examples():
    assert zeta(0.0) == 0.0
    assert zeta(0.75) == pytest.approx(1.0 / 3.0)


def test_zeta_below_sigma():
    s = np.linspace(1e-6, 1 - 1e-6, 1000)
    assert all(zeta(v) < v for v in s)


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5])
def test_zeta_domain(bad):
    with pytest.raises(DomainError):
        zeta(bad)


def test_cheby_rate_examples():
    assert cheby_rate(0, 0.5) == 1.0
    assert cheby_rate(1, 0.75) == pytest.approx(0.6)


@pytest.mark.parametrize("k", range(1, 6))
@pytest.mark.parametrize("sigma", [0.5, 0.9])
def test_cheby_rate_is_the_minimax_value(k, sigma):
    x = np.linspace(0.0, sigma, 4000)
    V = np.vander(x, k + 1, increasing=True)
    q = cp.Variable(k + 1)
    prob = cp.Problem(cp.Minimize(cp.norm(V @ q, "inf")), [cp.sum(q) == 1])
    prob.solve(solver=cp.CLARABEL)
    assert cheby_rate(k, sigma) == pytest.approx(prob.value, abs=1e-4)


def test_ampe_bound_examples():
    assert ampe_bound(3.0, 0, 0.5, 2.0) == 6.0
    assert ampe_bound(3.0, 4, 0.0, 2.0) == 0.0
    assert ampe_bound(3.0, 1, 0.75, 2.0) == pytest.approx(3.6)


def test_asymptotic_constant_examples():
    assert asymptotic_constant(1.0) == pytest.approx(math.sqrt(2))
    assert asymptotic_constant(0.5) == pytest.approx(math.sqrt(10))
    assert asymptotic_constant(1e8) == pytest.approx(1.0)
    b = np.logspace(-2, 3, 50)
    assert np.all(np.diff([asymptotic_constant(v) for v in b]) < 0)
    with pytest.raises(DomainError):
        asymptotic_constant(0.0)


# -- S(k, alpha) ----------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.0, 0.3])
def test_s_k0(alpha):
    sol = s_k_alpha(0, 0.9, alpha)
    assert sol.value == 1.0 + alpha
    np.testing.assert_array_equal(sol.q.coeffs, [1.0])


@pytest.mark.parametrize("k", [1, 3, 6])
def test_s_huge_alpha_is_uniform(k):
    alpha = 1e12
    sol = s_k_alpha(k, 0.9, alpha, grid_size=max(10 * k, 200))
    assert sol.value / alpha == pytest.approx(1.0 / (k + 1), rel=1e-6)
    np.testing.assert_allclose(sol.q.coeffs, 1.0 / (k + 1), atol=1e-5)


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
@pytest.mark.parametrize("k", [1, 2, 4])
@pytest.mark.parametrize("alpha", [0.0, 1e-3, 0.1])
def test_s_matches_brute_force(k, alpha):
    sol = s_k_alpha(k, 0.9, alpha)
    assert sol.value == pytest.approx(minimax_oracle(k, 0.9, alpha), rel=1e-4)


@pytest.mark.parametrize("k", [2, 7, 12])
@pytest.mark.parametrize("alpha", [0.0, 1e-4, 1.0])
def test_s_solution_invariants(k, alpha):
    sol = s_k_alpha(k, 0.95, alpha)
    assert sol.q(1.0) == pytest.approx(1.0, abs=1e-10)
    assert sol.value >= alpha * np.sum(sol.q.coeffs**2) * (1 - 1e-12)
    assert sol.gap <= 1e-8
    assert sol.lower <= sol.value


@pytest.mark.parametrize("sigma", [0.5, 0.9, 0.99])
def test_sqrt_s0_below_cheby_rate(sigma):
    for k in range(0, 21):
        assert math.sqrt(s_k_alpha(k, sigma, 0.0).value) <= cheby_rate(k, sigma) * (1 + 1e-8)


def test_s_monotone():
    ks = [s_k_alpha(k, 0.9, 1e-3, 300).value for k in range(0, 15)]
    assert all(b <= a * (1 + 1e-8) for a, b in zip(ks, ks[1:]))
    alphas = np.concatenate([[0.0], np.logspace(-6, 2, 20)])
    vals = [s_k_alpha(4, 0.9, a, 300).value for a in alphas]
    assert all(b >= a * (1 - 1e-8) for a, b in zip(vals, vals[1:]))


def test_s_domain():
    with pytest.raises(DomainError):
        s_k_alpha(31, 0.9, 0.0)
    with pytest.raises(DomainError):
        s_k_alpha(5, 0.9, 0.0, grid_size=20)
    with pytest.raises(DomainError):
        s_k_alpha(2, 0.9, -1.0)


# -- gradient model norms ----------------------------------------------------------


def test_gradient_model_k0_k1():
    assert gradient_model_bounds(CURVE_SPEC, 1e-4, 0).Eps_norm == 0.0
    n1 = gradient_model_bounds(CURVE_SPEC, 1e-4, 1)
    assert n1.X_norm == pytest.approx(1e-4)
    assert n1.E_norm == 2 * n1.Eps_norm


def test_gradient_model_curves_finite_and_monotone():
    rows = [gradient_model_bounds(CURVE_SPEC, 1e-4, k) for k in range(1, 51)]
    for field in ("X_norm", "U_norm", "Eps_norm", "P_norm"):
        v = np.array([getattr(r, field) for r in rows])
        assert np.isfinite(v).all()
        assert np.all(np.diff(v) >= 0)


def test_gradient_model_needs_strong_convexity():
    with pytest.raises(DomainError):
        ProblemSpec(1.0, 0.0)


# -- regularized bound ---------------------------------------------------------------


def test_perturbation_free_limit():
    spec = ProblemSpec(10.0, 1.0)
    d0, lam = 0.5, 1e-2
    b = rmpe_bound(BoundInputs(spec, d0, 4, lam, 0.0, 0.0, 0.0, 0.0))
    expect = spec.kappa * math.sqrt(s_k_alpha(4, spec.sigma, lam / d0**2).value) * d0
    assert b == pytest.approx(expect, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(P=st.floats(0.0, 1.0), Eps=st.floats(0.0, 1.0), dP=st.floats(1e-3, 1.0), dE=st.floats(1e-3, 1.0))
def test_bound_monotone_in_perturbations(P, Eps, dP, dE):
    def b(p, e):
        return rmpe_bound(BoundInputs(CURVE_SPEC, 1e-2, 3, 1e-3, p, 2 * e, e, 0.1, grid_size=100))

    base = b(P, Eps)
    assert b(P + dP, Eps) >= base
    assert b(P, Eps + dE) >= base


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_bound_rejects_nonpositive_lambda(lam):
    with pytest.raises(DomainError):
        rmpe_bound(BoundInputs(CURVE_SPEC, 1e-4, 3, lam))


def test_bound_report_fields():
    rep = bound_report(BoundInputs(CURVE_SPEC, 1e-4, 5, 1e-9))
    assert rep.zeta == zeta(0.9) and rep.rate == cheby_rate(5, 0.9)
    assert rep.bound == pytest.approx(rep.factor * math.sqrt(rep.S) * 1e-4)


def test_bound_deterministic():
    inp = BoundInputs(CURVE_SPEC, 1e-4, 7, gradient_model_bounds(CURVE_SPEC, 1e-4, 7).P_norm)
    assert rmpe_bound(inp) == rmpe_bound(inp)


# -- curves ---------------------------------------------------------------------------


def test_speedup_contiguous_above_one():
    rows = speedup_curve(CURVE_SPEC, 1e-4, range(1, 31), grid_size=300)
    above = [k for k, s in rows if s > 1]
    assert above, "no acceleration predicted"
    assert above == list(range(above[0], above[-1] + 1))


def test_speedup_grows_in_perturbation_free_regime():
    spec = ProblemSpec(1.0, 0.5, 0.0)
    vals = [s for _, s in speedup_curve(spec, 1e-4, range(1, 8), grid_size=200)]
    assert np.all(np.diff(vals) > 0)


def test_speedup_zero_when_no_progress():
    # huge nonlinearity: the bound is worse than d0
    spec = ProblemSpec(100.0, 10.0, 1e12)
    assert speedup_curve(spec, 1.0, [3], grid_size=100) == [(3, 0.0)]


def test_lambda_curve_and_csv(tmp_path):
    rows = lambda_curve(CURVE_SPEC, 1e-4, range(1, 4))
    path = tmp_path / "c.csv"
    write_curve_csv(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,value" and len(lines) == 4
    assert float(lines[2].split(",")[1]) == rows[1][1]
