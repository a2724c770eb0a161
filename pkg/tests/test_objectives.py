import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from rmpe.errors import DomainError, StructuralError
from rmpe.objectives import (
    LogisticProblem,
    ProblemSpec,
    QuadraticProblem,
    lipschitz_constants,
    spectral_norm,
)


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_logistic(seed, m=40, n=6, tau=0.1, sparse=False):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((m, n))
    y = rng.choice([-1.0, 1.0], m)
    return LogisticProblem(sp.csr_matrix(Z) if sparse else Z, y, tau)


# -- logistic --------------------------------------------------------------------


def test_single_sample_at_zero():
    p = LogisticProblem(np.array([[1.0]]), np.array([1.0]), 1e-300)
    f, g = p.value_grad(np.zeros(1))
    assert f == pytest.approx(math.log(2), abs=1e-12)
    assert g[0] == pytest.approx(-0.5, abs=1e-12)


def test_value_at_zero_is_m_ln2():
    p = random_logistic(0)
    f, g = p.value_grad(np.zeros(6))
    assert f == pytest.approx(40 * math.log(2))
    np.testing.assert_allclose(g, -0.5 * (p.Z.T @ p.y), atol=1e-12)


@pytest.mark.parametrize("sparse", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_logistic_gradient_finite_differences(seed, sparse):
    p = random_logistic(seed, sparse=sparse)
    w = np.random.default_rng(seed + 100).standard_normal(6)
    g = p.grad(w)
    np.testing.assert_allclose(g, central_diff(p.value, w), rtol=1e-5, atol=1e-5 * np.abs(g).max())


def test_logistic_huge_margins_are_finite():
    p = LogisticProblem(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]), 0.1)
    for w in (1e4, -1e4):
        f, g = p.value_grad(np.array([w]))
        assert np.isfinite(f) and np.isfinite(g).all()
    f, _ = p.value_grad(np.array([1e4]))
    assert f == pytest.approx(1e4 + 0.5 * 0.1 * 1e8)


def test_logistic_validation():
    with pytest.raises(DomainError):
        LogisticProblem(np.eye(2), np.ones(2), 0.0)
    with pytest.raises(StructuralError):
        LogisticProblem(np.eye(2), np.array([1.0, 2.0]), 0.1)
    with pytest.raises(StructuralError):
        LogisticProblem(np.array([[np.nan, 1.0]]), np.ones(1), 0.1)
    with pytest.raises(StructuralError):
        LogisticProblem(np.eye(2), np.ones(3), 0.1)


def test_lipschitz_scalar_example():
    spec = LogisticProblem(np.array([[1.0]]), np.array([1.0]), 0.1).spec()
    assert spec.L == pytest.approx(0.35)
    assert spec.mu == 0.1
    assert spec.M_hess == pytest.approx(1 / (6 * math.sqrt(3)))


def test_zero_rows_leave_L_unchanged():
    p = random_logistic(3)
    Z2 = np.vstack([p.Z, np.zeros((5, 6))])
    p2 = LogisticProblem(Z2, np.concatenate([p.y, np.ones(5)]), p.tau)
    assert lipschitz_constants(p2).L == pytest.approx(lipschitz_constants(p).L, rel=1e-8)


def test_spectral_norm_matches_svd():
    rng = np.random.default_rng(9)
    for shape in [(30, 5), (5, 30), (200, 50)]:
        Z = rng.standard_normal(shape)
        s = np.linalg.svd(Z, compute_uv=False)[0]
        assert spectral_norm(Z) == pytest.approx(s, rel=1e-8)
        assert spectral_norm(sp.csr_matrix(Z)) == pytest.approx(s, rel=1e-8)


def test_zero_design_rejected():
    with pytest.raises(DomainError):
        lipschitz_constants(LogisticProblem(np.zeros((2, 2)), np.ones(2), 0.1))


# -- quadratic ---------------------------------------------------------------------


def test_identity_quadratic():
    q = QuadraticProblem(np.eye(2), np.zeros(2))
    f, g = q.value_grad(np.array([3.0, 4.0]))
    assert f == 12.5
    np.testing.assert_array_equal(g, [3.0, 4.0])


@pytest.mark.parametrize("form", ["spd", "lsq"])
def test_quadratic_gradient_zero_at_minimizer(form):
    q = QuadraticProblem.random(10, 50.0, seed=1, form=form)
    assert np.linalg.norm(q.grad(q.x_star)) <= 1e-10


@pytest.mark.parametrize("form", ["spd", "lsq"])
def test_quadratic_finite_differences(form):
    q = QuadraticProblem.random(8, 20.0, seed=2, form=form)
    x = np.random.default_rng(5).standard_normal(8)
    np.testing.assert_allclose(q.grad(x), central_diff(q.value, x), atol=1e-6)


def test_quadratic_random_spectrum():
    q = QuadraticProblem.random(12, 1e3, seed=0)
    spec = q.spec()
    assert spec.L == pytest.approx(1.0) and spec.kappa == pytest.approx(1e3)


def test_quadratic_rejects_asymmetric():
    with pytest.raises(StructuralError):
        QuadraticProblem(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2))


def test_problem_spec_derived():
    s = ProblemSpec(4.0, 1.0)
    assert s.sigma == 0.75 and s.kappa == 4.0 and s.kappa_inv == 4.0
    with pytest.raises(DomainError):
        ProblemSpec(1.0, 2.0)
    with pytest.raises(DomainError):
        ProblemSpec(1.0, 0.0)


# -- convexity witnesses ------------------------------------------------------------


def _problems():
    yield random_logistic(11, tau=0.05)
    yield QuadraticProblem.random(6, 30.0, seed=4)


@pytest.mark.parametrize("problem", list(_problems()), ids=["logistic", "quadratic"])
def test_convexity_witnesses(problem):
    spec = problem.spec()
    rng = np.random.default_rng(0)
    n = problem.grad(np.zeros(6)).size
    for _ in range(100):
        u, v = 3 * rng.standard_normal(n), 3 * rng.standard_normal(n)
        fu, gu = problem.value_grad(u)
        fv, gv = problem.value_grad(v)
        scale = max(1.0, abs(fu), abs(fv))
        assert problem.value(0.5 * (u + v)) <= 0.5 * fu + 0.5 * fv + 1e-12 * scale
        lower = fu + gu @ (v - u) + 0.5 * spec.mu * np.sum((v - u) ** 2)
        assert fv >= lower - 1e-9 * scale
        assert np.linalg.norm(gu - gv) <= spec.L * np.linalg.norm(u - v) * (1 + 1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), tau=st.floats(1e-4, 10.0))
def test_logistic_strong_convexity_property(seed, tau):
    p = random_logistic(seed, m=15, n=4, tau=tau)
    spec = p.spec()
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(4), rng.standard_normal(4)
    fu, gu = p.value_grad(u)
    fv = p.value(v)
    assert fv >= fu + gu @ (v - u) + 0.5 * spec.mu * np.sum((v - u) ** 2) - 1e-9 * max(1, abs(fu))
