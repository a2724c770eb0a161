"""Closed-form rates and error bounds for (regularized) extrapolation.

The regularized Chebyshev value ``S(k, alpha)`` is computed by a
grid-discretized convex program rather than the sum-of-squares SDP.  Each
solve is certified twice: by a dual lower bound on the grid problem and by
re-evaluating the returned polynomial on a ten times finer grid.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .errors import DomainError, SolverError
from .objectives import ProblemSpec
from .optimizers import PolynomialCoeffs

__all__ = [
    "BoundInputs",
    "BoundReport",
    "SkAlphaSolution",
    "GradientModelNorms",
    "zeta",
    "cheby_rate",
    "ampe_bound",
    "s_k_alpha",
    "rmpe_bound",
    "bound_report",
    "gradient_model_bounds",
    "asymptotic_constant",
    "speedup_curve",
    "lambda_curve",
    "write_curve_csv",
]

GAP_TOL = 1e-8


def _check_sigma(sigma):
    if not (0.0 <= sigma < 1.0):
        raise DomainError(f"sigma must lie in [0, 1), got {sigma}")


def zeta(sigma: float) -> float:
    """Rate base ``(1 - sqrt(1-sigma)) / (1 + sqrt(1-sigma))``."""
    _check_sigma(sigma)
    s = math.sqrt(1.0 - sigma)
    return (1.0 - s) / (1.0 + s)


def cheby_rate(k: int, sigma: float) -> float:
    """Minimax value ``min_{p(1)=1} max_{[0,sigma]} |p| = 2 z^k / (1 + z^{2k})``."""
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    z = zeta(sigma)
    zk = z**k
    return 2.0 * zk / (1.0 + zk * zk)


def ampe_bound(kappa_AI: float, k: int, sigma: float, d0: float) -> float:
    """Error bound of the unregularized extrapolation on a linear iteration."""
    if kappa_AI <= 0 or d0 < 0:
        raise DomainError("condition number must be positive and d0 non-negative")
    return kappa_AI * cheby_rate(k, sigma) * d0


# -- regularized Chebyshev program ---------------------------------------


@dataclass(frozen=True)
class SkAlphaSolution:
    """Result of the regularized Chebyshev program.

    Attributes
    ----------
    value : float
        Objective of ``q`` over the solve grid together with a 10x finer
        certification grid.  An upper estimate of the continuous ``S(k, alpha)``.
    q : PolynomialCoeffs
        Monomial coefficients with ``q(1) = 1``.
    grid_size : int
        Base grid size before refinement.
    lower : float
        Certified lower bound for the discretized problem.
    grid_value : float
        Objective of ``q`` on the (refined) solve grid.
    """

    value: float
    q: PolynomialCoeffs
    grid_size: int
    lower: float
    grid_value: float

    @property
    def gap(self) -> float:
        return self.grid_value - self.lower


def _lobatto(sigma, m):
    j = np.arange(m)
    return 0.5 * sigma * (1.0 - np.cos(np.pi * j / (m - 1)))


def _weighted_cheb(x, sigma, k):
    t = (2.0 * x - sigma) / sigma
    return cheb.chebvander(t, k) * (1.0 - x)[:, None]


def _solve_lp(x, sigma, k):
    """``alpha = 0``: maximize p(1) subject to |(1-x) p(x)| <= 1 on the grid."""
    V = _weighted_cheb(x, sigma, k)
    ell = cheb.chebvander(np.array([(2.0 - sigma) / sigma]), k)[0]
    scale = ell[-1]
    res = linprog(
        -ell / scale,
        A_ub=np.vstack([V, -V]),
        b_ub=np.ones(2 * len(x)),
        bounds=[(None, None)] * (k + 1),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"linear program failed: {res.message}", residual=None)
    coef = res.x
    p1 = ell @ coef
    # the LP optimum p(1) gives the discretized minimax value 1 / p(1)^2
    return coef / p1, 1.0 / p1**2


def _cheb_to_monomial(coef, sigma):
    p = cheb.Chebyshev(coef, domain=[0.0, sigma]).convert(kind=np.polynomial.Polynomial)
    out = np.zeros(coef.size)
    out[: p.coef.size] = p.coef
    return out


def _stacked_min(A, alpha, weights=None):
    """``min_{1^T q = 1} sum_j w_j (a_j^T q)^2 + alpha ||q||^2`` through QR."""
    k1 = A.shape[1]
    rows = A if weights is None else A * np.sqrt(weights)[:, None]
    K = np.vstack([rows, math.sqrt(alpha) * np.eye(k1)])
    R = np.linalg.qr(K, mode="r")
    r = solve_triangular(R, np.ones(k1), trans="T")
    return 1.0 / (r @ r)


def _solve_qp(x, k, alpha):
    """``alpha > 0``: epigraph QP in the orthonormal basis of ``[A; sqrt(alpha) I]``."""
    import cvxpy as cp

    A = np.vander(x, k + 1, increasing=True) * (1.0 - x)[:, None]
    m = len(x)
    Q, R = np.linalg.qr(np.vstack([A, math.sqrt(alpha) * np.eye(k + 1)]))
    QA, QI = Q[:m], Q[m:]
    r = solve_triangular(R, np.ones(k + 1), trans="T")
    nr = np.linalg.norm(r)
    y = cp.Variable(k + 1)
    t = cp.Variable()
    upper = QA @ y <= t
    lower = -QA @ y <= t
    prob = cp.Problem(
        cp.Minimize(cp.square(t) + cp.sum_squares(QI @ y)),
        [upper, lower, (r / nr) @ y == 1],
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob.solve(
                solver="CLARABEL",
                tol_gap_abs=1e-14,
                tol_gap_rel=1e-11,
                tol_feas=1e-12,
                max_iter=500,
            )
    except cp.error.SolverError as exc:
        raise SolverError(f"epigraph program failed: {exc}") from exc
    if prob.status not in ("optimal", "optimal_inaccurate") or y.value is None:
        raise SolverError(f"epigraph program status {prob.status}")
    q = solve_triangular(R, y.value / nr)
    q = q / q.sum()
    nu = np.abs(upper.dual_value) + np.abs(lower.dual_value)
    mu = nu / nu.sum() if nu.sum() > 0 else np.full(m, 1.0 / m)
    return q, _stacked_min(A, alpha, mu)


def _objective(q, x, alpha):
    vals = np.abs((1.0 - x) * np.polynomial.polynomial.polyval(x, q))
    return float(vals.max() ** 2 + alpha * (q @ q)), vals


def s_k_alpha(k: int, sigma: float, alpha: float, grid_size: int = 1000) -> SkAlphaSolution:
    """Solve ``min_{q(1)=1} max_{[0,sigma]} ((1-x) q(x))^2 + alpha ||q||^2``.

    The interval is replaced by ``grid_size`` Chebyshev-Lobatto nodes,
    refined once around the local maxima of the first solution.  ``alpha = 0``
    is solved as a linear program in the Chebyshev basis of ``[0, sigma]``;
    ``alpha > 0`` as a convex quadratic program whose variables are
    orthonormalized against ``[A; sqrt(alpha) I]``.

    Raises
    ------
    SolverError
        If the inner solver fails or the certified gap exceeds 1e-8 relative.
    """
    if not 0 <= k <= 30:
        raise DomainError(f"k must lie in [0, 30], got {k}")
    _check_sigma(sigma)
    if not (alpha >= 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be finite and non-negative, got {alpha}")
    if grid_size < max(10 * k, 2):
        raise DomainError(f"grid_size must be at least 10 k = {10 * k}")
    if k == 0:
        q = np.ones(1)
        return SkAlphaSolution(1.0 + alpha, PolynomialCoeffs(q), grid_size, 1.0 + alpha, 1.0 + alpha)
    if sigma == 0.0:
        # single point x = 0: only q_0 enters the max term
        if alpha == 0.0:
            q = np.zeros(k + 1)
            q[1] = 1.0
            return SkAlphaSolution(0.0, PolynomialCoeffs(q), grid_size, 0.0, 0.0)
        # minimize q0^2 + alpha ||q||^2 on 1^T q = 1: weights 1/(1+alpha), 1/alpha, ...
        w = np.full(k + 1, 1.0 / alpha)
        w[0] = 1.0 / (1.0 + alpha)
        q = w / w.sum()
        val = 1.0 / w.sum()
        return SkAlphaSolution(val, PolynomialCoeffs(q), grid_size, val, val)

    x = _lobatto(sigma, grid_size)
    fine = _lobatto(sigma, 10 * grid_size)
    for attempt in range(2):
        if alpha == 0.0:
            coef, lower = _solve_lp(x, sigma, k)
            vals = np.abs(_weighted_cheb(x, sigma, k) @ coef)
            grid_value = float(vals.max() ** 2)
            fine_vals = np.abs(_weighted_cheb(fine, sigma, k) @ coef)
            value = float(fine_vals.max() ** 2)
            q = _cheb_to_monomial(coef, sigma)
        else:
            q, lower = _solve_qp(x, k, alpha)
            grid_value, vals = _objective(q, x, alpha)
            value, fine_vals = _objective(q, fine, alpha)
        if attempt == 0:
            x = _refine(x, fine, fine_vals, sigma, grid_size)
    gap = grid_value - lower
    if gap > GAP_TOL * max(grid_value, 1e-300) and gap > 1e-15:
        raise SolverError(f"duality gap {gap:.3e} exceeds tolerance", residual=gap)
    value = max(value, grid_value)
    return SkAlphaSolution(value, PolynomialCoeffs(q), grid_size, min(lower, grid_value), grid_value)


def _refine(x, fine, fine_vals, sigma, grid_size):
    n = len(fine_vals)
    peaks = [
        i for i in range(n)
        if fine_vals[i] >= fine_vals[max(i - 1, 0)] and fine_vals[i] >= fine_vals[min(i + 1, n - 1)]
    ]
    extra = fine[peaks]
    h = sigma / (10 * grid_size)
    extra = np.concatenate([extra + d for d in np.linspace(-h, h, 5)])
    return np.unique(np.concatenate([x, np.clip(extra, 0.0, sigma)]))


# -- bounds for the gradient method ----------------------------------------


@dataclass(frozen=True)
class GradientModelNorms:
    """Norm bounds of the iterate, increment and nonlinearity matrices."""

    X_norm: float
    U_norm: float
    Eps_norm: float
    E_norm: float
    P_norm: float


def gradient_model_bounds(spec: ProblemSpec, d0: float, k: int) -> GradientModelNorms:
    """Norm bounds along ``k`` steps of the 1/L gradient method.

    With ``q = mu/L`` and ``r = sqrt((L-mu)/(L+mu))``::

        ||X - X*||  <= (1 - r^k) / (1 - r) d0
        ||U||       <= (L/mu) (1 - (1-q)^k) d0
        ||Eps||     <= (1 + L/mu)^2 M/(2L) (1/2 - (1-q)^k + ((1-q)/(1+q))^k / 2) d0^2
        ||E||       <= 2 ||Eps||
        ||P||       <= 2 ||U|| ||E|| + ||E||^2
    """
    if k < 0 or d0 < 0:
        raise DomainError("k and d0 must be non-negative")
    L, mu, M = spec.L, spec.mu, spec.M_hess
    q = mu / L
    r = spec.gradient_rate
    X_norm = (1.0 - r**k) / (1.0 - r) * d0
    U_norm = (L / mu) * (1.0 - (1.0 - q) ** k) * d0
    bracket = 0.5 - (1.0 - q) ** k + 0.5 * ((1.0 - q) / (1.0 + q)) ** k
    Eps_norm = (1.0 + L / mu) ** 2 * M / (2.0 * L) * max(bracket, 0.0) * d0 * d0
    E_norm = 2.0 * Eps_norm
    P_norm = 2.0 * U_norm * E_norm + E_norm * E_norm
    return GradientModelNorms(X_norm, U_norm, Eps_norm, E_norm, P_norm)


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the global regularized bound.

    Norms left as ``None`` are filled in from :func:`gradient_model_bounds`.
    """

    spec: ProblemSpec
    d0: float
    k: int
    lam: float
    P_norm: float | None = None
    E_norm: float | None = None
    Eps_norm: float | None = None
    U_norm: float | None = None
    grid_size: int = 1000

    def __post_init__(self):
        if not self.d0 > 0:
            raise DomainError(f"d0 must be positive, got {self.d0}")
        for name in ("P_norm", "E_norm", "Eps_norm", "U_norm"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"{name} must be non-negative, got {v}")

    def resolved(self) -> "BoundInputs":
        if None not in (self.P_norm, self.E_norm, self.Eps_norm, self.U_norm):
            return self
        norms = gradient_model_bounds(self.spec, self.d0, self.k)
        return BoundInputs(
            self.spec,
            self.d0,
            self.k,
            self.lam,
            norms.P_norm if self.P_norm is None else self.P_norm,
            norms.E_norm if self.E_norm is None else self.E_norm,
            norms.Eps_norm if self.Eps_norm is None else self.Eps_norm,
            norms.U_norm if self.U_norm is None else self.U_norm,
            self.grid_size,
        )


def _perturbation_factor(kappa, lam, P, Eps):
    return math.sqrt(
        kappa * kappa
        + (1.0 / lam) * (1.0 + P / lam) ** 2 * (Eps + kappa * P / (2.0 * math.sqrt(lam))) ** 2
    )


def rmpe_bound(inputs: BoundInputs) -> float:
    """Global bound on ``||X c_lambda - x*||`` for a nonlinear iteration.

    ``sqrt(kappa^2 + (1+P/lam)^2 (Eps + kappa P / (2 sqrt lam))^2 / lam)
    * sqrt(S(k, lam/d0^2)) * d0`` with ``kappa = ||(A - I)^{-1}||``.
    """
    return bound_report(inputs).bound


@dataclass(frozen=True)
class BoundReport:
    """Every intermediate quantity of :func:`rmpe_bound`."""

    zeta: float
    rate: float
    S: float
    factor: float
    bound: float
    inputs: BoundInputs = field(repr=False)
    speedup: float | None = None


def bound_report(inputs: BoundInputs) -> BoundReport:
    if not inputs.lam > 0:
        raise DomainError(f"lambda must be positive, got {inputs.lam}")
    inputs = inputs.resolved()
    spec = inputs.spec
    kappa = spec.kappa_inv
    sigma = spec.sigma
    sol = s_k_alpha(inputs.k, sigma, inputs.lam / inputs.d0**2, inputs.grid_size)
    factor = _perturbation_factor(kappa, inputs.lam, inputs.P_norm, inputs.Eps_norm)
    bound = factor * math.sqrt(sol.value) * inputs.d0
    return BoundReport(zeta(sigma), cheby_rate(inputs.k, sigma), sol.value, factor, bound, inputs)


def asymptotic_constant(beta: float) -> float:
    """``sqrt(1 + (1 + 1/beta)^2 / (4 beta^2))`` for ``lam = beta ||P||``."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    return math.sqrt(1.0 + (1.0 + 1.0 / beta) ** 2 / (4.0 * beta * beta))


def lambda_curve(spec: ProblemSpec, d0: float, k_range):
    """``(k, lam / d0^2)`` with ``lam = ||P||`` from the gradient-model norms."""
    return [(k, gradient_model_bounds(spec, d0, k).P_norm / d0**2) for k in k_range]


def speedup_curve(spec: ProblemSpec, d0: float, k_range, grid_size: int = 1000):
    """Predicted speedup of the regularized extrapolation over plain gradient.

    For each ``k`` the bound with ``lam = ||P||`` is converted into the
    number of gradient steps ``log(bound/d0) / log(r)`` needed to reach the
    same accuracy at rate ``r = sqrt((L-mu)/(L+mu))``, divided by ``k``.
    Bounds that do not improve on ``d0`` give speedup 0.
    """
    r = spec.gradient_rate
    out = []
    for k in k_range:
        if k < 1:
            raise DomainError("speedup is defined for k >= 1")
        norms = gradient_model_bounds(spec, d0, k)
        lam = norms.P_norm
        if lam <= 0:
            # perturbation-free limit: no regularization needed
            bound = spec.kappa_inv * math.sqrt(s_k_alpha(k, spec.sigma, 0.0, grid_size).value) * d0
        else:
            bound = rmpe_bound(BoundInputs(spec, d0, k, lam, grid_size=grid_size))
        steps = math.log(bound / d0) / math.log(r) if bound < d0 else 0.0
        out.append((k, steps / k))
    return out


def nesterov_speedup(spec: ProblemSpec) -> float:
    """Per-step rate advantage of Nesterov's method over plain gradient."""
    return math.log(1.0 - math.sqrt(spec.mu / spec.L)) / math.log(spec.gradient_rate)


def write_curve_csv(path, rows, header=("k", "value")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
