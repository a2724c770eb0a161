"""Objective and gradient oracles for quadratic and logistic problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import DomainError, EstimationError, StructuralError

__all__ = [
    "ProblemSpec",
    "QuadraticProblem",
    "LogisticProblem",
    "quadratic_value_grad",
    "logistic_value_grad",
    "lipschitz_constants",
    "spectral_norm",
    "LOGISTIC_THIRD_DERIVATIVE_BOUND",
]

# max_t |d^3/dt^3 log(1 + exp(-t))| = max |s(1-s)(1-2s)| = 1/(6 sqrt(3))
LOGISTIC_THIRD_DERIVATIVE_BOUND = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class ProblemSpec:
    """Regularity constants of a smooth strongly convex problem.

    Attributes
    ----------
    L : float
        Gradient Lipschitz constant.
    mu : float
        Strong convexity parameter, ``0 < mu <= L``.
    M_hess : float
        Hessian Lipschitz constant (0 for quadratics).
    """

    L: float
    mu: float
    M_hess: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and 0 < self.mu <= self.L):
            raise DomainError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if self.M_hess < 0:
            raise DomainError(f"Hessian Lipschitz constant must be >= 0, got {self.M_hess}")

    @property
    def sigma(self) -> float:
        """Contraction factor ``1 - mu/L`` of the 1/L gradient map."""
        return 1.0 - self.mu / self.L

    @property
    def kappa(self) -> float:
        """Condition number ``L/mu``."""
        return self.L / self.mu

    @property
    def kappa_inv(self) -> float:
        """Bound on ``||(A - I)^{-1}||`` for ``A = I - H/L``; equals ``L/mu``."""
        return self.L / self.mu

    @property
    def gradient_rate(self) -> float:
        """Per-step rate ``sqrt((L-mu)/(L+mu))`` of the gradient method."""
        return math.sqrt((self.L - self.mu) / (self.L + self.mu))


@dataclass
class QuadraticProblem:
    """Quadratic objective with symmetric positive definite ``B``.

    ``form="spd"`` gives ``f(x) = x^T B x / 2 - b^T x``; ``form="lsq"`` gives
    ``f(x) = ||B x - b||^2 / 2``.  Both have the minimizer ``B^{-1} b``.
    """

    B: np.ndarray
    b: np.ndarray
    form: str = "spd"
    x_star: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        n = self.b.size
        if self.B.shape != (n, n):
            raise StructuralError(f"B has shape {self.B.shape}, expected ({n}, {n})")
        if self.form not in ("spd", "lsq"):
            raise DomainError(f"unknown quadratic form {self.form!r}")
        if not np.allclose(self.B, self.B.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.B).max())):
            raise StructuralError("B must be symmetric")
        self.x_star = np.linalg.solve(self.B, self.b)

    @property
    def hessian(self) -> np.ndarray:
        return self.B if self.form == "spd" else self.B.T @ self.B

    def value_grad(self, x):
        return quadratic_value_grad(self, x)

    def value(self, x) -> float:
        return self.value_grad(x)[0]

    def grad(self, x) -> np.ndarray:
        return self.value_grad(x)[1]

    def spec(self) -> ProblemSpec:
        ev = np.linalg.eigvalsh(self.hessian)
        return ProblemSpec(float(ev[-1]), float(ev[0]), 0.0)

    @classmethod
    def random(cls, n: int, cond: float, seed: int = 0, form: str = "spd"):
        """SPD instance with log-spaced eigenvalues in ``[1/cond, 1]``."""
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        ev = np.logspace(0.0, -math.log10(cond), n)
        B = (Q * ev) @ Q.T
        B = 0.5 * (B + B.T)
        return cls(B, rng.standard_normal(n), form=form)


def quadratic_value_grad(problem: QuadraticProblem, x):
    x = np.asarray(x, dtype=float)
    if problem.form == "spd":
        Bx = problem.B @ x
        return 0.5 * x @ Bx - problem.b @ x, Bx - problem.b
    r = problem.B @ x - problem.b
    return 0.5 * r @ r, problem.B.T @ r


@dataclass
class LogisticProblem:
    """l2-regularized logistic regression.

    ``f(w) = sum_i log(1 + exp(-y_i z_i^T w)) + tau/2 ||w||^2``.

    Parameters
    ----------
    Z : ndarray or scipy sparse matrix, shape (m, n)
    y : ndarray of {-1, +1}, shape (m,)
    tau : float
        Penalty, ``> 0``.
    """

    Z: object
    y: np.ndarray
    tau: float

    def __post_init__(self):
        if sp.issparse(self.Z):
            self.Z = sp.csr_matrix(self.Z, dtype=float)
            finite = np.isfinite(self.Z.data).all()
        else:
            self.Z = np.asarray(self.Z, dtype=float)
            finite = np.isfinite(self.Z).all()
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.Z.ndim != 2 or self.Z.shape[0] != self.y.size:
            raise StructuralError(f"Z {self.Z.shape} incompatible with {self.y.size} labels")
        if not finite:
            raise StructuralError("design matrix has non-finite entries")
        if not np.isin(self.y, (-1.0, 1.0)).all():
            raise StructuralError("labels must be in {-1, +1}")
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    def value_grad(self, w):
        return logistic_value_grad(self, w)

    def value(self, w) -> float:
        margins = self.y * (self.Z @ np.asarray(w, dtype=float))
        return float(np.logaddexp(0.0, -margins).sum() + 0.5 * self.tau * (w @ w))

    def grad(self, w) -> np.ndarray:
        return self.value_grad(w)[1]

    def spec(self) -> ProblemSpec:
        return lipschitz_constants(self)


def logistic_value_grad(problem: LogisticProblem, w):
    """Value and gradient, overflow-safe for any margin."""
    w = np.asarray(w, dtype=float)
    margins = problem.y * (problem.Z @ w)
    value = np.logaddexp(0.0, -margins).sum() + 0.5 * problem.tau * (w @ w)
    weights = -problem.y * expit(-margins)
    grad = problem.Z.T @ weights + problem.tau * w
    return float(value), np.asarray(grad).reshape(-1)


def spectral_norm(Z, *, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest singular value of ``Z`` by power iteration on ``Z^T Z``.

    Stops once the residual ``||Z^T Z v - theta v||`` is below ``tol * theta``
    or the Rayleigh quotient stagnates to 1e-14 relative.
    """
    n = Z.shape[1]
    if (Z.count_nonzero() if sp.issparse(Z) else np.count_nonzero(Z)) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    theta = 0.0
    for _ in range(max_iter):
        w = np.asarray(Z.T @ (Z @ v)).reshape(-1)
        theta_new = float(v @ w)
        if theta_new == 0.0:
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        res = np.linalg.norm(w - theta_new * v)
        if res <= tol * theta_new or abs(theta_new - theta) <= 1e-14 * theta_new:
            return math.sqrt(theta_new)
        theta = theta_new
        v = w / np.linalg.norm(w)
    raise EstimationError(f"power iteration did not converge in {max_iter} steps")


def lipschitz_constants(problem: LogisticProblem) -> ProblemSpec:
    """Smoothness, strong convexity and Hessian-Lipschitz bounds.

    ``L = ||Z||^2 / 4 + tau``, ``mu = tau`` and ``M = ||Z||^3 / (6 sqrt 3)``.
    """
    s = spectral_norm(problem.Z)
    if s == 0.0:
        raise DomainError("design matrix is zero")
    return ProblemSpec(
        L=s * s / 4.0 + problem.tau,
        mu=problem.tau,
        M_hess=LOGISTIC_THIRD_DERIVATIVE_BOUND * s**3,
    )
