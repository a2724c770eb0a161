"""Baseline first-order methods and their polynomial analysis.

Includes the fixed-step gradient method, Nesterov's accelerated gradient
(strongly convex and convex momentum schedules), the Chebyshev
semi-iterative method for quadratics and the polynomials ``N_k`` generated
by Nesterov's recurrence on quadratics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .errors import DivergedError, DomainError, InvalidSpectrumError

__all__ = [
    "StepperSpec",
    "NesterovState",
    "ChebyshevState",
    "PolynomialCoeffs",
    "gradient_step",
    "nesterov_step",
    "nesterov_momentum",
    "chebyshev_step",
    "chebyshev_run",
    "chebyshev_polynomial",
    "nesterov_polynomial",
    "nesterov_eval",
    "nesterov_conjecture_probe",
]

KINDS = ("gradient_fixed", "gradient_short", "nesterov_strong", "nesterov_convex", "chebyshev")


@dataclass(frozen=True)
class StepperSpec:
    """Which base method to run and the constants it relies on."""

    kind: str
    L: float
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown stepper kind {self.kind!r}; expected one of {KINDS}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        if not 0 <= self.mu <= self.L:
            raise DomainError(f"need 0 <= mu <= L, got mu={self.mu}")
        if self.mu == 0 and self.kind not in ("nesterov_convex", "gradient_short"):
            raise DomainError(f"{self.kind} requires mu > 0")

    @property
    def step_size(self) -> float:
        if self.kind == "gradient_fixed":
            return 2.0 / (self.L + self.mu)
        return 1.0 / self.L


def _checked_grad(grad_oracle, x):
    g = np.asarray(grad_oracle(x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise DivergedError("gradient oracle returned non-finite values")
    return g


def gradient_step(x, grad_oracle, spec: StepperSpec) -> np.ndarray:
    """One step ``x - h grad(x)`` with ``h = 2/(L+mu)`` or ``1/L``."""
    if spec.kind not in ("gradient_fixed", "gradient_short"):
        raise DomainError(f"gradient_step needs a gradient kind, got {spec.kind!r}")
    x = np.asarray(x, dtype=float)
    return x - spec.step_size * _checked_grad(grad_oracle, x)


@dataclass(frozen=True)
class NesterovState:
    """Current iterate ``x``, extrapolated point ``y`` and momentum counter ``t``."""

    x: np.ndarray
    y: np.ndarray
    t: float = 1.0

    @classmethod
    def start(cls, x0) -> "NesterovState":
        x0 = np.array(x0, dtype=float)
        return cls(x0, x0.copy(), 1.0)


def nesterov_momentum(L: float, mu: float) -> float:
    """Constant momentum ``(sqrt L - sqrt mu) / (sqrt L + sqrt mu)``."""
    sl, sm = math.sqrt(L), math.sqrt(mu)
    return (sl - sm) / (sl + sm)


def nesterov_step(state: NesterovState, grad_oracle, spec: StepperSpec) -> NesterovState:
    """Advance Nesterov's method by one gradient call.

    ``x+ = y - grad(y)/L`` then ``y+ = x+ + beta (x+ - x)``.  The strongly
    convex variant uses the constant momentum of :func:`nesterov_momentum`;
    the convex variant uses ``t+ = (1 + sqrt(1 + 4 t^2)) / 2`` and
    ``beta = (t - 1) / t+``, starting from ``t = 1``.
    """
    if spec.kind == "nesterov_strong":
        beta = nesterov_momentum(spec.L, spec.mu)
        t_next = state.t
    elif spec.kind == "nesterov_convex":
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t * state.t))
        beta = (state.t - 1.0) / t_next
    else:
        raise DomainError(f"nesterov_step needs a Nesterov kind, got {spec.kind!r}")
    x_new = state.y - _checked_grad(grad_oracle, state.y) / spec.L
    y_new = x_new + beta * (x_new - state.x)
    return NesterovState(x_new, y_new, t_next)


@dataclass(frozen=True)
class ChebyshevState:
    """Two most recent iterates of the semi-iterative method.

    ``rho`` is the ratio ``alpha_{j-1} / alpha_j`` of consecutive
    normalizations ``alpha_j = C_j(t(1))``; storing the ratio instead of the
    exponentially growing ``alpha_j`` keeps long runs finite.
    """

    y_prev: np.ndarray
    y_prev2: np.ndarray | None
    rho: float
    sigma: float
    index: int = 0


def _sigma_from(L, mu):
    if not (L > 0 and mu > 0):
        raise InvalidSpectrumError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    sigma = 1.0 - mu / L
    if not 0.0 <= sigma < 1.0:
        raise InvalidSpectrumError(f"sigma = 1 - mu/L = {sigma} must lie in [0, 1)")
    return sigma


def chebyshev_step(state: ChebyshevState, grad_oracle, L: float) -> ChebyshevState:
    """One iteration of the two-term Chebyshev recurrence.

    With ``t(x) = (2x - sigma)/sigma`` and ``z = y - grad(y)/L``::

        y_1 = (2 z_0 / sigma - y_0) / t(1)
        y_j = 2 rho_j (2 z_{j-1} / sigma - y_{j-1}) - rho_j rho_{j-1} y_{j-2}
        rho_j = 1 / (2 t(1) - rho_{j-1})
    """
    sigma = state.sigma
    y = state.y_prev
    z = y - _checked_grad(grad_oracle, y) / L
    if sigma == 0.0:
        return ChebyshevState(z, y, 0.0, sigma, state.index + 1)
    t1 = (2.0 - sigma) / sigma
    w = 2.0 * z / sigma - y
    if state.index == 0:
        rho = 1.0 / t1
        y_new = rho * w
    else:
        rho = 1.0 / (2.0 * t1 - state.rho)
        y_new = 2.0 * rho * w - rho * state.rho * state.y_prev2
    return ChebyshevState(y_new, y, rho, sigma, state.index + 1)


def chebyshev_run(B, b, x0, k: int, *, L: float | None = None, mu: float | None = None) -> np.ndarray:
    """Run ``k`` Chebyshev iterations on ``B x = b``.

    Minimizes ``x^T B x / 2 - b^T x`` for symmetric positive definite ``B``
    with ``mu I <= B <= L I``; missing bounds are taken from the spectrum.
    Returns the ``(k + 1, n)`` array ``y_0, ..., y_k``, where
    ``y_j - x* = T_j(A) (y_0 - x*)`` with ``A = I - B/L``.
    """
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    if L is None or mu is None:
        ev = np.linalg.eigvalsh(B)
        L = float(ev[-1]) if L is None else L
        mu = float(ev[0]) if mu is None else mu
    sigma = _sigma_from(L, mu)
    state = ChebyshevState(np.array(x0, dtype=float), None, 0.0, sigma)

    def grad(y):
        return B @ y - b

    ys = [state.y_prev]
    for _ in range(k):
        state = chebyshev_step(state, grad, L)
        ys.append(state.y_prev)
    return np.stack(ys)


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Dense monomial coefficients, lowest degree first."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        # Horner
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a in self.coeffs[::-1]:
            out = out * x + a
        return out


def chebyshev_polynomial(k: int, sigma: float) -> PolynomialCoeffs:
    """Rescaled Chebyshev polynomial ``C_k(t(x)) / C_k(t(1))`` on ``[0, sigma]``."""
    if not 0.0 < sigma < 1.0:
        raise DomainError(f"sigma must lie in (0, 1), got {sigma}")
    p = Chebyshev.basis(k, domain=[0.0, sigma]).convert(kind=Polynomial)
    coeffs = np.zeros(k + 1)
    coeffs[: p.coef.size] = p.coef
    return PolynomialCoeffs(coeffs / p(1.0))


def _betas(k, beta_sequence):
    if np.ndim(beta_sequence) == 0:
        return np.full(max(k - 1, 0), float(beta_sequence))
    betas = np.asarray(beta_sequence, dtype=float)
    if betas.size < k - 1:
        raise DomainError(f"need {k - 1} momentum values (beta_2..beta_k), got {betas.size}")
    return betas


def nesterov_polynomial(k: int, beta_sequence) -> PolynomialCoeffs:
    """Coefficients of ``N_k`` from ``N_j = x((1+b_j) N_{j-1} - b_j N_{j-2})``.

    ``N_0 = 1`` and ``N_1 = x``.  ``beta_sequence`` is either a constant or
    the values ``beta_2, ..., beta_k`` in order.  Degrees above 1000 are
    refused.  The monomial coefficients grow geometrically when ``beta`` is
    close to 1 and their sum loses all accuracy by ``k ~ 50``; use
    :func:`nesterov_eval` to evaluate ``N_k`` itself.
    """
    if k < 0:
        raise DomainError(f"degree must be non-negative, got {k}")
    if k > 1000:
        raise DomainError("degree above 1000 overflows the monomial representation")
    betas = _betas(k, beta_sequence)
    prev2 = np.zeros(k + 1)
    prev2[0] = 1.0
    if k == 0:
        return PolynomialCoeffs(prev2)
    prev = np.zeros(k + 1)
    prev[1] = 1.0
    for j in range(2, k + 1):
        beta = betas[j - 2]
        inner = (1.0 + beta) * prev - beta * prev2
        cur = np.zeros(k + 1)
        cur[1:] = inner[:-1]
        prev2, prev = prev, cur
    return PolynomialCoeffs(prev)


def nesterov_eval(x, k: int, beta_sequence) -> np.ndarray:
    """Evaluate ``N_k(x)`` through the three-term recurrence."""
    if k < 0:
        raise DomainError(f"degree must be non-negative, got {k}")
    x = np.asarray(x, dtype=float)
    betas = _betas(k, beta_sequence)
    prev2 = np.ones_like(x)
    if k == 0:
        return prev2
    prev = x.copy()
    for j in range(2, k + 1):
        beta = betas[j - 2]
        prev2, prev = prev, x * ((1.0 + beta) * prev - beta * prev2)
    return prev


def nesterov_conjecture_probe(sigma: float, beta: float, k_max: int = 30, grid_size: int = 1000):
    """Check that ``max_{[0, sigma]} |N_k|`` is attained at ``sigma``.

    Returns a list of counterexamples ``(k, x_argmax, |N_k(x_argmax)|, |N_k(sigma)|)``;
    an empty list means the probe passed for every ``k <= k_max``.
    """
    x = np.linspace(0.0, sigma, grid_size)
    failures = []
    for k in range(k_max + 1):
        vals = np.abs(nesterov_eval(x, k, beta))
        at_sigma = vals[-1]
        i = int(np.argmax(vals))
        if vals[i] > at_sigma * (1.0 + 1e-12):
            failures.append((k, float(x[i]), float(vals[i]), float(at_sigma)))
    return failures
