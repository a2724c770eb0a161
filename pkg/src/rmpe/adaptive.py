"""Dichotomy search for the regularization and the restarted accelerated loop."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import AllCandidatesInvalidError, ConfigError, DivergedError, NumericalError
from .extrapolation import PIVOT_TOL, Coefficients, IterateWindow, _as_iterates, rmpe_coefficients
from .harness.trace import ConvergenceTrace

__all__ = [
    "AdaptiveConfig",
    "LambdaSearch",
    "AcceleratedRun",
    "adaptive_lambda",
    "default_lambda0",
    "run_accelerated",
]

FLOOR_RATIO = 1e-12


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of the regularization search and restart loop.

    ``lambda0=None`` means ``||U^T U||_F / (k+1)`` of the current window and
    ``lambda_min=None`` means ``1e-12 * lambda0``.  ``fixed_lambda`` skips the
    search altogether (``0`` gives the unregularized variant); ``safeguard``
    falls back to the best raw iterate when every candidate is worse.
    ``solver`` and ``pivot_tol`` are passed to :func:`rmpe_coefficients`
    for ``lam == 0``.
    """

    k: int
    lambda0: float | None = None
    lambda_min: float | None = None
    shrink: float = 0.5
    restart: bool = True
    fixed_lambda: float | None = None
    safeguard: bool = True
    solver: str = "qr"
    pivot_tol: float = PIVOT_TOL

    def __post_init__(self):
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")
        if not 0.0 < self.shrink < 1.0:
            raise ConfigError(f"shrink must lie in (0, 1), got {self.shrink}")
        for name in ("lambda0", "lambda_min"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.lambda0 is not None and self.lambda_min is not None and self.lambda_min > self.lambda0:
            raise ConfigError(f"lambda_min={self.lambda_min} exceeds lambda0={self.lambda0}")
        if self.fixed_lambda is not None and not self.fixed_lambda >= 0:
            raise ConfigError(f"fixed_lambda must be non-negative, got {self.fixed_lambda}")


class LambdaSearch(NamedTuple):
    """Outcome of :func:`adaptive_lambda`."""

    coefficients: Coefficients
    point: np.ndarray
    value: float
    n_calls: int


def default_lambda0(U) -> float:
    G = U.T @ U
    return float(np.linalg.norm(G, "fro") / U.shape[1])


def _candidate(X, U, lam):
    try:
        coef = rmpe_coefficients(U, lam)
    except NumericalError:
        return None
    return coef, coef.c @ X[:-1]


def adaptive_lambda(window, f_oracle, cfg: AdaptiveConfig) -> LambdaSearch:
    """Pick ``lam`` by halving from ``lambda0`` while ``f`` keeps decreasing.

    Each candidate costs one call of ``f_oracle``; no gradient is used.  The
    search stops at the first increase, at the first non-finite value or
    once ``lam`` drops below ``lambda_min``, and returns the best candidate.

    Raises
    ------
    AllCandidatesInvalidError
        If no candidate produced a finite objective value.
    """
    X = _as_iterates(window)
    U = np.diff(X, axis=0).T
    lam0 = cfg.lambda0 if cfg.lambda0 is not None else default_lambda0(U)
    if lam0 == 0.0:
        # all increments vanish: every weight vector returns the same point
        coef = Coefficients(np.full(U.shape[1], 1.0 / U.shape[1]), 0.0)
        point = X[0].copy()
        return LambdaSearch(coef, point, float(f_oracle(point)), 1)
    lam_min = cfg.lambda_min if cfg.lambda_min is not None else FLOOR_RATIO * lam0
    best = None
    calls = 0
    lam = lam0
    while True:
        cand = _candidate(X, U, lam)
        if cand is None:
            break
        calls += 1
        value = float(f_oracle(cand[1]))
        if not math.isfinite(value):
            break
        if best is not None and value > best.value:
            break
        best = LambdaSearch(cand[0], cand[1], value, calls)
        if lam < lam_min:
            break
        lam *= cfg.shrink
    if best is None:
        raise AllCandidatesInvalidError(f"no finite objective among candidates from lambda0={lam0:.3e}")
    return best._replace(n_calls=calls)


@dataclass
class AcceleratedRun:
    """Trace of a restarted run and the regularization accepted per cycle.

    ``chosen_lambdas`` holds ``nan`` for cycles where the safeguard kept the
    best raw iterate.
    """

    trace: ConvergenceTrace
    chosen_lambdas: list = field(default_factory=list)
    f_calls: list = field(default_factory=list)
    fallbacks: int = 0


def run_accelerated(
    stepper,
    x0,
    f_oracle,
    cfg: AdaptiveConfig,
    budget: int,
    *,
    f_star: float = 0.0,
    x_star=None,
    method: str = "rmpe",
    timing: bool = True,
) -> AcceleratedRun:
    """Run ``k + 1`` base steps, extrapolate, restart; repeat until ``budget``.

    ``stepper`` is the one-step map ``x -> g(x)`` and each call counts as one
    oracle call.  A record is added after every step and every
    extrapolation.  Objective values used for the trace and the safeguard
    are monitoring evaluations and do not count toward the search calls in
    ``f_calls``.  A final incomplete cycle is not extrapolated.

    Raises
    ------
    DivergedError
        If the stepper yields a non-finite vector; ``exc.trace`` holds the
        records up to that point.
    NumericalError
        From an unguarded extrapolation, also with ``exc.trace`` attached.
    """
    if budget < 0:
        raise ConfigError(f"budget must be non-negative, got {budget}")
    x = np.array(x0, dtype=float)
    trace = ConvergenceTrace(method)
    run = AcceleratedRun(trace)
    t0 = time.perf_counter_ns()

    def record(point, value, calls, kind):
        dist = float(np.linalg.norm(point - x_star)) if x_star is not None else math.nan
        wall = time.perf_counter_ns() - t0 if timing else 0
        trace.add(calls, value - f_star, dist, wall, kind)

    calls = 0
    fx = float(f_oracle(x))
    record(x, fx, 0, "start")
    while calls < budget:
        window = IterateWindow(cfg.k)
        window.push(x)
        raw = [(fx, x)]
        for _ in range(cfg.k + 1):
            if calls >= budget:
                break
            try:
                x = np.asarray(stepper(x), dtype=float)
            except DivergedError as exc:
                trace.diverged = True
                raise DivergedError(str(exc), trace) from exc
            calls += 1
            if not np.all(np.isfinite(x)):
                trace.diverged = True
                raise DivergedError(f"base method produced non-finite iterate at call {calls}", trace)
            fx = float(f_oracle(x))
            record(x, fx, calls, "step")
            window.push(x)
            raw.append((fx, x))
        if not window.full:
            break
        try:
            point, value, lam = _extrapolate_cycle(window, f_oracle, cfg, run)
        except NumericalError as exc:
            exc.trace = trace
            raise
        best_raw = min(raw, key=lambda r: r[0])
        if cfg.safeguard and not value <= best_raw[0]:
            point, value, lam = best_raw[1], best_raw[0], math.nan
            run.fallbacks += 1
        run.chosen_lambdas.append(lam)
        record(point, value, calls, "extrapolation")
        if cfg.restart:
            x, fx = point, value
    return run


def _extrapolate_cycle(window, f_oracle, cfg, run):
    if cfg.fixed_lambda is not None:
        X = window.iterates
        try:
            coef = rmpe_coefficients(
                np.diff(X, axis=0).T, cfg.fixed_lambda, solver=cfg.solver, pivot_tol=cfg.pivot_tol
            )
        except NumericalError:
            if not cfg.safeguard:
                raise
            run.f_calls.append(0)
            return X[-1], math.inf, cfg.fixed_lambda
        point = coef.c @ X[:-1]
        value = float(f_oracle(point))
        run.f_calls.append(1)
        return point, value if math.isfinite(value) else math.inf, cfg.fixed_lambda
    try:
        res = adaptive_lambda(window, f_oracle, cfg)
    except AllCandidatesInvalidError:
        if not cfg.safeguard:
            raise
        run.f_calls.append(0)
        return window.iterates[-1], math.inf, math.nan
    run.f_calls.append(res.n_calls)
    return res.point, res.value, res.coefficients.lam
