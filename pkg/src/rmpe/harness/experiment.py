"""Experiment orchestration: reference optimum, method arms and outputs."""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field

import numpy as np

from ..adaptive import AdaptiveConfig, run_accelerated
from ..errors import ConfigError, DivergedError, NumericalError, ReferenceNotConvergedError
from ..objectives import LogisticProblem, QuadraticProblem
from ..optimizers import NesterovState, StepperSpec, gradient_step, nesterov_step
from .data import Dataset, synth_dataset
from .trace import ConvergenceTrace, write_traces_csv

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "parse_method",
    "build_problem",
    "reference_optimum",
    "run_experiment",
    "gnuplot_script",
]

BASE_METHODS = ("gradient", "nesterov", "nesterov_convex")
_METHOD_RE = re.compile(r"^(rmpe|ampe)(?:[(:]?(\d+)\)?)?$")
REFERENCE_MAX_CALLS = 10_000_000


def parse_method(name: str, default_k: int = 5):
    """``"rmpe(10)"``, ``"rmpe:10"``, ``"rmpe10"`` or ``"rmpe"`` -> ``("rmpe", 10)``."""
    name = name.strip().lower()
    if name in BASE_METHODS:
        return name, None
    m = _METHOD_RE.match(name)
    if not m:
        raise ConfigError(f"unknown method {name!r}")
    k = int(m.group(2)) if m.group(2) else default_k
    if not 1 <= k <= 50:
        raise ConfigError(f"window order must lie in [1, 50], got {k}")
    return m.group(1), k


def _label(kind, k):
    return kind if k is None else f"{kind}{k}"


@dataclass
class ExperimentConfig:
    """One comparison of methods on a common problem and oracle budget.

    ``problem`` is ``"logistic"`` (with ``dataset`` or ``synth = (m, n, seed)``)
    or ``"quadratic"`` (with ``quad_n`` and ``quad_cond``).  ``step`` selects
    the base stepper of the extrapolation arms: ``"short"`` for ``1/L``,
    ``"fixed"`` for ``2/(L+mu)``.
    """

    problem: str = "logistic"
    methods: tuple = ("gradient", "nesterov", "rmpe5", "rmpe10")
    budget: int = 1000
    seed: int = 0
    tau: float = 1e-4
    dataset: Dataset | None = None
    synth: tuple = (500, 50, 0)
    separability: float = 30.0
    quad_n: int = 20
    quad_cond: float = 100.0
    k: int = 5
    lambda0: float | None = None
    lambda_min: float | None = None
    step: str = "short"
    timing: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if self.problem not in ("logistic", "quadratic"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.step not in ("short", "fixed"):
            raise ConfigError(f"step must be 'short' or 'fixed', got {self.step!r}")
        self.methods = tuple(self.methods)
        self.arms = [parse_method(m, self.k) for m in self.methods]


@dataclass
class ExperimentResult:
    traces: dict
    f_star: float
    x_star: np.ndarray
    metadata: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)

    def csv(self, path=None, timing=True) -> str:
        return write_traces_csv(self.traces.values(), path, metadata=self.metadata, timing=timing)


def build_problem(cfg: ExperimentConfig):
    if cfg.problem == "quadratic":
        return QuadraticProblem.random(cfg.quad_n, cfg.quad_cond, seed=cfg.seed)
    data = cfg.dataset
    if data is None:
        m, n, s = cfg.synth
        data = synth_dataset(s, m, n, cfg.separability)
    return LogisticProblem(data.Z, data.y, cfg.tau)


def reference_optimum(problem, tol: float = 1e-13, *, max_calls: int = REFERENCE_MAX_CALLS, spec=None):
    """High accuracy minimizer by Nesterov's method with constant momentum.

    Runs until ``||grad f|| <= tol * max(1, ||grad f(0)||)``.

    Returns
    -------
    x_star : ndarray
    f_star : float

    Raises
    ------
    ReferenceNotConvergedError
        If ``max_calls`` gradient evaluations do not reach the tolerance.
    """
    spec = spec or problem.spec()
    n = problem.n if hasattr(problem, "n") else problem.b.size
    x0 = np.zeros(n)
    g0 = np.linalg.norm(problem.grad(x0))
    target = tol * max(1.0, g0)
    stepper = StepperSpec("nesterov_strong", spec.L, spec.mu)
    state = NesterovState.start(x0)
    best_x, best_g = x0, g0
    for _ in range(max_calls):
        g = problem.grad(state.y)
        gn = np.linalg.norm(g)
        if gn < best_g:
            best_x, best_g = state.y, gn
        if gn <= target:
            return state.y.copy(), float(problem.value(state.y))
        state = nesterov_step(state, lambda _y: g, stepper)
    raise ReferenceNotConvergedError(
        f"gradient norm {best_g:.3e} above target {target:.3e} after {max_calls} calls"
    )


def _base_arm(kind, problem, spec, x0, budget, f_star, x_star, timing):
    trace = ConvergenceTrace(kind)
    t0 = time.perf_counter_ns()

    def record(x, calls):
        wall = time.perf_counter_ns() - t0 if timing else 0
        trace.add(calls, problem.value(x) - f_star, np.linalg.norm(x - x_star), wall, "start" if calls == 0 else "step")

    record(x0, 0)
    try:
        if kind == "gradient":
            st = StepperSpec("gradient_fixed", spec.L, spec.mu)
            x = x0
            for i in range(1, budget + 1):
                x = gradient_step(x, problem.grad, st)
                record(x, i)
        else:
            st = StepperSpec("nesterov_strong" if kind == "nesterov" else "nesterov_convex", spec.L, spec.mu)
            state = NesterovState.start(x0)
            for i in range(1, budget + 1):
                state = nesterov_step(state, problem.grad, st)
                record(state.x, i)
    except DivergedError as exc:
        trace.diverged = True
        trace.note = str(exc)
    return trace, None


def _extrapolation_arm(kind, k, cfg, problem, spec, x0, f_star, x_star):
    st = StepperSpec("gradient_short" if cfg.step == "short" else "gradient_fixed", spec.L, spec.mu)

    def stepper(x):
        return gradient_step(x, problem.grad, st)

    if kind == "rmpe":
        acfg = AdaptiveConfig(k, cfg.lambda0, cfg.lambda_min)
    else:
        # unguarded normal-equation solve, as in the reference algorithm
        acfg = AdaptiveConfig(k, fixed_lambda=0.0, safeguard=False, solver="normal", pivot_tol=0.0)
    label = _label(kind, k)
    try:
        run = run_accelerated(
            stepper, x0, problem.value, acfg, cfg.budget,
            f_star=f_star, x_star=x_star, method=label, timing=cfg.timing,
        )
    except DivergedError as exc:
        trace = exc.trace if exc.trace is not None else ConvergenceTrace(label)
        trace.method = label
        trace.diverged = True
        trace.note = str(exc)
        return trace, None
    except NumericalError as exc:
        # the unregularized arm may hit a rank-deficient window; keep what ran
        trace = getattr(exc, "trace", None) or ConvergenceTrace(label)
        trace.diverged = True
        trace.note = f"{type(exc).__name__}: {exc}"
        return trace, None
    return run.trace, run


def run_experiment(cfg: ExperimentConfig, *, reference=None) -> ExperimentResult:
    """Run every configured method for ``cfg.budget`` oracle calls from ``x = 0``.

    ``reference`` may supply a precomputed ``(x_star, f_star)``.
    """
    problem = build_problem(cfg)
    spec = problem.spec()
    x_star, f_star = reference if reference is not None else reference_optimum(problem, spec=spec)
    x0 = np.zeros_like(x_star)
    traces, runs = {}, {}
    for kind, k in cfg.arms:
        if kind in BASE_METHODS:
            trace, run = _base_arm(kind, problem, spec, x0, cfg.budget, f_star, x_star, cfg.timing)
        else:
            trace, run = _extrapolation_arm(kind, k, cfg, problem, spec, x0, f_star, x_star)
        traces[trace.method] = trace
        runs[trace.method] = run
    diverged = [name for name, t in traces.items() if t.diverged]
    metadata = {
        "problem": cfg.problem,
        "budget": cfg.budget,
        "seed": cfg.seed,
        "L": repr(spec.L),
        "mu": repr(spec.mu),
        "f_star": repr(f_star),
        "extrapolation_base_step": "1/L" if cfg.step == "short" else "2/(L+mu)",
        "gradient_step": "2/(L+mu)",
        "diverged": ",".join(diverged) if diverged else "none",
    }
    result = ExperimentResult(traces, f_star, x_star, metadata, runs)
    if cfg.out:
        result.csv(cfg.out, timing=cfg.timing)
    return result


def gnuplot_script(csv_path, methods, png_path=None) -> str:
    """A gnuplot script drawing ``f_gap`` against oracle calls on a log scale."""
    png_path = png_path or str(csv_path).rsplit(".", 1)[0] + ".png"
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{png_path}'",
        "set logscale y",
        "set xlabel 'gradient oracle calls'",
        "set ylabel 'f(x) - f*'",
        "set key top right",
    ]
    plots = [
        f"'{csv_path}' using (strcol(1) eq '{m}' ? $2 : 1/0):3 with lines title '{m}'"
        for m in methods
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
