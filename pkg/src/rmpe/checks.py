"""Acceptance checks shared by the test suite and ``rmpe selftest``.

Each ``check_*`` function runs one criterion and returns a :class:`CheckResult`
whose ``detail`` carries the measured quantities.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bounds import (
    BoundInputs,
    asymptotic_constant,
    cheby_rate,
    gradient_model_bounds,
    rmpe_bound,
    s_k_alpha,
    speedup_curve,
)
from .extrapolation import (
    LinearModel,
    OnlineExtrapolator,
    extrapolate,
    perturbation_shift,
    rmpe_coefficients,
)
from .objectives import LogisticProblem, ProblemSpec
from .optimizers import (
    chebyshev_run,
    nesterov_conjecture_probe,
    nesterov_eval,
    nesterov_momentum,
)

__all__ = ["CheckResult", "CHECKS", "run_all"]

# L, mu, M, d0 of the bound-curve reconstruction
CURVE_SPEC = ProblemSpec(100.0, 10.0, 0.1)
CURVE_D0 = 1e-4
# end-to-end protocol
E2E_SIZE = (500, 50)
E2E_TAU = 1e-4
E2E_BUDGET = 2000
E2E_SEEDS = range(5)
E2E_K = 10


@dataclass
class CheckResult:
    number: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        t = f"{self.seconds:.2f}s" + (f" (limit {self.limit:g}s)" if self.limit else "")
        return f"[{status}] {self.number:>3} {self.name}: {self.detail} [{t}]"


def _timed(number, name, limit=None):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            if limit is not None and dt >= limit:
                ok, detail = False, f"{detail}; runtime {dt:.2f}s over {limit}s"
            return CheckResult(number, name, bool(ok), detail, dt, limit)

        run.__name__ = fn.__name__
        run.number = number
        return run

    return wrap


def _symmetric(rng, n, lo, hi):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = rng.uniform(lo, hi, n)
    A = (Q * ev) @ Q.T
    return 0.5 * (A + A.T), ev


@_timed("1", "exact recovery, window n+2, lambda=0", limit=1.0)
def check_exact_recovery():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 11))
        A, _ = _symmetric(rng, n, 0.0, 0.9)
        model = LinearModel(A, rng.standard_normal(n))
        x0 = rng.standard_normal(n)
        X = model.iterate(x0, n + 1)
        err = np.linalg.norm(extrapolate(X, 0.0) - model.fixed_point)
        worst = max(worst, err / np.linalg.norm(x0 - model.fixed_point))
    return worst <= 1e-8, f"max relative error {worst:.2e} (tol 1e-8) over 50 models"


@_timed("2", "extrapolation error within Chebyshev bound", limit=5.0)
def check_chebyshev_bound():
    rng = np.random.default_rng(2)
    worst = -math.inf
    n = 30
    for _ in range(20):
        A, ev = _symmetric(rng, n, 0.0, 0.95)
        sigma = float(ev.max())
        kappa = (1.0 - ev.min()) / (1.0 - sigma)
        model = LinearModel(A, rng.standard_normal(n))
        x0 = rng.standard_normal(n)
        d0 = np.linalg.norm(x0 - model.fixed_point)
        for k in range(1, 9):
            X = model.iterate(x0, k + 1)
            err = np.linalg.norm(extrapolate(X, 0.0) - model.fixed_point)
            bound = kappa * cheby_rate(k, sigma) * d0 + 1e-8
            worst = max(worst, err - bound)
    return worst <= 0.0, f"max(error - bound) = {worst:.2e} over k=1..8, 20 models"


@_timed("3", "weight norm and perturbation bounds", limit=10.0)
def check_perturbation_bounds():
    rng = np.random.default_rng(3)
    worst_c = worst_dc = worst_formula = -math.inf
    for _ in range(1000):
        n = int(rng.integers(2, 20))
        k1 = int(rng.integers(1, 8))
        U = rng.standard_normal((n, k1)) * 10.0 ** rng.uniform(-3, 1)
        E = rng.standard_normal((n, k1)) * np.linalg.norm(U, 2) * 10.0 ** rng.uniform(-6, -1)
        lam = np.linalg.norm(U, 2) ** 2 * 10.0 ** rng.uniform(-3, 0)
        c = rmpe_coefficients(U, lam).c
        bound_c = math.sqrt((lam + np.linalg.norm(U, 2) ** 2) / (k1 * lam))
        worst_c = max(worst_c, np.linalg.norm(c) / bound_c - 1.0)
        Ut = U + E
        P = Ut.T @ Ut - U.T @ U
        dc = perturbation_shift(U, E, lam)
        direct = rmpe_coefficients(Ut, lam).c - c
        worst_formula = max(worst_formula, np.linalg.norm(dc - direct))
        bound_dc = np.linalg.norm(P, 2) / lam * np.linalg.norm(c)
        worst_dc = max(worst_dc, np.linalg.norm(dc) - bound_dc * (1 + 1e-12))
    ok = worst_c <= 1e-12 and worst_dc <= 0.0 and worst_formula <= 1e-9
    return ok, (
        f"max ||c||/bound - 1 = {worst_c:.2e}; max ||dc|| - bound = {worst_dc:.2e}; "
        f"formula vs re-solve {worst_formula:.2e} (tol 1e-9) over 1000 draws"
    )


@_timed("4", "online Cholesky weights equal batch weights")
def check_online_batch():
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in (2, 10, 100):
        for k in range(1, 16):
            X = rng.standard_normal((k + 2, n))
            U = np.diff(X, axis=0).T
            lam = 0.1 * np.mean(np.sum(U * U, axis=0))
            online = OnlineExtrapolator(k, lam)
            for x in X:
                online.push(x)
            c_online = online.coefficients().c
            c_batch = rmpe_coefficients(U, lam).c
            worst = max(worst, np.abs(c_online - c_batch).max())
    return worst <= 1e-10, f"max |c_online - c_batch| = {worst:.2e} (tol 1e-10), k<=15, n in (2,10,100)"


def _cheb_closed_form(k, t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) <= 1.0
    out = np.empty_like(t)
    out[inside] = np.cos(k * np.arccos(t[inside]))
    ts = t[~inside]
    out[~inside] = np.sign(ts) ** k * np.cosh(k * np.arccosh(np.abs(ts)))
    return out


@_timed("5", "Chebyshev recurrence and rate")
def check_chebyshev_method():
    rng = np.random.default_rng(5)
    worst_rec = 0.0
    worst_rate = -math.inf
    n = 12
    for _ in range(20):
        ev = np.linspace(1.0, 1e3, n) * 10.0 ** rng.uniform(-2, 0)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        B = (Q * ev) @ Q.T
        B = 0.5 * (B + B.T)
        b = rng.standard_normal(n)
        x_star = np.linalg.solve(B, b)
        L, mu = ev.max(), ev.min()
        sigma = 1.0 - mu / L
        Y = chebyshev_run(B, b, np.zeros(n), 12, L=L, mu=mu)
        e0 = -x_star
        d0 = np.linalg.norm(e0)
        a = 1.0 - ev / L
        for k in range(13):
            vals = _cheb_closed_form(k, (2.0 * a - sigma) / sigma) / _cheb_closed_form(k, (2.0 - sigma) / sigma)
            direct = Q @ (vals * (Q.T @ e0))
            err = Y[k] - x_star
            worst_rec = max(worst_rec, np.linalg.norm(err - direct) / d0)
            worst_rate = max(worst_rate, np.linalg.norm(err) / (cheby_rate(k, sigma) * d0) - 1.0)
    ok = worst_rec <= 1e-9 and worst_rate <= 1e-9
    return ok, f"recurrence vs T_k(A) {worst_rec:.2e} (tol 1e-9); max error/rate - 1 = {worst_rate:.2e}"


@_timed("6", "momentum identity, N_k(1) = 1, maximum at sigma")
def check_nesterov():
    rng = np.random.default_rng(6)
    worst_id = worst_one = 0.0
    for q in 10.0 ** rng.uniform(-6, 0, 100):
        sigma = 1.0 - q
        beta = nesterov_momentum(1.0, q)
        r = 1.0 - math.sqrt(q)
        worst_id = max(worst_id, abs(sigma * ((1 + beta) * r - beta) - r * r))
        for k in range(51):
            worst_one = max(worst_one, abs(float(nesterov_eval(1.0, k, beta)) - 1.0))
    counter = []
    for q in (1e-4, 1e-2, 0.1, 0.5):
        counter += nesterov_conjecture_probe(1.0 - q, nesterov_momentum(1.0, q), 30, 1000)
    ok = worst_id <= 1e-12 and worst_one <= 1e-12
    return ok, (
        f"identity residual {worst_id:.1e}; max |N_k(1)-1| {worst_one:.1e}; "
        f"probe counterexamples {len(counter)}"
        + (f" first {counter[0]}" if counter else "")
    )


@_timed("7", "regularized Chebyshev value S(k, alpha)")
def check_s_k_alpha():
    msgs = []
    worst_cheb = -math.inf
    for sigma in (0.5, 0.9, 0.99):
        for k in range(21):
            s = s_k_alpha(k, sigma, 0.0).value
            worst_cheb = max(worst_cheb, math.sqrt(s) - cheby_rate(k, sigma))
    msgs.append(f"max sqrt(S(k,0)) - rate {worst_cheb:.2e}")
    rtol = 1e-7
    worst_k = -math.inf
    for alpha in (0.0, 1e-8, 1e-4, 1e-1):
        vals = [s_k_alpha(k, 0.9, alpha).value for k in range(21)]
        worst_k = max(worst_k, max(b / a - 1.0 for a, b in zip(vals, vals[1:]) if a > 0))
    alphas = np.concatenate([[0.0], np.logspace(-12, 1, 49)])
    worst_a = -math.inf
    for k in (3, 10):
        vals = [s_k_alpha(k, 0.9, a).value for a in alphas]
        worst_a = max(worst_a, max(1.0 - b / a for a, b in zip(vals, vals[1:])))
    exact = all(s_k_alpha(0, 0.9, a).value == 1.0 + a for a in (0.0, 1e-3, 0.5, 7.0))
    msgs.append(f"max rise in k {worst_k:.1e}, max drop in alpha {worst_a:.1e} (rtol {rtol:g})")
    msgs.append(f"k=0 closed form exact: {exact}")
    ok = worst_cheb <= 0.0 and worst_k <= rtol and worst_a <= rtol and exact
    return ok, "; ".join(msgs)


@_timed("8", "speedup curve exceeds 1 on a contiguous k-range", limit=30.0)
def check_speedup():
    curve = speedup_curve(CURVE_SPEC, CURVE_D0, range(1, 31))
    ks = [k for k, s in curve if s > 1.0]
    contiguous = bool(ks) and ks == list(range(ks[0], ks[-1] + 1))
    peak = max(curve, key=lambda t: t[1])
    span = f"k in [{ks[0]}, {ks[-1]}]" if ks else "empty"
    return contiguous, f"speedup > 1 for {span}; peak {peak[1]:.3f} at k={peak[0]}"


def _asymptotic_ratios(beta=1.0, ks=(1, 2, 3, 5), d0=1e-8):
    spec = CURVE_SPEC
    out = []
    for k in ks:
        norms = gradient_model_bounds(spec, d0, k)
        bound = rmpe_bound(BoundInputs(spec, d0, k, beta * norms.P_norm))
        base = asymptotic_constant(beta) * spec.kappa_inv * d0
        out.append((k, bound / (base * cheby_rate(k, spec.sigma)), bound / (base * math.sqrt(s_k_alpha(k, spec.sigma, 0.0).value))))
    return out


@_timed("9", "bound ratio tends to C(beta) kappa cheby_rate (stated form)")
def check_asymptotic_stated():
    rows = _asymptotic_ratios()
    worst = max(abs(r - 1.0) for _, r, _ in rows)
    detail = ", ".join(f"k={k}: {r:.3f}" for k, r, _ in rows)
    return worst <= 0.05, f"ratio to C kappa rate at d0=1e-8: {detail} (tol 5%)"


@_timed("9b", "bound ratio tends to C(beta) kappa sqrt(S(k,0)) and stays below the stated form")
def check_asymptotic_limit():
    rows = _asymptotic_ratios()
    worst = max(abs(s - 1.0) for _, _, s in rows)
    below = all(r <= 1.0 for _, r, _ in rows)
    detail = ", ".join(f"k={k}: {s:.4f}" for k, _, s in rows)
    return worst <= 0.05 and below, f"ratio to C kappa sqrt(S(k,0)) at d0=1e-8: {detail}; below stated form: {below}"


@lru_cache(maxsize=None)
def _e2e_runs():
    from .harness.data import synth_dataset
    from .harness.experiment import ExperimentConfig, reference_optimum, run_experiment

    results = []
    m, n = E2E_SIZE
    for seed in E2E_SEEDS:
        data = synth_dataset(seed, m, n)
        problem = LogisticProblem(data.Z, data.y, E2E_TAU)
        cfg = ExperimentConfig(
            methods=("gradient", "nesterov", f"rmpe{E2E_K}", f"ampe{E2E_K}"),
            budget=E2E_BUDGET,
            dataset=data,
            tau=E2E_TAU,
            timing=False,
        )
        ref = reference_optimum(problem)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results.append(run_experiment(cfg, reference=ref))
    return results


@_timed("10", "end-to-end acceleration on synthetic logistic regression", limit=60.0)
def check_end_to_end():
    ratios, vs_nest = [], []
    for res in _e2e_runs():
        g = {name: t.final_gap for name, t in res.traces.items()}
        r = g[f"rmpe{E2E_K}"]
        ratios.append(g["gradient"] / r if r > 0 else math.inf)
        vs_nest.append(r / g["nesterov"] if g["nesterov"] > 0 else (0.0 if r <= 0 else math.inf))
    med_ratio = float(np.median(ratios))
    med_nest = float(np.median(vs_nest))
    ok = med_ratio >= 10.0 and med_nest <= 1.0
    return ok, (
        f"median gradient/rmpe gap ratio {med_ratio:.1f} (need >= 10); "
        f"median rmpe/nesterov {med_nest:.2e} (need <= 1); seeds {list(E2E_SEEDS)}"
    )


def _max_increase(gaps, floor):
    best = 0.0
    for a, b in zip(gaps, gaps[1:]):
        if a > floor:
            best = max(best, b / a)
    return best


@_timed("11", "unregularized instability and monotone safeguarded cycles")
def check_instability():
    jumps, monotone = [], True
    for res in _e2e_runs():
        ampe = res.traces[f"ampe{E2E_K}"]
        gaps = ampe.f_gap
        jumps.append(_max_increase(gaps, 1e-12 * max(gaps[0], 1e-300)))
        rm = res.traces[f"rmpe{E2E_K}"]
        boundary = [rm.records[0].f_gap] + [r.f_gap for r in rm.of_kind("extrapolation")]
        monotone &= all(b <= a for a, b in zip(boundary, boundary[1:]))
    events = sum(j >= 10.0 for j in jumps)
    ok = events >= 1 and monotone
    return ok, (
        f"largest single-step gap increase per seed {[f'{j:.1f}x' for j in jumps]}; "
        f"seeds with a >= 10x jump {events}/{len(jumps)}; rmpe cycle boundaries monotone: {monotone}"
    )


CHECKS = [
    check_exact_recovery,
    check_chebyshev_bound,
    check_perturbation_bounds,
    check_online_batch,
    check_chebyshev_method,
    check_nesterov,
    check_s_k_alpha,
    check_speedup,
    check_asymptotic_stated,
    check_asymptotic_limit,
    check_end_to_end,
    check_instability,
]


def run_all(select=None, echo=print):
    results = []
    for check in CHECKS:
        if select and check.number not in select:
            continue
        res = check()
        results.append(res)
        if echo:
            echo(res.line())
    return results
