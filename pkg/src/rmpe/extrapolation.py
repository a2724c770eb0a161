"""Regularized minimal polynomial extrapolation of vector sequences.

Given iterates ``x_0, ..., x_{k+1}`` of a (nearly) linear fixed point
iteration, the extrapolated point is the nonlinear average
``sum_i c_i x_i`` whose weights solve

    minimize    c^T (U^T U + lambda I) c
    subject to  1^T c = 1

with ``U = [x_1 - x_0, ..., x_{k+1} - x_k]``.  ``lambda = 0`` gives the
approximate (unregularized) variant, which recovers the fixed point of a
linear iteration exactly once the window spans its minimal polynomial.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, cho_factor, cho_solve, lu_factor, lu_solve, solve_triangular

from .errors import (
    DegenerateSystemError,
    DomainError,
    NumericalBreakdownError,
    RankDeficiencyError,
    StructuralError,
)

__all__ = [
    "IterateWindow",
    "Coefficients",
    "CholeskyState",
    "LinearModel",
    "OnlineExtrapolator",
    "build_difference_matrix",
    "rmpe_coefficients",
    "extrapolate",
    "cholesky_append",
    "perturbation_shift",
]

PIVOT_TOL = 1e-12


class IterateWindow:
    """Fixed capacity ring buffer of iterates.

    A window of order ``k`` holds at most ``k + 2`` vectors.  Pushing into a
    full window drops the oldest iterate.

    Parameters
    ----------
    k : int
        Window order; the extrapolation uses ``k + 1`` difference columns.
    """

    def __init__(self, k: int):
        if k < 0:
            raise StructuralError(f"window order must be non-negative, got {k}")
        self.k = int(k)
        self._buf: deque[np.ndarray] = deque(maxlen=self.k + 2)
        self._dim: int | None = None

    @classmethod
    def from_iterates(cls, iterates) -> "IterateWindow":
        """Build a window holding exactly ``iterates`` (order ``len - 2``)."""
        iterates = [np.asarray(x, dtype=float) for x in iterates]
        if len(iterates) < 2:
            raise StructuralError("a window needs at least two iterates")
        win = cls(len(iterates) - 2)
        for x in iterates:
            win.push(x)
        return win

    def push(self, x) -> None:
        x = np.array(x, dtype=float).reshape(-1)
        if x.size == 0:
            raise StructuralError("iterates must have dimension n >= 1")
        if self._dim is None:
            self._dim = x.size
        elif x.size != self._dim:
            raise StructuralError(
                f"iterate of dimension {x.size} pushed into window of dimension {self._dim}"
            )
        self._buf.append(x)

    def clear(self) -> None:
        self._buf.clear()

    @property
    def capacity(self) -> int:
        return self.k + 2

    @property
    def full(self) -> bool:
        return len(self._buf) == self.capacity

    @property
    def dim(self) -> int | None:
        return self._dim

    @property
    def iterates(self) -> np.ndarray:
        """Iterates as an ``(m, n)`` array, oldest first."""
        if not self._buf:
            return np.empty((0, self._dim or 0))
        return np.stack(self._buf)

    def __len__(self) -> int:
        return len(self._buf)


def _as_iterates(window) -> np.ndarray:
    if isinstance(window, IterateWindow):
        X = window.iterates
    else:
        try:
            X = np.asarray(window, dtype=float)
        except ValueError as exc:
            raise StructuralError("iterates do not share a common dimension") from exc
        if X.ndim == 1:
            X = X[:, None]
    if X.ndim != 2:
        raise StructuralError("iterates must form an (m, n) array")
    if X.shape[0] < 2:
        raise StructuralError(f"window holds {X.shape[0]} iterate(s), need at least 2")
    if X.shape[1] < 1:
        raise StructuralError("iterates must have dimension n >= 1")
    return X


def build_difference_matrix(window) -> np.ndarray:
    """Return the ``n x (m-1)`` matrix of consecutive increments.

    ``window`` is an :class:`IterateWindow` or anything convertible to an
    ``(m, n)`` array of iterates (a 1-D sequence is read as scalar iterates).
    """
    X = _as_iterates(window)
    return np.diff(X, axis=0).T


@dataclass(frozen=True)
class Coefficients:
    """Extrapolation weights ``c`` (summing to one) and the ``lam`` used."""

    c: np.ndarray
    lam: float

    def __len__(self):
        return self.c.size


def _check_lambda(lam):
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be a finite non-negative scalar, got {lam}")
    return lam


def _normalize(z):
    s = z.sum()
    if not np.isfinite(s) or s == 0.0:
        raise DegenerateSystemError(f"normalization 1^T z = {s} is degenerate")
    return z / s


def _regularized(U, lam):
    k1 = U.shape[1]
    M = U.T @ U + lam * np.eye(k1)
    try:
        factor = cho_factor(M, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - lam > 0 keeps M PD
        raise DegenerateSystemError(str(exc)) from exc
    z = cho_solve(factor, np.ones(k1))
    return _normalize(z)


def _unregularized(U, pivot_tol):
    # Null-space least squares on {1^T c = 1}; avoids squaring cond(U).
    n, k1 = U.shape
    scale = np.sqrt(np.einsum("ij,ij->", U, U) / k1)
    if scale == 0.0:
        # Constant window: every feasible c is optimal; take the min-norm one.
        return np.full(k1, 1.0 / k1)
    basis = np.linalg.qr(np.ones((k1, 1)), mode="complete")[0][:, 1:]
    c0 = np.full(k1, 1.0 / k1)
    B = U @ basis
    tol = pivot_tol * scale
    if n < k1 - 1:
        raise RankDeficiencyError(n, 0.0, tol)
    Q, R = np.linalg.qr(B)
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(~(diag >= tol))
    if bad.size:
        i = int(bad[0])
        raise RankDeficiencyError(i, float(diag[i]), tol)
    y = solve_triangular(R, -(Q.T @ (U @ c0)))
    return _normalize(c0 + basis @ y)


def _normal_solve(G, pivot_tol):
    # LU of the Gram matrix; only the pivot check guards against garbage
    k1 = G.shape[0]
    tol = pivot_tol * np.trace(G) / k1
    with warnings.catch_warnings():
        # singular pivots are reported below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(G, check_finite=True)
    diag = np.abs(np.diag(lu))
    bad = np.flatnonzero(~(diag > tol) if tol == 0 else ~(diag >= tol))
    if bad.size:
        i = int(bad[0])
        raise RankDeficiencyError(i, float(diag[i]), tol)
    return lu_solve((lu, piv), np.ones(k1))


def rmpe_coefficients(
    U, lam: float = 0.0, *, pivot_tol: float = PIVOT_TOL, solver: str = "qr"
) -> Coefficients:
    """Solve for the extrapolation weights.

    For ``lam > 0`` this solves ``(U^T U + lam I) z = 1`` by Cholesky and
    returns ``c = z / 1^T z``.  For ``lam == 0`` the equality constrained
    least squares problem ``min ||U c|| s.t. 1^T c = 1`` is solved through a
    QR factorization of ``U`` restricted to ``{1^T c = 0}``; a factor pivot
    below ``pivot_tol * sqrt(trace(U^T U) / (k+1))`` raises
    :class:`RankDeficiencyError` instead of regularizing silently.
    ``solver="normal"`` instead LU-factors ``U^T U`` itself, checking the
    pivots against ``pivot_tol * trace(U^T U) / (k+1)``;
    this squares the condition number and is kept to reproduce the
    behaviour of the textbook normal-equation solve.

    Parameters
    ----------
    U : array_like, shape (n, k+1)
        Difference matrix.
    lam : float
        Regularization, ``>= 0``.
    pivot_tol : float
        Relative pivot tolerance of the ``lam == 0`` path.
    solver : {"qr", "normal"}
        Factorization used when ``lam == 0``.

    Returns
    -------
    Coefficients
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.ndim != 2 or U.shape[1] < 1:
        raise StructuralError("difference matrix must be 2-D with at least one column")
    lam = _check_lambda(lam)
    if solver not in ("qr", "normal"):
        raise DomainError(f"solver must be 'qr' or 'normal', got {solver!r}")
    if U.shape[1] == 1:
        return Coefficients(np.ones(1), lam)
    if lam > 0:
        c = _regularized(U, lam)
    elif solver == "normal":
        c = _normalize(_normal_solve(U.T @ U, pivot_tol))
    else:
        c = _unregularized(U, pivot_tol)
    return Coefficients(c, lam)


def extrapolate(window, lam: float = 0.0, *, pivot_tol: float = PIVOT_TOL, solver: str = "qr") -> np.ndarray:
    """Return ``sum_{i=0}^{k} c_i x_i`` over the first ``k + 1`` iterates."""
    X = _as_iterates(window)
    coef = rmpe_coefficients(np.diff(X, axis=0).T, lam, pivot_tol=pivot_tol, solver=solver)
    return coef.c @ X[:-1]


@dataclass(frozen=True)
class CholeskyState:
    """Lower triangular ``factor`` with ``factor @ factor.T = U^T U + lam I``."""

    factor: np.ndarray
    lam: float

    @classmethod
    def empty(cls, lam: float = 0.0) -> "CholeskyState":
        return cls(np.zeros((0, 0)), _check_lambda(lam))

    @property
    def size(self) -> int:
        return self.factor.shape[0]

    def solve(self, rhs) -> np.ndarray:
        y = solve_triangular(self.factor, rhs, lower=True)
        return solve_triangular(self.factor.T, y, lower=False)

    def coefficients(self) -> Coefficients:
        """Weights from the factored system, an O(r^2) solve."""
        if self.size == 0:
            raise StructuralError("no columns appended yet")
        return Coefficients(_normalize(self.solve(np.ones(self.size))), self.lam)


def cholesky_append(state: CholeskyState, U_so_far, u_new) -> CholeskyState:
    """Extend the factor of ``U^T U + lam I`` by one column ``u_new``.

    With ``a = L^{-1} U^T u`` and ``b = sqrt(u^T u + lam - a^T a)`` the new
    factor is ``[[L, 0], [a^T, b]]``.  Costs O(rn + r^2).

    Raises
    ------
    NumericalBreakdownError
        If ``u^T u + lam - a^T a <= 0``.
    """
    u = np.asarray(u_new, dtype=float).reshape(-1)
    r = state.size
    if r:
        Uprev = np.asarray(U_so_far, dtype=float)
        if Uprev.ndim != 2 or Uprev.shape[1] != r or Uprev.shape[0] != u.size:
            raise StructuralError(
                f"expected U_so_far of shape ({u.size}, {r}), got {np.shape(U_so_far)}"
            )
        a = solve_triangular(state.factor, Uprev.T @ u, lower=True)
    else:
        a = np.zeros(0)
    b2 = u @ u + state.lam - a @ a
    if not b2 > 0:
        raise NumericalBreakdownError(
            f"new Cholesky pivot squared is {b2:.3e} <= 0; increase lambda"
        )
    L = np.zeros((r + 1, r + 1))
    L[:r, :r] = state.factor
    L[r, :r] = a
    L[r, r] = np.sqrt(b2)
    return CholeskyState(L, state.lam)


class OnlineExtrapolator:
    """Streams iterates and keeps the Cholesky factor current.

    Each :meth:`push` after the first appends one difference column in
    O(rn + r^2).  When the window is full the oldest iterate is dropped and
    the factor is rebuilt from the retained columns.

    Parameters
    ----------
    k : int
        Window order (``k + 1`` columns at most).
    lam : float
        Regularization, must be positive for the online path to be safe.
    """

    def __init__(self, k: int, lam: float):
        self.window = IterateWindow(k)
        self.lam = _check_lambda(lam)
        self._cols: list[np.ndarray] = []
        self.state = CholeskyState.empty(self.lam)

    def push(self, x) -> None:
        dropped = self.window.full
        last = self.window.iterates[-1] if len(self.window) else None
        self.window.push(x)
        if last is None:
            return
        u = self.window.iterates[-1] - last
        if dropped:
            self._cols.pop(0)
            self.state = CholeskyState.empty(self.lam)
            for j in range(len(self._cols)):
                self.state = cholesky_append(self.state, self.U[:, :j], self._cols[j])
        self.state = cholesky_append(self.state, self.U, u)
        self._cols.append(u)

    @property
    def U(self) -> np.ndarray:
        if not self._cols:
            return np.zeros((self.window.dim or 0, 0))
        return np.column_stack(self._cols)

    def coefficients(self) -> Coefficients:
        return self.state.coefficients()

    def estimate(self) -> np.ndarray:
        c = self.coefficients().c
        return c @ self.window.iterates[: c.size]


def perturbation_shift(U, E, lam: float = 0.0) -> np.ndarray:
    """Shift of the weights when ``U`` is perturbed to ``U + E``.

    Returns ``-(I - M^{-1} 1 1^T / (1^T M^{-1} 1)) M^{-1} P c`` with
    ``M = (U+E)^T (U+E) + lam I``, ``P = (U+E)^T (U+E) - U^T U`` and ``c`` the
    weights of the unperturbed problem.  For ``lam == 0``, ``M`` must be
    numerically nonsingular.
    """
    U = np.asarray(U, dtype=float)
    E = np.asarray(E, dtype=float)
    if U.shape != E.shape or U.ndim != 2:
        raise StructuralError(f"U {U.shape} and E {E.shape} must share a 2-D shape")
    lam = _check_lambda(lam)
    k1 = U.shape[1]
    Ut = U + E
    G = U.T @ U
    Gt = Ut.T @ Ut
    P = Gt - G
    M = Gt + lam * np.eye(k1)
    c = rmpe_coefficients(U, lam).c
    factor = _checked_cholesky(M)
    ones = np.ones(k1)
    m1 = cho_solve(factor, ones)
    v = cho_solve(factor, P @ c)
    return -(v - m1 * (ones @ v) / (ones @ m1))


def _checked_cholesky(M, pivot_tol=PIVOT_TOL):
    k1 = M.shape[0]
    tol = pivot_tol * np.trace(M) / k1
    try:
        factor = cho_factor(M, lower=True)
    except np.linalg.LinAlgError:
        factor = None
    if factor is not None:
        d2 = np.diag(factor[0]) ** 2
        bad = np.flatnonzero(~(d2 >= tol))
        if not bad.size:
            return factor
        i = int(bad[0])
        raise RankDeficiencyError(i, float(d2[i]), tol)
    raise RankDeficiencyError(-1, 0.0, tol)


@dataclass(frozen=True)
class LinearModel:
    """Affine iteration ``x -> A (x - x*) + x*``.

    ``A`` must not have 1 as an eigenvalue so that ``x*`` is the unique fixed
    point.
    """

    A: np.ndarray
    fixed_point: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        xs = np.asarray(self.fixed_point, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != xs.size:
            raise StructuralError(f"A {A.shape} incompatible with x* of size {xs.size}")
        if np.linalg.svd(A - np.eye(xs.size), compute_uv=False).min() <= 1e-14 * max(
            1.0, np.abs(A).max()
        ):
            raise DomainError("1 is an eigenvalue of A; fixed point is not unique")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "fixed_point", xs)

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.A)).max())

    def step(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A @ (x - self.fixed_point) + self.fixed_point

    def iterate(self, x0, count: int) -> np.ndarray:
        """Return ``count + 1`` iterates ``x_0..x_count`` as rows."""
        xs = [np.asarray(x0, dtype=float).reshape(-1)]
        for _ in range(count):
            xs.append(self.step(xs[-1]))
        return np.stack(xs)
