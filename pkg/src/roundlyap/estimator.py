"""Recursive least-squares line fit of the log-error series.

The slope of the log lower-bound-error growth is the largest Lyapunov
exponent estimate.  Two schedules weight the data:

* constant: every observation weighs the same (the classic recursion),
* inverse-k: a factor lambda(k) = 1 + c/k (default c = 1.02) applied at
  every update.  Because lambda > 1 and decays toward 1, the induced batch
  weight of observation k, w_k = prod_{j>k} lambda(j), is strictly
  decreasing: data received first weigh more.  The rationale is that with
  accumulating rounding error, early observations are the more reliable.

The recursion with gain K, covariance P, regressors psi and observation y:

    K_k     = P_{k-1} psi_k / (psi_k' P_{k-1} psi_k + lambda(k))
    theta_k = theta_{k-1} + K_k (y_k - psi_k' theta_{k-1})
    P_k     = (P_{k-1} - P_{k-1} psi_k psi_k' P_{k-1}
               / (psi_k' P_{k-1} psi_k + lambda(k))) / lambda(k)

with P re-symmetrised after every update.  For lambda = 1 this is
algebraically identical to the uniform-weight recursion
P_k = P_{k-1} - K_k psi_k' P_{k-1}.

Regressors are psi = (j, 1) with window-relative j starting at 1: the slope
is shift invariant, so the fit does not depend on where divergence begins.
Initialisation is diffuse: theta = 0, P = p0 * I with p0 = 1e6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateGain, SingularSystem, WindowTooShort

__all__ = [
    "LambdaSchedule",
    "ScheduleKind",
    "RlsState",
    "FitResult",
    "lambda_at",
    "rls_init",
    "rls_update",
    "rls_update_uniform",
    "estimate_lle",
    "batch_wls_oracle",
    "induced_weights",
]

MIN_WINDOW_POINTS = 10
DEFAULT_P0 = 1.0e6
DEFAULT_LAMBDA_C = 1.02


class ScheduleKind(Enum):
    CONSTANT = "constant"
    INVERSE_K = "variable"


@dataclass(frozen=True)
class LambdaSchedule:
    """Weighting factor schedule: lambda(k) = 1 (constant) or 1 + c/k."""

    kind: ScheduleKind
    c: float = DEFAULT_LAMBDA_C

    @classmethod
    def constant(cls) -> "LambdaSchedule":
        return cls(kind=ScheduleKind.CONSTANT)

    @classmethod
    def inverse_k(cls, c: float = DEFAULT_LAMBDA_C) -> "LambdaSchedule":
        return cls(kind=ScheduleKind.INVERSE_K, c=c)

    @property
    def label(self) -> str:
        return self.kind.value


def lambda_at(schedule: LambdaSchedule, k: int) -> float:
    """lambda(k) for k >= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if schedule.kind is ScheduleKind.CONSTANT:
        return 1.0
    return 1.0 + schedule.c / k


@dataclass(frozen=True)
class RlsState:
    theta: np.ndarray  # (slope, intercept)
    P: np.ndarray      # 2x2 covariance, symmetric positive definite
    k: int


@dataclass(frozen=True)
class FitResult:
    lle: float          # slope / time_scale
    intercept: float
    n_points: int
    schedule: LambdaSchedule


def rls_init(p0: float = DEFAULT_P0) -> RlsState:
    if not p0 > 0:
        raise ValueError("p0 must be positive")
    return RlsState(theta=np.zeros(2), P=np.eye(2) * p0, k=0)


def _update_core(state: RlsState, psi, y: float, lam: float):
    """Shared gain/innovation arithmetic, unrolled on scalars.

    The operation order here is the single definition of the update; the
    vectorised window fitter mirrors it term for term (psi1 = 1 there, and
    x * 1.0 == x bitwise), which is what makes the two paths bit-identical.
    """
    psi0, psi1 = float(psi[0]), float(psi[1])
    p = state.P
    p00, p01 = float(p[0, 0]), float(p[0, 1])
    p10, p11 = float(p[1, 0]), float(p[1, 1])
    th0, th1 = float(state.theta[0]), float(state.theta[1])
    s0 = p00 * psi0 + p01 * psi1          # P psi
    s1 = p10 * psi0 + p11 * psi1
    den = (psi0 * s0 + psi1 * s1) + lam   # psi' P psi + lambda
    if not den > 0.0:
        raise DegenerateGain(f"psi'P psi + lambda = {den!r} <= 0")
    k0 = s0 / den
    k1 = s1 / den
    err = y - (psi0 * th0 + psi1 * th1)
    th0n = th0 + k0 * err
    th1n = th1 + k1 * err
    t0 = psi0 * p00 + psi1 * p10          # psi' P
    t1 = psi0 * p01 + psi1 * p11
    return (psi0, psi1, p00, p01, p10, p11, s0, s1, den, k0, k1,
            th0n, th1n, t0, t1)


def rls_update(state: RlsState, psi: Sequence[float], y: float, lam: float) -> RlsState:
    """One update of the variable-factor recursion (see module docstring)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    (_, _, p00, p01, p10, p11, s0, s1, den, _, _,
     th0n, th1n, t0, t1) = _update_core(state, psi, y, lam)
    q00 = (p00 - s0 * t0 / den) / lam
    q01 = (p01 - s0 * t1 / den) / lam
    q10 = (p10 - s1 * t0 / den) / lam
    q11 = (p11 - s1 * t1 / den) / lam
    off = 0.5 * (q01 + q10)  # re-symmetrise
    return RlsState(theta=np.array([th0n, th1n]),
                    P=np.array([[q00, off], [off, q11]]),
                    k=state.k + 1)


def rls_update_uniform(state: RlsState, psi: Sequence[float], y: float) -> RlsState:
    """The uniform-weight recursion P_k = P_{k-1} - K psi' P_{k-1}.

    Algebraically identical to :func:`rls_update` with lam = 1; kept as an
    independently coded route so the identity is testable numerically.
    """
    (_, _, p00, p01, p10, p11, _, _, _, k0, k1,
     th0n, th1n, t0, t1) = _update_core(state, psi, y, 1.0)
    q00 = p00 - k0 * t0
    q01 = p01 - k0 * t1
    q10 = p10 - k1 * t0
    q11 = p11 - k1 * t1
    off = 0.5 * (q01 + q10)
    return RlsState(theta=np.array([th0n, th1n]),
                    P=np.array([[q00, off], [off, q11]]),
                    k=state.k + 1)


def estimate_lle(series, schedule: LambdaSchedule, p0: float = DEFAULT_P0) -> FitResult:
    """Fit the series' window by RLS; the slope over time_scale is the LLE.

    Feeds (psi = (j, 1), y_j) for window-relative j = 1..n through
    :func:`rls_update` with lam = lambda(j).
    """
    y = series.window_values()
    n = int(y.size)
    if n < MIN_WINDOW_POINTS:
        raise WindowTooShort(f"{n} window points < {MIN_WINDOW_POINTS}")
    state = rls_init(p0)
    for j in range(1, n + 1):
        lam = lambda_at(schedule, j)
        state = rls_update(state, (float(j), 1.0), float(y[j - 1]), lam)
    slope = float(state.theta[0])
    intercept = float(state.theta[1])
    return FitResult(lle=slope / series.time_scale, intercept=intercept,
                     n_points=n, schedule=schedule)


def fit_windows(y_windows: Sequence[np.ndarray], schedule: LambdaSchedule,
                p0: float = DEFAULT_P0):
    """RLS-fit many windows at once; returns (slopes, intercepts) arrays.

    psi = (j, 1) and lambda(j) are the same for every window at a given
    window-relative j, so the covariance/gain recursion is shared and only
    theta is carried per window; windows shorter than j stop updating.
    Bitwise identical to :func:`estimate_lle` run per window.
    """
    m = len(y_windows)
    lens = np.array([len(y) for y in y_windows], dtype=np.int64)
    if m == 0 or int(lens.max()) == 0:
        return np.zeros(0), np.zeros(0)
    jmax = int(lens.max())
    ypad = np.zeros((jmax, m))
    for i, y in enumerate(y_windows):
        ypad[: lens[i], i] = y
    th0 = np.zeros(m)
    th1 = np.zeros(m)
    p00 = p11 = float(p0)
    p01 = p10 = 0.0
    for j in range(1, jmax + 1):
        lam = lambda_at(schedule, j)
        psi0 = float(j)
        s0 = p00 * psi0 + p01
        s1 = p10 * psi0 + p11
        den = (psi0 * s0 + s1) + lam
        if not den > 0.0:
            raise DegenerateGain(f"psi'P psi + lambda = {den!r} <= 0")
        k0 = s0 / den
        k1 = s1 / den
        active = j <= lens
        yj = ypad[j - 1]
        err = yj - (psi0 * th0 + th1)
        th0 = np.where(active, th0 + k0 * err, th0)
        th1 = np.where(active, th1 + k1 * err, th1)
        t0 = psi0 * p00 + p10
        t1 = psi0 * p01 + p11
        q00 = (p00 - s0 * t0 / den) / lam
        q01 = (p01 - s0 * t1 / den) / lam
        q10 = (p10 - s1 * t0 / den) / lam
        q11 = (p11 - s1 * t1 / den) / lam
        p00, p11 = q00, q11
        p01 = p10 = 0.5 * (q01 + q10)
    return th0, th1


def induced_weights(schedule: LambdaSchedule, n: int):
    """Batch weights equivalent to n RLS updates under the schedule.

    Returns (w, w0) with w[k-1] = prod_{j=k+1..n} lambda(j) for the
    observations and w0 = prod_{j=1..n} lambda(j) for the diffuse-prior
    regulariser (its "observation index" is 0, so the same product formula
    applies).
    """
    lams = np.array([lambda_at(schedule, j) for j in range(1, n + 1)])
    rev = np.cumprod(lams[::-1])
    w = np.empty(n)
    w[n - 1] = 1.0
    if n > 1:
        w[: n - 1] = rev[::-1][1:]
    w0 = float(rev[-1]) if n else 1.0
    return w, w0


def batch_wls_oracle(points: Sequence[tuple], weights: Sequence[float],
                     p0: float = DEFAULT_P0, p0_weight: float = 1.0) -> np.ndarray:
    """Direct solution of the regularised weighted normal equations.

    Solves (sum_i w_i psi_i psi_i' + p0_weight * P0^{-1}) theta
         = sum_i w_i psi_i y_i  with P0 = p0 * I.

    With w_i = prod_{j>i} lambda(j) and p0_weight = prod_j lambda(j) this is
    the exact batch form of the RLS recursion.
    """
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    A = np.eye(2) * (p0_weight / p0)
    b = np.zeros(2)
    for (psi, y), w in zip(points, weights):
        ps = np.asarray(psi, dtype=float)
        A += w * np.outer(ps, ps)
        b += w * ps * float(y)
    try:
        theta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(theta)):
        raise SingularSystem("normal equations produced non-finite solution")
    return theta
