"""Dual-channel simulation and the log lower-bound-error series.

Simulating the same system twice, identically except for the rounding
direction of each elementary operation, yields two trajectories whose
divergence is driven purely by rounding.  Half the absolute difference of
the observables,

    delta_k = |x_a(k) - x_b(k)| / 2,

is a computable lower bound on the simulation error; while the orbits are
still correlated it grows like exp(lle * k), so the slope of ln(delta_k)
over the pre-saturation window estimates the largest Lyapunov exponent.
The 1/2 factor is kept for comparability with the error-bound definition;
by scale invariance of the fitted slope it only shifts the intercept.

Simulations are vectorised across initial conditions (one lane per IC);
escaped lanes keep computing on garbage values but are truncated to their
last valid step, so sibling lanes are unaffected.  A single-IC run is a
one-lane batch, which keeps the per-IC and the sweep paths bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arithmetic import (
    Backend,
    DEFAULT_CHANNEL_PAIR,
    DirectedOpsContext,
    RoundingChannel,
)
from .errors import NoDivergence, WindowTooShort
from .systems import (
    ESCAPE_BOUND,
    SINGULAR_TOL,
    SystemKind,
    SystemSpec,
    _henon_kernel,
    _KERNELS,
    _mg_kernel,
    delay_steps,
)

__all__ = [
    "TrajectoryPair",
    "LbeSeries",
    "simulate_pair",
    "simulate_many",
    "compute_lbe",
    "select_fit_window",
    "MIN_WINDOW",
    "DEFAULT_D_SAT",
]

MIN_WINDOW = 10
DEFAULT_D_SAT = 1.0e-2

# lane-failure codes used by the batch engine
_OK, _ESCAPED, _SINGULAR = 0, 1, 2
_KIND_LABEL = {_ESCAPED: "escaped", _SINGULAR: "singular-denominator"}


@dataclass(frozen=True)
class TrajectoryPair:
    """Observable series of one initial condition under two channels.

    Both series have the same length n_valid: the number of recorded states
    (initial state plus completed steps) before any escape in either
    channel.  ``truncation`` is None for a full-length run, else the label
    of what ended it.
    """

    channel_a: RoundingChannel
    channel_b: RoundingChannel
    series_a: np.ndarray
    series_b: np.ndarray
    n_valid: int
    truncation: str | None = None


@dataclass(frozen=True)
class LbeSeries:
    """The log lower-bound-error sequence with its fit window.

    ``y[i] = ln(delta at iteration k_index[i])`` for the strictly positive
    deltas only, so ``y`` never contains -inf or NaN.  ``fit_start`` and
    ``fit_end`` are inclusive iteration bounds; ``time_scale`` converts the
    fitted per-step slope into the reported unit (1.0 for maps, the Euler
    step size for the delay system).
    """

    y: np.ndarray
    k_index: np.ndarray
    fit_start: int
    fit_end: int
    time_scale: float

    def window_values(self) -> np.ndarray:
        m = (self.k_index >= self.fit_start) & (self.k_index <= self.fit_end)
        return self.y[m]

    def window_indices(self) -> np.ndarray:
        m = (self.k_index >= self.fit_start) & (self.k_index <= self.fit_end)
        return self.k_index[m]


# ---------------------------------------------------------------------------
# Batch engine
# ---------------------------------------------------------------------------

def _run_channel(spec: SystemSpec, x0s: np.ndarray, n_steps: int,
                 channel: RoundingChannel, backend: Backend | None,
                 h: float):
    """Simulate every lane under one channel.

    Returns (out, n_valid, kind): out[k, lane] is the observable at step k;
    lane entries out[n_valid[lane]:] are garbage.  All state bookkeeping
    (masks, comparisons, selections) is exact and therefore safe inside the
    directed scope.
    """
    m = x0s.size
    n = int(n_steps)
    out = np.empty((n + 1, m))
    out[0] = x0s
    n_valid = np.full(m, n + 1, dtype=np.int64)
    kind = np.zeros(m, dtype=np.int8)
    alive = np.ones(m, dtype=bool)
    ops = DirectedOpsContext(channel, backend)
    params = spec.parameters

    def mark(bad, code, k):
        nonlocal alive
        bad = bad & alive
        if bad.any():
            n_valid[bad] = k + 1  # entries 0..k stay valid
            kind[bad] = code
            alive = alive & ~bad

    with ops, np.errstate(all="ignore"):
        if spec.kind is SystemKind.DISCRETE_MAP:
            x = x0s.copy()
            y = np.zeros(m) if spec.name == "henon" else None
            for k in range(n):
                if spec.name == "henon":
                    x, y = _henon_kernel(x, y, params, ops)
                    finite = np.isfinite(x) & np.isfinite(y)
                    big = np.maximum(np.abs(x), np.abs(y)) > ESCAPE_BOUND
                else:
                    x = _KERNELS[spec.name](x, params, ops)
                    finite = np.isfinite(x)
                    big = np.abs(x) > ESCAPE_BOUND
                mark(~finite | big, _ESCAPED, k)
                out[k + 1] = x
        else:
            d = delay_steps(spec, h)
            paper = spec.mg_denominator == "paper"
            x = x0s.copy()
            singular = np.zeros(m, dtype=bool)

            def guard(den):
                if paper:
                    bad = np.abs(den) < SINGULAR_TOL
                    if bad.any():
                        singular[:] = bad
                        return np.where(bad, 1.0, den)
                singular[:] = False
                return den

            for k in range(n):
                x_delay = out[k - d] if k >= d else out[0]
                x = _mg_kernel(x, x_delay, params, h, paper, ops,
                               denominator_guard=guard)
                mark(singular, _SINGULAR, k)
                mark(~np.isfinite(x) | (np.abs(x) > ESCAPE_BOUND), _ESCAPED, k)
                out[k + 1] = x
    return out, n_valid, kind


def simulate_many(spec: SystemSpec, x0s: np.ndarray, n_steps: int,
                  channels: tuple[RoundingChannel, RoundingChannel] = DEFAULT_CHANNEL_PAIR,
                  backend: Backend | None = None, h: float = 0.1):
    """Run the channel pair over many initial conditions.

    Returns (out_a, out_b, n_valid, kind) with per-lane n_valid the minimum
    over the two channels.
    """
    ch_a, ch_b = channels
    if ch_a is ch_b:
        raise ValueError("the two rounding channels must differ")
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    x0s = np.asarray(x0s, dtype=float)
    out_a, va, ka = _run_channel(spec, x0s, n_steps, ch_a, backend, h)
    out_b, vb, kb = _run_channel(spec, x0s, n_steps, ch_b, backend, h)
    n_valid = np.minimum(va, vb)
    kind = np.where(va <= vb, ka, kb)
    return out_a, out_b, n_valid, kind


def simulate_pair(spec: SystemSpec, x0: float, n_steps: int,
                  channels: tuple[RoundingChannel, RoundingChannel] = DEFAULT_CHANNEL_PAIR,
                  backend: Backend | None = None, h: float = 0.1) -> TrajectoryPair:
    """Simulate one initial condition under two rounding channels.

    Escape in either channel is not an error here: the pair is truncated to
    the steps completed before it.
    """
    spec.validate_ic(x0)
    out_a, out_b, n_valid, kind = simulate_many(
        spec, np.array([float(x0)]), n_steps, channels, backend, h)
    nv = int(n_valid[0])
    return TrajectoryPair(
        channel_a=channels[0],
        channel_b=channels[1],
        series_a=out_a[:nv, 0].copy(),
        series_b=out_b[:nv, 0].copy(),
        n_valid=nv,
        truncation=_KIND_LABEL.get(int(kind[0])),
    )


# ---------------------------------------------------------------------------
# LBE series and fit window
# ---------------------------------------------------------------------------

def pair_deltas(pair: TrajectoryPair) -> np.ndarray:
    """delta_k = |x_a(k) - x_b(k)| / 2 over the valid prefix."""
    return np.abs(pair.series_a - pair.series_b) / 2.0


def select_fit_window(deltas: np.ndarray, d_sat: float) -> tuple[int, int]:
    """Pick the linear-growth window of a delta sequence.

    fit_start is the first index with delta > 0; fit_end the last index
    before delta first reaches d_sat (or the last index if it never does).
    Both bounds are inclusive.  Raises WindowTooShort unless the span is at
    least MIN_WINDOW and it contains at least MIN_WINDOW positive deltas.
    """
    if not d_sat > 0:
        raise ValueError("d_sat must be positive")
    deltas = np.asarray(deltas)
    nonzero = np.nonzero(deltas > 0)[0]
    if nonzero.size == 0:
        raise WindowTooShort("no positive deltas")
    fit_start = int(nonzero[0])
    saturated = np.nonzero(deltas >= d_sat)[0]
    fit_end = int(saturated[0]) - 1 if saturated.size else int(deltas.size) - 1
    usable = int(np.count_nonzero(deltas[fit_start:fit_end + 1] > 0))
    if fit_end - fit_start < MIN_WINDOW or usable < MIN_WINDOW:
        raise WindowTooShort(
            f"window [{fit_start}, {fit_end}] has {usable} usable points"
            f" (need >= {MIN_WINDOW})")
    return fit_start, fit_end


def compute_lbe(pair: TrajectoryPair, time_scale: float = 1.0,
                d_sat: float = DEFAULT_D_SAT) -> LbeSeries:
    """Log lower-bound-error series of a trajectory pair.

    Entries with delta = 0 (the channels bitwise agree at that step) are
    excluded, so the log series is always finite.  Raises NoDivergence when
    every delta is zero and WindowTooShort when the pre-saturation window
    cannot support a fit.
    """
    if pair.n_valid < 2:
        raise NoDivergence("fewer than 2 valid steps")
    deltas = pair_deltas(pair)
    k_index = np.nonzero(deltas > 0)[0]
    if k_index.size == 0:
        raise NoDivergence("the two channels never diverged")
    fit_start, fit_end = select_fit_window(deltas, d_sat)
    y = np.log(deltas[k_index])
    return LbeSeries(y=y, k_index=k_index, fit_start=fit_start,
                     fit_end=fit_end, time_scale=time_scale)
