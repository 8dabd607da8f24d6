"""The five benchmark dynamical systems and their directed stepping.

Evaluation order of every step is frozen, because directed rounding makes
results order sensitive.  The chains are:

* logistic:      (mu * x) * (1 - x)
* henon:         x' = (1 - (a * x) * x) + y,   y' = b * x
* sine map:      (a * x) - (((b * x) * x) * x)        (a cubic map)
* tent:          r * min(x, 1 - x)
* mackey-glass, one explicit-Euler step of step size h:
                 num   = a * x_delay
                 den   = 1 + x_delay^c          (c - 1 multiplications,
                                                 left-to-right)
                 x'    = x + h * ((num / den) - (b * x))

The printed form of the delay equation in some sources has denominator
``1 - x_delay^c``, which is singular exactly at the system's natural
equilibrium; it is available as the ``paper`` denominator variant, with
``standard`` (``1 + x_delay^c``) as the default.

All kernels accept scalars or numpy lane arrays through the same
:class:`~roundlyap.arithmetic.DirectedOpsContext` operations, so the
per-initial-condition and the vectorised simulation paths share one
definition of the arithmetic and agree bitwise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np

from .arithmetic import DirectedOpsContext
from .errors import NonFiniteResult, OutOfRange, SingularDenominator, TrajectoryEscape, UnknownSystem

__all__ = [
    "SystemKind",
    "SystemSpec",
    "MapState",
    "DelayState",
    "ESCAPE_BOUND",
    "SINGULAR_TOL",
    "get_system",
    "system_names",
    "all_systems",
    "step_map",
    "step_mackey_glass",
    "initial_state",
]

#: Orbits whose state magnitude exceeds this bound are counted as escaped.
#: Directed rounding can push an iterate just outside its invariant interval,
#: after which the orbit diverges; such initial conditions are excluded from
#: statistics with a reported count.
ESCAPE_BOUND = 1.0e6

#: Paper-literal delay denominators closer to zero than this raise
#: SingularDenominator.
SINGULAR_TOL = 1.0e-12


class SystemKind(Enum):
    DISCRETE_MAP = "map"
    DELAY_DIFFERENTIAL = "delay"


@dataclass(frozen=True)
class SystemSpec:
    """Definition of one dynamical system plus its experiment defaults.

    ``literature_lle`` is in nats/iteration for maps and nats/time-unit for
    the delay system.  ``mean_tolerance`` and ``sigma_strict`` store the
    system's acceptance contract so comparison reports are self-checking:
    the variable-weighting mean must be within ``mean_tolerance`` of the
    literature value, and the variable-weighting standard deviation must be
    strictly below the uniform-weighting one when ``sigma_strict`` else
    within a factor 1.5.
    """

    name: str
    kind: SystemKind
    dimension: int
    parameters: Mapping[str, float]
    ic_range: tuple[float, float]
    literature_lle: float
    observable_index: int = 0
    n_steps_default: int = 5000
    d_sat_default: float = 1.0e-2
    mean_tolerance: float = 0.06
    sigma_strict: bool = True
    mg_denominator: str = "standard"  # delay system only: "standard" | "paper"

    def validate_ic(self, x0: float) -> None:
        lo, hi = self.ic_range
        if not (lo <= x0 <= hi):
            raise OutOfRange(f"{self.name}: x0={x0!r} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class MapState:
    """State of a discrete map; all components finite by invariant."""

    components: tuple[float, ...]


@dataclass(frozen=True)
class DelayState:
    """State of the delay system: current value plus a ring buffer of the
    most recent d = tau/h values x(t-h), ..., x(t-dh), oldest first."""

    current: float
    history: deque = field(repr=False)
    h: float = 0.1
    d: int = 300


# ---------------------------------------------------------------------------
# Step kernels (single source of the frozen evaluation order)
# ---------------------------------------------------------------------------

def _logistic_kernel(x, p, ops: DirectedOpsContext):
    t1 = ops.mul(p["mu"], x)
    t2 = ops.sub(1.0, x)
    return ops.mul(t1, t2)


def _henon_kernel(x, y, p, ops: DirectedOpsContext):
    t1 = ops.mul(p["a"], x)
    t2 = ops.mul(t1, x)
    t3 = ops.sub(1.0, t2)
    xn = ops.add(t3, y)
    yn = ops.mul(p["b"], x)
    return xn, yn


def _sine_kernel(x, p, ops: DirectedOpsContext):
    t1 = ops.mul(p["a"], x)
    u1 = ops.mul(p["b"], x)
    u2 = ops.mul(u1, x)
    u3 = ops.mul(u2, x)
    return ops.sub(t1, u3)


def _tent_kernel(x, p, ops: DirectedOpsContext):
    t1 = ops.sub(1.0, x)
    m = ops.min(x, t1)
    return ops.mul(p["r"], m)


def _mg_kernel(x, x_delay, p, h, paper_denominator, ops: DirectedOpsContext,
               denominator_guard=None):
    """One explicit-Euler step of the delay system.

    ``denominator_guard``, when given, receives the raw denominator and
    returns the value to divide by; the scalar path uses it to raise
    :class:`SingularDenominator`, the vectorised path to mask dead lanes.
    """
    num = ops.mul(p["a"], x_delay)
    xc = ops.int_pow(x_delay, int(p["c"]))
    den = ops.sub(1.0, xc) if paper_denominator else ops.add(1.0, xc)
    if denominator_guard is not None:
        den = denominator_guard(den)
    q = ops.div(num, den)
    bx = ops.mul(p["b"], x)
    f = ops.sub(q, bx)
    hf = ops.mul(h, f)
    return ops.add(x, hf)


_KERNELS = {
    "logistic": _logistic_kernel,
    "sine": _sine_kernel,
    "tent": _tent_kernel,
}


# ---------------------------------------------------------------------------
# Registry (Table-1 systems with their defaults)
# ---------------------------------------------------------------------------

# d_sat defaults are per system: the fit window must end inside the bend
# where the log-error growth saturates for the variable-weighting estimator
# to reduce the spread across initial conditions, but the tent map's tight
# mean tolerance caps how far its window may reach into the bend.
_REGISTRY: dict[str, SystemSpec] = {
    "logistic": SystemSpec(
        name="logistic",
        kind=SystemKind.DISCRETE_MAP,
        dimension=1,
        parameters={"mu": 4.0},
        ic_range=(0.1, 1.0),
        literature_lle=0.6930,
        d_sat_default=0.35,
        mean_tolerance=0.06,
        sigma_strict=True,
    ),
    "henon": SystemSpec(
        name="henon",
        kind=SystemKind.DISCRETE_MAP,
        dimension=2,
        parameters={"a": 1.4, "b": 0.3},
        ic_range=(-0.9, 1.0),
        literature_lle=0.4180,
        d_sat_default=0.05,
        mean_tolerance=0.06,
        sigma_strict=True,
    ),
    "sine": SystemSpec(
        name="sine",
        kind=SystemKind.DISCRETE_MAP,
        dimension=1,
        parameters={"a": 2.6868, "b": 0.2462},
        ic_range=(-3.8, 3.8),
        literature_lle=0.7730,
        d_sat_default=0.10,
        mean_tolerance=0.06,
        sigma_strict=True,
    ),
    "tent": SystemSpec(
        name="tent",
        kind=SystemKind.DISCRETE_MAP,
        dimension=1,
        parameters={"r": 1.99},
        ic_range=(0.1, 0.99),
        literature_lle=0.6880,
        d_sat_default=0.15,
        mean_tolerance=0.01,
        sigma_strict=False,
    ),
    "mackey-glass": SystemSpec(
        name="mackey-glass",
        kind=SystemKind.DELAY_DIFFERENTIAL,
        dimension=1,
        parameters={"a": 0.2, "b": 0.1, "c": 10.0, "tau": 30.0},
        ic_range=(0.15, 1.5),
        literature_lle=0.0074,
        n_steps_default=30000,
        d_sat_default=1.0e-2,
        mean_tolerance=0.004,
        sigma_strict=False,
    ),
}


def system_names() -> list[str]:
    return list(_REGISTRY)


def get_system(name: str, mg_denominator: str = "standard") -> SystemSpec:
    try:
        spec = _REGISTRY[name]
    except KeyError:
        raise UnknownSystem(
            f"unknown system {name!r}; registered: {', '.join(_REGISTRY)}"
        ) from None
    if spec.kind is SystemKind.DELAY_DIFFERENTIAL and mg_denominator != "standard":
        if mg_denominator != "paper":
            raise ValueError("mg_denominator must be 'standard' or 'paper'")
        spec = replace(spec, mg_denominator="paper")
    return spec


def all_systems() -> list[SystemSpec]:
    return [get_system(n) for n in system_names()]


# ---------------------------------------------------------------------------
# Scalar stepping
# ---------------------------------------------------------------------------

def _check_escape(values, step=None):
    for v in values:
        if not np.isfinite(v) or abs(v) > ESCAPE_BOUND:
            raise TrajectoryEscape(f"state left invariant region: {values!r}", step=step)


def step_map(spec: SystemSpec, state: MapState, ctx: DirectedOpsContext) -> MapState:
    """Advance a discrete map one step with every operation directed."""
    if spec.kind is not SystemKind.DISCRETE_MAP:
        raise ValueError(f"{spec.name} is not a discrete map")
    try:
        if spec.name == "henon":
            xn, yn = _henon_kernel(state.components[0], state.components[1],
                                   spec.parameters, ctx)
            nxt = (xn, yn)
        else:
            nxt = (_KERNELS[spec.name](state.components[0], spec.parameters, ctx),)
    except NonFiniteResult as exc:
        raise TrajectoryEscape(str(exc)) from exc
    _check_escape(nxt)
    return MapState(components=nxt)


def step_mackey_glass(spec: SystemSpec, state: DelayState,
                      ctx: DirectedOpsContext) -> DelayState:
    """Advance the delay system one explicit-Euler step."""
    if spec.kind is not SystemKind.DELAY_DIFFERENTIAL:
        raise ValueError(f"{spec.name} is not a delay system")
    if len(state.history) != state.d:
        raise ValueError("history buffer not full")
    paper = spec.mg_denominator == "paper"

    def guard(den):
        if paper and abs(den) < SINGULAR_TOL:
            raise SingularDenominator(f"|denominator| = {abs(den):.3e} < {SINGULAR_TOL}")
        return den

    x_delay = state.history[0]
    try:
        xn = _mg_kernel(state.current, x_delay, spec.parameters, state.h,
                        paper, ctx, denominator_guard=guard)
    except NonFiniteResult as exc:
        raise TrajectoryEscape(str(exc)) from exc
    _check_escape((xn,))
    hist = deque(state.history, maxlen=state.d)
    hist.append(state.current)
    return DelayState(current=xn, history=hist, h=state.h, d=state.d)


def initial_state(spec: SystemSpec, x0: float, h: float = 0.1):
    """Build the start state: observable component = x0.

    Maps: remaining components are 0 (the henon map sweeps only x0; y0 is
    pinned to 0.0).  Delay system: constant history identically x0, with
    d = tau/h entries; tau/h must be an exact positive integer.
    """
    spec.validate_ic(x0)
    if spec.kind is SystemKind.DISCRETE_MAP:
        comps = (float(x0),) + (0.0,) * (spec.dimension - 1)
        return MapState(components=comps)
    d = delay_steps(spec, h)
    hist = deque([float(x0)] * d, maxlen=d)
    return DelayState(current=float(x0), history=hist, h=h, d=d)


def delay_steps(spec: SystemSpec, h: float) -> int:
    """d = tau/h, validated to be an exact positive integer."""
    tau = spec.parameters["tau"]
    d = tau / h
    if d <= 0 or abs(d - round(d)) > 1e-9:
        raise ValueError(f"tau/h = {tau}/{h} is not a positive integer")
    return int(round(d))
