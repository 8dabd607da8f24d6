"""Directed binary64 elementary arithmetic.

Two otherwise identical simulations are made to diverge only through the
rounding of their elementary operations.  This module provides ``+ - * /``,
``abs``, ``min`` and integer powers of binary64 values under an explicitly
selected IEEE 754-2008 rounding direction, through two interchangeable
backends:

``Backend.FP_ENVIRONMENT``
    Switches the hardware floating-point environment (C ``fesetround``) for
    the duration of a ``with`` scope.  Inside the scope every CPython float
    operation and every numpy elementwise ufunc rounds in the selected
    direction, because both execute plain IEEE scalar/SIMD instructions.
    Fast; used for whole simulations.  The FP environment is state of the
    executing thread: a context must be entered and exited on the thread
    that uses it, and directed results are only guaranteed inside the scope.

``Backend.SOFTWARE_EMULATION``
    Pure functions: each operation is computed in the ambient
    round-to-nearest mode and then corrected by one ulp in the channel
    direction whenever it was inexact.  Inexactness and its side are
    detected with error-free transformations (TwoSum, Dekker's product,
    residual-sign comparison for division); operands outside the safe
    exponent range fall back to exact rational rounding.  Portable and
    freely shareable across threads; used as the reference cross-check.

Both backends agree bitwise on every operation (this is a tested
invariant).

Hazard note: CPython's peephole optimizer folds literal-only float
expressions (``0.1 * 0.1``) at compile time under round-to-nearest, and
CPython's float<->str conversion assumes round-to-nearest.  All directed
operations therefore go through the opaque call boundary of a context
method on runtime values, and no parsing/formatting may happen inside an
active hardware scope.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import math
import sys
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ContextNotActive, NonFiniteResult, UnsupportedDirection

__all__ = [
    "RoundingChannel",
    "Backend",
    "DirectedOpsContext",
    "with_channel",
    "default_backend",
    "fp_environment_supported",
    "directed_add",
    "directed_sub",
    "directed_mul",
    "directed_div",
    "directed_abs",
    "directed_min",
    "directed_int_pow",
    "round_fraction",
]


class RoundingChannel(Enum):
    """IEEE 754-2008 rounding direction used by one simulation channel."""

    TO_NEAREST_EVEN = "nearest"
    TOWARD_POSITIVE = "up"
    TOWARD_NEGATIVE = "down"
    TOWARD_ZERO = "zero"

    @classmethod
    def from_name(cls, name: str) -> "RoundingChannel":
        for member in cls:
            if member.value == name:
                return member
        names = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown rounding channel {name!r} (choose from: {names})")


#: The channel pair used when none is specified: round-to-nearest against
#: round-up.
DEFAULT_CHANNEL_PAIR = (RoundingChannel.TO_NEAREST_EVEN, RoundingChannel.TOWARD_POSITIVE)


class Backend(Enum):
    FP_ENVIRONMENT = "fpenv"
    SOFTWARE_EMULATION = "software"


# ---------------------------------------------------------------------------
# Hardware floating-point environment (fenv.h via ctypes)
# ---------------------------------------------------------------------------

# fenv.h rounding-mode macros are architecture dependent; candidates are
# verified functionally before use, so a wrong table can never be applied
# silently.
_MODE_TABLES = (
    # x86 / x86-64 glibc
    {"nearest": 0x0, "down": 0x400, "up": 0x800, "zero": 0xC00},
    # aarch64 glibc
    {"nearest": 0x0, "up": 0x400000, "down": 0x800000, "zero": 0xC00000},
    # riscv glibc
    {"nearest": 0, "zero": 1, "down": 2, "up": 3},
)


class _FpEnvironment:
    """Thin verified binding to fegetround/fesetround."""

    def __init__(self):
        self._fesetround = None
        self._fegetround = None
        self.modes = None  # channel -> int, only set when fully verified
        try:
            path = ctypes.util.find_library("m")
            libm = ctypes.CDLL(path) if path else ctypes.CDLL(None)
            self._fesetround = libm.fesetround
            self._fegetround = libm.fegetround
            self._fesetround.argtypes = [ctypes.c_int]
            self._fesetround.restype = ctypes.c_int
            self._fegetround.restype = ctypes.c_int
        except (OSError, AttributeError):
            return
        for table in _MODE_TABLES:
            if self._verify(table):
                self.modes = {
                    RoundingChannel.TO_NEAREST_EVEN: table["nearest"],
                    RoundingChannel.TOWARD_POSITIVE: table["up"],
                    RoundingChannel.TOWARD_NEGATIVE: table["down"],
                    RoundingChannel.TOWARD_ZERO: table["zero"],
                }
                break

    def _verify(self, table) -> bool:
        """Set each candidate mode and check sentinel sums round as required."""
        one = math.ldexp(1.0, 0)          # runtime values: not foldable
        tiny = math.ldexp(1.0, -60)
        above_half = math.ldexp(1.0, -53) + math.ldexp(1.0, -60)
        succ1 = math.nextafter(one, math.inf)
        succm1 = math.nextafter(-one, -math.inf)  # -1 - 2^-52
        saved = self._fegetround()
        try:
            checks = (
                ("nearest", lambda: one + tiny == one and -one - tiny == -one
                 and one + above_half == succ1),
                ("up", lambda: one + tiny == succ1 and -one - tiny == -one),
                ("down", lambda: one + tiny == one and -one - tiny == succm1),
                ("zero", lambda: one + tiny == one and -one - tiny == -one
                 and one + above_half == one),
            )
            for name, check in checks:
                if self._fesetround(table[name]) != 0:
                    return False
                ok = check()
                self._fesetround(saved)
                if not ok:
                    return False
            return True
        finally:
            self._fesetround(saved)

    @property
    def available(self) -> bool:
        return self.modes is not None

    def get(self) -> int:
        return self._fegetround()

    def set(self, mode: int) -> None:
        if self._fesetround(mode) != 0:
            raise UnsupportedDirection(f"fesetround({mode}) rejected by host")


_FPENV = None


def _fpenv() -> _FpEnvironment:
    global _FPENV
    if _FPENV is None:
        _FPENV = _FpEnvironment()
    return _FPENV


def fp_environment_supported() -> bool:
    """Whether the hardware FP-environment backend works on this host."""
    return _fpenv().available


def default_backend() -> Backend:
    """Hardware backend when verified on this host, else software."""
    return Backend.FP_ENVIRONMENT if fp_environment_supported() else Backend.SOFTWARE_EMULATION


# ---------------------------------------------------------------------------
# Software emulation: round-to-nearest plus one-ulp directed correction
# ---------------------------------------------------------------------------

_INF = math.inf
_MAX_FINITE = sys.float_info.max
_MAX_FINITE_FRAC = Fraction(_MAX_FINITE)
# Round-to-nearest overflows to inf at and beyond the midpoint between the
# largest finite binary64 and 2^1024.
_NEAREST_OVERFLOW = Fraction(2) ** 1024 - Fraction(2) ** 970
_SPLITTER = 134217729.0  # 2^27 + 1, Dekker/Veltkamp split constant

# Safe-magnitude bounds outside which the error-free transformations may
# themselves overflow/underflow; such operands take the exact rational path.
_BIG = math.ldexp(1.0, 996)
_TINY_PROD = math.ldexp(1.0, -966)


def round_fraction(x: Fraction, channel: RoundingChannel) -> float:
    """Round an exact rational to binary64 in the given direction.

    Implements the full IEEE 754-2008 semantics including gradual underflow
    and the direction-dependent overflow rule (round-down/toward-zero clamp
    to the largest finite value; round-up overflows to infinity).
    """
    if x == 0:
        return 0.0
    neg = x < 0
    ax = -x if neg else x
    mag_up = (channel is RoundingChannel.TOWARD_POSITIVE and not neg) or (
        channel is RoundingChannel.TOWARD_NEGATIVE and neg
    )
    if ax > _MAX_FINITE_FRAC:
        if channel is RoundingChannel.TO_NEAREST_EVEN:
            mag = _INF if ax >= _NEAREST_OVERFLOW else _MAX_FINITE
        else:
            mag = _INF if mag_up else _MAX_FINITE
        return -mag if neg else mag
    n, d = ax.numerator, ax.denominator
    e = n.bit_length() - d.bit_length()
    # establish 2^e <= ax < 2^(e+1)
    if (n >= d << e) if e >= 0 else (n << -e >= d):
        pass
    else:
        e -= 1
    g = max(e - 52, -1074)  # spacing exponent; clamps into the subnormal grid
    if g >= 0:
        q, r = divmod(n, d << g)
        rden = d << g
    else:
        q, r = divmod(n << -g, d)
        rden = d
    if r != 0:
        if channel is RoundingChannel.TO_NEAREST_EVEN:
            twice = 2 * r
            if twice > rden or (twice == rden and (q & 1)):
                q += 1
        elif mag_up:
            q += 1
    if q == 0:
        return -0.0 if neg else 0.0
    mag = math.ldexp(float(q), g)  # q < 2^53 so float(q) is exact
    return -mag if neg else mag


def _apply_side(value: float, side: int, channel: RoundingChannel) -> float:
    """One-ulp correction of a round-to-nearest result.

    ``side`` is the sign of (exact - value); the exact result lies strictly
    between ``value`` and the neighbour on that side.
    """
    if side == 0 or channel is RoundingChannel.TO_NEAREST_EVEN:
        return value
    if channel is RoundingChannel.TOWARD_POSITIVE:
        return math.nextafter(value, _INF) if side > 0 else value
    if channel is RoundingChannel.TOWARD_NEGATIVE:
        return math.nextafter(value, -_INF) if side < 0 else value
    # toward zero: truncate the magnitude; sign of the exact result equals
    # sign(value), or sign(side) when value is zero
    positive = value > 0.0 or (value == 0.0 and side > 0)
    if positive:
        return math.nextafter(value, -_INF) if side < 0 else value
    return math.nextafter(value, _INF) if side > 0 else value


def _twosum(a: float, b: float):
    """Knuth's branch-free exact addition: a + b = s + e with s = fl(a+b)."""
    s = a + b
    ap = s - b
    bp = s - ap
    e = (a - ap) + (b - bp)
    return s, e


def _twoprod(a: float, b: float):
    """Dekker's exact product: a * b = p + e with p = fl(a*b).

    Requires |a|, |b| < 2^996 and p in the normal range.
    """
    p = a * b
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _require_finite(a: float, b: float, op: str) -> None:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonFiniteResult(f"{op} requires finite operands, got {a!r}, {b!r}")


def _exact_zero_sum(a: float, b: float, s: float, channel: RoundingChannel) -> float:
    # IEEE: a sum that is exactly zero is +0 under every direction except
    # toward-negative (-0), unless both addends are zeros of the same sign,
    # in which case that sign is kept.
    if channel is RoundingChannel.TOWARD_NEGATIVE:
        like_zeros = a == 0.0 and b == 0.0 and math.copysign(1.0, a) == math.copysign(1.0, b)
        return s if like_zeros else -0.0
    return s


def _soft_add_scalar(a: float, b: float, channel: RoundingChannel) -> float:
    _require_finite(a, b, "add")
    if abs(a) > _BIG or abs(b) > _BIG:
        return round_fraction(Fraction(a) + Fraction(b), channel)
    s, e = _twosum(a, b)
    if e == 0.0:
        if s == 0.0:
            return _exact_zero_sum(a, b, s, channel)
        return s
    return _apply_side(s, 1 if e > 0.0 else -1, channel)


def _soft_mul_scalar(a: float, b: float, channel: RoundingChannel) -> float:
    _require_finite(a, b, "mul")
    p = a * b
    unsafe = (
        abs(a) >= _BIG
        or abs(b) >= _BIG
        or not math.isfinite(p)
        or (p != 0.0 and abs(p) < _TINY_PROD)
        or (p == 0.0 and a != 0.0 and b != 0.0)
    )
    if unsafe:
        return round_fraction(Fraction(a) * Fraction(b), channel)
    _, e = _twoprod(a, b)
    if e == 0.0:
        return p
    return _apply_side(p, 1 if e > 0.0 else -1, channel)


def _soft_div_scalar(a: float, b: float, channel: RoundingChannel) -> float:
    _require_finite(a, b, "div")
    if b == 0.0:
        raise NonFiniteResult("division by zero")
    if a == 0.0:
        return a / b  # exact signed zero in every direction
    q = a / b
    unsafe = (
        abs(a) >= _BIG
        or abs(b) >= _BIG
        or not math.isfinite(q)
        or abs(q) < _TINY_PROD
        or abs(q) >= _BIG
    )
    if unsafe:
        return round_fraction(Fraction(a) / Fraction(b), channel)
    p, e = _twoprod(q, b)
    r = a - p  # exact by Sterbenz: p = fl(q*b) is within a factor 2 of a
    # sign of the exact residual a - q*b = r - e, via exact comparison
    if r == e:
        return q
    side = 1 if r > e else -1  # sign of (a - q*b)
    if b < 0.0:
        side = -side  # sign of (a/b - q)
    return _apply_side(q, side, channel)


# Vectorised software path.  Same mathematics as the scalar functions; lanes
# whose operands fall outside the safe exponent range are recomputed through
# the scalar exact-rational fallback.

def _apply_side_array(value, side, channel: RoundingChannel):
    if channel is RoundingChannel.TO_NEAREST_EVEN:
        return value
    if channel is RoundingChannel.TOWARD_POSITIVE:
        return np.where(side > 0, np.nextafter(value, _INF), value)
    if channel is RoundingChannel.TOWARD_NEGATIVE:
        return np.where(side < 0, np.nextafter(value, -_INF), value)
    positive = (value > 0.0) | ((value == 0.0) & (side > 0))
    down = np.where(side < 0, np.nextafter(value, -_INF), value)
    up = np.where(side > 0, np.nextafter(value, _INF), value)
    return np.where(positive, down, up)


def _patch_lanes(out, a, b, mask, scalar_op, channel):
    a_b = np.broadcast_to(a, out.shape)
    b_b = np.broadcast_to(b, out.shape)
    for idx in np.argwhere(mask):
        key = tuple(idx)
        out[key] = scalar_op(float(a_b[key]), float(b_b[key]), channel)
    return out


def _soft_add_array(a, b, channel: RoundingChannel):
    with np.errstate(all="ignore"):
        s = a + b
        ap = s - b
        bp = s - ap
        e = (a - ap) + (b - bp)
        exact_zero = (s == 0.0) & (e == 0.0)
        if channel is RoundingChannel.TOWARD_NEGATIVE and np.any(exact_zero):
            like_zeros = (
                (np.asarray(a) == 0.0)
                & (np.asarray(b) == 0.0)
                & (np.signbit(a) == np.signbit(b))
            )
            s = np.where(exact_zero & ~like_zeros, -0.0, s)
        side = np.sign(e)
        out = _apply_side_array(s, side, channel)
        unsafe = (np.abs(a) > _BIG) | (np.abs(b) > _BIG) | ~np.isfinite(s)
    if np.any(unsafe):
        out = _patch_lanes(np.array(out), a, b, unsafe, _soft_add_scalar, channel)
    return out


def _soft_mul_array(a, b, channel: RoundingChannel):
    with np.errstate(all="ignore"):
        p = a * b
        c = _SPLITTER * a
        ah = c - (c - a)
        al = a - ah
        c = _SPLITTER * b
        bh = c - (c - b)
        bl = b - bh
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
        out = _apply_side_array(p, np.sign(e), channel)
        unsafe = (
            (np.abs(a) >= _BIG)
            | (np.abs(b) >= _BIG)
            | ~np.isfinite(p)
            | ((p != 0.0) & (np.abs(p) < _TINY_PROD))
            | ((p == 0.0) & (np.asarray(a) != 0.0) & (np.asarray(b) != 0.0))
        )
    if np.any(unsafe):
        out = _patch_lanes(np.array(out), a, b, unsafe, _soft_mul_scalar, channel)
    return out


def _soft_div_array(a, b, channel: RoundingChannel):
    with np.errstate(all="ignore"):
        q = a / b
        p = q * b
        c = _SPLITTER * q
        qh = c - (c - q)
        ql = q - qh
        c = _SPLITTER * b
        bh = c - (c - b)
        bl = b - bh
        e = ((qh * bh - p) + qh * bl + ql * bh) + ql * bl
        r = a - p
        side = np.where(r > e, 1, np.where(r < e, -1, 0))
        side = np.where(np.asarray(b) < 0.0, -side, side)
        out = _apply_side_array(q, side, channel)
        aq = np.abs(q)
        unsafe = (
            (np.abs(a) >= _BIG)
            | (np.abs(b) >= _BIG)
            | ~np.isfinite(q)
            | ((aq < _TINY_PROD) & (np.asarray(a) != 0.0))
            | (aq >= _BIG)
            | (np.asarray(b) == 0.0)
        )
        exact_zero = np.asarray(a) == 0.0
        out = np.where(exact_zero, q, out)
        unsafe = unsafe & ~exact_zero
    if np.any(unsafe):
        out = _patch_lanes(np.array(out), a, b, unsafe, _soft_div_scalar, channel)
    return out


_SOFT_SCALAR = {
    "add": _soft_add_scalar,
    "mul": _soft_mul_scalar,
    "div": _soft_div_scalar,
}
_SOFT_ARRAY = {
    "add": _soft_add_array,
    "mul": _soft_mul_array,
    "div": _soft_div_array,
}


# ---------------------------------------------------------------------------
# The directed operations context
# ---------------------------------------------------------------------------

def _is_array(x) -> bool:
    return isinstance(x, np.ndarray)


class DirectedOpsContext:
    """Elementary binary64 operations rounding in one direction.

    Use as a context manager around a whole simulation::

        ctx = DirectedOpsContext(RoundingChannel.TOWARD_POSITIVE)
        with ctx:
            x = ctx.mul(ctx.mul(mu, x), ctx.sub(1.0, x))

    Entering a hardware-backed context switches the thread's FP environment
    and restores the previous mode on exit, including on error.  Software
    contexts are pure; entering is a no-op but still required so both
    backends are used identically.

    Operations accept python floats or numpy arrays (results follow the
    input kind).  Scalar results that are non-finite raise
    :class:`NonFiniteResult`; array lanes are left to the caller's masking,
    since per-lane failure must not abort sibling lanes.
    """

    def __init__(self, channel: RoundingChannel, backend: Backend | None = None):
        self.channel = channel
        self.backend = backend if backend is not None else default_backend()
        self._depth = 0
        self._saved_modes: list[int] = []
        if self.backend is Backend.FP_ENVIRONMENT:
            env = _fpenv()
            if not env.available:
                raise UnsupportedDirection(
                    "hardware FP environment not usable on this host; "
                    "use Backend.SOFTWARE_EMULATION"
                )

    # -- scope management ---------------------------------------------------

    def __enter__(self) -> "DirectedOpsContext":
        if self.backend is Backend.FP_ENVIRONMENT:
            env = _fpenv()
            self._saved_modes.append(env.get())
            env.set(env.modes[self.channel])
        self._depth += 1
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self._depth -= 1
        if self.backend is Backend.FP_ENVIRONMENT:
            _fpenv().set(self._saved_modes.pop())

    def _check_active(self) -> None:
        if self._depth == 0 and self.backend is Backend.FP_ENVIRONMENT:
            raise ContextNotActive(
                "hardware-backed directed ops are only valid inside 'with ctx:'"
            )

    def _finish_scalar(self, r: float, op: str) -> float:
        if not math.isfinite(r):
            raise NonFiniteResult(f"directed {op} produced {r!r}")
        return r

    # -- operations ----------------------------------------------------------

    def add(self, a, b):
        self._check_active()
        if self.backend is Backend.FP_ENVIRONMENT:
            r = a + b
        elif _is_array(a) or _is_array(b):
            r = _soft_add_array(a, b, self.channel)
        else:
            r = _soft_add_scalar(a, b, self.channel)
        if _is_array(r):
            return r
        return self._finish_scalar(r, "add")

    def sub(self, a, b):
        # IEEE sub(a, b) == add(a, -b) bitwise in every direction
        self._check_active()
        if self.backend is Backend.FP_ENVIRONMENT:
            r = a - b
        elif _is_array(a) or _is_array(b):
            r = _soft_add_array(a, -b, self.channel)
        else:
            r = _soft_add_scalar(a, -b, self.channel)
        if _is_array(r):
            return r
        return self._finish_scalar(r, "sub")

    def mul(self, a, b):
        self._check_active()
        if self.backend is Backend.FP_ENVIRONMENT:
            r = a * b
        elif _is_array(a) or _is_array(b):
            r = _soft_mul_array(a, b, self.channel)
        else:
            r = _soft_mul_scalar(a, b, self.channel)
        if _is_array(r):
            return r
        return self._finish_scalar(r, "mul")

    def div(self, a, b):
        self._check_active()
        if self.backend is Backend.FP_ENVIRONMENT:
            try:
                r = a / b
            except ZeroDivisionError:
                raise NonFiniteResult("division by zero") from None
        elif _is_array(a) or _is_array(b):
            r = _soft_div_array(a, b, self.channel)
        else:
            r = _soft_div_scalar(a, b, self.channel)
        if _is_array(r):
            return r
        return self._finish_scalar(r, "div")

    def abs(self, a):
        # sign operation only; exact in every direction
        return np.abs(a) if _is_array(a) else abs(a)

    def min(self, a, b):
        # compare/select only; exact in every direction
        if _is_array(a) or _is_array(b):
            return np.minimum(a, b)
        return a if a <= b else b

    def int_pow(self, x, c: int):
        """x**c by left-to-right repeated multiplication.

        The chain is x, x*x, (x*x)*x, ...: c - 1 directed multiplications,
        deterministic for fixed c.
        """
        if c < 0:
            raise ValueError("int_pow exponent must be >= 0")
        if c == 0:
            return np.ones_like(x) if _is_array(x) else 1.0
        acc = x
        for _ in range(c - 1):
            acc = self.mul(acc, x)
        return acc


def with_channel(channel: RoundingChannel, computation, backend: Backend | None = None):
    """Run ``computation(ctx)`` with every elementary operation directed.

    The ambient rounding direction of the rest of the process is restored on
    exit, including when the computation raises.
    """
    ctx = DirectedOpsContext(channel, backend)
    with ctx:
        return computation(ctx)


# Free-function spellings of the context operations.

def directed_add(a, b, ctx: DirectedOpsContext):
    return ctx.add(a, b)


def directed_sub(a, b, ctx: DirectedOpsContext):
    return ctx.sub(a, b)


def directed_mul(a, b, ctx: DirectedOpsContext):
    return ctx.mul(a, b)


def directed_div(a, b, ctx: DirectedOpsContext):
    return ctx.div(a, b)


def directed_abs(a, ctx: DirectedOpsContext):
    return ctx.abs(a)


def directed_min(a, b, ctx: DirectedOpsContext):
    return ctx.min(a, b)


def directed_int_pow(x, c: int, ctx: DirectedOpsContext):
    return ctx.int_pow(x, c)
