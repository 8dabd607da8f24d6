"""Minimal self-contained SVG line plots.

Hand-rolled rather than delegating to a plotting package so the output is
byte-deterministic: no timestamps, generated ids, or library version
strings.  Good enough for the log-error divergence figure: a data polyline,
the fitted line over its window, axes with a few ticks, and a slope
annotation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_lbe_svg"]

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50  # margins


def _ticks(lo: float, hi: float, n: int = 5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _fmt_tick(v: float) -> str:
    return f"{v:.4g}"


def render_lbe_svg(k: np.ndarray, y: np.ndarray,
                   window_k: np.ndarray, fitted_y: np.ndarray,
                   slope: float, intercept: float, title: str,
                   note: str = "slope = LLE estimate") -> str:
    """SVG of ln(delta) against iteration with the fitted line overlaid."""
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    x_lo, x_hi = float(k.min()), float(k.max())
    y_lo, y_hi = float(y.min()), float(y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    px_w = _W - _ML - _MR
    px_h = _H - _MT - _MB

    def sx(v):
        return _ML + (v - x_lo) / (x_hi - x_lo) * px_w

    def sy(v):
        return _H - _MB - (v - y_lo) / (y_hi - y_lo) * px_h

    def path(xs, ys):
        return " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes
    parts.append(
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black" stroke-width="1"/>')
    parts.append(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        'stroke="black" stroke-width="1"/>')
    for tv in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{sx(tv):.2f}" y1="{_H - _MB}" x2="{sx(tv):.2f}" '
            f'y2="{_H - _MB + 5}" stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{sx(tv):.2f}" y="{_H - _MB + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt_tick(tv)}</text>')
    for tv in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{_ML - 5}" y1="{sy(tv):.2f}" x2="{_ML}" '
            f'y2="{sy(tv):.2f}" stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{_ML - 8}" y="{sy(tv):.2f}" text-anchor="end" '
            f'dominant-baseline="middle" font-family="sans-serif" '
            f'font-size="11">{_fmt_tick(tv)}</text>')
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 12}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12">iteration k</text>')
    parts.append(
        f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">ln(delta_k)</text>')
    # data and fit
    parts.append(
        f'<polyline fill="none" stroke="#1f4e8c" stroke-width="1" '
        f'points="{path(k, y)}"/>')
    if window_k.size >= 2:
        parts.append(
            f'<polyline fill="none" stroke="#cc2222" stroke-width="2" '
            f'points="{path(window_k, fitted_y)}"/>')
    suffix = f"  ({note})" if note else ""
    parts.append(
        f'<text x="{_W - _MR - 8}" y="{_MT + 18}" text-anchor="end" '
        'font-family="sans-serif" font-size="13" fill="#cc2222">'
        f'fit: y = {slope:.6g} k {"+" if intercept >= 0 else "-"} '
        f'{abs(intercept):.6g}{suffix}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
