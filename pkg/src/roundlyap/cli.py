"""Command-line interface.

Subcommands:

* ``simulate``  write the dual-channel observable series as CSV
* ``estimate``  print the fitted LLE of one initial condition
* ``table2``    run the five-system comparison sweep (text + CSV report)
* ``figure``    write an SVG of the log-error series with the fitted line

Exit codes: 0 success, 2 usage error, 3 numerical/data failure.  Output
always uses a decimal point, and floats are serialized with 17 significant
digits so they reparse bitwise-equal.

A ``--config FILE`` of ``key = value`` lines (``#`` comments, UTF-8) may
supply any long flag's value; explicit flags override the file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .arithmetic import DEFAULT_CHANNEL_PAIR, RoundingChannel
from .errors import ConfigError, OutOfRange, RoundLyapError, UnknownSystem
from .estimator import DEFAULT_LAMBDA_C, DEFAULT_P0, LambdaSchedule, estimate_lle
from .experiment import reproduce_table2
from .lbe import compute_lbe, pair_deltas, simulate_pair
from .svgplot import render_lbe_svg
from .systems import SystemKind, get_system, system_names

__all__ = ["main"]

_EXIT_OK = 0
_EXIT_USAGE = 2
_EXIT_NUMERIC = 3

_CONFIG_KEYS = {
    "system": str,
    "x0": float,
    "steps": int,
    "channels": str,
    "lambda": str,
    "lambda_c": float,
    "d_sat": float,
    "p0": float,
    "n_ics": int,
    "mg_h": float,
    "mg_denominator": str,
    "out": str,
}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _load_config(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _parse_channels(text: str) -> tuple[RoundingChannel, RoundingChannel]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated channels, e.g. nearest,up")
    a, b = (RoundingChannel.from_name(p) for p in parts)
    if a is b:
        raise ValueError("the two rounding channels must differ")
    return a, b


def _schedule_from(name: str, c: float) -> LambdaSchedule:
    if name == "constant":
        return LambdaSchedule.constant()
    if name == "variable":
        return LambdaSchedule.inverse_k(c)
    raise ValueError("--lambda must be 'constant' or 'variable'")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundlyap",
        description="Largest Lyapunov exponent estimation from dual "
                    "rounding-mode divergence.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, x0=False, steps=False, nics=False):
        p.add_argument("--system", help="system name (see 'table2 --help')")
        if x0:
            p.add_argument("--x0", type=float, help="initial condition")
        if steps:
            p.add_argument("--steps", type=int, help="simulation steps (>= 2)")
        if nics:
            p.add_argument("--n-ics", dest="n_ics", type=int,
                           help="initial conditions per system (default 100)")
        p.add_argument("--channels", help="channel pair, e.g. nearest,up")
        p.add_argument("--lambda", dest="lam",
                       help="weighting schedule: constant | variable")
        p.add_argument("--lambda-c", dest="lambda_c", type=float,
                       help=f"c in lambda(k)=1+c/k (default {DEFAULT_LAMBDA_C})")
        p.add_argument("--d-sat", dest="d_sat", type=float,
                       help="saturation threshold ending the fit window")
        p.add_argument("--p0", type=float,
                       help=f"diffuse covariance init (default {DEFAULT_P0:g})")
        p.add_argument("--mg-h", dest="mg_h", type=float,
                       help="delay-system Euler step size (default 0.1)")
        p.add_argument("--mg-denominator", dest="mg_denominator",
                       help="delay denominator variant: standard | paper")
        p.add_argument("--out", help="output file path")
        p.add_argument("--config", help="key = value config file")

    p_sim = sub.add_parser("simulate",
                           help="write dual-channel series as CSV")
    add_common(p_sim, x0=True, steps=True)

    p_est = sub.add_parser("estimate",
                           help="fit the LLE of one initial condition")
    add_common(p_est, x0=True, steps=True)

    p_tab = sub.add_parser("table2",
                           help="five-system comparison sweep "
                                f"({', '.join(system_names())})")
    add_common(p_tab, steps=True, nics=True)

    p_fig = sub.add_parser("figure",
                           help="SVG of the log-error series with fit")
    add_common(p_fig, x0=True, steps=True)
    return parser


class _Options:
    """Flag values with config-file fallback, then hard defaults."""

    def __init__(self, args: argparse.Namespace):
        file_values = _load_config(args.config) if args.config else {}
        self._args = vars(args)
        self._file = file_values

    def get(self, key: str, default=None):
        cli_key = "lam" if key == "lambda" else key
        v = self._args.get(cli_key)
        if v is not None:
            return v
        if key in self._file:
            return self._file[key]
        return default


def _resolve_system(opts: _Options):
    name = opts.get("system")
    if name is None:
        raise ConfigError("--system is required")
    mg_den = opts.get("mg_denominator", "standard")
    if mg_den not in ("standard", "paper"):
        raise ConfigError("--mg-denominator must be 'standard' or 'paper'")
    return get_system(name, mg_denominator=mg_den)


def _pipeline_inputs(opts: _Options, spec):
    x0 = opts.get("x0")
    if x0 is None:
        raise ConfigError("--x0 is required")
    n_steps = int(opts.get("steps", spec.n_steps_default))
    if n_steps < 2:
        raise ConfigError("--steps must be >= 2")
    channels = _parse_channels(opts.get("channels", "nearest,up"))
    d_sat = float(opts.get("d_sat", spec.d_sat_default))
    h = float(opts.get("mg_h", 0.1))
    return float(x0), n_steps, channels, d_sat, h


def _series_csv(pair) -> str:
    deltas = pair_deltas(pair)
    with np.errstate(divide="ignore"):
        ln_delta = np.where(deltas > 0, np.log(np.where(deltas > 0, deltas, 1.0)),
                            -np.inf)
    lines = ["k,x_a,x_b,delta,ln_delta"]
    for k in range(pair.n_valid):
        lines.append(",".join((
            str(k), _fmt(pair.series_a[k]), _fmt(pair.series_b[k]),
            _fmt(deltas[k]), _fmt(ln_delta[k]))))
    return "\n".join(lines) + "\n"


def _cmd_simulate(opts: _Options) -> int:
    spec = _resolve_system(opts)
    x0, n_steps, channels, _, h = _pipeline_inputs(opts, spec)
    pair = simulate_pair(spec, x0, n_steps, channels, h=h)
    if not np.any(pair_deltas(pair) > 0):
        reason = pair.truncation or "no divergence over the run"
        print(f"error: channels never diverged ({reason})", file=sys.stderr)
        return _EXIT_NUMERIC
    text = _series_csv(pair)
    out = opts.get("out")
    if out:
        Path(out).write_text(text, encoding="utf-8")
        print(f"wrote {pair.n_valid} rows to {out}")
    else:
        sys.stdout.write(text)
    return _EXIT_OK


def _fit_for(opts: _Options, spec, pair, d_sat: float, h: float):
    time_scale = h if spec.kind is SystemKind.DELAY_DIFFERENTIAL else 1.0
    series = compute_lbe(pair, time_scale=time_scale, d_sat=d_sat)
    sched = _schedule_from(opts.get("lambda", "variable"),
                           float(opts.get("lambda_c", DEFAULT_LAMBDA_C)))
    fit = estimate_lle(series, sched, p0=float(opts.get("p0", DEFAULT_P0)))
    return series, fit


def _cmd_estimate(opts: _Options) -> int:
    spec = _resolve_system(opts)
    x0, n_steps, channels, d_sat, h = _pipeline_inputs(opts, spec)
    pair = simulate_pair(spec, x0, n_steps, channels, h=h)
    series, fit = _fit_for(opts, spec, pair, d_sat, h)
    print(f"system     : {spec.name}")
    print(f"x0         : {_fmt(x0)}")
    print(f"channels   : {pair.channel_a.value},{pair.channel_b.value}")
    print(f"schedule   : {fit.schedule.label}"
          + (f" (c={fit.schedule.c})" if fit.schedule.label == "variable" else ""))
    print(f"window     : k = {series.fit_start}..{series.fit_end} "
          f"({fit.n_points} points)")
    print(f"lle        : {_fmt(fit.lle)}")
    print(f"intercept  : {_fmt(fit.intercept)}")
    out = opts.get("out")
    if out:
        Path(out).write_text(_series_csv(pair), encoding="utf-8")
        print(f"series csv : {out}")
    return _EXIT_OK


def _cmd_table2(opts: _Options) -> int:
    name = opts.get("system")
    systems = [get_system(name).name] if name else None
    overrides = {}
    for key, cast in (("n_ics", int), ("steps", int), ("d_sat", float),
                      ("p0", float), ("mg_h", float)):
        v = opts.get(key)
        if v is not None:
            overrides["n_steps" if key == "steps" else key] = cast(v)
    mg_den = opts.get("mg_denominator")
    if mg_den is not None:
        overrides["mg_denominator"] = mg_den
    ch = opts.get("channels")
    if ch is not None:
        overrides["channels"] = _parse_channels(ch)
    report = reproduce_table2(systems, overrides)
    sys.stdout.write(report.to_text())
    out = opts.get("out")
    if out:
        Path(out).write_text(report.to_csv_text(), encoding="utf-8")
        print(f"csv report: {out}")
    if all(r.passed for r in report.rows):
        return _EXIT_OK
    return _EXIT_NUMERIC


def _cmd_figure(opts: _Options) -> int:
    spec = _resolve_system(opts)
    x0, n_steps, channels, d_sat, h = _pipeline_inputs(opts, spec)
    pair = simulate_pair(spec, x0, n_steps, channels, h=h)
    series, fit = _fit_for(opts, spec, pair, d_sat, h)
    win_k = series.window_indices()
    j = np.arange(1, win_k.size + 1, dtype=float)
    slope_per_step = fit.lle * series.time_scale
    fitted = slope_per_step * j + fit.intercept
    note = ("slope = LLE estimate" if series.time_scale == 1.0
            else f"LLE = slope/h = {_fmt(fit.lle)}")
    title = (f"{spec.name}: ln lower-bound error, x0 = {x0:g}, "
             f"{fit.schedule.label} weighting")
    svg = render_lbe_svg(series.k_index, series.y, win_k, fitted,
                         slope_per_step, fit.intercept, title, note)
    out = opts.get("out") or f"{spec.name}-lbe.svg"
    Path(out).write_text(svg, encoding="utf-8")
    csv_path = str(out) + ".csv"
    lines = ["k,ln_delta,fit"]
    fit_by_k = dict(zip(win_k.tolist(), fitted.tolist()))
    for kk, yy in zip(series.k_index.tolist(), series.y.tolist()):
        f_cell = _fmt(fit_by_k[kk]) if kk in fit_by_k else ""
        lines.append(f"{kk},{_fmt(yy)},{f_cell}")
    Path(csv_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"svg: {out}")
    print(f"csv: {csv_path}")
    return _EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "table2": _cmd_table2,
    "figure": _cmd_figure,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _Options(args)
        return _COMMANDS[args.command](opts)
    except (ConfigError, ValueError, UnknownSystem, OutOfRange) as exc:
        # bad arguments, including unknown systems and out-of-range x0
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    except RoundLyapError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
