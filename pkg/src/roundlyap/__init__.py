"""roundlyap: largest Lyapunov exponent estimation from directed rounding.

Simulate a system twice under two IEEE 754 rounding directions, measure the
log growth of the trajectories' divergence (a lower bound on the simulation
error), and fit its slope with recursive least squares, optionally with a
variable weighting factor lambda(k) = 1 + c/k that favours early data.

Typical use::

    import roundlyap as rl

    spec = rl.get_system("logistic")
    pair = rl.simulate_pair(spec, x0=0.2, n_steps=5000)
    series = rl.compute_lbe(pair, d_sat=spec.d_sat_default)
    fit = rl.estimate_lle(series, rl.LambdaSchedule.inverse_k())
    print(fit.lle)  # ~ ln 2

or, for the whole five-system comparison::

    report = rl.reproduce_table2()
    print(report.to_text())
"""

from . import errors
from .arithmetic import (
    Backend,
    DEFAULT_CHANNEL_PAIR,
    DirectedOpsContext,
    RoundingChannel,
    default_backend,
    directed_abs,
    directed_add,
    directed_div,
    directed_int_pow,
    directed_min,
    directed_mul,
    directed_sub,
    fp_environment_supported,
    round_fraction,
    with_channel,
)
from .errors import RoundLyapError
from .estimator import (
    FitResult,
    LambdaSchedule,
    RlsState,
    ScheduleKind,
    batch_wls_oracle,
    estimate_lle,
    induced_weights,
    lambda_at,
    rls_init,
    rls_update,
    rls_update_uniform,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    IcOutcome,
    Table2Report,
    Table2Row,
    ic_grid,
    reproduce_table2,
    run_experiment,
    summarize,
)
from .lbe import (
    LbeSeries,
    TrajectoryPair,
    compute_lbe,
    select_fit_window,
    simulate_many,
    simulate_pair,
)
from .systems import (
    DelayState,
    ESCAPE_BOUND,
    MapState,
    SystemKind,
    SystemSpec,
    all_systems,
    get_system,
    initial_state,
    step_map,
    step_mackey_glass,
    system_names,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "DEFAULT_CHANNEL_PAIR",
    "DelayState",
    "DirectedOpsContext",
    "ESCAPE_BOUND",
    "ExperimentConfig",
    "ExperimentResult",
    "FitResult",
    "IcOutcome",
    "LambdaSchedule",
    "LbeSeries",
    "MapState",
    "RlsState",
    "RoundLyapError",
    "RoundingChannel",
    "ScheduleKind",
    "SystemKind",
    "SystemSpec",
    "Table2Report",
    "Table2Row",
    "TrajectoryPair",
    "all_systems",
    "batch_wls_oracle",
    "compute_lbe",
    "default_backend",
    "directed_abs",
    "directed_add",
    "directed_div",
    "directed_int_pow",
    "directed_min",
    "directed_mul",
    "directed_sub",
    "errors",
    "estimate_lle",
    "fp_environment_supported",
    "get_system",
    "ic_grid",
    "induced_weights",
    "initial_state",
    "lambda_at",
    "reproduce_table2",
    "rls_init",
    "rls_update",
    "rls_update_uniform",
    "round_fraction",
    "run_experiment",
    "select_fit_window",
    "simulate_many",
    "simulate_pair",
    "step_map",
    "step_mackey_glass",
    "summarize",
    "system_names",
    "with_channel",
]
