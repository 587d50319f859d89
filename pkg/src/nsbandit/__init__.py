"""Simulation laboratory for non-stationary bandits under a query budget.

The package provides: environment generators with controlled total
variation, UCB1/EXP3 base policies, a multi-scale block scheduler with
query/replay batching, the hybrid budget-paced controller with
environmental-change tests, a known-variation batched alternative, and
a regret/budget evaluation harness.
"""

from .config import (
    BudgetLedger,
    ProblemConfig,
    RandomStream,
    RunConfig,
    budget_ratio,
    load_run_config,
    validate_config,
)
from .environment import (
    HardInstanceParams,
    MeanSequence,
    gen_drift,
    gen_hard_instance,
    gen_piecewise,
    sample_reward,
    total_variation,
)
from .policies import Exp3State, Ucb1State
from .baque import (
    BlockSchedule,
    Instance,
    InstanceId,
    build_block,
    format_block_schedule,
    resolve_active_sets,
    schedule_block,
    split_batches,
)
from .logs import ActionLog
from .hyque import (
    DetectionState,
    change_test_end,
    change_test_running,
    on_demand_check,
    rho_hat,
    run_hyque,
)
from .rexp3b import Rexp3bParams, rexp3b_params, run_rexp3b
from .metrics import (
    RegretReport,
    RunLengthStats,
    decompose_regret,
    dynamic_regret,
    evaluate_run,
    fit_scaling,
    per_phase_query_fractions,
    run_length_stats,
)
from .harness import (
    ExperimentSpec,
    build_environment,
    emit_plots,
    run_experiment,
    run_single,
)
from . import errors

__all__ = [
    "ActionLog",
    "BlockSchedule",
    "BudgetLedger",
    "DetectionState",
    "Exp3State",
    "ExperimentSpec",
    "HardInstanceParams",
    "Instance",
    "InstanceId",
    "MeanSequence",
    "ProblemConfig",
    "RandomStream",
    "RegretReport",
    "Rexp3bParams",
    "RunConfig",
    "RunLengthStats",
    "Ucb1State",
    "budget_ratio",
    "build_block",
    "build_environment",
    "change_test_end",
    "change_test_running",
    "decompose_regret",
    "dynamic_regret",
    "emit_plots",
    "errors",
    "evaluate_run",
    "fit_scaling",
    "format_block_schedule",
    "gen_drift",
    "gen_hard_instance",
    "gen_piecewise",
    "load_run_config",
    "on_demand_check",
    "per_phase_query_fractions",
    "resolve_active_sets",
    "rexp3b_params",
    "rho_hat",
    "run_experiment",
    "run_hyque",
    "run_length_stats",
    "run_rexp3b",
    "run_single",
    "sample_reward",
    "schedule_block",
    "split_batches",
    "total_variation",
    "validate_config",
]

__version__ = "0.1.0"
