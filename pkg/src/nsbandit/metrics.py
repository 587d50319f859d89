"""Regret computation, its query/error/drift split, and run statistics.

All metrics are pure functions of a completed log and the true mean
matrix; recomputation yields identical results.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .environment import MeanSequence
from .errors import ConfigError, NonPositiveInput
from .logs import ActionLog


@dataclass
class RunLengthStats:
    """Maximal consecutive query / non-query runs, within block bounds."""

    max_nonquery_run: int
    max_query_run: int
    histogram: dict[str, Counter]


@dataclass
class RegretReport:
    """Regret totals, their decomposition, and budget statistics."""

    total: float
    query_part: float
    error_part: float
    drift_part: float
    queries_used: int
    on_demand_used: int
    max_nonquery_run: int
    max_query_run: int
    per_phase_query_fractions: list[float] = field(default_factory=list)


def dynamic_regret(log: ActionLog, seq: MeanSequence, realized: bool = False) -> float:
    """Cumulative gap to the per-round optimal expected reward.

    The default compares true means along the realized action sequence
    (pseudo-regret), which removes reward-sampling noise. With
    ``realized=True``, observed rewards replace the means on query
    rounds.
    """
    if log.horizon != seq.horizon:
        raise ConfigError(f"log covers {log.horizon} rounds, environment {seq.horizon}")
    best = seq.best_means()
    chosen = seq.means[np.arange(seq.horizon), log.arm]
    if realized:
        observed = ~np.isnan(log.reward)
        chosen = np.where(observed, log.reward, chosen)
    return float(best.sum() - chosen.sum())


def _benchmark_tables(log: ActionLog) -> dict:
    """Per instance: record rounds plus, after each record, the running
    best per-arm empirical mean (the replay-time benchmark)."""
    tables = {}
    K = int(log.config.arms)
    for key, records in log.records.items():
        rounds = []
        bench = []
        counts = np.zeros(K, dtype=np.int64)
        sums = np.zeros(K, dtype=np.float64)
        for t, arm, _index, reward in records:
            counts[arm] += 1
            sums[arm] += reward
            seen = counts > 0
            rounds.append(t)
            bench.append(float((sums[seen] / counts[seen]).max()))
        tables[key] = (rounds, bench)
    return tables


def decompose_regret(log: ActionLog, seq: MeanSequence) -> tuple[float, float, float]:
    """Split pseudo-regret into query, error and drift parts.

    Query rounds contribute their per-round regret directly. For each
    non-query round, the benchmark is the empirically best arm -- the
    highest per-arm average over the feedback the owning instance had
    recorded strictly before that round (the data its replay draws were
    shaped by). The error part charges the gap from that benchmark to
    the played arm's true mean; the drift part charges the remaining gap
    from the per-round optimum to the benchmark. The three parts sum to
    the total dynamic regret identically.
    """
    if log.horizon != seq.horizon:
        raise ConfigError(f"log covers {log.horizon} rounds, environment {seq.horizon}")
    best = seq.best_means()
    chosen = seq.means[np.arange(seq.horizon), log.arm]
    tables = _benchmark_tables(log)

    query_part = float((best[log.query] - chosen[log.query]).sum())
    error_part = 0.0
    drift_part = 0.0
    nonquery = np.nonzero(~log.query)[0]
    for i in nonquery:
        t = int(i) + 1
        key = (int(log.phase[i]), int(log.block_scale[i]), int(log.scale[i]), int(log.offset[i]))
        rounds, bench = tables[key]
        pos = bisect.bisect_left(rounds, t)
        if pos == 0:
            # Unreachable for prefix-batched instances; benchmark falls
            # back to zero if a replay round somehow precedes feedback.
            benchmark = 0.0
        else:
            benchmark = bench[pos - 1]
        error_part += benchmark - chosen[i]
        drift_part += best[i] - benchmark
    return query_part, error_part, drift_part


def run_length_stats(log_or_arrays) -> RunLengthStats:
    """Longest query and non-query runs, never spanning block boundaries.

    Accepts an :class:`ActionLog` or the column dict produced by
    ``ActionLog.read_csv_arrays``. Blocks are maximal spans with a
    constant (phase, block-scale) pair.
    """
    if isinstance(log_or_arrays, ActionLog):
        phase = log_or_arrays.phase
        scale = log_or_arrays.block_scale
        query = log_or_arrays.query
    else:
        phase = log_or_arrays["phase"]
        scale = log_or_arrays["n"]
        query = log_or_arrays["query"]
    hist = {"query": Counter(), "nonquery": Counter()}
    max_q = 0
    max_nq = 0
    T = len(query)
    i = 0
    while i < T:
        j = i
        run_is_query = bool(query[i])
        while (
            j + 1 < T
            and bool(query[j + 1]) == run_is_query
            and phase[j + 1] == phase[i]
            and scale[j + 1] == scale[i]
        ):
            j += 1
        run = j - i + 1
        if run_is_query:
            hist["query"][run] += 1
            max_q = max(max_q, run)
        else:
            hist["nonquery"][run] += 1
            max_nq = max(max_nq, run)
        i = j + 1
    return RunLengthStats(max_nonquery_run=max_nq, max_query_run=max_q, histogram=hist)


def per_phase_query_fractions(log: ActionLog) -> list[float]:
    """Baseline (non-converted) query fraction of each phase, in order."""
    fractions = []
    for p in np.unique(log.phase):
        in_phase = log.phase == p
        rounds = int(in_phase.sum())
        baseline = int((log.query & ~log.on_demand & in_phase).sum())
        fractions.append(baseline / rounds)
    return fractions


def fit_scaling(points: list[tuple[float, float]]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    if len(points) < 3:
        raise NonPositiveInput(f"need at least 3 points to fit, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise NonPositiveInput("log-log fit requires strictly positive coordinates")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def evaluate_run(log: ActionLog, seq: MeanSequence) -> RegretReport:
    """Assemble the full report for one completed run."""
    total = dynamic_regret(log, seq)
    q, e, d = decompose_regret(log, seq)
    runs = run_length_stats(log)
    return RegretReport(
        total=total,
        query_part=q,
        error_part=e,
        drift_part=d,
        queries_used=log.queries_used,
        on_demand_used=log.on_demand_used,
        max_nonquery_run=runs.max_nonquery_run,
        max_query_run=runs.max_query_run,
        per_phase_query_fractions=per_phase_query_fractions(log),
    )


RESULTS_HEADER = "seed,T,K,B,V_T,algo,R_T,R_query,R_error,R_drift,queries,max_nq_run,max_q_run"


def report_csv_row(seed: int, cfg, algo: str, report: RegretReport) -> str:
    v = "" if cfg.variation_budget is None else f"{cfg.variation_budget:.17g}"
    return (
        f"{seed},{cfg.horizon},{cfg.arms},{cfg.query_budget},{v},{algo},"
        f"{report.total:.17g},{report.query_part:.17g},{report.error_part:.17g},"
        f"{report.drift_part:.17g},{report.queries_used},"
        f"{report.max_nonquery_run},{report.max_query_run}"
    )
