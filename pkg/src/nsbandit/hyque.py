"""Hybrid query controller: phased blocks, change tests, demand pacing.

The run loop walks phases of geometrically growing blocks (scales
``n = 0, 1, 2, ...``). On a query round the owning instance's UCB1 plays
and observes; two environmental-change tests then run, and a failure
abandons the rest of the block and starts a new phase at scale 0. On a
non-query round the instance replays its query-batch frequencies, unless
cumulative query usage has fallen behind the near-linear pacing target,
in which case the round is converted on demand into an extra query round
for the owning instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import count

from .baque import build_block
from .config import BudgetLedger, ProblemConfig, RandomStream, budget_ratio
from .environment import MeanSequence, sample_reward
from .errors import ConfigError
from .logs import ActionLog


@lru_cache(maxsize=None)
def _rho_hat(t_count: int, horizon: int, arms: int, confidence: float, base: str) -> float:
    log = math.log if base == "natural" else math.log2
    multiplier = 6.0 * (log(horizon) + 1.0) * log(horizon / confidence)
    radius = math.sqrt(arms * log(t_count) / t_count) + arms / t_count
    return multiplier * radius


def rho_hat(t_count: int, cfg: ProblemConfig) -> float:
    """Confidence radius used by both change tests.

    ``6 (log T + 1) log(T / delta) (sqrt(K log t / t) + K / t)`` with the
    logarithm base taken from the config. At ``t_count = 1`` the square
    root term vanishes and the value is the multiplier times K.
    """
    if t_count < 1:
        raise ConfigError(f"t_count must be >= 1, got {t_count}")
    return _rho_hat(
        int(t_count), int(cfg.horizon), int(cfg.arms), float(cfg.confidence), cfg.log_base
    )


@dataclass
class DetectionState:
    """Feedback history of one instance inside the current phase.

    Keeps the running statistics both tests need: the count, reward and
    index sums, and the minimum optimistic index seen so far (``min_index``
    is the reference level the end-of-batch test compares against).
    """

    rounds: list[int] = field(default_factory=list)
    indices: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    sum_index: float = 0.0
    sum_reward: float = 0.0
    min_index: float = math.inf

    @property
    def count(self) -> int:
        return len(self.rounds)

    def record(self, t: int, index: float, reward: float) -> None:
        self.rounds.append(t)
        self.indices.append(index)
        self.rewards.append(reward)
        self.sum_index += index
        self.sum_reward += reward
        if index < self.min_index:
            self.min_index = index


def change_test_end(det: DetectionState, m: int, cfg: ProblemConfig) -> bool:
    """End-of-batch test; True means *fail* (restart).

    Fails when the instance's summed query rewards, normalized by the
    nominal batch size ``2^m`` (or by the recorded count in the
    ``"count"`` sensitivity variant), reach the minimum optimistic index
    plus ``9 rho_hat(2^m)``. Rewards well above what the policy ever
    estimated indicate the environment improved under it.
    """
    if det.count == 0:
        return False
    norm = float(2**m) if cfg.end_test_normalizer == "scale" else float(det.count)
    statistic = det.sum_reward / norm
    threshold = det.min_index + 9.0 * rho_hat(2**m, cfg) * cfg.detection_scale
    return statistic >= threshold


def change_test_running(det: DetectionState, cfg: ProblemConfig) -> bool:
    """Per-query-round test; True means *fail* (restart).

    Fails when the average optimism gap (index minus observed reward)
    over the instance's recorded query rounds reaches
    ``3 rho_hat(count)``: rewards falling far below the policy's
    estimates indicate the environment degraded under it.
    """
    if det.count == 0:
        return False
    statistic = (det.sum_index - det.sum_reward) / det.count
    threshold = 3.0 * rho_hat(det.count, cfg) * cfg.detection_scale
    return statistic >= threshold


def on_demand_check(ledger: BudgetLedger, t: int, n: int, cfg: ProblemConfig) -> bool:
    """Whether to convert the current non-query round into a query round.

    Converts when usage trails the pacing target ``t B / T`` by more than
    the buffer ``min(T / sqrt(B), 2^n, T - t)``; the buffer absorbs the
    longest query run a block can produce and keeps the endgame feasible.
    """
    T = int(cfg.horizon)
    B = int(cfg.query_budget)
    buffer = min(T / math.sqrt(B), float(2**n), float(T - t))
    return ledger.used < t * B / T - buffer


@dataclass
class DetectionTraceRow:
    """One query round's detection statistics (for the trace dump)."""

    t: int
    phase: int
    block_scale: int
    scale: int
    offset: int
    count: int
    min_index: float
    rho: float
    running_stat: float
    running_threshold: float
    end_stat: float | None
    end_threshold: float | None
    failed: bool


def run_hyque(
    env: MeanSequence,
    cfg: ProblemConfig,
    stream: RandomStream,
    trace: list[DetectionTraceRow] | None = None,
    policy_factory=None,
) -> ActionLog:
    """Run the hybrid controller over the full horizon.

    Randomness is split into fixed sub-streams of ``stream`` (scheduling
    draws, replay sampling, reward noise), so runs are reproducible and
    the consumers are mutually independent. Returns the completed
    :class:`ActionLog`; total queries never exceed the budget.
    """
    cfg = cfg.validated()
    T, K, B = int(cfg.horizon), int(cfg.arms), int(cfg.query_budget)
    if env.horizon != T or env.arms != K:
        raise ConfigError(
            f"environment is {env.horizon}x{env.arms}, config wants {T}x{K}"
        )
    b = budget_ratio(cfg)
    ledger = BudgetLedger(cap=B)
    sched_rng = stream.spawn("scheduler").fresh_generator()
    replay_rng = stream.spawn("replay").fresh_generator()
    reward_stream = stream.spawn("environment")
    log = ActionLog(cfg, stream.seed, "hyque")

    t = 1
    phase = 0
    while t <= T:
        restart = False
        for n in count(0):
            t_n = t
            length = min(b * 2**n, T - t_n + 1)
            block = build_block(
                n, b, K, sched_rng, length=length, policy_factory=policy_factory
            )
            detections = [DetectionState() for _ in block.instances]
            batch_end = [
                (t_n - 1 + inst.query_rounds[-1]) if inst.query_rounds else -1
                for inst in block.instances
            ]
            for rel in range(length):
                idx = int(block.owner[rel])
                inst = block.instances[idx]
                m, tau = inst.id.scale, inst.id.offset
                queried = bool(block.is_query[rel])
                converted = False
                if not queried and on_demand_check(ledger, t, n, cfg):
                    queried = True
                    converted = True
                if queried:
                    arm, g_index = inst.policy.select()
                    reward = sample_reward(env, t, arm, reward_stream, cfg.reward_law)
                    ledger.record()
                    inst.policy.update(arm, reward)
                    inst.record_query(arm)
                    det = detections[idx]
                    det.record(t, g_index, reward)
                    log.set_round(t, phase, n, m, tau, arm, True, converted, reward)
                    log.add_record((phase, n, m, tau), t, arm, g_index, reward)
                    failed = change_test_running(det, cfg)
                    at_batch_end = t == batch_end[idx]
                    if at_batch_end:
                        failed = change_test_end(det, m, cfg) or failed
                    if trace is not None:
                        run_stat = (det.sum_index - det.sum_reward) / det.count
                        norm = (
                            float(2**m)
                            if cfg.end_test_normalizer == "scale"
                            else float(det.count)
                        )
                        trace.append(
                            DetectionTraceRow(
                                t=t,
                                phase=phase,
                                block_scale=n,
                                scale=m,
                                offset=tau,
                                count=det.count,
                                min_index=det.min_index,
                                rho=rho_hat(det.count, cfg),
                                running_stat=run_stat,
                                running_threshold=3.0
                                * rho_hat(det.count, cfg)
                                * cfg.detection_scale,
                                end_stat=(det.sum_reward / norm) if at_batch_end else None,
                                end_threshold=(
                                    det.min_index
                                    + 9.0 * rho_hat(2**m, cfg) * cfg.detection_scale
                                )
                                if at_batch_end
                                else None,
                                failed=failed,
                            )
                        )
                    t += 1
                    if failed:
                        phase += 1
                        restart = True
                        break
                else:
                    arm = inst.replay_arm(replay_rng)
                    log.set_round(t, phase, n, m, tau, arm, False, False, math.nan)
                    t += 1
            if restart or t > T:
                break

    log.check_complete()
    assert log.queries_used == ledger.used <= B
    return log
