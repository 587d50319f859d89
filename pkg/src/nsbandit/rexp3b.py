"""Known-variation algorithm: batched exponential weights with replay.

The horizon is cut into batches of ``batch_length`` rounds. Each batch
opens with a query phase of ``query_length`` rounds driven by
exponential weights (reset at the batch boundary), then replays arms
drawn uniformly from the multiset played during that query phase for
the remainder of the batch, at no feedback cost.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .config import BudgetLedger, ProblemConfig, RandomStream
from .environment import MeanSequence, sample_reward
from .errors import ConfigError, DegenerateBatching, VariationOutOfRange
from .logs import ActionLog
from .policies import Exp3State


@dataclass(frozen=True)
class Rexp3bParams:
    """Batch geometry and exploration rate."""

    batch_length: int  # rounds per batch
    query_length: int  # query rounds opening each batch
    exploration: float  # gamma in (0, 1]


def rexp3b_params(cfg: ProblemConfig) -> Rexp3bParams:
    """Derive batch sizes and exploration rate from a known drift budget.

        batch_length = T (K ln K)^(1/3) / (B^(1/3) V_T^(2/3)),  rounded,
        query_length = floor(B / T * batch_length),
        gamma        = min(1, sqrt(K ln K / ((e - 1) query_length))).

    The batch length is clamped to [1, T]; a query length flooring to
    zero is raised to one with a :class:`DegenerateBatching` warning.
    """
    cfg = cfg.validated()
    if cfg.variation_budget is None or cfg.variation_budget <= 0.0:
        raise VariationOutOfRange("batch sizing requires a positive variation budget")
    T, K, B = int(cfg.horizon), int(cfg.arms), int(cfg.query_budget)
    v = float(cfg.variation_budget)
    raw = T * (K * math.log(K)) ** (1.0 / 3.0) / (B ** (1.0 / 3.0) * v ** (2.0 / 3.0))
    batch_length = max(1, min(int(round(raw)), T))
    query_length = (B * batch_length) // T
    if query_length == 0:
        warnings.warn(
            f"query phase floored to 0 rounds (B={B}, T={T}, batch={batch_length}); using 1",
            DegenerateBatching,
        )
        query_length = 1
    gamma = min(1.0, math.sqrt(K * math.log(K) / ((math.e - 1.0) * query_length)))
    return Rexp3bParams(batch_length=batch_length, query_length=query_length, exploration=gamma)


def run_rexp3b(
    env: MeanSequence,
    cfg: ProblemConfig,
    stream: RandomStream,
    reset_per_batch: bool = True,
) -> ActionLog:
    """Run batched exponential weights over the full horizon.

    Weights reset at every batch boundary by default (``reset_per_batch=
    False`` keeps one weight vector alive across batches, for
    comparison). If rounding would let the nominal query phases overrun
    the budget, trailing query phases are shortened; total queries never
    exceed the budget. The log's phase column carries the batch index.
    """
    cfg = cfg.validated()
    T, K, B = int(cfg.horizon), int(cfg.arms), int(cfg.query_budget)
    if env.horizon != T or env.arms != K:
        raise ConfigError(
            f"environment is {env.horizon}x{env.arms}, config wants {T}x{K}"
        )
    params = rexp3b_params(cfg)
    ledger = BudgetLedger(cap=B)
    policy_rng = stream.spawn("policy").fresh_generator()
    replay_rng = stream.spawn("replay").fresh_generator()
    reward_stream = stream.spawn("environment")
    log = ActionLog(cfg, stream.seed, "rexp3b")

    exp3 = Exp3State(K, params.exploration)
    t = 1
    batch = 0
    while t <= T:
        batch += 1
        if reset_per_batch and batch > 1:
            exp3 = Exp3State(K, params.exploration)
        batch_stop = min(T, t + params.batch_length - 1)
        pool: list[int] = []
        key = (batch, 0, 0, 0)
        n_query = min(params.query_length, batch_stop - t + 1, ledger.remaining)
        for _ in range(n_query):
            arm, p_arm = exp3.sample(policy_rng)
            reward = sample_reward(env, t, arm, reward_stream, cfg.reward_law)
            ledger.record()
            exp3.update(arm, reward, p_arm)
            pool.append(arm)
            log.set_round(t, batch, 0, 0, 0, arm, True, False, reward)
            log.add_record(key, t, arm, math.nan, reward)
            t += 1
        while t <= batch_stop:
            if pool:
                arm = pool[int(replay_rng.integers(len(pool)))]
            else:
                # Budget exhausted exactly at a batch boundary: nothing to
                # replay, fall back to a uniform arm.
                arm = int(replay_rng.integers(K))
            log.set_round(t, batch, 0, 0, 0, arm, False, False, math.nan)
            t += 1

    log.check_complete()
    assert log.queries_used == ledger.used <= B
    return log
