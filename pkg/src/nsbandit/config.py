"""Problem configuration, query ledger, and deterministic randomness.

Conventions used throughout the package: rounds are 1-indexed
(``t = 1..T``), arms are 0-indexed in Python APIs and 1-indexed only in
CSV files, counters are 64-bit integers and all real arithmetic is
float64.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    BadConfidence,
    BudgetExceedsHorizon,
    BudgetExhausted,
    ConfigError,
    TooFewArms,
    VariationOutOfRange,
)

SEED_ENV_VAR = "NSBANDIT_SEED"

REWARD_LAWS = ("bernoulli", "uniform")
LOG_BASES = ("natural", "base2")
END_TEST_NORMALIZERS = ("scale", "count")


@dataclass(frozen=True)
class ProblemConfig:
    """One bandit problem: horizon, arms, query budget, confidence.

    ``variation_budget`` is optional; it is required only by generators
    and algorithms that assume the total drift is known.

    The trailing fields select implementation variants:

    * ``reward_law``: reward distribution with the given mean, either
      ``"bernoulli"`` or ``"uniform"`` (symmetric interval around the mean).
    * ``log_base``: logarithm used inside the detection radius,
      ``"natural"`` or ``"base2"``.
    * ``end_test_normalizer``: ``"scale"`` divides the end-of-batch test
      statistic by the nominal batch size ``2^m``; ``"count"`` divides by
      the recorded number of query rounds (sensitivity variant).
    * ``detection_scale``: multiplier on both change-test thresholds.
      1.0 keeps the analysis constants, which are far too conservative to
      ever fire at desk-scale horizons; small values make the tests
      responsive and are meant for sensitivity studies. Keep the scale
      above ``1 / (3 rho_hat(1))``: below that a single query record can
      trip a test, one-round phases appear, and the budget-feasibility
      guarantee no longer holds.
    """

    horizon: int
    arms: int
    query_budget: int
    confidence: float = 0.05
    variation_budget: float | None = None
    reward_law: str = "bernoulli"
    log_base: str = "natural"
    end_test_normalizer: str = "scale"
    detection_scale: float = 1.0

    def validated(self) -> "ProblemConfig":
        return validate_config(self)


def validate_config(cfg: ProblemConfig) -> ProblemConfig:
    """Check the configuration invariants and return the config unchanged.

    Raises :class:`TooFewArms`, :class:`BudgetExceedsHorizon`,
    :class:`BadConfidence`, :class:`VariationOutOfRange` or a generic
    :class:`ConfigError` on the first violated constraint.
    """
    if int(cfg.horizon) < 1:
        raise ConfigError(f"horizon must be positive, got {cfg.horizon}")
    if int(cfg.arms) < 2:
        raise TooFewArms(f"need at least 2 arms, got {cfg.arms}")
    if int(cfg.query_budget) < 1:
        raise ConfigError(f"query budget must be positive, got {cfg.query_budget}")
    if int(cfg.query_budget) > int(cfg.horizon):
        raise BudgetExceedsHorizon(
            f"query budget {cfg.query_budget} exceeds horizon {cfg.horizon}"
        )
    if not (0.0 < float(cfg.confidence) < 1.0):
        raise BadConfidence(f"confidence must lie in (0, 1), got {cfg.confidence}")
    if cfg.variation_budget is not None and float(cfg.variation_budget) < 0.0:
        raise VariationOutOfRange(
            f"variation budget must be nonnegative, got {cfg.variation_budget}"
        )
    if cfg.reward_law not in REWARD_LAWS:
        raise ConfigError(f"unknown reward law {cfg.reward_law!r}")
    if cfg.log_base not in LOG_BASES:
        raise ConfigError(f"unknown log base {cfg.log_base!r}")
    if cfg.end_test_normalizer not in END_TEST_NORMALIZERS:
        raise ConfigError(f"unknown end-test normalizer {cfg.end_test_normalizer!r}")
    if not (float(cfg.detection_scale) > 0.0):
        raise ConfigError(f"detection scale must be positive, got {cfg.detection_scale}")
    return cfg


def budget_ratio(cfg: ProblemConfig) -> int:
    """Number of rounds backing one baseline query: ``ceil(2T / B)``.

    Always at least 2 for valid configs (B <= T).
    """
    return -((-2 * int(cfg.horizon)) // int(cfg.query_budget))


class BudgetLedger:
    """Monotone counter of consumed queries with a hard cap.

    ``record()`` increments by exactly one and raises
    :class:`BudgetExhausted` at the cap; consumption is never refunded.
    """

    __slots__ = ("used", "cap")

    def __init__(self, cap: int, used: int = 0):
        if used < 0 or cap < 0 or used > cap:
            raise ConfigError(f"invalid ledger state used={used} cap={cap}")
        self.used = int(used)
        self.cap = int(cap)

    @property
    def remaining(self) -> int:
        return self.cap - self.used

    def record(self) -> int:
        """Consume one query and return the new count."""
        if self.used >= self.cap:
            raise BudgetExhausted(f"query budget cap {self.cap} already reached")
        self.used += 1
        return self.used

    def __repr__(self) -> str:
        return f"BudgetLedger(used={self.used}, cap={self.cap})"


def _digest64(seed: int, stream_id: str) -> tuple[int, int]:
    """Two stable 64-bit words derived from (seed, stream_id)."""
    raw = hashlib.sha256(f"{int(seed)}:{stream_id}".encode("utf-8")).digest()
    lo = int.from_bytes(raw[:8], "little")
    hi = int.from_bytes(raw[8:16], "little")
    return lo, hi


@dataclass(frozen=True)
class RandomStream:
    """A named, reproducible source of randomness.

    The same ``(seed, stream_id)`` pair always yields bit-identical
    draws; distinct ``stream_id`` values behave as independent streams,
    so e.g. changing how replay sampling consumes randomness cannot
    perturb environment draws.

    Two access patterns are provided:

    * :meth:`generator` -- a sequential ``numpy`` generator for draws
      whose order is fixed by the consumer (scheduling, replay, ...).
    * :meth:`value_at` -- a counter-addressed uniform in [0, 1), keyed by
      integer coordinates. Used for reward noise so that the draw for
      round ``t`` and arm ``k`` does not depend on the query pattern.
    """

    seed: int
    stream_id: str

    @cached_property
    def _key(self) -> tuple[int, int]:
        return _digest64(self.seed, self.stream_id)

    @cached_property
    def _rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._key)))

    def generator(self) -> np.random.Generator:
        """The stream's sequential generator (one shared instance)."""
        return self._rng

    def fresh_generator(self) -> np.random.Generator:
        """A new generator starting from the beginning of the stream."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._key)))

    def spawn(self, label: str) -> "RandomStream":
        """Derive an independent sub-stream named ``label``."""
        return RandomStream(self.seed, f"{self.stream_id}/{label}")

    def value_at(self, *coords: int) -> float:
        """Uniform [0, 1) addressed by integer coordinates."""
        counter = list(coords[:4]) + [0] * (4 - len(coords))
        bitgen = np.random.Philox(key=self._key, counter=counter)
        return float(np.random.Generator(bitgen).random())


@lru_cache(maxsize=None)
def _cached_stream(seed: int, stream_id: str) -> RandomStream:
    return RandomStream(seed, stream_id)


def stream_for(seed: int, stream_id: str) -> RandomStream:
    """Memoized stream lookup; equal names share the sequential generator."""
    return _cached_stream(int(seed), stream_id)


# --- run configuration files -------------------------------------------------

_CONFIG_KEYS = {
    "horizon",
    "arms",
    "query_budget",
    "confidence",
    "variation_budget",
    "reward_law",
    "log_base",
    "end_test_normalizer",
    "detection_scale",
}


@dataclass(frozen=True)
class RunConfig:
    """A parsed run-configuration file: problem, seed, environment section."""

    problem: ProblemConfig
    seed: int
    environment: dict = field(default_factory=dict)
    algorithm: str = "hyque"


def problem_from_mapping(data: dict) -> ProblemConfig:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "horizon" not in data or "arms" not in data or "query_budget" not in data:
        raise ConfigError("config requires horizon, arms and query_budget")
    cfg = ProblemConfig(
        horizon=int(data["horizon"]),
        arms=int(data["arms"]),
        query_budget=int(data["query_budget"]),
        confidence=float(data.get("confidence", 0.05)),
        variation_budget=(
            None
            if data.get("variation_budget") is None
            else float(data["variation_budget"])
        ),
        reward_law=data.get("reward_law", "bernoulli"),
        log_base=data.get("log_base", "natural"),
        end_test_normalizer=data.get("end_test_normalizer", "scale"),
        detection_scale=float(data.get("detection_scale", 1.0)),
    )
    return validate_config(cfg)


def resolve_seed(configured: int | None) -> int:
    """Apply the ``NSBANDIT_SEED`` environment override, if set."""
    override = os.environ.get(SEED_ENV_VAR)
    if override is not None:
        try:
            return int(override)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {override!r}") from exc
    if configured is None:
        return 0
    return int(configured)


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a YAML run configuration.

    Top-level keys are the :class:`ProblemConfig` fields plus ``seed``,
    ``algorithm`` and a nested ``environment`` section. The environment
    variable ``NSBANDIT_SEED`` overrides the configured seed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    data = dict(data)
    seed = resolve_seed(data.pop("seed", None))
    environment = data.pop("environment", {}) or {}
    if not isinstance(environment, dict):
        raise ConfigError(f"{path}: environment must be a mapping")
    algorithm = data.pop("algorithm", "hyque")
    if algorithm not in ("hyque", "rexp3b"):
        raise ConfigError(f"{path}: unknown algorithm {algorithm!r}")
    problem = problem_from_mapping(data)
    return RunConfig(problem=problem, seed=seed, environment=environment, algorithm=algorithm)


def with_updates(cfg: ProblemConfig, **changes) -> ProblemConfig:
    """Functional update helper that re-validates the result."""
    return validate_config(replace(cfg, **changes))
