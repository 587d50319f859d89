"""Non-stationary reward processes with controlled total variation.

A :class:`MeanSequence` stores the full matrix of true expected rewards,
one row per round and one column per arm, every entry in [0, 1]. The
generators below produce matrices whose total variation

    sum_{t=1}^{T-1}  max_k | mu[t+1, k] - mu[t, k] |

respects a given drift budget, including the periodic two-level
construction used as a worst-case stress instance.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ProblemConfig, RandomStream
from .errors import (
    ConfigError,
    DegenerateInstance,
    InfeasibleVariation,
    VariationOutOfRange,
)


class MeanSequence:
    """Immutable T x K matrix of expected rewards in [0, 1].

    Rounds are addressed 1-based (``t = 1..T``), arms 0-based.
    """

    def __init__(self, means: np.ndarray):
        arr = np.asarray(means, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ConfigError(f"means must be a T x K matrix, got shape {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise ConfigError("mean rewards must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        self._means = arr

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def horizon(self) -> int:
        return self._means.shape[0]

    @property
    def arms(self) -> int:
        return self._means.shape[1]

    def mean(self, t: int, k: int) -> float:
        """Expected reward of arm ``k`` at round ``t`` (1-based)."""
        return float(self._means[t - 1, k])

    def best_means(self) -> np.ndarray:
        """Per-round optimal expected reward, shape (T,)."""
        return self._means.max(axis=1)

    def __repr__(self) -> str:
        return f"MeanSequence(T={self.horizon}, K={self.arms})"

    # CSV round-trip: header `t,arm_1..arm_K`, one row per round,
    # 17-significant-digit decimals (lossless for float64).
    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.write_csv(fh)

    def write_csv(self, fh: io.TextIOBase) -> None:
        header = "t," + ",".join(f"arm_{k + 1}" for k in range(self.arms))
        fh.write(header + "\n")
        for t in range(self.horizon):
            row = ",".join(f"{v:.17g}" for v in self._means[t])
            fh.write(f"{t + 1},{row}\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "MeanSequence":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if len(header) < 2 or header[0] != "t":
                raise ConfigError(f"{path}: expected header t,arm_1,...")
            rows = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != len(header):
                    raise ConfigError(f"{path}: ragged row {parts[0]}")
                rows.append([float(v) for v in parts[1:]])
        return cls(np.array(rows, dtype=np.float64))


def total_variation(seq: MeanSequence) -> float:
    """Total drift: sum over t of the per-round supremum mean change."""
    m = seq.means
    if m.shape[0] < 2:
        return 0.0
    return float(np.abs(np.diff(m, axis=0)).max(axis=1).sum())


@dataclass(frozen=True)
class HardInstanceParams:
    """Parameters of one generated worst-case instance.

    Within each batch of ``batch_length`` rounds exactly one arm (the
    batch's entry in ``good_arms``) has mean ``1/2 + gap``; all other
    arms sit at ``1/2``.
    """

    batch_length: int
    gap: float
    good_arms: tuple[int, ...]
    batch_count: int


def gen_piecewise(
    cfg: ProblemConfig,
    segment_count: int,
    gap_scale: float,
    stream: RandomStream,
) -> MeanSequence:
    """Piecewise-stationary environment with a rotating best arm.

    The horizon is split into ``segment_count`` near-equal segments. In
    each segment one arm sits at ``1/2 + g/2`` and the rest at
    ``1/2 - g/2``; the identity of the high arm advances cyclically from
    a random start, so each boundary changes the supremum mean by
    exactly ``g``. ``g`` equals ``gap_scale``, shrunk if necessary so the
    total variation stays within the configured drift budget.
    """
    T, K = int(cfg.horizon), int(cfg.arms)
    if not (1 <= segment_count <= T):
        raise ConfigError(f"segment_count must lie in [1, {T}], got {segment_count}")
    if not (0.0 <= gap_scale <= 1.0):
        raise InfeasibleVariation(
            f"gap_scale {gap_scale} cannot fit a mean jump inside [0, 1]"
        )
    gap = float(gap_scale)
    if cfg.variation_budget is not None and segment_count > 1:
        gap = min(gap, float(cfg.variation_budget) / (segment_count - 1))

    lo, hi = 0.5 - gap / 2.0, 0.5 + gap / 2.0
    rng = stream.generator()
    start = int(rng.integers(K))

    means = np.full((T, K), lo, dtype=np.float64)
    base, extra = divmod(T, segment_count)
    row = 0
    for s in range(segment_count):
        length = base + (1 if s < extra else 0)
        means[row : row + length, (start + s) % K] = hi
        row += length
    return MeanSequence(means)


def gen_drift(cfg: ProblemConfig, stream: RandomStream) -> MeanSequence:
    """Smooth random-walk drift whose total variation is exactly V_T.

    Every arm takes a step of fixed size ``V_T / (T - 1)`` in a random
    direction each round; steps that would leave [0, 1] are reflected,
    so the per-round supremum change is exactly the step size and the
    realised variation matches the budget to float rounding.
    """
    if cfg.variation_budget is None:
        raise VariationOutOfRange("drift generation requires a variation budget")
    T, K = int(cfg.horizon), int(cfg.arms)
    v = float(cfg.variation_budget)
    rng = stream.generator()
    if T == 1 or v == 0.0:
        if v > 0.0 and T == 1:
            raise InfeasibleVariation("cannot place positive variation on a 1-round horizon")
        row = rng.uniform(0.0, 1.0, size=K)
        return MeanSequence(np.tile(row, (T, 1)))

    step = v / (T - 1)
    if step > 0.5:
        raise InfeasibleVariation(
            f"per-round step {step:.3g} too large to reflect inside [0, 1]"
        )
    means = np.empty((T, K), dtype=np.float64)
    means[0] = rng.uniform(0.0, 1.0, size=K)
    for t in range(1, T):
        direction = rng.integers(0, 2, size=K) * 2 - 1
        nxt = means[t - 1] + direction * step
        high = nxt > 1.0
        low = nxt < 0.0
        nxt[high] = means[t - 1, high] - step
        nxt[low] = means[t - 1, low] + step
        means[t] = nxt
    return MeanSequence(means)


def gen_hard_instance(
    cfg: ProblemConfig, stream: RandomStream
) -> tuple[MeanSequence, HardInstanceParams]:
    """Periodic two-level instance balancing drift against query budget.

    The batch length and gap are chosen as

        delta = round( (K T^3 / (1920 V_T^2 B))^(1/3) ),  clamped to [2, T/2]
        gap   = min( 1/4, (K V_T / (1920 B))^(1/3) )

    and the gap is further shrunk, if rounding made the batch count too
    large, so that the realised total variation cannot exceed V_T. The
    good arm of each batch is drawn uniformly from the stream.
    """
    T, K, B = int(cfg.horizon), int(cfg.arms), int(cfg.query_budget)
    if cfg.variation_budget is None:
        raise VariationOutOfRange("hard-instance generation requires a variation budget")
    v = float(cfg.variation_budget)
    if B < K:
        raise ConfigError(f"hard instance needs query budget >= arms, got B={B} < K={K}")
    if not (1.0 / K <= v <= B / K):
        raise VariationOutOfRange(
            f"variation budget {v} outside hard-instance range [{1.0 / K}, {B / K}]"
        )

    delta_real = (K * T**3 / (1920.0 * v * v * B)) ** (1.0 / 3.0)
    delta = int(round(delta_real))
    if delta >= T or T < 4:
        raise DegenerateInstance(
            f"batch length {delta} leaves fewer than 2 batches at horizon {T}"
        )
    delta = max(2, min(delta, T // 2))
    gap = min(0.25, (K * v / (1920.0 * B)) ** (1.0 / 3.0))
    batch_count = -(-T // delta)
    if batch_count > 1:
        # Rounding delta down can raise the batch count past what the
        # real-valued choice assumed; keep (batch_count - 1) * gap <= V_T.
        gap = min(gap, v / (batch_count - 1))

    rng = stream.generator()
    good_arms = tuple(int(a) for a in rng.integers(0, K, size=batch_count))

    means = np.full((T, K), 0.5, dtype=np.float64)
    for j in range(batch_count):
        start = j * delta
        stop = min((j + 1) * delta, T)
        means[start:stop, good_arms[j]] = 0.5 + gap
    params = HardInstanceParams(
        batch_length=delta, gap=gap, good_arms=good_arms, batch_count=batch_count
    )
    return MeanSequence(means), params


def sample_reward(
    seq: MeanSequence,
    t: int,
    k: int,
    stream: RandomStream,
    law: str = "bernoulli",
) -> float:
    """One reward draw for arm ``k`` at round ``t`` with mean ``mu[t, k]``.

    Draws are addressed by ``(t, k)`` on the stream, so the value for a
    given round and arm is independent of how many other draws were made.
    ``bernoulli`` maximises variance; ``uniform`` draws from the widest
    symmetric interval around the mean that fits inside [0, 1].
    """
    mu = seq.mean(t, k)
    u = stream.value_at(t, k)
    if law == "bernoulli":
        return 1.0 if u < mu else 0.0
    if law == "uniform":
        radius = min(mu, 1.0 - mu)
        return mu + (2.0 * u - 1.0) * radius
    raise ConfigError(f"unknown reward law {law!r}")
