"""Base learning policies run inside query batches.

Both policies expose the same minimal surface: ``select``-style methods
producing an arm plus (for UCB1) an optimistic index clamped to [0, 1],
and an ``update`` taking the observed reward. Any policy with that
surface can be slotted into the block scheduler in place of UCB1.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import RewardOutOfRange, ZeroProbability

# Renormalizing by the max weight leaves the probabilities unchanged and
# keeps exp() finite on long batches.
_WEIGHT_CEILING = 1e300


class Ucb1State:
    """UCB1 on the instance-local clock.

    The confidence bonus is ``sqrt(2 ln(local_time) / n_k)`` where
    ``local_time`` counts this instance's own observations, not the
    global round index: every scheduled instance is an independent run.
    """

    __slots__ = ("arms", "pull_counts", "reward_sums", "local_time")

    def __init__(self, arms: int):
        self.arms = int(arms)
        self.pull_counts = np.zeros(self.arms, dtype=np.int64)
        self.reward_sums = np.zeros(self.arms, dtype=np.float64)
        self.local_time = 0

    def select(self) -> tuple[int, float]:
        """Pick an arm and report the optimistic index, clamped to [0, 1].

        While any arm is unpulled, the lowest-id unpulled arm is forced
        and the reported index is 1.0. Afterwards the arm maximising
        ``mean + bonus`` wins, ties to the lowest id.
        """
        if self.local_time < self.arms:
            arm = int(np.argmax(self.pull_counts == 0))
            return arm, 1.0
        means = self.reward_sums / self.pull_counts
        bonus = np.sqrt(2.0 * math.log(self.local_time) / self.pull_counts)
        index = means + bonus
        arm = int(np.argmax(index))
        return arm, min(max(float(index[arm]), 0.0), 1.0)

    def update(self, arm: int, reward: float) -> "Ucb1State":
        if not (0.0 <= reward <= 1.0):
            raise RewardOutOfRange(f"reward {reward} outside [0, 1]")
        self.pull_counts[arm] += 1
        self.reward_sums[arm] += reward
        self.local_time += 1
        return self

    def mean(self, arm: int) -> float:
        n = self.pull_counts[arm]
        return float(self.reward_sums[arm] / n) if n else 0.0

    def state_dict(self) -> dict:
        """Plain-data snapshot for run checkpoints and debugging."""
        return {
            "kind": "ucb1",
            "arms": self.arms,
            "pull_counts": self.pull_counts.tolist(),
            "reward_sums": self.reward_sums.tolist(),
            "local_time": self.local_time,
        }


class Exp3State:
    """Exponential-weights policy with importance-weighted updates."""

    __slots__ = ("arms", "gamma", "weights")

    def __init__(self, arms: int, gamma: float):
        if not (0.0 < gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        self.arms = int(arms)
        self.gamma = float(gamma)
        self.weights = np.ones(self.arms, dtype=np.float64)

    def probabilities(self) -> np.ndarray:
        """Mixture of normalized weights with uniform exploration.

        Each entry is at least ``gamma / K`` and the vector sums to one
        up to float rounding.
        """
        w = self.weights
        return (1.0 - self.gamma) * (w / w.sum()) + self.gamma / self.arms

    def sample(self, rng: np.random.Generator) -> tuple[int, float]:
        """Draw an arm from the current distribution; returns (arm, p_arm)."""
        p = self.probabilities()
        u = rng.random() * p.sum()
        arm = int(np.searchsorted(np.cumsum(p), u, side="right"))
        arm = min(arm, self.arms - 1)
        return arm, float(p[arm])

    def update(self, arm: int, reward: float, prob_used: float) -> "Exp3State":
        """Importance-weighted exponential update for the played arm."""
        if prob_used <= 0.0:
            raise ZeroProbability(f"probability {prob_used} must be positive")
        if not (0.0 <= reward <= 1.0):
            raise RewardOutOfRange(f"reward {reward} outside [0, 1]")
        xhat = reward / prob_used
        self.weights[arm] *= math.exp(self.gamma * xhat / self.arms)
        top = self.weights.max()
        if top > _WEIGHT_CEILING:
            self.weights /= top
        return self

    def state_dict(self) -> dict:
        """Plain-data snapshot for run checkpoints and debugging."""
        return {
            "kind": "exp3",
            "arms": self.arms,
            "gamma": self.gamma,
            "weights": self.weights.tolist(),
        }
