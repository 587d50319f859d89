"""Per-round action logs produced by the run loops."""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np

from .config import ProblemConfig
from .errors import ConfigError


class ActionLog:
    """Complete per-round record of one run.

    Column arrays are indexed by round (``t = 1..T`` maps to ``t - 1``):
    owning instance coordinates (``phase``, ``block_scale``, ``scale``,
    ``offset``), the played ``arm``, whether the round was queried,
    whether that query came from on-demand conversion, and the observed
    reward (NaN on non-query rounds).

    ``records`` maps each instance key ``(phase, n, m, tau)`` to its
    chronological feedback history ``(t, arm, index, reward)`` -- the
    exact data its replay decisions were based on, kept for the regret
    decomposition.
    """

    def __init__(self, config: ProblemConfig, seed: int, algo: str):
        T = int(config.horizon)
        self.config = config
        self.seed = int(seed)
        self.algo = algo
        self.phase = np.zeros(T, dtype=np.int64)
        self.block_scale = np.zeros(T, dtype=np.int64)
        self.scale = np.zeros(T, dtype=np.int64)
        self.offset = np.zeros(T, dtype=np.int64)
        self.arm = np.full(T, -1, dtype=np.int64)
        self.query = np.zeros(T, dtype=bool)
        self.on_demand = np.zeros(T, dtype=bool)
        self.reward = np.full(T, np.nan, dtype=np.float64)
        self.records: dict[tuple[int, int, int, int], list[tuple[int, int, float, float]]] = {}

    @property
    def horizon(self) -> int:
        return self.arm.shape[0]

    @property
    def queries_used(self) -> int:
        return int(self.query.sum())

    @property
    def on_demand_used(self) -> int:
        return int(self.on_demand.sum())

    def set_round(
        self,
        t: int,
        phase: int,
        n: int,
        m: int,
        tau: int,
        arm: int,
        query: bool,
        on_demand: bool,
        reward: float,
    ) -> None:
        i = t - 1
        self.phase[i] = phase
        self.block_scale[i] = n
        self.scale[i] = m
        self.offset[i] = tau
        self.arm[i] = arm
        self.query[i] = query
        self.on_demand[i] = on_demand
        self.reward[i] = reward

    def add_record(
        self, key: tuple[int, int, int, int], t: int, arm: int, index: float, reward: float
    ) -> None:
        self.records.setdefault(key, []).append((t, arm, index, reward))

    def check_complete(self) -> None:
        if np.any(self.arm < 0):
            missing = int(np.argmax(self.arm < 0)) + 1
            raise ConfigError(f"log has no action at round {missing}")

    # CSV schema: t,phase,n,m,tau,arm,query,on_demand,reward
    # (arm 1-based, reward blank on non-query rounds).
    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.write_csv(fh)

    def write_csv(self, fh: io.TextIOBase) -> None:
        fh.write("t,phase,n,m,tau,arm,query,on_demand,reward\n")
        for i in range(self.horizon):
            r = self.reward[i]
            reward_txt = "" if math.isnan(r) else f"{r:.17g}"
            fh.write(
                f"{i + 1},{self.phase[i]},{self.block_scale[i]},{self.scale[i]},"
                f"{self.offset[i]},{self.arm[i] + 1},{int(self.query[i])},"
                f"{int(self.on_demand[i])},{reward_txt}\n"
            )

    @classmethod
    def read_csv_arrays(cls, path: str | Path) -> dict[str, np.ndarray]:
        """Load the per-round columns of a serialized log (records are not
        serialized and therefore not restored)."""
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            expected = ["t", "phase", "n", "m", "tau", "arm", "query", "on_demand", "reward"]
            if header != expected:
                raise ConfigError(f"{path}: expected header {','.join(expected)}")
            cols: dict[str, list] = {name: [] for name in expected}
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(",")
                for name, val in zip(expected, parts):
                    cols[name].append(val)
        out: dict[str, np.ndarray] = {}
        for name in ("t", "phase", "n", "m", "tau"):
            out[name] = np.array([int(v) for v in cols[name]], dtype=np.int64)
        out["arm"] = np.array([int(v) - 1 for v in cols["arm"]], dtype=np.int64)
        out["query"] = np.array([v == "1" for v in cols["query"]], dtype=bool)
        out["on_demand"] = np.array([v == "1" for v in cols["on_demand"]], dtype=bool)
        out["reward"] = np.array(
            [float(v) if v else math.nan for v in cols["reward"]], dtype=np.float64
        )
        return out
