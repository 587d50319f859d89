"""Experiment orchestration: sweep grids, seed fan-out, CSV and plots.

An experiment spec names one algorithm, one environment family and a
grid of problem sizes; every grid point is run for a block of seeds with
derived random streams, producing one results row per run plus a
per-grid-point summary. Outputs are deterministic functions of the spec
and the base seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np
import yaml

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .config import (
    ProblemConfig,
    RandomStream,
    resolve_seed,
    validate_config,
)
from .environment import MeanSequence, gen_drift, gen_hard_instance, gen_piecewise
from .errors import ConfigError, MissingColumns, NonPositiveInput
from .hyque import run_hyque
from .logs import ActionLog
from .metrics import (
    RESULTS_HEADER,
    RegretReport,
    evaluate_run,
    fit_scaling,
    report_csv_row,
)
from .rexp3b import run_rexp3b

ENV_KINDS = ("piecewise", "drift", "hard_instance", "file")
ALGORITHMS = ("hyque", "rexp3b")

# Default piecewise environment: one abrupt change at mid-horizon with
# the largest gap the drift budget allows (capped at a full unit jump).
PIECEWISE_DEFAULT_SEGMENTS = 2
PIECEWISE_DEFAULT_GAP = 1.0


@dataclass
class ExperimentSpec:
    """Parsed experiment description."""

    algorithm: str
    environment: dict
    grid: dict  # keys T, K, B, V_T -> lists of values
    seed_count: int
    base_seed: int
    output_dir: Path
    confidence: float = 0.05
    reward_law: str = "bernoulli"
    log_base: str = "natural"
    detection_scale: float = 1.0
    name: str = "experiment"

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        try:
            grid = data["grid"]
            seeds = data.get("seeds", {})
            spec = cls(
                algorithm=data["algorithm"],
                environment=dict(data.get("environment", {})),
                grid={k: list(v) for k, v in grid.items()},
                seed_count=int(seeds.get("count", 1)),
                base_seed=resolve_seed(seeds.get("base", 0)),
                output_dir=Path(data.get("output_dir", "results")),
                confidence=float(data.get("confidence", 0.05)),
                reward_law=data.get("reward_law", "bernoulli"),
                log_base=data.get("log_base", "natural"),
                detection_scale=float(data.get("detection_scale", 1.0)),
                name=data.get("name", Path(path).stem),
            )
        except KeyError as exc:
            raise ConfigError(f"{path}: missing required key {exc}") from exc
        spec.validate()
        return spec

    def grid_points(self) -> list[dict]:
        """Cartesian product over T, K, B, V_T in a fixed order."""
        ts = self.grid.get("T")
        ks = self.grid.get("K")
        bs = self.grid.get("B")
        if not ts or not ks or not bs:
            raise ConfigError("grid requires non-empty T, K and B lists")
        vs = self.grid.get("V_T", [None])
        points = []
        for T, K, B, V in product(ts, ks, bs, vs):
            points.append({"T": int(T), "K": int(K), "B": int(B),
                           "V_T": None if V is None else float(V)})
        return points

    def config_for(self, point: dict) -> ProblemConfig:
        return validate_config(
            ProblemConfig(
                horizon=point["T"],
                arms=point["K"],
                query_budget=point["B"],
                confidence=self.confidence,
                variation_budget=point["V_T"],
                reward_law=self.reward_law,
                log_base=self.log_base,
                detection_scale=self.detection_scale,
            )
        )

    def validate(self) -> "ExperimentSpec":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        kind = self.environment.get("kind", "piecewise")
        if kind not in ENV_KINDS:
            raise ConfigError(f"unknown environment kind {kind!r}")
        if self.seed_count < 1:
            raise ConfigError(f"seed count must be positive, got {self.seed_count}")
        if kind == "file" and not Path(self.environment.get("path", "")).exists():
            raise ConfigError(f"environment file not found: {self.environment.get('path')}")
        for point in self.grid_points():
            self.config_for(point)
        return self


def build_environment(
    env_section: dict, cfg: ProblemConfig, stream: RandomStream
) -> MeanSequence:
    """Instantiate the environment named by a spec's environment section."""
    kind = env_section.get("kind", "piecewise")
    if kind == "piecewise":
        return gen_piecewise(
            cfg,
            segment_count=int(env_section.get("segment_count", PIECEWISE_DEFAULT_SEGMENTS)),
            gap_scale=float(env_section.get("gap_scale", PIECEWISE_DEFAULT_GAP)),
            stream=stream,
        )
    if kind == "drift":
        return gen_drift(cfg, stream)
    if kind == "hard_instance":
        seq, _params = gen_hard_instance(cfg, stream)
        return seq
    if kind == "file":
        seq = MeanSequence.from_csv(env_section["path"])
        if seq.horizon != cfg.horizon or seq.arms != cfg.arms:
            raise ConfigError(
                f"file environment is {seq.horizon}x{seq.arms}, "
                f"config wants {cfg.horizon}x{cfg.arms}"
            )
        return seq
    raise ConfigError(f"unknown environment kind {kind!r}")


def run_single(
    algorithm: str, cfg: ProblemConfig, env: MeanSequence, stream: RandomStream
) -> tuple[ActionLog, RegretReport]:
    """One (config, environment, stream) run plus its report."""
    if algorithm == "hyque":
        log = run_hyque(env, cfg, stream)
    elif algorithm == "rexp3b":
        log = run_rexp3b(env, cfg, stream)
    else:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    return log, evaluate_run(log, env)


def _pooled_run(args) -> tuple[int, RegretReport]:
    algorithm, cfg, env, seed, gi = args
    _log, report = run_single(algorithm, cfg, env, RandomStream(seed, f"grid{gi}/run"))
    return seed, report


SUMMARY_HEADER = "T,K,B,V_T,algo,runs,mean_regret,stderr_regret,mean_queries"


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> tuple[Path, Path]:
    """Execute every (grid point x seed) run and persist results.

    Rows appear in deterministic (grid, seed) order whether runs execute
    sequentially (default) or on a process pool (``workers > 1``); each
    run owns its streams and ledger, and results merge in submission
    order. The environment for a grid point is derived from the base
    seed and the grid index alone, so all seeds of one point compete on
    the same mean sequence; reward noise and algorithm randomness vary
    per seed.
    """
    spec.validate()
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"

    jobs = []
    grid_cfgs = []
    for gi, point in enumerate(spec.grid_points()):
        cfg = spec.config_for(point)
        grid_cfgs.append(cfg)
        env_stream = RandomStream(spec.base_seed, f"grid{gi}/environment")
        env = build_environment(spec.environment, cfg, env_stream)
        for si in range(spec.seed_count):
            jobs.append((spec.algorithm, cfg, env, spec.base_seed + si, gi))

    if workers is not None and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_pooled_run, jobs))
    else:
        outcomes = [_pooled_run(job) for job in jobs]

    rows = []
    summaries = []
    for gi, cfg in enumerate(grid_cfgs):
        block = outcomes[gi * spec.seed_count : (gi + 1) * spec.seed_count]
        regrets = [rep.total for _, rep in block]
        queries = [rep.queries_used for _, rep in block]
        for seed, rep in block:
            rows.append(report_csv_row(seed, cfg, spec.algorithm, rep))
        mean = float(np.mean(regrets))
        stderr = float(np.std(regrets, ddof=1) / math.sqrt(len(regrets))) if len(regrets) > 1 else 0.0
        v = "" if cfg.variation_budget is None else f"{cfg.variation_budget:.17g}"
        summaries.append(
            f"{cfg.horizon},{cfg.arms},{cfg.query_budget},{v},{spec.algorithm},"
            f"{len(regrets)},{mean:.17g},{stderr:.17g},{float(np.mean(queries)):.17g}"
        )

    with open(results_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RESULTS_HEADER + "\n")
        fh.writelines(row + "\n" for row in rows)
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        fh.writelines(row + "\n" for row in summaries)
    return results_path, summary_path


def _read_csv(path: str | Path) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols: dict[str, list[str]] = {name: [] for name in header}
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            for name, val in zip(header, line.split(",")):
                cols[name].append(val)
    return cols


PLOT_KINDS = ("regret_vs_B", "regret_vs_V", "regret_vs_T", "budget_trace")

_X_COLUMN = {"regret_vs_B": "B", "regret_vs_V": "V_T", "regret_vs_T": "T"}


def emit_plots(
    results_path: str | Path,
    kind: str,
    out_path: str | Path | None = None,
    budget: int | None = None,
) -> Path:
    """Render one scaling or budget figure as a standalone SVG.

    Scaling kinds read a results CSV, average regret per x value on
    log-log axes and annotate the fitted slope (when three or more
    positive points exist). ``budget_trace`` reads an action-log CSV and
    draws cumulative query usage against the linear pacing line
    (``budget`` supplies the cap; without it only the trace is drawn).
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choices: {PLOT_KINDS}")
    results_path = Path(results_path)
    out = Path(out_path) if out_path else results_path.with_name(
        results_path.stem + f"_{kind}.svg"
    )
    cols = _read_csv(results_path)

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    try:
        if kind == "budget_trace":
            needed = {"t", "query"}
            if not needed.issubset(cols):
                raise MissingColumns(f"{results_path}: budget_trace needs columns {sorted(needed)}")
            t = np.array([int(v) for v in cols["t"]])
            used = np.cumsum([int(v) for v in cols["query"]])
            ax.step(t, used, where="post", label="queries used")
            if budget is not None:
                T = int(t[-1])
                ax.plot(t, t * budget / T, "--", label="pacing t*B/T")
                ax.axhline(budget, color="k", lw=0.8, label="cap B")
            ax.set_xlabel("round t")
            ax.set_ylabel("cumulative queries")
            ax.legend(loc="best", fontsize=8)
        else:
            xcol = _X_COLUMN[kind]
            needed = {xcol, "R_T"}
            if not needed.issubset(cols):
                raise MissingColumns(f"{results_path}: {kind} needs columns {sorted(needed)}")
            xs = np.array([float(v) for v in cols[xcol]])
            ys = np.array([float(v) for v in cols["R_T"]])
            levels = np.unique(xs)
            means = np.array([ys[xs == x].mean() for x in levels])
            errs = np.array(
                [
                    ys[xs == x].std(ddof=1) / math.sqrt((xs == x).sum())
                    if (xs == x).sum() > 1
                    else 0.0
                    for x in levels
                ]
            )
            ax.errorbar(levels, means, yerr=errs, marker="o", capsize=3)
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel(xcol)
            ax.set_ylabel("mean regret")
            if len(levels) >= 3 and np.all(means > 0) and np.all(levels > 0):
                try:
                    slope = fit_scaling(list(zip(levels, means)))
                    ax.set_title(f"fitted slope {slope:+.3f}", fontsize=9)
                except NonPositiveInput:
                    pass
        fig.tight_layout()
        with matplotlib.rc_context({"svg.fonttype": "none"}):
            fig.savefig(out, format="svg")
    finally:
        plt.close(fig)
    return out
