"""Command-line entry points.

Subcommands: ``validate`` an experiment spec, ``run`` it, ``plot`` a
results or log CSV, generate a ``hard-instance`` mean matrix, and dump a
per-query-round detection ``trace``. Exit code 0 on success, 2 on
validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RandomStream, load_run_config
from .environment import gen_hard_instance
from .errors import ConfigError, NsbanditError
from .harness import PLOT_KINDS, ExperimentSpec, build_environment, emit_plots, run_experiment
from .hyque import DetectionTraceRow, run_hyque


def _cmd_validate(args) -> int:
    ExperimentSpec.from_yaml(args.spec).validate()
    print(f"{args.spec}: ok")
    return 0


def _cmd_run(args) -> int:
    spec = ExperimentSpec.from_yaml(args.spec)
    results, summary = run_experiment(spec)
    print(f"results: {results}")
    print(f"summary: {summary}")
    return 0


def _cmd_plot(args) -> int:
    out = emit_plots(args.results, args.kind, out_path=args.out, budget=args.budget)
    print(f"wrote {out}")
    return 0


def _cmd_hard_instance(args) -> int:
    run_cfg = load_run_config(args.config)
    stream = RandomStream(run_cfg.seed, "environment")
    seq, params = gen_hard_instance(run_cfg.problem, stream)
    seq.to_csv(args.out)
    print(
        f"wrote {args.out}: batches={params.batch_count} "
        f"batch_length={params.batch_length} gap={params.gap:.6g}"
    )
    return 0


def _cmd_trace(args) -> int:
    run_cfg = load_run_config(args.config)
    seed = run_cfg.seed if args.seed is None else args.seed
    cfg = run_cfg.problem
    env = build_environment(
        run_cfg.environment or {"kind": "piecewise"},
        cfg,
        RandomStream(seed, "environment-gen"),
    )
    trace: list[DetectionTraceRow] = []
    log = run_hyque(env, cfg, RandomStream(seed, "run"), trace=trace)
    lines = ["t,phase,n,m,tau,count,U,rho_hat,running_stat,running_threshold,end_stat,end_threshold,failed"]
    for row in trace:
        end_stat = "" if row.end_stat is None else f"{row.end_stat:.17g}"
        end_thr = "" if row.end_threshold is None else f"{row.end_threshold:.17g}"
        lines.append(
            f"{row.t},{row.phase},{row.block_scale},{row.scale},{row.offset},"
            f"{row.count},{row.min_index:.17g},{row.rho:.17g},"
            f"{row.running_stat:.17g},{row.running_threshold:.17g},"
            f"{end_stat},{end_thr},{int(row.failed)}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out} ({len(trace)} query rounds, {log.queries_used} queries)")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsbandit",
        description="Budget-constrained non-stationary bandit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an experiment spec")
    p.add_argument("spec")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("run", help="run an experiment spec")
    p.add_argument("spec")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("plot", help="render a figure from a results or log CSV")
    p.add_argument("results")
    p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p.add_argument("--out", default=None)
    p.add_argument("--budget", type=int, default=None,
                   help="query cap, drawn on budget_trace plots")
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("hard-instance", help="generate a worst-case mean matrix")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_hard_instance)

    p = sub.add_parser("trace", help="dump per-query-round detection statistics")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NsbanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
