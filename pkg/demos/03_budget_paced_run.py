"""Run the hybrid controller end to end and inspect its budget pacing.

The controller walks geometrically growing blocks, queries on each
instance's prefix batch, replays frequencies elsewhere, and converts
replay rounds into extra queries whenever usage falls behind the linear
pacing target t*B/T minus a safety buffer. The action log records every
round; the report splits regret into query/error/drift parts that sum
exactly to the total.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nsbandit import (
    ProblemConfig,
    RandomStream,
    evaluate_run,
    gen_piecewise,
    run_hyque,
)
from nsbandit.hyque import DetectionTraceRow

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

T, K, B = 8192, 5, 1024
cfg = ProblemConfig(horizon=T, arms=K, query_budget=B)
env = gen_piecewise(cfg, segment_count=2, gap_scale=0.8, stream=RandomStream(0, "env"))

trace: list[DetectionTraceRow] = []
log = run_hyque(env, cfg, RandomStream(0, "run"), trace=trace)
report = evaluate_run(log, env)

print(f"queries used      : {log.queries_used} / {B} ({log.on_demand_used} on demand)")
print(f"dynamic regret    : {report.total:.1f}")
print(f"  query part      : {report.query_part:.1f}")
print(f"  error part      : {report.error_part:.1f}")
print(f"  drift part      : {report.drift_part:.1f}")
print(f"longest query run : {report.max_query_run}, longest replay run: {report.max_nonquery_run}")
print(f"phases            : {len(report.per_phase_query_fractions)} "
      f"(baseline query fractions {['%.3f' % f for f in report.per_phase_query_fractions]})")

# Detection statistics per query round. The thresholds derived from the
# analysis constants sit two orders of magnitude above anything a
# bounded reward sequence can produce, which is why no restart fires;
# scale them down via ProblemConfig(detection_scale=...) to see them act.
margins = [row.running_threshold - row.running_stat for row in trace]
print(f"closest approach to the running test threshold: {min(margins):.1f} (never < 0 here)")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.4))
t = np.arange(1, T + 1)
ax1.step(t, np.cumsum(log.query), where="post", label="queries used")
ax1.plot(t, t * B / T, "--", label="pacing t*B/T")
ax1.axhline(B, color="k", lw=0.8, label="cap B")
ax1.set_xlabel("round")
ax1.set_ylabel("cumulative queries")
ax1.legend(fontsize=8)
ax1.set_title("budget pacing")

window = 256
chosen_mean = env.means[np.arange(T), log.arm]
best = env.best_means()
kernel = np.ones(window) / window
ax2.plot(t, np.convolve(best - chosen_mean, kernel, mode="same"), lw=0.9)
ax2.axvline(T // 2, color="r", ls=":", label="mean swap")
ax2.set_xlabel("round")
ax2.set_ylabel(f"regret rate ({window}-round avg)")
ax2.legend(fontsize=8)
ax2.set_title("per-round regret")
fig.tight_layout()
fig.savefig(OUT / "budget_paced_run.svg")
print(f"wrote {OUT / 'budget_paced_run.svg'}")

log_path = OUT / "hyque_log.csv"
log.to_csv(log_path)
print(f"wrote {log_path}")
