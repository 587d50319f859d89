"""Generate the three environment families and inspect their drift.

Every environment is a T x K matrix of true expected rewards. The
generators control the total variation (the summed per-round supremum
mean change), which is the knob the algorithms are judged against.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from nsbandit import (
    ProblemConfig,
    RandomStream,
    gen_drift,
    gen_hard_instance,
    gen_piecewise,
    total_variation,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = ProblemConfig(horizon=2000, arms=4, query_budget=500, variation_budget=1.0)

# A single abrupt change at mid-horizon (the default benchmark shape)...
abrupt = gen_piecewise(cfg, segment_count=2, gap_scale=0.8, stream=RandomStream(1, "env"))
print(f"abrupt change : total variation = {total_variation(abrupt):.6f}")

# ...a rotating best arm over six segments, jumps scaled to the budget...
rotating = gen_piecewise(cfg, segment_count=6, gap_scale=1.0, stream=RandomStream(2, "env"))
print(f"rotating arms : total variation = {total_variation(rotating):.6f}")

# ...a smooth random walk that spends the variation budget exactly...
smooth = gen_drift(cfg, RandomStream(3, "env"))
print(f"smooth drift  : total variation = {total_variation(smooth):.6f} (budget 1.0)")

# ...and the worst-case periodic instance: one good arm per batch at
# 1/2 + gap, everything else pinned at 1/2.
hard, params = gen_hard_instance(cfg, RandomStream(4, "env"))
print(
    f"hard instance : batches={params.batch_count} of {params.batch_length} rounds, "
    f"gap={params.gap:.5f}, total variation = {total_variation(hard):.6f}"
)

fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
for ax, (name, seq) in zip(
    axes.flat,
    [("abrupt", abrupt), ("rotating", rotating), ("smooth drift", smooth), ("hard instance", hard)],
):
    for k in range(seq.arms):
        ax.plot(seq.means[:, k], lw=0.9, label=f"arm {k}")
    ax.set_title(name, fontsize=10)
    ax.set_ylim(-0.05, 1.05)
axes[0, 0].legend(fontsize=7, ncol=2)
fig.suptitle("true mean trajectories")
fig.tight_layout()
fig.savefig(OUT / "environments.svg")
print(f"wrote {OUT / 'environments.svg'}")

# The matrices round-trip through CSV losslessly.
csv_path = OUT / "hard_instance.csv"
hard.to_csv(csv_path)
print(f"wrote {csv_path} ({csv_path.stat().st_size} bytes)")
