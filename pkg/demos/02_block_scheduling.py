"""Walk through the multi-scale block scheduler.

A block of b * 2^n rounds hosts learner instances at scales m = n..0,
initiated probabilistically so that finer scales appear more rarely per
slot but cover the block densely in aggregate. Hierarchical masking
hands each round to the finest initiated instance covering it; each
instance queries a 1/b prefix of its active rounds and replays its own
arm frequencies on the rest.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nsbandit import RandomStream, build_block, format_block_schedule

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# A 16-round block (n=3, b=2), the classic picture: one full-span
# instance plus probabilistic finer ones.
sched = build_block(n=3, b=2, arms=2, stream_or_rng=RandomStream(11, "sched"))
print(format_block_schedule(sched))
print()

# The query fraction of a block concentrates at 1/b: active sets come in
# multiples of b, so each instance queries exactly a 1/b share.
rng = RandomStream(7, "sched").fresh_generator()
fractions = []
for _ in range(2000):
    s = build_block(n=4, b=4, arms=2, stream_or_rng=rng)
    fractions.append(s.is_query.sum() / s.length)
print(f"mean query fraction over 2000 blocks (b=4): {np.mean(fractions):.4f} (1/b = 0.25)")

# Timeline picture of one larger block: query rounds as full-height
# marks, replay rounds colored by owning scale.
big = build_block(n=5, b=2, arms=2, stream_or_rng=RandomStream(3, "sched"))
fig, ax = plt.subplots(figsize=(10, 2.8))
scales = np.array([big.instances[i].id.scale for i in big.owner])
for m in range(6):
    mask = scales == m
    ax.scatter(
        np.nonzero(mask)[0] + 1,
        np.full(mask.sum(), m),
        s=8,
        marker="s",
        label=f"m={m}",
    )
qr = np.nonzero(big.is_query)[0] + 1
ax.scatter(qr, scales[big.is_query], s=22, marker="s", color="k", zorder=3)
ax.set_xlabel("round within block")
ax.set_ylabel("owning scale m")
ax.set_title("one 64-round block; black squares are query rounds")
ax.legend(fontsize=7, ncol=6, loc="upper right")
fig.tight_layout()
fig.savefig(OUT / "block_timeline.svg")
print(f"wrote {OUT / 'block_timeline.svg'}")
