"""Sweep the query budget through the experiment harness.

A compact version of the headline scaling experiment: mean regret
against the query budget on a log-log scale, with the fitted slope
annotated (theory predicts -1/3). Uses the YAML-spec front door so the
whole pipeline (spec -> runs -> results CSV -> summary -> figure) is
exercised exactly as the CLI drives it.
"""

from pathlib import Path

import yaml

from nsbandit import ExperimentSpec, emit_plots, fit_scaling, run_experiment

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec_data = {
    "name": "budget-sweep",
    "algorithm": "hyque",
    "environment": {"kind": "piecewise", "segment_count": 2, "gap_scale": 1.0},
    "grid": {"T": [8000], "K": [5], "B": [500, 1000, 2000, 4000, 8000], "V_T": [1.0]},
    "seeds": {"count": 8, "base": 100},
    "output_dir": str(OUT / "budget_sweep"),
}
spec_path = OUT / "budget_sweep.yaml"
spec_path.write_text(yaml.safe_dump(spec_data))

spec = ExperimentSpec.from_yaml(spec_path)
results, summary = run_experiment(spec)
print(f"results: {results}")
print(f"summary: {summary}")

points = []
for line in summary.read_text().splitlines()[1:]:
    cols = line.split(",")
    points.append((float(cols[2]), float(cols[6])))  # (B, mean regret)
for b, r in points:
    print(f"  B={int(b):5d}: mean regret {r:8.1f}")
print(f"fitted log-log slope: {fit_scaling(points):+.3f} (theory -1/3)")

figure = emit_plots(results, "regret_vs_B", out_path=OUT / "regret_vs_budget.svg")
print(f"wrote {figure}")
