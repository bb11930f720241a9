"""The full pipeline through the CLI layer: fit-labels, eval, report.

Run with: python3 demos/06_full_pipeline.py
"""

import json
import tempfile
from pathlib import Path

import yaml

from labelforge.cli import build_context, cmd_eval, cmd_fit_labels, cmd_report, load_config

workdir = Path(tempfile.mkdtemp())

# A dataset file plus one declarative config drives everything.
dataset = workdir / "data.jsonl"
with open(dataset, "w") as f:
    for i in range(240):
        f.write(json.dumps({"text": f"pipeline text {i:03d}", "class": 1 + i % 3}) + "\n")

config = {
    "dataset": str(dataset),
    "output_dir": str(workdir / "run"),
    "k_list": [4, 8, 16],
    "n_list": [0, 2, 4, 6],
    "runs": 3,
    "restarts": 5,
    "seeds": {"split": 1, "labeling": 2, "optimizer": 3, "sweep": 4},
    "provider": {
        "kind": "synthetic",
        "synthetic": {
            "vocab_size": 40,
            "planted_gold": [6, 21, 33],
            "signal_strength": 1.0,
            "noise_scale": 0.5,
            "seed": 17,
        },
    },
    "report": {"n_boot": 200, "window": 10},
}
config_path = workdir / "config.yaml"
config_path.write_text(yaml.safe_dump(config))

ctx = build_context(load_config(config_path))
print("run directory:", ctx.run_dir)

print("\n== fit-labels ==")
cmd_fit_labels(ctx)

print("\n== eval ==")
cmd_eval(ctx)

print("\n== report ==")
cmd_report(ctx)

print("\nrun tree:")
for p in sorted(ctx.run_dir.rglob("*")):
    if p.is_file():
        print("  ", p.relative_to(ctx.run_dir))

print("\nrank consistency table:")
print((ctx.report_dir / "rank_consistency.csv").read_text())
