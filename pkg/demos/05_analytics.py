"""Learning-curve statistics: smoothing, rank consistency, bootstrap CIs.

Run with: python3 demos/05_analytics.py
"""

import tempfile
from pathlib import Path

import numpy as np

from labelforge import (
    AccuracyRecord,
    build_curves,
    export_report,
    rank_consistency,
    slope_correlation,
    smooth,
    spearman,
)

# Fabricate sweep records for three label sets of increasing quality: each
# N-shot accuracy is the zero-shot baseline plus run noise and a mild trend.
rng = np.random.default_rng(0)
zero_shot = {"K010": 0.38, "K050": 0.61, "K100": 0.84}
records = []
for sid, z in zero_shot.items():
    records.append(AccuracyRecord(sid, int(sid[1:]), 0, 0, z, 1000))
    for n in range(2, 25, 2):
        for run in range(10):
            acc = np.clip(z + 0.003 * n + rng.normal(0, 0.02), 0, 1)
            records.append(AccuracyRecord(sid, int(sid[1:]), n, run, round(float(acc), 3), 1000))

curves = build_curves(records)
print("curves:", [(c.label_set_id, len(c.points)) for c in curves])

# The window-10 centered moving average used for plotting.
means = [m for _, m, _ in curves[0].points]
print("raw means head:     ", np.round(means[:6], 3))
print("smoothed means head:", np.round(smooth(means, 10)[:6], 3))

# Spearman with average ranks; constant input would come back as None.
print("\nspearman sanity:", spearman([1, 2, 3, 4], [2, 1, 4, 3]))

# Rank consistency: does the zero-shot ordering of label sets survive at N?
point, stat = rank_consistency(records, n=8, n_boot=1000, seed=1)
print(f"rank consistency at N=8: point={point:.3f}, "
      f"bootstrap mean={stat.mean:.3f} CI=({stat.ci_lo:.3f}, {stat.ci_hi:.3f})")

# Slope correlation: is one curve increasing in N?
_, slope = slope_correlation(curves[-1], list(range(2, 25, 2)), n_boot=1000, seed=1)
print(f"slope correlation for {curves[-1].label_set_id}: "
      f"mean={slope.mean:.3f} CI=({slope.ci_lo:.3f}, {slope.ci_hi:.3f})")

# The report writer emits the curve CSVs, the two correlation tables, and
# plot-ready JSON, collapsing label sets that repeat across adjacent K.
out = Path(tempfile.mkdtemp()) / "report"
meta = [{"label_set_id": sid, "K": int(sid[1:]), "token_ids": [i, i + 1, i + 2]}
        for i, sid in enumerate(sorted(zero_shot))]
export_report(records, meta, out, rank_ns=list(range(2, 25, 2)),
              slope_ns=list(range(4, 25, 2)), n_boot=500, seed=2)
print(f"\nreport files under {out}:")
for p in sorted(out.rglob("*")):
    if p.is_file():
        print("  ", p.relative_to(out))
