"""Report generation: curve CSVs, correlation tables, plot-ready JSON.

Label sets that came out identical for several adjacent K values collapse
into one reported entry carried by the highest K. All output is derived
purely from the records and settings, so regenerating a report from the
same inputs is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

from .stats import (
    LearningCurve,
    StatsError,
    build_curves,
    rank_consistency,
    slope_correlation,
    smooth,
)

CORRELATION_COLUMNS = ["Mean Corr.", "Std Corr.", "Median Corr.", "CI 2.5%", "CI 97.5%"]


class ReportError(ValueError):
    """Empty or incomplete record sets for the requested tables."""


def dedupe_label_sets(label_sets_meta) -> list[dict]:
    """Collapse runs of adjacent K values that produced the same token set.

    Returns one entry per group: the highest-K member's id plus the list of
    k_values it stands for.
    """
    ordered = sorted(label_sets_meta, key=lambda m: m["K"])
    groups: list[dict] = []
    for meta in ordered:
        ids = tuple(meta["token_ids"])
        if groups and tuple(groups[-1]["token_ids"]) == ids:
            groups[-1]["k_values"].append(meta["K"])
            groups[-1]["K"] = meta["K"]
            groups[-1]["label_set_id"] = meta["label_set_id"]
        else:
            groups.append(
                {
                    "label_set_id": meta["label_set_id"],
                    "K": meta["K"],
                    "token_ids": list(meta["token_ids"]),
                    "k_values": [meta["K"]],
                }
            )
    return groups


def _check_complete(records, groups, needed_ns) -> None:
    have: dict[str, set[int]] = {}
    for rec in records:
        have.setdefault(rec.label_set_id, set()).add(rec.n_shots)
    missing = []
    for g in groups:
        for n in needed_ns:
            if n not in have.get(g["label_set_id"], set()):
                missing.append((g["label_set_id"], n))
    if missing:
        raise ReportError(f"records missing for (label set, N) cells: {missing}")


def _write_correlation_table(path: Path, key_header: str, rows) -> None:
    """Rows with stat=None come out as empty cells: an undefined correlation
    (constant input) is reported as missing, never coerced to a number."""
    lines = [",".join([key_header] + CORRELATION_COLUMNS)]
    for key, stat in rows:
        if stat is None:
            lines.append(f"{key}" + "," * len(CORRELATION_COLUMNS))
        else:
            lines.append(
                f"{key},{stat.mean:.4f},{stat.std:.4f},{stat.median:.4f},"
                f"{stat.ci_lo:.4f},{stat.ci_hi:.4f}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_report(records, label_sets_meta, out_dir, rank_ns, slope_ns,
                  n_boot: int = 1000, seed: int = 0, window: int = 10,
                  extra_manifest: dict | None = None) -> dict:
    """Write the full report directory and return its manifest.

    records: AccuracyRecord list covering N=0 and every requested N for
    every label set. label_sets_meta: one {"label_set_id", "K", "token_ids"}
    entry per fitted label set, used to collapse duplicates.
    """
    records = list(records)
    if not records:
        raise ReportError("no accuracy records to report")
    rank_ns = sorted(rank_ns)
    slope_ns = sorted(slope_ns)
    if any(n <= 0 for n in rank_ns):
        raise ValueError("rank_ns must be positive shot counts")

    groups = dedupe_label_sets(label_sets_meta)
    if len(groups) < 2:
        raise ReportError(
            "rank consistency needs at least 2 distinct label sets after deduplication"
        )
    rep_ids = {g["label_set_id"] for g in groups}
    rep_records = [r for r in records if r.label_set_id in rep_ids]
    _check_complete(rep_records, groups, [0] + rank_ns + slope_ns)

    out_dir = Path(out_dir)
    curve_dir = out_dir / "curves"
    curve_dir.mkdir(parents=True, exist_ok=True)

    curves = {c.label_set_id: c for c in build_curves(rep_records)}
    curves_json = []
    for g in groups:
        curve = curves[g["label_set_id"]]
        _write_curve_csvs(curve_dir, curve, window)
        means = [m for _, m, _ in curve.points]
        curves_json.append(
            {
                "label_set_id": g["label_set_id"],
                "K": g["K"],
                "k_values": g["k_values"],
                "token_ids": g["token_ids"],
                "points": [
                    {"n": n, "mean": mean, "runs": list(runs)}
                    for n, mean, runs in curve.points
                ],
                "smoothed": list(smooth(means, window)),
            }
        )

    rank_rows = []
    for n in rank_ns:
        try:
            _, stat = rank_consistency(rep_records, n, n_boot=n_boot, seed=seed)
        except StatsError:
            stat = None  # constant accuracies: correlation undefined at this N
        rank_rows.append((n, stat))
    _write_correlation_table(out_dir / "rank_consistency.csv", "n_demo", rank_rows)

    slope_rows = []
    for g in groups:
        try:
            _, stat = slope_correlation(curves[g["label_set_id"]], slope_ns,
                                        n_boot=n_boot, seed=seed)
        except StatsError:
            stat = None
        slope_rows.append((g["K"], stat))
    _write_correlation_table(out_dir / "slope_correlation.csv", "K", slope_rows)

    (out_dir / "curves.json").write_text(
        json.dumps({"window": window, "curves": curves_json}, indent=2) + "\n",
        encoding="utf-8",
    )

    manifest = {
        "n_boot": n_boot,
        "seed": seed,
        "window": window,
        "rank_ns": rank_ns,
        "slope_ns": slope_ns,
        "label_sets": [
            {"label_set_id": g["label_set_id"], "k_values": g["k_values"]} for g in groups
        ],
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _write_curve_csvs(curve_dir: Path, curve: LearningCurve, window: int) -> None:
    raw_lines = ["n_demo,run,accuracy"]
    for n, _, runs in curve.points:
        for run, acc in enumerate(runs):
            raw_lines.append(f"{n},{run},{acc:.10g}")
    (curve_dir / f"{curve.label_set_id}_raw.csv").write_text(
        "\n".join(raw_lines) + "\n", encoding="utf-8"
    )

    means = [m for _, m, _ in curve.points]
    smoothed = smooth(means, window)
    smooth_lines = ["n_demo,mean_accuracy,smoothed_accuracy"]
    for (n, mean, _), s in zip(curve.points, smoothed):
        smooth_lines.append(f"{n},{mean:.10g},{s:.10g}")
    (curve_dir / f"{curve.label_set_id}_smoothed.csv").write_text(
        "\n".join(smooth_lines) + "\n", encoding="utf-8"
    )
