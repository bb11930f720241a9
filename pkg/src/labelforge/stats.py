"""Learning-curve statistics: smoothing, rank correlation, and bootstrap CIs.

Bootstrap seeding contract (frozen so independent reimplementations can
reproduce results bit-for-bit): draw b uses numpy's default_rng seeded with
[seed, b]; within a draw, groups are visited in their deterministic order
(label sets sorted by id, or N values ascending) and each group resamples
its run accuracies with rng.integers(0, n_runs, size=n_runs). Group means
use exactly rounded summation (math.fsum), so they do not depend on
accumulation order. Draws whose correlation is undefined (a constant side)
are dropped, and n_boot reports the number of draws actually aggregated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def _exact_mean(values) -> float:
    return math.fsum(values) / len(values)


class StatsError(ValueError):
    """Missing cells or degenerate inputs for an analytics operation."""


@dataclass(frozen=True)
class CorrelationStat:
    """Bootstrap aggregate of a correlation: mean/std/median and the
    2.5/97.5 percentile interval."""

    mean: float
    std: float
    median: float
    ci_lo: float
    ci_hi: float
    n_boot: int

    def __post_init__(self):
        if not (self.ci_lo <= self.median <= self.ci_hi):
            raise ValueError(
                f"percentiles out of order: {self.ci_lo}, {self.median}, {self.ci_hi}"
            )
        for v in (self.mean, self.median, self.ci_lo, self.ci_hi):
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"correlation statistic {v} outside [-1, 1]")


@dataclass(frozen=True)
class LearningCurve:
    """Accuracy vs. number of demonstrations for one label set."""

    label_set_id: str
    points: tuple[tuple[int, float, tuple[float, ...]], ...]

    def __post_init__(self):
        ns = [n for n, _, _ in self.points]
        if ns != sorted(set(ns)):
            raise ValueError("curve points must have strictly increasing N")
        for n, mean, runs in self.points:
            if abs(mean - sum(runs) / len(runs)) > 1e-12:
                raise ValueError(f"stored mean at N={n} disagrees with run accuracies")

    def ns(self) -> list[int]:
        return [n for n, _, _ in self.points]

    def mean_at(self, n: int) -> float:
        for pn, mean, _ in self.points:
            if pn == n:
                return mean
        raise StatsError(f"curve {self.label_set_id} has no point at N={n}")

    def runs_at(self, n: int) -> tuple[float, ...]:
        for pn, _, runs in self.points:
            if pn == n:
                return runs
        raise StatsError(f"curve {self.label_set_id} has no point at N={n}")


def build_curves(records) -> list[LearningCurve]:
    """Group accuracy records into one curve per label set (sorted by id)."""
    by_set: dict[str, dict[int, dict[int, float]]] = {}
    for rec in records:
        by_set.setdefault(rec.label_set_id, {}).setdefault(rec.n_shots, {})[rec.run] = rec.accuracy
    curves = []
    for label_set_id in sorted(by_set):
        points = []
        for n in sorted(by_set[label_set_id]):
            runs = tuple(acc for _, acc in sorted(by_set[label_set_id][n].items()))
            points.append((n, sum(runs) / len(runs), runs))
        curves.append(LearningCurve(label_set_id=label_set_id, points=tuple(points)))
    return curves


def smooth(values, window: int = 10) -> np.ndarray:
    """Centered moving average; the window shrinks at the boundaries.

    Index i averages positions [i - window//2, i + (window-1)//2] clipped to
    the series, so the output has the input's length and constant series are
    fixed points.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("values must be a non-empty 1-D sequence")
    n = values.size
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - window // 2)
        hi = min(n, i + (window - 1) // 2 + 1)
        piece = values[lo:hi]
        # constant windows pass through untouched; a float mean of repeated
        # non-dyadic values would drift by an ulp and break the fixed-point
        # guarantee for constant series
        out[i] = piece[0] if np.all(piece == piece[0]) else piece.mean()
    return out


def spearman(xs, ys) -> float | None:
    """Rank correlation with average ranks for ties, clamped to [-1, 1].

    Returns None when either side is constant: the correlation is undefined
    there and must propagate as missing rather than silently become 0.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if xs.ndim != 1 or xs.size < 2:
        raise ValueError("need at least 2 paired points")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return None
    rx = rankdata(xs)
    ry = rankdata(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    r = float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
    return min(1.0, max(-1.0, r))


def _aggregate_draws(draws: list[float]) -> CorrelationStat:
    if not draws:
        raise StatsError("every bootstrap draw had an undefined correlation")
    arr = np.asarray(draws, dtype=np.float64)
    ci_lo, ci_hi = np.percentile(arr, [2.5, 97.5])
    return CorrelationStat(
        mean=float(arr.mean()),
        std=float(arr.std()),
        median=float(np.median(arr)),
        ci_lo=float(ci_lo),
        ci_hi=float(ci_hi),
        n_boot=len(draws),
    )


def _bootstrap_means(groups: list[np.ndarray], fixed: np.ndarray,
                     n_boot: int, seed: int) -> list[float]:
    """Resample each group's runs with replacement and correlate the group
    means against the fixed side, once per draw."""
    draws = []
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        means = np.empty(len(groups))
        for i, g in enumerate(groups):
            idx = rng.integers(0, g.size, size=g.size)
            means[i] = _exact_mean(g[idx])
        rho = spearman(fixed, means)
        if rho is not None:
            draws.append(rho)
    return draws


def rank_consistency(records, n: int, n_boot: int = 1000,
                     seed: int = 0) -> tuple[float | None, CorrelationStat]:
    """Spearman correlation between label sets' zero-shot accuracies and
    their mean N-shot accuracies, with a bootstrap over run resamples.

    Zero-shot values are fixed (N=0 is deterministic, there is no run
    variance to resample).
    """
    if n <= 0:
        raise ValueError("n must be a positive shot count")
    zero: dict[str, float] = {}
    runs: dict[str, dict[int, float]] = {}
    for rec in records:
        if rec.n_shots == 0:
            zero[rec.label_set_id] = rec.accuracy
        elif rec.n_shots == n:
            runs.setdefault(rec.label_set_id, {})[rec.run] = rec.accuracy
    ids = sorted(set(zero) | set(runs))
    missing = [i for i in ids if i not in zero or i not in runs]
    if missing or not ids:
        raise StatsError(f"label sets missing N=0 or N={n} records: {missing or 'all'}")
    if len(ids) < 2:
        raise StatsError("rank consistency needs at least 2 label sets")

    fixed = np.array([zero[i] for i in ids])
    groups = [np.array([acc for _, acc in sorted(runs[i].items())]) for i in ids]
    point = spearman(fixed, np.array([_exact_mean(g) for g in groups]))
    stat = _aggregate_draws(_bootstrap_means(groups, fixed, n_boot, seed))
    return point, stat


def slope_correlation(curve: LearningCurve, ns, n_boot: int = 1000,
                      seed: int = 0) -> tuple[float | None, CorrelationStat]:
    """Spearman correlation between N and the curve's mean N-shot accuracy,
    with a bootstrap resampling runs within each N."""
    ns = list(ns)
    if len(ns) < 2:
        raise ValueError("need at least 2 N values")
    missing = [n for n in ns if n not in curve.ns()]
    if missing:
        raise StatsError(f"curve {curve.label_set_id} missing N values: {missing}")
    fixed = np.asarray(ns, dtype=np.float64)
    groups = [np.asarray(curve.runs_at(n)) for n in ns]
    point = spearman(fixed, np.array([_exact_mean(g) for g in groups]))
    stat = _aggregate_draws(_bootstrap_means(groups, fixed, n_boot, seed))
    return point, stat
