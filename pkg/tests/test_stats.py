import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelforge import (
    AccuracyRecord,
    CorrelationStat,
    LearningCurve,
    StatsError,
    build_curves,
    rank_consistency,
    slope_correlation,
    smooth,
    spearman,
)


def naive_smooth(values, window):
    """Independent reference: explicit double loop over the same window."""
    n = len(values)
    out = []
    for i in range(n):
        lo = max(0, i - window // 2)
        hi = min(n, i + (window - 1) // 2 + 1)
        total = 0.0
        count = 0
        for j in range(lo, hi):
            total += values[j]
            count += 1
        out.append(total / count)
    return out


def naive_rankdata(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def naive_spearman(xs, ys):
    xs, ys = list(xs), list(ys)
    if all(v == xs[0] for v in xs) or all(v == ys[0] for v in ys):
        return None
    rx, ry = naive_rankdata(xs), naive_rankdata(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    dx = sum((a - mx) ** 2 for a in rx)
    dy = sum((b - my) ** 2 for b in ry)
    return min(1.0, max(-1.0, num / math.sqrt(dx * dy)))


def naive_bootstrap_stat(groups, fixed, n_boot, seed):
    """Independent reimplementation of the documented bootstrap contract."""
    draws = []
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        means = []
        for g in groups:
            idx = rng.integers(0, len(g), size=len(g))
            means.append(math.fsum(g[i] for i in idx) / len(g))
        rho = naive_spearman(list(fixed), means)
        if rho is not None:
            draws.append(rho)
    arr = np.asarray(draws)
    lo, hi = np.percentile(arr, [2.5, 97.5])
    return CorrelationStat(
        mean=float(arr.mean()), std=float(arr.std()), median=float(np.median(arr)),
        ci_lo=float(lo), ci_hi=float(hi), n_boot=len(draws),
    )


def make_records(accs_by_set, zero_by_set, n=4, k_of=None):
    records = []
    for sid, zero in zero_by_set.items():
        records.append(AccuracyRecord(sid, (k_of or {}).get(sid, 10), 0, 0, zero, 1000))
        for run, acc in enumerate(accs_by_set[sid]):
            records.append(AccuracyRecord(sid, (k_of or {}).get(sid, 10), n, run, acc, 1000))
    return records


class TestSmooth:
    def test_constant_series_is_fixed_point(self):
        series = [0.4] * 20
        assert list(smooth(series, 10)) == series

    def test_matches_naive_reference_small_case(self):
        got = smooth([0.0, 1.0, 0.0, 1.0], window=2)
        expect = naive_smooth([0.0, 1.0, 0.0, 1.0], window=2)
        assert np.allclose(got, expect, atol=1e-12)

    def test_matches_naive_reference_random_series(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 60))
            w = int(rng.integers(1, 15))
            series = rng.uniform(0, 1, size=n)
            assert np.allclose(smooth(series, w), naive_smooth(list(series), w), atol=1e-12)

    def test_default_window_is_ten(self):
        import inspect

        assert inspect.signature(smooth).parameters["window"].default == 10

    def test_output_length_equals_input_length(self):
        assert smooth([1.0, 2.0, 3.0], 10).shape == (3,)

    def test_window_below_one_rejected(self):
        with pytest.raises(ValueError, match="window"):
            smooth([1.0], 0)


class TestSpearman:
    def test_identity_is_one(self):
        assert spearman([1, 2, 3, 4, 5], [10, 20, 30, 40, 50]) == 1.0

    def test_reversal_is_minus_one(self):
        assert spearman([1, 2, 3, 4, 5], [50, 40, 30, 20, 10]) == -1.0

    def test_textbook_value_exact(self):
        # d^2 = (1, 1, 1, 1): 1 - 6*4 / (4*15) = 0.6
        assert spearman([1, 2, 3, 4], [2, 1, 4, 3]) == 0.6

    def test_tied_values_use_average_ranks(self):
        # ranks x = (1.5, 1.5, 3), y = (1, 2, 3): r = 1.5 / sqrt(1.5 * 2)
        got = spearman([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        assert abs(got - 1.5 / math.sqrt(3.0)) < 1e-15

    def test_constant_side_is_missing_not_zero(self):
        assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
        assert spearman([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None

    def test_errors(self):
        with pytest.raises(ValueError, match="mismatch"):
            spearman([1, 2], [1, 2, 3])
        with pytest.raises(ValueError, match="at least 2"):
            spearman([1], [1])

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=12),
           st.integers(0, 100))
    @settings(max_examples=60, deadline=None)
    def test_matches_naive_and_symmetry(self, xs, seed):
        ys = list(np.random.default_rng(seed).uniform(0, 1, size=len(xs)))
        got = spearman(xs, ys)
        expect = naive_spearman(xs, ys)
        if expect is None:
            assert got is None
        else:
            assert got == expect
            assert spearman(ys, xs) == got

    def test_negation_flips_sign_without_ties(self):
        rng = np.random.default_rng(3)
        xs = rng.permutation(10).astype(float)
        ys = rng.uniform(0, 1, size=10)
        assert spearman(xs, list(-np.asarray(ys))) == -spearman(xs, ys)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        xs = rng.uniform(0, 1, size=8)
        ys = rng.uniform(0, 1, size=8)
        assert spearman(np.exp(xs), ys) == spearman(xs, ys)
        assert spearman(xs, 3 * np.asarray(ys) + 2) == spearman(xs, ys)


class TestRankConsistency:
    def test_monotone_transform_gives_one(self):
        zero = {"a": 0.3, "b": 0.5, "c": 0.8}
        accs = {sid: [z**2] * 5 for sid, z in zero.items()}  # monotone in zero-shot
        point, stat = rank_consistency(make_records(accs, zero), n=4, n_boot=50, seed=1)
        assert point == 1.0
        assert stat.n_boot == 50

    def test_matches_naive_bootstrap_exactly(self):
        rng = np.random.default_rng(9)
        zero = {"a": 0.30, "b": 0.52, "c": 0.81}
        accs = {
            sid: [round(float(z + rng.normal(0, 0.05)) * 1000) / 1000 for _ in range(10)]
            for sid, z in zero.items()
        }
        records = make_records(accs, zero)
        point, stat = rank_consistency(records, n=4, n_boot=1000, seed=123)

        ids = sorted(zero)
        fixed = np.array([zero[i] for i in ids])
        groups = [np.array(accs[i]) for i in ids]
        expect = naive_bootstrap_stat(groups, fixed, n_boot=1000, seed=123)
        assert stat == expect
        assert point == naive_spearman(
            list(fixed), [math.fsum(g) / len(g) for g in groups]
        )

    def test_default_bootstrap_count_is_1000(self):
        import inspect

        assert inspect.signature(rank_consistency).parameters["n_boot"].default == 1000

    def test_missing_label_set_rejected(self):
        zero = {"a": 0.3, "b": 0.5}
        accs = {"a": [0.4] * 3, "b": [0.6] * 3}
        records = [r for r in make_records(accs, zero) if not (r.label_set_id == "b" and r.n_shots == 0)]
        with pytest.raises(StatsError, match="missing"):
            rank_consistency(records, n=4, n_boot=10, seed=0)

    def test_deterministic_for_fixed_seed(self):
        zero = {"a": 0.3, "b": 0.5, "c": 0.7}
        rng = np.random.default_rng(2)
        accs = {s: list(np.round(rng.uniform(0.2, 0.9, 10), 3)) for s in zero}
        records = make_records(accs, zero)
        assert rank_consistency(records, 4, 200, 7) == rank_consistency(records, 4, 200, 7)


class TestSlopeCorrelation:
    def curve_from(self, runs_by_n, sid="a"):
        points = tuple(
            (n, sum(rs) / len(rs), tuple(rs)) for n, rs in sorted(runs_by_n.items())
        )
        return LearningCurve(sid, points)

    def test_strictly_increasing_curve_gives_one(self):
        curve = self.curve_from({n: [0.1 * n + 0.2] * 5 for n in (2, 4, 6, 8)})
        point, stat = slope_correlation(curve, [2, 4, 6, 8], n_boot=50, seed=0)
        assert point == 1.0
        assert stat.ci_hi <= 1.0

    def test_flat_noisy_curve_has_ci_spanning_zero(self):
        rng = np.random.default_rng(5)
        curve = self.curve_from(
            {n: list(0.5 + rng.normal(0, 0.03, size=10)) for n in (2, 4, 6, 8, 10)}
        )
        point, stat = slope_correlation(curve, [2, 4, 6, 8, 10], n_boot=1000, seed=11)
        assert abs(point) < 0.6
        assert stat.ci_lo < 0.0 < stat.ci_hi

    def test_missing_n_rejected(self):
        curve = self.curve_from({2: [0.5], 4: [0.6]})
        with pytest.raises(StatsError, match="missing"):
            slope_correlation(curve, [2, 4, 8], n_boot=10, seed=0)

    def test_matches_naive_bootstrap_exactly(self):
        rng = np.random.default_rng(13)
        runs_by_n = {n: list(np.round(rng.uniform(0.3, 0.8, 10), 3)) for n in (3, 6, 9, 12)}
        curve = self.curve_from(runs_by_n)
        ns = [3, 6, 9, 12]
        _, stat = slope_correlation(curve, ns, n_boot=500, seed=21)
        groups = [np.array(runs_by_n[n]) for n in ns]
        assert stat == naive_bootstrap_stat(groups, np.array(ns, dtype=float), 500, 21)


class TestCorrelationStatInvariants:
    def test_percentile_ordering_fuzz(self):
        rng = np.random.default_rng(17)
        for case in range(1000):
            n_sets = int(rng.integers(3, 7))
            n_runs = int(rng.integers(2, 8))
            zero = {f"s{i}": float(np.round(rng.uniform(0.2, 0.9), 3)) for i in range(n_sets)}
            accs = {
                s: list(np.round(rng.uniform(0.0, 1.0, size=n_runs), 2)) for s in zero
            }
            records = make_records(accs, zero)
            try:
                _, stat = rank_consistency(records, n=4, n_boot=64, seed=case)
            except StatsError:
                continue  # all draws degenerate; nothing to check
            assert stat.ci_lo <= stat.median <= stat.ci_hi
            assert -1.0 <= stat.ci_lo and stat.ci_hi <= 1.0

    def test_point_estimate_inside_ci_on_seeded_fixtures(self):
        # calibration sanity: the deterministic point estimate should fall
        # inside the bootstrap interval nearly always on these fixtures
        rng = np.random.default_rng(29)
        inside = total = 0
        for case in range(100):
            zero = {f"s{i}": float(np.round(rng.uniform(0.2, 0.9), 3)) for i in range(6)}
            accs = {
                s: list(np.round(np.clip(z + rng.normal(0, 0.08, 10), 0, 1), 3))
                for s, z in zero.items()
            }
            point, stat = rank_consistency(make_records(accs, zero), 4, 200, 1000 + case)
            if point is None:
                continue
            total += 1
            if stat.ci_lo - 1e-12 <= point <= stat.ci_hi + 1e-12:
                inside += 1
        assert inside / total >= 0.95

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError, match="out of order"):
            CorrelationStat(mean=0, std=0, median=0.5, ci_lo=0.6, ci_hi=0.7, n_boot=10)
        with pytest.raises(ValueError, match="outside"):
            CorrelationStat(mean=2, std=0, median=0.5, ci_lo=0.4, ci_hi=0.7, n_boot=10)


class TestLearningCurve:
    def test_build_curves_groups_and_sorts(self):
        records = [
            AccuracyRecord("b", 20, 4, 1, 0.6, 10),
            AccuracyRecord("b", 20, 4, 0, 0.5, 10),
            AccuracyRecord("b", 20, 0, 0, 0.4, 10),
            AccuracyRecord("a", 10, 0, 0, 0.3, 10),
        ]
        curves = build_curves(records)
        assert [c.label_set_id for c in curves] == ["a", "b"]
        b = curves[1]
        assert b.ns() == [0, 4]
        assert b.runs_at(4) == (0.5, 0.6)  # ordered by run index
        assert b.mean_at(4) == pytest.approx(0.55)

    def test_mean_mismatch_rejected(self):
        with pytest.raises(ValueError, match="disagrees"):
            LearningCurve("x", ((0, 0.9, (0.1, 0.2)),))

    def test_unsorted_ns_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            LearningCurve("x", ((4, 0.1, (0.1,)), (2, 0.1, (0.1,))))
