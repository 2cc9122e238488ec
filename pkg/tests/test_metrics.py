"""Ranking metrics, threshold panels, curves, and bootstrap intervals."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pcrboost.errors import ContractError
from pcrboost.metrics import (
    BootstrapCI,
    ScoredLabels,
    aupr,
    auroc,
    bootstrap_ci,
    bootstrap_roc_band,
    pr_curve,
    roc_curve,
    threshold_for_sensitivity,
    threshold_for_specificity,
    threshold_report,
    unique_thresholds,
)


from conftest import pair_count_auroc


def step_sum_aupr(sl: ScoredLabels) -> float:
    """Scalar average-precision oracle: count tp/pp at each unique threshold."""
    thresholds = sorted(set(sl.scores.tolist()), reverse=True)
    n_pos = sl.n_positive
    ap, prev_recall = 0.0, 0.0
    for t in thresholds:
        pred = sl.scores >= t
        tp = int(np.sum(pred & (sl.labels == 1)))
        recall = tp / n_pos
        precision = tp / int(np.sum(pred))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def tie_heavy(rng, n: int) -> ScoredLabels:
    scores = rng.integers(0, 6, size=n) / 5.0
    labels = rng.integers(0, 2, size=n).astype(np.uint8)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    return ScoredLabels(scores, labels)


class TestScoredLabels:
    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            ScoredLabels(np.zeros(3), np.zeros(2, dtype=np.uint8))

    def test_empty(self):
        with pytest.raises(ContractError):
            ScoredLabels(np.zeros(0), np.zeros(0, dtype=np.uint8))

    def test_non_binary_label(self):
        with pytest.raises(ContractError):
            ScoredLabels(np.zeros(2), np.array([0, 2], dtype=np.uint8))

    def test_class_counts(self):
        sl = ScoredLabels([0.1, 0.2, 0.3], [1, 0, 1])
        assert (sl.n_positive, sl.n_negative) == (2, 1)


class TestAuroc:
    def test_perfect_separation(self):
        sl = ScoredLabels([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert auroc(sl) == 1.0

    def test_perfectly_wrong(self):
        sl = ScoredLabels([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1])
        assert auroc(sl) == 0.0

    def test_constant_scores_give_half(self):
        sl = ScoredLabels([0.4, 0.4, 0.4], [1, 0, 1])
        assert auroc(sl) == 0.5

    def test_hand_worked_example(self):
        sl = ScoredLabels([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert auroc(sl) == 0.75

    def test_equals_pair_counting_exactly(self, rng):
        for _ in range(100):
            sl = tie_heavy(rng, int(rng.integers(2, 201)))
            assert auroc(sl) == pair_count_auroc(sl)

    def test_monotone_transform_invariance(self, rng):
        sl = tie_heavy(rng, 80)
        shifted = ScoredLabels(3.0 * sl.scores - 2.0, sl.labels)
        assert auroc(shifted) == auroc(sl)

    def test_label_swap_complement(self, rng):
        sl = tie_heavy(rng, 60)
        flipped = ScoredLabels(sl.scores, 1 - sl.labels)
        assert abs(auroc(flipped) - (1.0 - auroc(sl))) <= 1e-12

    def test_single_class_rejected(self):
        with pytest.raises(ContractError, match="single-class"):
            auroc(ScoredLabels([0.1, 0.2], [1, 1]))


class TestAupr:
    def test_perfect_separation(self):
        sl = ScoredLabels([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert aupr(sl) == 1.0

    def test_hand_worked_example(self):
        sl = ScoredLabels([0.9, 0.8, 0.7], [1, 0, 1])
        assert abs(aupr(sl) - 5.0 / 6.0) <= 1e-15

    def test_matches_scalar_step_sum(self, rng):
        for _ in range(50):
            sl = tie_heavy(rng, int(rng.integers(2, 120)))
            assert abs(aupr(sl) - step_sum_aupr(sl)) <= 1e-12

    def test_no_positives_rejected(self):
        with pytest.raises(ContractError, match="no positives"):
            aupr(ScoredLabels([0.3, 0.4], [0, 0]))

    def test_all_positives_is_one(self):
        assert aupr(ScoredLabels([0.3, 0.4], [1, 1])) == 1.0


class TestThresholdReport:
    def test_balanced_example(self):
        sl = ScoredLabels([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0])
        rep = threshold_report(sl, 0.75)
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == (1, 1, 1, 1)
        for name in ("accuracy", "sensitivity", "specificity", "ppv", "npv",
                     "fnr", "fpr", "fdr"):
            assert getattr(rep, name) == 0.5

    def test_rule_is_greater_or_equal(self):
        sl = ScoredLabels([0.5, 0.4], [1, 0])
        rep = threshold_report(sl, 0.5)
        assert (rep.tp, rep.fp) == (1, 0)

    def test_nothing_predicted_positive(self):
        sl = ScoredLabels([0.5, 0.4], [1, 0])
        rep = threshold_report(sl, 0.9)
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == (0, 0, 1, 1)
        assert math.isnan(rep.ppv)
        assert math.isnan(rep.fdr)
        assert rep.sensitivity == 0.0
        assert rep.specificity == 1.0

    def test_complement_identities(self, rng):
        sl = tie_heavy(rng, 50)
        for t in unique_thresholds(sl):
            rep = threshold_report(sl, float(t))
            assert rep.fnr == 1.0 - rep.sensitivity
            assert rep.fpr == 1.0 - rep.specificity
            if math.isnan(rep.ppv):
                assert math.isnan(rep.fdr)
            else:
                assert rep.fdr == 1.0 - rep.ppv
            assert rep.tp + rep.fp + rep.tn + rep.fn == len(sl)

    def test_row_ordering(self):
        sl = ScoredLabels([0.9, 0.1], [1, 0])
        rep = threshold_report(sl, 0.5)
        row = rep.row()
        assert row[0] == 0.5
        assert row[1:5] == (1, 0, 1, 0)


class TestCurves:
    def test_roc_two_records(self):
        sl = ScoredLabels([0.8, 0.2], [1, 0])
        curve = roc_curve(sl)
        assert curve.kind == "roc"
        assert curve.points == ((0.0, 0.0, math.inf), (0.0, 1.0, 0.8), (1.0, 1.0, 0.2))

    def test_roc_collapses_tied_scores(self):
        sl = ScoredLabels([0.5, 0.5], [1, 0])
        curve = roc_curve(sl)
        assert curve.points == ((0.0, 0.0, math.inf), (1.0, 1.0, 0.5))

    def test_trapezoid_area_equals_auroc(self, rng):
        for _ in range(25):
            sl = tie_heavy(rng, int(rng.integers(2, 150)))
            assert abs(roc_curve(sl).trapezoid_area() - auroc(sl)) <= 1e-12

    def test_roc_monotone_axes(self, rng):
        sl = tie_heavy(rng, 90)
        pts = roc_curve(sl).points
        assert pts[-1][:2] == (1.0, 1.0)
        for (x0, y0, t0), (x1, y1, t1) in zip(pts, pts[1:]):
            assert x1 >= x0 and y1 >= y0 and t1 < t0

    def test_pr_recall_nondecreasing_and_ends_at_one(self, rng):
        sl = tie_heavy(rng, 90)
        pts = pr_curve(sl).points
        assert pts[-1][0] == 1.0
        for (r0, _, _), (r1, _, _) in zip(pts, pts[1:]):
            assert r1 >= r0

    def test_pr_hand_example(self):
        sl = ScoredLabels([0.9, 0.8, 0.7], [1, 0, 1])
        pts = pr_curve(sl).points
        assert pts == ((0.5, 1.0, 0.9), (0.5, 0.5, 0.8), (1.0, 2.0 / 3.0, 0.7))

    def test_unique_thresholds_descending(self):
        sl = ScoredLabels([0.2, 0.8, 0.2, 0.5], [1, 0, 1, 0])
        assert unique_thresholds(sl).tolist() == [0.8, 0.5, 0.2]


class TestBootstrapCI:
    def test_constant_metric_degenerate_interval(self):
        sl = ScoredLabels([0.9, 0.1], [1, 0])
        ci = bootstrap_ci(lambda s: 0.7, sl, n_resamples=100, seed=5)
        assert (ci.point, ci.lo, ci.hi) == (0.7, 0.7, 0.7)

    def test_deterministic_per_seed(self, rng):
        sl = tie_heavy(rng, 120)
        a = bootstrap_ci(auroc, sl, n_resamples=200, seed=42)
        b = bootstrap_ci(auroc, sl, n_resamples=200, seed=42)
        assert a == b
        c = bootstrap_ci(auroc, sl, n_resamples=200, seed=43)
        assert (c.lo, c.hi) != (a.lo, a.hi)

    def test_interval_contains_point(self, rng):
        pos = rng.normal(1.0, 1.0, size=150)
        neg = rng.normal(0.0, 1.0, size=150)
        sl = ScoredLabels(
            np.concatenate([pos, neg]),
            np.array([1] * 150 + [0] * 150, dtype=np.uint8),
        )
        ci = bootstrap_ci(auroc, sl, n_resamples=400, seed=7)
        assert ci.lo <= ci.point <= ci.hi
        assert 0.0 <= ci.lo and ci.hi <= 1.0

    def test_width_shrinks_like_root_n(self, rng):
        def make(n):
            pos = rng.normal(1.0, 1.0, size=n // 2)
            neg = rng.normal(0.0, 1.0, size=n // 2)
            return ScoredLabels(
                np.concatenate([pos, neg]),
                np.array([1] * (n // 2) + [0] * (n // 2), dtype=np.uint8),
            )

        small = bootstrap_ci(auroc, make(400), n_resamples=400, seed=11)
        big = bootstrap_ci(auroc, make(4000), n_resamples=400, seed=11)
        ratio = (small.hi - small.lo) / (big.hi - big.lo)
        expected = math.sqrt(10.0)
        assert expected / 1.5 <= ratio <= expected * 1.5

    def test_preconditions(self, rng):
        sl = tie_heavy(rng, 40)
        with pytest.raises(ContractError, match="n_resamples"):
            bootstrap_ci(auroc, sl, n_resamples=99, seed=0)
        with pytest.raises(ContractError, match="alpha"):
            bootstrap_ci(auroc, sl, alpha=0.0, seed=0)
        with pytest.raises(ContractError, match="alpha"):
            bootstrap_ci(auroc, sl, alpha=1.0, seed=0)

    def test_metric_undefined_on_original(self):
        sl = ScoredLabels([0.3, 0.4], [1, 1])
        with pytest.raises(ContractError, match="undefined on original sample"):
            bootstrap_ci(auroc, sl, seed=0)

    def test_seed_echoed(self, rng):
        sl = tie_heavy(rng, 50)
        ci = bootstrap_ci(auroc, sl, n_resamples=150, alpha=0.1, seed=99)
        assert isinstance(ci, BootstrapCI)
        assert (ci.n_resamples, ci.alpha, ci.seed) == (150, 0.1, 99)


class TestBootstrapRocBand:
    def test_shapes_and_bounds(self, rng):
        sl = tie_heavy(rng, 150)
        grid, lo, hi = bootstrap_roc_band(sl, n_resamples=150, seed=3)
        assert grid.shape == lo.shape == hi.shape == (101,)
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert np.all(lo <= hi)
        assert np.all((lo >= 0.0) & (hi <= 1.0))

    def test_deterministic_per_seed(self, rng):
        sl = tie_heavy(rng, 100)
        a = bootstrap_roc_band(sl, n_resamples=120, seed=8)
        b = bootstrap_roc_band(sl, n_resamples=120, seed=8)
        for left, right in zip(a, b):
            assert np.array_equal(left, right)

    def test_band_brackets_observed_curve(self, rng):
        pos = rng.normal(1.5, 1.0, size=200)
        neg = rng.normal(0.0, 1.0, size=200)
        sl = ScoredLabels(
            np.concatenate([pos, neg]),
            np.array([1] * 200 + [0] * 200, dtype=np.uint8),
        )
        grid, lo, hi = bootstrap_roc_band(sl, n_resamples=300, seed=12)
        pts = roc_curve(sl).points
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        observed = np.interp(grid, xs, ys)
        # pointwise percentile bands hug the observed curve; allow slack at
        # the grid ends where interpolation is coarse
        inside = (observed >= lo - 0.05) & (observed <= hi + 0.05)
        assert np.mean(inside) >= 0.95


class TestOperatingPoints:
    def test_sensitivity_picks_highest_threshold(self):
        sl = ScoredLabels([0.9, 0.8, 0.3], [1, 1, 0])
        t, rep = threshold_for_sensitivity(sl, 1.0)
        assert t == 0.8
        assert rep.sensitivity == 1.0

    def test_specificity_picks_lowest_threshold(self):
        sl = ScoredLabels([0.9, 0.8, 0.3], [1, 1, 0])
        t, rep = threshold_for_specificity(sl, 1.0)
        assert t == 0.8
        assert rep.specificity == 1.0

    def test_partial_sensitivity_target(self):
        sl = ScoredLabels([0.9, 0.8, 0.3], [1, 1, 0])
        t, rep = threshold_for_sensitivity(sl, 0.5)
        assert t == 0.9
        assert rep.sensitivity == 0.5

    def test_unreachable_specificity(self):
        # the top score is shared across classes: any threshold admitting a
        # record admits the negative, so specificity 1.0 is unreachable
        sl = ScoredLabels([0.9, 0.9], [1, 0])
        with pytest.raises(ContractError, match="target unreachable"):
            threshold_for_specificity(sl, 1.0)

    def test_all_negative_sensitivity_unreachable(self):
        sl = ScoredLabels([0.4, 0.6], [0, 0])
        with pytest.raises(ContractError, match="target unreachable"):
            threshold_for_sensitivity(sl, 0.9)

    def test_target_bounds(self):
        sl = ScoredLabels([0.9, 0.1], [1, 0])
        with pytest.raises(ContractError, match="target"):
            threshold_for_sensitivity(sl, 1.5)
        with pytest.raises(ContractError, match="target"):
            threshold_for_specificity(sl, 0.0)
