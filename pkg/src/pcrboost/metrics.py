"""ROC/PR analysis, per-threshold clinical metrics, percentile bootstrap.

auROC follows the Mann-Whitney convention (ties half-credited) computed
via average ranks, which agrees exactly with pair counting. auPRC is
step-wise average precision over descending unique thresholds. Undefined
ratios (0/0) are NaN throughout - the "undefined" marker - and serialize
to empty CSV cells, never 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

THRESHOLD_REPORT_FIELDS = (
    "threshold",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
    "fnr",
    "fpr",
    "fdr",
)


@dataclass(frozen=True)
class ScoredLabels:
    """Parallel per-record scores and binary labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.uint8, copy=True)
        if scores.ndim != 1 or scores.shape != labels.shape:
            raise ContractError("scores and labels must be equal-length vectors")
        if scores.shape[0] < 1:
            raise ContractError("need at least one record")
        if labels.size and labels.max() > 1:
            raise ContractError("non-binary label")
        scores.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.scores.shape[0]

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.labels == 0))


@dataclass(frozen=True)
class ThresholdReport:
    """Confusion counts and derived rates at one threshold (rule: score >= t)."""

    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    fnr: float
    fpr: float
    fdr: float

    def row(self) -> tuple:
        return tuple(getattr(self, name) for name in THRESHOLD_REPORT_FIELDS)


@dataclass(frozen=True)
class Curve:
    """ROC points are (fpr, tpr, threshold); PR points are (recall, precision, threshold)."""

    kind: str
    points: tuple[tuple[float, float, float], ...]

    def trapezoid_area(self) -> float:
        area = 0.0
        for (x0, y0, _), (x1, y1, _) in zip(self.points, self.points[1:]):
            area += 0.5 * (y0 + y1) * (x1 - x0)
        return area


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap interval around a point estimate."""

    point: float
    lo: float
    hi: float
    n_resamples: int
    alpha: float
    seed: int


def _require_both_classes(sl: ScoredLabels) -> tuple[int, int]:
    n_pos, n_neg = sl.n_positive, sl.n_negative
    if n_pos == 0 or n_neg == 0:
        raise ContractError("single-class input")
    return n_pos, n_neg


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing their group's average (a half-integer)."""
    n = scores.shape[0]
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(s)) + 1])
    ends = np.concatenate([starts[1:], [n]])
    ranks = np.empty(n, dtype=np.float64)
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + 1 + b) / 2.0
    return ranks


def auroc(sl: ScoredLabels) -> float:
    """Mann-Whitney auROC: mean pair credit (1 win, 0.5 tie) via average ranks.

    The rank-sum numerator is a sum of half-integers, so the result equals
    O(n^2) pair counting exactly, not merely within rounding.
    """
    n_pos, n_neg = _require_both_classes(sl)
    ranks = _average_ranks(sl.scores)
    rank_sum = float(np.sum(ranks[sl.labels == 1]))
    credit = rank_sum - n_pos * (n_pos + 1) / 2.0
    return credit / (n_pos * n_neg)


def _descending_groups(sl: ScoredLabels):
    """Cumulative tp and predicted-positive counts per unique descending threshold."""
    order = np.argsort(sl.scores, kind="mergesort")[::-1]
    s = sl.scores[order]
    cum_tp = np.cumsum(sl.labels[order] == 1)
    ends = np.concatenate([np.flatnonzero(np.diff(s)), [len(s) - 1]])
    return s[ends], cum_tp[ends], ends + 1


def aupr(sl: ScoredLabels) -> float:
    """Average precision: sum of (delta recall x precision) over unique thresholds."""
    n_pos = sl.n_positive
    if n_pos == 0:
        raise ContractError("no positives")
    _, tp, pp = _descending_groups(sl)
    precision = tp / pp
    recall = tp / n_pos
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * precision))


def roc_curve(sl: ScoredLabels) -> Curve:
    """(0,0) plus one (fpr, tpr, threshold) point per unique descending threshold."""
    n_pos, n_neg = _require_both_classes(sl)
    thresholds, tp, pp = _descending_groups(sl)
    fp = pp - tp
    points = [(0.0, 0.0, math.inf)]
    for t, tpi, fpi in zip(thresholds, tp, fp):
        points.append((fpi / n_neg, tpi / n_pos, float(t)))
    return Curve(kind="roc", points=tuple(points))


def pr_curve(sl: ScoredLabels) -> Curve:
    """One (recall, precision, threshold) point per unique descending threshold."""
    n_pos = sl.n_positive
    if n_pos == 0:
        raise ContractError("no positives")
    thresholds, tp, pp = _descending_groups(sl)
    points = [
        (tpi / n_pos, tpi / ppi, float(t)) for t, tpi, ppi in zip(thresholds, tp, pp)
    ]
    return Curve(kind="pr", points=tuple(points))


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def threshold_report(sl: ScoredLabels, threshold: float) -> ThresholdReport:
    """Full confusion panel at a threshold; 0/0 ratios are NaN ("undefined")."""
    pred = sl.scores >= threshold
    pos = sl.labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    sensitivity = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    ppv = _ratio(tp, tp + fp)
    npv = _ratio(tn, tn + fn)
    return ThresholdReport(
        threshold=float(threshold),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / len(sl),
        sensitivity=sensitivity,
        specificity=specificity,
        ppv=ppv,
        npv=npv,
        fnr=1.0 - sensitivity,
        fpr=1.0 - specificity,
        fdr=1.0 - ppv,
    )


def unique_thresholds(sl: ScoredLabels) -> np.ndarray:
    """Unique score values, descending: the candidate operating points."""
    return np.unique(sl.scores)[::-1]


def bootstrap_ci(
    metric, sl: ScoredLabels, n_resamples: int = 1000, alpha: float = 0.05, *, seed: int
) -> BootstrapCI:
    """Percentile bootstrap of a metric over paired (score, label) resamples.

    Per-resample sub-seeds come from SeedSequence(seed).spawn, so results
    are deterministic regardless of evaluation order. Resamples on which
    the metric is undefined are redrawn up to 100 times, then excluded.
    """
    if n_resamples < 100:
        raise ContractError("n_resamples must be >= 100")
    if not 0.0 < alpha < 1.0:
        raise ContractError("alpha must be in (0, 1)")
    try:
        point = float(metric(sl))
    except ContractError as exc:
        raise ContractError(f"metric undefined on original sample: {exc}") from None
    n = len(sl)
    values = []
    for child in np.random.SeedSequence(seed).spawn(n_resamples):
        rng = np.random.Generator(np.random.PCG64(child))
        for _ in range(100):
            idx = rng.integers(0, n, size=n)
            resample = ScoredLabels(sl.scores[idx], sl.labels[idx])
            try:
                values.append(float(metric(resample)))
                break
            except ContractError:
                continue
    if not values:
        raise ContractError("metric undefined on every resample")
    lo, hi = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    return BootstrapCI(
        point=point, lo=float(lo), hi=float(hi), n_resamples=n_resamples,
        alpha=alpha, seed=seed,
    )


def bootstrap_roc_band(
    sl: ScoredLabels, n_resamples: int = 1000, alpha: float = 0.05, *, seed: int,
    grid_points: int = 101,
):
    """Pointwise TPR band: quantiles at a fixed FPR grid over ROC resamples.

    Returns (fpr_grid, tpr_lo, tpr_hi). Sub-seeding matches bootstrap_ci,
    so the band and the interval for one seed share resample draws.
    """
    if n_resamples < 100:
        raise ContractError("n_resamples must be >= 100")
    if not 0.0 < alpha < 1.0:
        raise ContractError("alpha must be in (0, 1)")
    _require_both_classes(sl)
    grid = np.linspace(0.0, 1.0, grid_points)
    n = len(sl)
    curves = []
    for child in np.random.SeedSequence(seed).spawn(n_resamples):
        rng = np.random.Generator(np.random.PCG64(child))
        for _ in range(100):
            idx = rng.integers(0, n, size=n)
            resample = ScoredLabels(sl.scores[idx], sl.labels[idx])
            try:
                curve = roc_curve(resample)
            except ContractError:
                continue
            xs = np.array([p[0] for p in curve.points])
            ys = np.array([p[1] for p in curve.points])
            curves.append(np.interp(grid, xs, ys))
            break
    if not curves:
        raise ContractError("ROC undefined on every resample")
    stacked = np.vstack(curves)
    lo = np.quantile(stacked, alpha / 2.0, axis=0)
    hi = np.quantile(stacked, 1.0 - alpha / 2.0, axis=0)
    return grid, lo, hi


def threshold_for_sensitivity(sl: ScoredLabels, target: float):
    """Highest threshold whose sensitivity reaches the target, with its report."""
    return _search_threshold(sl, target, "sensitivity", descending=True)


def threshold_for_specificity(sl: ScoredLabels, target: float):
    """Lowest threshold whose specificity reaches the target, with its report."""
    return _search_threshold(sl, target, "specificity", descending=False)


def _search_threshold(sl: ScoredLabels, target: float, attr: str, descending: bool):
    if not 0.0 < target <= 1.0:
        raise ContractError("target must be in (0, 1]")
    thresholds = unique_thresholds(sl)
    if not descending:
        thresholds = thresholds[::-1]
    for t in thresholds:
        report = threshold_report(sl, float(t))
        achieved = getattr(report, attr)
        if not math.isnan(achieved) and achieved >= target:
            return float(t), report
    raise ContractError(f"target unreachable: no threshold reaches {attr} >= {target}")
