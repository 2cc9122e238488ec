"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from pcrboost.dataset import FEATURE_NAMES, N_FEATURES, Dataset
from pcrboost.gbm import Model, TrainConfig, TreeNode


def make_dataset(rng: np.random.Generator, n: int, p_pos: float = 0.3) -> Dataset:
    """Random binary dataset with a feature-dependent label signal."""
    X = (rng.random((n, N_FEATURES)) < 0.4).astype(np.uint8)
    logits = -1.0 + 1.5 * X[:, 2] + 1.0 * X[:, 3] + 2.0 * X[:, 7] - 0.5 * X[:, 0]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits + math.log((1 - p_pos) / p_pos)))).astype(
        np.uint8
    )
    # training needs both classes; nudge degenerate draws
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return Dataset(X, y, provenance="test:random")


def random_tree(rng: np.random.Generator, max_depth: int = 4, split_prob: float = 0.7) -> TreeNode:
    """Random tree with positive covers; internal cover = left + right exactly."""

    def grow(depth: int, banned: frozenset) -> TreeNode:
        if depth >= max_depth or len(banned) == N_FEATURES or rng.random() > split_prob:
            return TreeNode(cover=float(rng.uniform(0.2, 4.0)), value=float(rng.uniform(-1, 1)))
        feature = int(rng.choice([f for f in range(N_FEATURES) if f not in banned]))
        left = grow(depth + 1, banned | {feature})
        right = grow(depth + 1, banned | {feature})
        return TreeNode(cover=left.cover + right.cover, feature=feature, left=left, right=right)

    # always split the root so every random tree has at least 2 leaves
    feature = int(rng.integers(0, N_FEATURES))
    left = grow(1, frozenset({feature}))
    right = grow(1, frozenset({feature}))
    return TreeNode(cover=left.cover + right.cover, feature=feature, left=left, right=right)


def random_model(rng: np.random.Generator, n_trees: int) -> Model:
    return Model(
        schema=FEATURE_NAMES,
        base_score=float(rng.uniform(-1.5, 1.5)),
        trees=tuple(random_tree(rng) for _ in range(n_trees)),
        config=TrainConfig(),
    )


def tree_value_scalar(node: TreeNode, x) -> float:
    """Scalar routing oracle: follow 0-left/1-right to a leaf."""
    while not node.is_leaf:
        node = node.right if x[node.feature] == 1 else node.left
    return float(node.value)


def subset_value(node: TreeNode, x, coalition: frozenset) -> float:
    """Definitional path-dependent value function, one coalition at a time."""
    if node.is_leaf:
        return float(node.value)
    if node.feature in coalition:
        child = node.right if x[node.feature] == 1 else node.left
        return subset_value(child, x, coalition)
    return (
        node.left.cover * subset_value(node.left, x, coalition)
        + node.right.cover * subset_value(node.right, x, coalition)
    ) / node.cover


def scalar_shapley(model: Model, x):
    """Textbook Shapley sum over itertools subsets (slow scalar reference)."""

    def v(coalition: frozenset) -> float:
        return model.base_score + sum(subset_value(t, x, coalition) for t in model.trees)

    features = range(N_FEATURES)
    phis = np.zeros(N_FEATURES)
    for f in features:
        others = [g for g in features if g != f]
        for size in range(N_FEATURES):
            weight = (
                math.factorial(size)
                * math.factorial(N_FEATURES - size - 1)
                / math.factorial(N_FEATURES)
            )
            for combo in itertools.combinations(others, size):
                s = frozenset(combo)
                phis[f] += weight * (v(s | {f}) - v(s))
    return v(frozenset()), phis


def pair_count_auroc(sl) -> float:
    """O(n^2) oracle: mean positive-over-negative pair credit, ties half-credited."""
    pos = sl.scores[sl.labels == 1]
    neg = sl.scores[sl.labels == 0]
    credit = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                credit += 1.0
            elif sp == sn:
                credit += 0.5
    return credit / (len(pos) * len(neg))


def assert_local_accuracy(model: Model, explanation, record, tol: float = 1e-9) -> None:
    total = explanation.base_value + float(np.sum(explanation.contributions))
    assert abs(total - model.predict_raw(record)) <= tol


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and "::" in nodeid:
                name = nodeid.split("::", 1)[1]
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, verdict))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
