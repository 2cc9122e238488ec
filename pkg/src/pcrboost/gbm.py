"""Gradient-boosted decision trees on binary logistic loss.

Second-order (Newton) boosting with leaf-wise tree growth over the 8
binary features, plus the JSON model document read/write path. Training
is bitwise deterministic: split sums are plain masked reductions (no
BLAS), ties break on the lower feature index and the earlier-created
leaf, and the model document serializes reals at 17 significant digits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import FEATURE_NAMES, N_FEATURES, Dataset
from .errors import ContractError, DataFormatError
from .formatting import fmt_real

FORMAT_VERSION = 1

_CONFIG_FIELDS = (
    "num_rounds",
    "learning_rate",
    "max_leaves",
    "min_samples_leaf",
    "l2_lambda",
    "min_split_gain",
    "seed",
)


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters.

    The seed is carried for provenance and config echo; with no row or
    column subsampling the trainer itself consumes no randomness.
    """

    num_rounds: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 16
    min_samples_leaf: int = 20
    l2_lambda: float = 1.0
    min_split_gain: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_rounds < 0:
            raise ContractError("num_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ContractError("learning_rate must be in (0, 1]")
        if self.max_leaves < 2:
            raise ContractError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ContractError("min_samples_leaf must be >= 1")
        if self.l2_lambda < 0.0:
            raise ContractError("l2_lambda must be >= 0")
        if self.min_split_gain < 0.0:
            raise ContractError("min_split_gain must be >= 0")


@dataclass
class TreeNode:
    """One node: a leaf carries `value`, an internal node a `feature` split.

    Routing: feature value 0 goes left, 1 goes right. `cover` is the
    training hessian mass that reached the node; internal cover equals
    left cover plus right cover exactly.
    """

    cover: float
    value: float | None = None
    feature: int | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()


def sigmoid(raw):
    if np.ndim(raw) == 0:
        raw = float(raw)
        if raw >= 0:
            return 1.0 / (1.0 + math.exp(-raw))
        e = math.exp(raw)
        return e / (1.0 + e)
    raw = np.asarray(raw, dtype=np.float64)
    out = np.empty_like(raw)
    pos = raw >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-raw[pos]))
    e = np.exp(raw[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_grad_hess(raw, label):
    """Gradient and hessian of the log-loss at a raw log-odds score.

    g = p - y and h = p(1-p) with p = sigmoid(raw); vectorizes elementwise.
    """
    p = sigmoid(raw)
    return p - label, p * (1.0 - p)


@dataclass(frozen=True)
class Model:
    """Immutable boosted ensemble: base log-odds plus an ordered tree list."""

    schema: tuple[str, ...]
    base_score: float
    trees: tuple[TreeNode, ...]
    config: TrainConfig

    def _route(self, X: np.ndarray) -> np.ndarray:
        raw = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            raw += tree_values(tree, X)
        return raw

    def predict_raw(self, features):
        """Base score plus the routed leaf value of every tree (log-odds)."""
        X = _as_feature_matrix(features)
        raw = self._route(X)
        return raw if np.ndim(features) == 2 else float(raw[0])

    def predict_proba(self, features):
        """Sigmoid of predict_raw, in the open interval (0, 1)."""
        return sigmoid(self.predict_raw(features))

    def staged_raw(self, features):
        """Yield raw scores after 0, 1, ..., len(trees) trees."""
        X = _as_feature_matrix(features)
        raw = np.full(X.shape[0], self.base_score, dtype=np.float64)
        yield raw.copy()
        for tree in self.trees:
            raw += tree_values(tree, X)
            yield raw.copy()


def _as_feature_matrix(features) -> np.ndarray:
    X = np.asarray(features)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ContractError(f"feature vector length must be {N_FEATURES}")
    return X


def tree_values(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf value reached by each row of X under 0-left/1-right routing."""
    out = np.empty(X.shape[0], dtype=np.float64)
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if node.is_leaf:
            out[idx] = node.value
        else:
            right = X[idx, node.feature] == 1
            stack.append((node.left, idx[~right]))
            stack.append((node.right, idx[right]))
    return out


class _GrowNode:
    """Mutable node state during leaf-wise growth."""

    __slots__ = ("idx", "banned", "seq", "G", "H", "best_gain", "best_feature",
                 "feature", "left", "right")

    def __init__(self, idx, banned, seq, g, h, Xb, cfg):
        self.idx = idx
        self.banned = banned
        self.seq = seq
        self.feature = None
        self.left = None
        self.right = None
        gi = g[idx]
        hi = h[idx]
        self.G = float(np.sum(gi))
        self.H = float(np.sum(hi))
        self.best_gain = None
        self.best_feature = None
        lam = cfg.l2_lambda
        parent_term = self.G * self.G / (self.H + lam)
        for f in range(N_FEATURES):
            if f in self.banned:
                continue
            mask = Xb[idx, f]
            n_right = int(np.sum(mask))
            n_left = len(idx) - n_right
            if n_right < cfg.min_samples_leaf or n_left < cfg.min_samples_leaf:
                continue
            G_r = float(np.sum(gi[mask]))
            H_r = float(np.sum(hi[mask]))
            G_l = float(np.sum(gi[~mask]))
            H_l = float(np.sum(hi[~mask]))
            gain = 0.5 * (
                G_l * G_l / (H_l + lam) + G_r * G_r / (H_r + lam) - parent_term
            ) - cfg.min_split_gain
            # ascending f with a strict > keeps the lower index on ties
            if self.best_gain is None or gain > self.best_gain:
                self.best_gain = gain
                self.best_feature = f

    def splittable(self) -> bool:
        return self.best_gain is not None and self.best_gain > 0.0


def _grow_tree(Xb, g, h, cfg: TrainConfig):
    """One leaf-wise tree; returns (root TreeNode, list of (leaf value, idx))."""
    seq = 0
    root = _GrowNode(np.arange(Xb.shape[0]), frozenset(), seq, g, h, Xb, cfg)
    leaves = [root]
    while len(leaves) < cfg.max_leaves:
        best = None
        for leaf in leaves:  # creation order; strict > keeps the earlier leaf on ties
            if leaf.splittable() and (best is None or leaf.best_gain > best.best_gain):
                best = leaf
        if best is None:
            break
        f = best.best_feature
        mask = Xb[best.idx, f]
        banned = best.banned | {f}
        seq += 1
        left = _GrowNode(best.idx[~mask], banned, seq, g, h, Xb, cfg)
        seq += 1
        right = _GrowNode(best.idx[mask], banned, seq, g, h, Xb, cfg)
        best.feature = f
        best.left = left
        best.right = right
        # removal plus in-order appends keep `leaves` in creation order
        leaves.remove(best)
        leaves.append(left)
        leaves.append(right)

    updates = []

    def finalize(node: _GrowNode) -> TreeNode:
        if node.feature is None:
            value = -cfg.learning_rate * node.G / (node.H + cfg.l2_lambda)
            updates.append((value, node.idx))
            return TreeNode(cover=node.H, value=value)
        left = finalize(node.left)
        right = finalize(node.right)
        return TreeNode(cover=left.cover + right.cover, feature=node.feature,
                        left=left, right=right)

    return finalize(root), updates


def fit(ds: Dataset, cfg: TrainConfig) -> Model:
    """Train the boosted ensemble.

    base_score is the prevalence log-odds; each round fits one leaf-wise
    tree to the current gradients/hessians. Deterministic for fixed inputs,
    independent of thread count.
    """
    if len(ds) == 0:
        raise ContractError("empty dataset")
    if tuple(ds.schema) != FEATURE_NAMES:
        raise ContractError("schema mismatch")
    n_pos = ds.n_positive
    if n_pos == 0 or n_pos == len(ds):
        raise ContractError("single-class dataset")
    p_bar = n_pos / len(ds)
    base_score = math.log(p_bar / (1.0 - p_bar))
    Xb = ds.X != 0
    yf = ds.y.astype(np.float64)
    raw = np.full(len(ds), base_score, dtype=np.float64)
    trees = []
    for _ in range(cfg.num_rounds):
        g, h = logistic_grad_hess(raw, yf)
        root, updates = _grow_tree(Xb, g, h, cfg)
        for value, idx in updates:
            raw[idx] += value
        trees.append(root)
    return Model(schema=FEATURE_NAMES, base_score=base_score, trees=tuple(trees),
                 config=cfg)


def _emit_json(obj) -> str:
    # json.dumps writes shortest-round-trip floats; the model document
    # requires 17 significant digits, hence this small fixed-order emitter.
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(k)}: {_emit_json(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit_json(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, bool) or obj is None:
        raise TypeError("unexpected value in model document")
    if isinstance(obj, int):
        return str(obj)
    if not math.isfinite(obj):
        raise ContractError("non-finite real in model document")
    return fmt_real(obj)


def _node_doc(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": float(node.value), "cover": float(node.cover)}
    return {
        "feature": int(node.feature),
        "cover": float(node.cover),
        "left": _node_doc(node.left),
        "right": _node_doc(node.right),
    }


def save_model(model: Model) -> str:
    """Serialize to the version-1 JSON model document (17-digit reals)."""
    cfg = model.config
    doc = {
        "format_version": FORMAT_VERSION,
        "schema": list(model.schema),
        "base_score": float(model.base_score),
        "config": {name: getattr(cfg, name) for name in _CONFIG_FIELDS},
        "trees": [_node_doc(t) for t in model.trees],
    }
    return _emit_json(doc) + "\n"


def _parse_node(doc) -> TreeNode:
    if not isinstance(doc, dict):
        raise DataFormatError("malformed model document: node is not an object")
    keys = set(doc)
    if keys == {"value", "cover"}:
        value, cover = doc["value"], doc["cover"]
        if not isinstance(value, (int, float)) or not isinstance(cover, (int, float)):
            raise DataFormatError("malformed model document: non-numeric leaf")
        return TreeNode(cover=float(cover), value=float(value))
    if keys == {"feature", "cover", "left", "right"}:
        feature = doc["feature"]
        if not isinstance(feature, int) or not 0 <= feature < N_FEATURES:
            raise DataFormatError("malformed model document: bad feature index")
        return TreeNode(
            cover=float(doc["cover"]),
            feature=feature,
            left=_parse_node(doc["left"]),
            right=_parse_node(doc["right"]),
        )
    raise DataFormatError("malformed model document: unexpected node keys")


def load_model(blob) -> Model:
    """Parse a version-1 JSON model document (str or bytes)."""
    if isinstance(blob, (bytes, bytearray)):
        blob = blob.decode("utf-8", errors="replace")
    try:
        doc = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"malformed model document: {exc}") from None
    if not isinstance(doc, dict):
        raise DataFormatError("malformed model document: not an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(
            f"model format_version mismatch: expected {FORMAT_VERSION}"
        )
    if tuple(doc.get("schema", ())) != FEATURE_NAMES:
        raise DataFormatError("model schema mismatch")
    cfg_doc = doc.get("config")
    if not isinstance(cfg_doc, dict) or set(cfg_doc) != set(_CONFIG_FIELDS):
        raise DataFormatError("malformed model document: bad config block")
    try:
        cfg = TrainConfig(**cfg_doc)
    except ContractError as exc:
        raise DataFormatError(f"malformed model document: {exc}") from None
    trees = doc.get("trees")
    if not isinstance(trees, list):
        raise DataFormatError("malformed model document: trees must be an array")
    base = doc.get("base_score")
    if not isinstance(base, (int, float)):
        raise DataFormatError("malformed model document: bad base_score")
    return Model(
        schema=FEATURE_NAMES,
        base_score=float(base),
        trees=tuple(_parse_node(t) for t in trees),
        config=cfg,
    )
