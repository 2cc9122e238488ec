"""Datasets of binary symptom features with RT-PCR labels.

Ingests and emits the fixed-schema CSV format, synthesizes datasets
calibrated to the published class-conditional marginals of the Israeli
Ministry of Health RT-PCR symptom survey, computes reporter-positive
rates, and produces the under-reporting bias simulation variants.

All randomness in this package uses NumPy's PCG64 generator with one
explicit seed per operation; see the README for the policy.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ContractError, DataFormatError

FEATURE_NAMES: tuple[str, ...] = (
    "sex_male",
    "age_60_plus",
    "cough",
    "fever",
    "sore_throat",
    "shortness_of_breath",
    "headache",
    "contact_confirmed",
)

# The five self-reported symptoms; the bias simulation keys on these only,
# not on sex/age/contact, which a reluctant reporter cannot under-report.
SYMPTOM_FEATURES: tuple[str, ...] = (
    "cough",
    "fever",
    "sore_throat",
    "shortness_of_breath",
    "headache",
)

N_FEATURES = len(FEATURE_NAMES)

CSV_HEADER: tuple[str, ...] = FEATURE_NAMES + ("label",)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered records of 8 binary features plus a binary label.

    Attributes:
        X: uint8 array of shape (n_records, 8), feature values in schema order.
        y: uint8 array of shape (n_records,), 1 = positive RT-PCR.
        provenance: free-text origin tag (e.g. "csv:path", "synth:seed=7").
        schema: the fixed feature-name tuple.
    """

    X: np.ndarray
    y: np.ndarray
    provenance: str = ""
    schema: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.array(self.X, dtype=np.uint8, copy=True)
        y = np.array(self.y, dtype=np.uint8, copy=True)
        if X.ndim != 2 or X.shape[1] != N_FEATURES:
            raise ContractError(f"feature matrix must be (n, {N_FEATURES}), got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ContractError("label vector length must match record count")
        if X.size and X.max() > 1:
            raise ContractError("non-binary value in features")
        if y.size and y.max() > 1:
            raise ContractError("non-binary value in labels")
        if tuple(self.schema) != FEATURE_NAMES:
            raise ContractError("schema mismatch")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __eq__(self, other) -> bool:
        """Record equality: same schema, features, and labels (provenance excluded)."""
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.y == 1))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.y == 0))

    def take(self, indices: np.ndarray, provenance: str | None = None) -> "Dataset":
        """Sub-dataset at the given record indices, in the given order."""
        return Dataset(
            self.X[indices],
            self.y[indices],
            self.provenance if provenance is None else provenance,
        )


@dataclass(frozen=True)
class MarginalTable:
    """Class-conditional feature rates plus the class counts behind them."""

    rate_given_positive: np.ndarray
    rate_given_negative: np.ndarray
    n_positive: int
    n_negative: int

    def __post_init__(self):
        rp = np.array(self.rate_given_positive, dtype=np.float64, copy=True)
        rn = np.array(self.rate_given_negative, dtype=np.float64, copy=True)
        if rp.shape != (N_FEATURES,) or rn.shape != (N_FEATURES,):
            raise ContractError(f"rates must have shape ({N_FEATURES},)")
        for rates in (rp, rn):
            if not np.all((rates >= 0.0) & (rates <= 1.0)):
                raise ContractError("rates outside [0,1]")
        if self.n_positive < 0 or self.n_negative < 0:
            raise ContractError("class counts must be nonnegative")
        rp.flags.writeable = False
        rn.flags.writeable = False
        object.__setattr__(self, "rate_given_positive", rp)
        object.__setattr__(self, "rate_given_negative", rn)

    def rate(self, feature: str, label: int) -> float:
        i = FEATURE_NAMES.index(feature)
        rates = self.rate_given_positive if label == 1 else self.rate_given_negative
        return float(rates[i])


@dataclass(frozen=True)
class BiasSimConfig:
    """Parameters of the under-reporting simulation."""

    drop_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.drop_fraction <= 1.0:
            raise ContractError("drop_fraction must be in [0,1]")


def load_csv(source) -> Dataset:
    """Parse a dataset from a byte stream (or bytes) of the documented CSV.

    The header must name all 8 schema columns plus `label`, in any order;
    columns are mapped onto schema order. Body cells must be literal 0 or 1.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    try:
        reader = csv.reader(text)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty CSV: missing header") from None
        except csv.Error as exc:
            raise DataFormatError(f"malformed CSV: {exc}") from None
        expected = set(CSV_HEADER)
        seen: dict[str, int] = {}
        for pos, name in enumerate(header):
            if name not in expected:
                raise DataFormatError(f"unknown column {name!r}")
            if name in seen:
                raise DataFormatError(f"duplicate column {name!r}")
            seen[name] = pos
        missing = [name for name in CSV_HEADER if name not in seen]
        if missing:
            raise DataFormatError(f"missing column {missing[0]!r}")
        order = [seen[name] for name in CSV_HEADER]

        rows: list[list[int]] = []
        try:
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(CSV_HEADER):
                    raise DataFormatError(f"line {lineno}: expected {len(CSV_HEADER)} cells, got {len(row)}")
                out = []
                for pos in order:
                    cell = row[pos]
                    if cell == "0":
                        out.append(0)
                    elif cell == "1":
                        out.append(1)
                    else:
                        raise DataFormatError(f"line {lineno}: non-binary value {cell!r}")
                rows.append(out)
        except csv.Error as exc:
            raise DataFormatError(f"malformed CSV: {exc}") from None
        if not rows:
            raise DataFormatError("empty CSV body")
        arr = np.array(rows, dtype=np.uint8)
        return Dataset(arr[:, :N_FEATURES], arr[:, N_FEATURES], provenance="csv")
    finally:
        text.detach()


def save_csv(ds: Dataset, dest) -> None:
    """Write the documented CSV (LF newlines, ASCII 0/1 cells) to a binary stream."""
    lines = [",".join(CSV_HEADER)]
    body = np.column_stack([ds.X, ds.y])
    for row in body:
        lines.append(",".join("1" if v else "0" for v in row))
    dest.write(("\n".join(lines) + "\n").encode("ascii"))


def marginals_from(ds: Dataset) -> MarginalTable:
    """Class-conditional feature rates: count(feature=1 and class) / count(class)."""
    n_pos = ds.n_positive
    n_neg = ds.n_negative
    if n_pos == 0 or n_neg == 0:
        raise ContractError("degenerate class balance: one class absent")
    pos_counts = ds.X[ds.y == 1].sum(axis=0, dtype=np.int64)
    neg_counts = ds.X[ds.y == 0].sum(axis=0, dtype=np.int64)
    return MarginalTable(pos_counts / n_pos, neg_counts / n_neg, n_pos, n_neg)


def synthesize(m: MarginalTable, n_pos: int, n_neg: int, seed: int) -> Dataset:
    """Draw a dataset of n_pos positives and n_neg negatives from the marginals.

    Labels are laid out positives-first then shuffled by the seed; each
    feature is then an independent biased coin at its class-conditional rate.
    Deterministic for fixed (m, n_pos, n_neg, seed).
    """
    if n_pos < 0 or n_neg < 0:
        raise ContractError("class counts must be nonnegative")
    n = n_pos + n_neg
    if n < 1:
        raise ContractError("need at least one record")
    rng = _rng(seed)
    y = np.concatenate([np.ones(n_pos, dtype=np.uint8), np.zeros(n_neg, dtype=np.uint8)])
    rng.shuffle(y)
    rates = np.where(
        (y == 1)[:, None], m.rate_given_positive[None, :], m.rate_given_negative[None, :]
    )
    X = (rng.random((n, N_FEATURES)) < rates).astype(np.uint8)
    return Dataset(X, y, provenance=f"synth:seed={seed}")


def reporter_positive_rate(ds: Dataset, feature: str) -> float:
    """Among records reporting the feature, the fraction with a positive label."""
    i = FEATURE_NAMES.index(feature)
    reporters = ds.X[:, i] == 1
    n_reporters = int(np.sum(reporters))
    if n_reporters == 0:
        raise ContractError(f"feature never reported: {feature}")
    n_pos = int(np.sum(ds.y[reporters] == 1))
    return n_pos / n_reporters


def asymptomatic_negative_indices(ds: Dataset) -> np.ndarray:
    """Indices of negative-labeled records reporting none of the five symptoms."""
    cols = [FEATURE_NAMES.index(f) for f in SYMPTOM_FEATURES]
    no_symptoms = ~np.any(ds.X[:, cols] == 1, axis=1)
    return np.flatnonzero((ds.y == 0) & no_symptoms)


def simulate_bias(ds: Dataset, cfg: BiasSimConfig) -> Dataset:
    """Remove a seeded uniformly random drop_fraction of asymptomatic negatives.

    The presumed under-reporters are the negative-labeled records whose five
    symptom features are all 0; all other records are retained in order.
    """
    if len(ds) == 0:
        raise ContractError("empty dataset")
    candidates = asymptomatic_negative_indices(ds)
    n_drop = int(len(candidates) * cfg.drop_fraction + 0.5)
    keep = np.ones(len(ds), dtype=bool)
    if n_drop:
        dropped = _rng(cfg.seed).choice(candidates, size=n_drop, replace=False)
        keep[dropped] = False
    return ds.take(
        np.flatnonzero(keep),
        provenance=f"{ds.provenance}|bias:drop={cfg.drop_fraction},seed={cfg.seed}",
    )


def split(ds: Dataset, test_fraction: float, seed: int, stratified: bool = False):
    """Partition into (train, test) by a seeded shuffle.

    Stratified mode shuffles within each class so test prevalence matches the
    input within one record per class. Record order is preserved in both parts.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ContractError("test_fraction out of range (0,1)")
    rng = _rng(seed)
    n = len(ds)
    if stratified:
        if ds.n_positive == 0 or ds.n_negative == 0:
            raise ContractError("degenerate class balance: one class absent")
        test_parts = []
        for cls in (0, 1):
            idx = np.flatnonzero(ds.y == cls)
            perm = rng.permutation(idx)
            n_test = int(len(idx) * test_fraction + 0.5)
            test_parts.append(perm[:n_test])
        test_idx = np.concatenate(test_parts)
    else:
        perm = rng.permutation(n)
        n_test = int(n * test_fraction + 0.5)
        test_idx = perm[:n_test]
    in_test = np.zeros(n, dtype=bool)
    in_test[test_idx] = True
    train = ds.take(np.flatnonzero(~in_test), provenance=f"{ds.provenance}|split:train")
    test = ds.take(np.flatnonzero(in_test), provenance=f"{ds.provenance}|split:test")
    return train, test


def reference_counts() -> dict:
    """The bundled verbatim survey counts (per feature x {true,false} x class)."""
    payload = resources.files("pcrboost.data").joinpath("reference_counts.json")
    return json.loads(payload.read_text(encoding="utf-8"))


def _class_totals(counts: dict) -> tuple[int, int]:
    # Only the sex, age and contact rows sum consistently in the source;
    # class totals are fixed from the sex rows.
    sex = counts["features"]["sex_male"]
    n_pos = sex["true"]["positive_n"] + sex["false"]["positive_n"]
    n_neg = sex["true"]["negative_n"] + sex["false"]["negative_n"]
    return n_pos, n_neg


def reference_marginals() -> MarginalTable:
    """MarginalTable from the bundled survey counts (the default generator source)."""
    counts = reference_counts()
    n_pos, n_neg = _class_totals(counts)
    rate_pos = np.empty(N_FEATURES)
    rate_neg = np.empty(N_FEATURES)
    for i, name in enumerate(FEATURE_NAMES):
        row = counts["features"][name]["true"]
        rate_pos[i] = row["positive_n"] / n_pos
        rate_neg[i] = row["negative_n"] / n_neg
    return MarginalTable(rate_pos, rate_neg, n_pos, n_neg)


def from_class_counts(
    positive_true: dict[str, int], negative_true: dict[str, int], n_positive: int, n_negative: int
) -> Dataset:
    """Deterministic dataset reproducing exact per-class true counts per feature.

    Within each class block, feature f is 1 in the first positive_true[f]
    (resp. negative_true[f]) records. Feature co-occurrence is arbitrary but
    all class-conditional marginal counts are exact.
    """
    blocks = []
    for counts, n_cls in ((positive_true, n_positive), (negative_true, n_negative)):
        X = np.zeros((n_cls, N_FEATURES), dtype=np.uint8)
        for i, name in enumerate(FEATURE_NAMES):
            k = counts[name]
            if not 0 <= k <= n_cls:
                raise ContractError(f"count for {name} outside [0, {n_cls}]")
            X[:k, i] = 1
        blocks.append(X)
    X = np.concatenate(blocks, axis=0)
    y = np.concatenate(
        [np.ones(n_positive, dtype=np.uint8), np.zeros(n_negative, dtype=np.uint8)]
    )
    return Dataset(X, y, provenance="counts:exact")


def reference_dataset() -> Dataset:
    """Dataset realizing the bundled survey counts exactly (99,232 records)."""
    counts = reference_counts()
    n_pos, n_neg = _class_totals(counts)
    pos_true = {f: counts["features"][f]["true"]["positive_n"] for f in FEATURE_NAMES}
    neg_true = {f: counts["features"][f]["true"]["negative_n"] for f in FEATURE_NAMES}
    return from_class_counts(pos_true, neg_true, n_pos, n_neg)
