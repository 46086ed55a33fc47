"""Dataset ingestion, normalization, splitting, injection, and synthesis.

Sequences are stored time-major as (p, d) float arrays: p shared feature
dimensions, d per-item steps.  Batches are immutable; every operation returns
a new batch.  All randomized operations are pure functions of their seed.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InsufficientDataError


@dataclass(frozen=True)
class SequenceItem:
    id: str
    values: np.ndarray
    label: int | None = None


@dataclass(frozen=True)
class SequenceBatch:
    """Ordered collection of variable-length sequences sharing p."""

    items: tuple
    p: int | None

    def __post_init__(self):
        for it in self.items:
            if it.values.ndim != 2 or it.values.shape[0] != self.p:
                raise DataError(
                    f"item {it.id!r}: expected {self.p} rows, got shape {it.values.shape}")
            if it.values.shape[1] < 1:
                raise DataError(f"item {it.id!r}: sequence must have at least one step")
            if it.label is not None and it.label not in (-1, 1):
                raise DataError(f"item {it.id!r}: label must be -1 or +1, got {it.label}")

    @classmethod
    def from_items(cls, items) -> "SequenceBatch":
        items = tuple(items)
        p = items[0].values.shape[0] if items else None
        return cls(items, p)

    @property
    def n(self) -> int:
        return len(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def values(self) -> list:
        return [it.values for it in self.items]

    def labels(self) -> list:
        return [it.label for it in self.items]

    def is_fully_labeled(self) -> bool:
        return self.n > 0 and all(it.label is not None for it in self.items)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-dimension min and max of the fitting batch."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=float).ravel())
        object.__setattr__(self, "max", np.asarray(self.max, dtype=float).ravel())
        if self.min.shape != self.max.shape:
            raise ValueError("min and max must have the same length")
        if np.any(self.min > self.max):
            raise ValueError("per-dimension min must not exceed max")

    @property
    def p(self) -> int:
        return self.min.shape[0]

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationStats":
        return cls(np.asarray(doc["min"], dtype=float), np.asarray(doc["max"], dtype=float))


def _validate_label(raw, where: str) -> int | None:
    if raw is None:
        return None
    if isinstance(raw, bool) or raw not in (-1, 1):
        raise DataError(f"{where}: label must be -1 or 1, got {raw!r}")
    return int(raw)


def _rows_to_values(rows, where: str) -> np.ndarray:
    # JSON records carry one row per step; internal layout is (p, d).
    if not isinstance(rows, list) or not rows:
        raise DataError(f"{where}: values must be a non-empty list of rows")
    width = None
    for row in rows:
        if not isinstance(row, list) or not row:
            raise DataError(f"{where}: each values row must be a non-empty list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{where}: ragged values rows ({len(row)} vs {width})")
    try:
        arr = np.asarray(rows, dtype=float).T
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: values must be numeric: {exc}") from exc
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{where}: values must be finite")
    return arr


def load_jsonl(path) -> SequenceBatch:
    """Read one JSON record per line: id, values (d rows of p), optional label."""
    items = []
    p = None
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            where = f"{path}: line {lineno}"
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "values" not in record:
                raise DataError(f"{where}: record must be an object with a values field")
            values = _rows_to_values(record["values"], where)
            if p is None:
                p = values.shape[0]
            elif values.shape[0] != p:
                raise DataError(
                    f"{where}: expected {p} dimensions per step, got {values.shape[0]}")
            items.append(SequenceItem(
                id=str(record.get("id", lineno)),
                values=values,
                label=_validate_label(record.get("label"), where)))
    return SequenceBatch.from_items(items)


def save_jsonl(path, batch: SequenceBatch) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in batch.items:
            record = {"id": it.id, "values": it.values.T.tolist()}
            if it.label is not None:
                record["label"] = it.label
            fh.write(json.dumps(record) + "\n")


def load_csv(path) -> SequenceBatch:
    """Flat-file adapter: one step per row, grouped by id, ordered by time.

    Columns: id, time, then one column per feature dimension; an optional
    label column must be constant within each id.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "id" not in fields or "time" not in fields:
            raise DataError(f"{path}: CSV needs id and time columns")
        feature_cols = [c for c in fields if c not in ("id", "time", "label")]
        if not feature_cols:
            raise DataError(f"{path}: CSV has no feature columns")
        groups: dict = {}
        order = []
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}: line {lineno}"
            key = row["id"]
            if key not in groups:
                groups[key] = {"times": [], "rows": [], "label": None}
                order.append(key)
            try:
                t = float(row["time"])
                vals = [float(row[c]) for c in feature_cols]
            except (TypeError, ValueError) as exc:
                raise DataError(f"{where}: non-numeric cell: {exc}") from exc
            if not all(np.isfinite(v) for v in vals):
                raise DataError(f"{where}: values must be finite")
            label = _validate_label(
                int(row["label"]) if "label" in fields and row["label"] not in (None, "")
                else None, where)
            group = groups[key]
            if label is not None:
                if group["label"] is not None and group["label"] != label:
                    raise DataError(f"{where}: conflicting labels for id {key!r}")
                group["label"] = label
            group["times"].append(t)
            group["rows"].append(vals)
    items = []
    for key in order:
        group = groups[key]
        idx = np.argsort(np.asarray(group["times"]), kind="stable")
        values = np.asarray(group["rows"], dtype=float)[idx].T
        items.append(SequenceItem(id=key, values=values, label=group["label"]))
    return SequenceBatch.from_items(items)


def _affine_map(values: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    span = stats.max - stats.min
    shifted = 2.0 * (values - stats.min[:, None]) - span[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = shifted / span[:, None]
    # Constant dimensions carry no information; they map to 0.
    return np.where(span[:, None] > 0.0, scaled, 0.0)


def fit_and_normalize(batch: SequenceBatch):
    """Map every dimension into [-1, 1]; returns (batch, stats) for reuse."""
    if batch.n == 0:
        raise DataError("cannot normalize an empty batch")
    stacked = np.concatenate([it.values for it in batch.items], axis=1)
    stats = NormalizationStats(stacked.min(axis=1), stacked.max(axis=1))
    items = [SequenceItem(it.id, _affine_map(it.values, stats), it.label)
             for it in batch.items]
    return SequenceBatch.from_items(items), stats


def apply_normalization(batch: SequenceBatch, stats: NormalizationStats) -> SequenceBatch:
    """Normalize with previously fitted stats, clamping into [-1, 1]."""
    if batch.n == 0:
        return batch
    if batch.p != stats.p:
        raise DataError(f"batch has {batch.p} dimensions but stats expect {stats.p}")
    items = [SequenceItem(it.id, np.clip(_affine_map(it.values, stats), -1.0, 1.0), it.label)
             for it in batch.items]
    return SequenceBatch.from_items(items)


def denormalize(batch: SequenceBatch, stats: NormalizationStats) -> SequenceBatch:
    """Invert fit_and_normalize; constant dimensions recover their min value."""
    if batch.n == 0:
        return batch
    if batch.p != stats.p:
        raise DataError(f"batch has {batch.p} dimensions but stats expect {stats.p}")
    span = (stats.max - stats.min)[:, None]
    items = [SequenceItem(it.id, (it.values + 1.0) * 0.5 * span + stats.min[:, None], it.label)
             for it in batch.items]
    return SequenceBatch.from_items(items)


def split_train_test(batch: SequenceBatch, train_fraction: float,
                     anomaly_fraction: float, seed: int):
    """Deterministic labeled split; train gets floor fractions of each class.

    Every item lands in exactly one side: the train side receives
    floor(n * train_fraction) items of which floor(n_train * anomaly_fraction)
    are anomalous, and the test side receives everything else.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if not 0.0 <= anomaly_fraction < 1.0:
        raise ValueError("anomaly_fraction must lie in [0, 1)")
    if not batch.is_fully_labeled():
        raise DataError("split requires a label on every item")
    anomalous = np.array([i for i, it in enumerate(batch.items) if it.label == -1], dtype=int)
    normal = np.array([i for i, it in enumerate(batch.items) if it.label == 1], dtype=int)
    n_train = int(batch.n * train_fraction)
    a_train = int(n_train * anomaly_fraction)
    g_train = n_train - a_train
    if a_train > anomalous.size or g_train > normal.size:
        raise InsufficientDataError(
            f"train split needs {a_train} anomalous and {g_train} normal items; "
            f"batch has {anomalous.size} and {normal.size}")
    rng = np.random.default_rng(seed)
    pick_a = anomalous[rng.permutation(anomalous.size)[:a_train]]
    pick_g = normal[rng.permutation(normal.size)[:g_train]]
    train_idx = np.sort(np.concatenate([pick_a, pick_g]))
    mask = np.zeros(batch.n, dtype=bool)
    mask[train_idx] = True
    train = SequenceBatch.from_items(batch.items[i] for i in train_idx)
    test = SequenceBatch.from_items(it for i, it in enumerate(batch.items) if not mask[i])
    return train, test


def inject_gaussian_anomalies(batch: SequenceBatch, count: int, seed: int) -> SequenceBatch:
    """Append count i.i.d. Gaussian sequences with the batch mean and 10x variance.

    Lengths are drawn uniformly from the observed length range; injected items
    are labeled -1 and get ids "injected-{k}".
    """
    if batch.n == 0:
        raise DataError("cannot inject into an empty batch")
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return batch
    stacked = np.concatenate([it.values for it in batch.items], axis=1)
    mean = stacked.mean(axis=1)
    std = np.sqrt(10.0 * stacked.var(axis=1))
    lengths = [it.values.shape[1] for it in batch.items]
    d_lo, d_hi = min(lengths), max(lengths)
    rng = np.random.default_rng(seed)
    injected = []
    for k in range(count):
        d = int(rng.integers(d_lo, d_hi + 1))
        values = mean[:, None] + std[:, None] * rng.standard_normal((batch.p, d))
        injected.append(SequenceItem(id=f"injected-{k}", values=values, label=-1))
    return SequenceBatch.from_items(list(batch.items) + injected)


@dataclass(frozen=True)
class SynthProfile:
    """First-order autoregressive generator; anomalies differ by innovation scale."""

    p: int = 1
    d_min: int = 5
    d_max: int = 15
    ar_coeff: float = 0.8
    normal_scale: float = 0.1
    anomaly_scale: float = 0.31622776601683794

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError("profile p must be at least 1")
        if self.d_min < 1:
            raise ConfigError("profile d_min must be at least 1")
        if self.d_min > self.d_max:
            raise ConfigError(f"profile d_min {self.d_min} exceeds d_max {self.d_max}")
        if not abs(self.ar_coeff) < 1.0:
            raise ConfigError("profile ar_coeff must satisfy |ar_coeff| < 1")
        if self.normal_scale <= 0.0 or self.anomaly_scale <= 0.0:
            raise ConfigError("profile scales must be positive")


def _ar_sequence(rng, p: int, d: int, coeff: float, scale: float) -> np.ndarray:
    values = np.empty((p, d))
    # Stationary start keeps the marginal variance scale^2 / (1 - coeff^2).
    values[:, 0] = rng.standard_normal(p) * scale / np.sqrt(1.0 - coeff * coeff)
    for t in range(1, d):
        values[:, t] = coeff * values[:, t - 1] + scale * rng.standard_normal(p)
    return values


def synth_generate(profile: SynthProfile, n_normal: int, n_anomalous: int,
                   seed: int) -> SequenceBatch:
    """Labeled synthetic batch of AR(1) sequences, deterministic given seed."""
    if n_normal < 0 or n_anomalous < 0:
        raise ValueError("counts must be non-negative")
    rng = np.random.default_rng(seed)
    items = []
    for k in range(n_normal):
        d = int(rng.integers(profile.d_min, profile.d_max + 1))
        items.append(SequenceItem(
            id=f"normal-{k}",
            values=_ar_sequence(rng, profile.p, d, profile.ar_coeff, profile.normal_scale),
            label=1))
    for k in range(n_anomalous):
        d = int(rng.integers(profile.d_min, profile.d_max + 1))
        items.append(SequenceItem(
            id=f"anomalous-{k}",
            values=_ar_sequence(rng, profile.p, d, profile.ar_coeff, profile.anomaly_scale),
            label=-1))
    return SequenceBatch.from_items(items)
