"""Labeled feature tables: CSV persistence, z-scoring, stratified splits and CV folds.

Labels are binary: "rage" maps to 1, "non_rage" to 0. An optional free-text
genre column is carried through for reporting but never used by models.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateClass,
    NonFiniteValue,
    SchemaMismatch,
    TooFewSamples,
    UnknownLabel,
)
from .features import FEATURE_NAMES, N_FEATURES

LABEL_TO_INT = {"non_rage": 0, "rage": 1}
INT_TO_LABEL = {v: k for k, v in LABEL_TO_INT.items()}

CSV_HEADER = ("id", "label", *FEATURE_NAMES)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class FeatureTable:
    """Immutable matrix of feature rows with labels and track ids."""

    rows: np.ndarray
    labels: np.ndarray
    ids: tuple[str, ...]
    genres: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("rows must be 2-D")
        if not (len(labels) == len(self.ids) == rows.shape[0]):
            raise ValueError("rows, labels and ids must have equal length")
        if labels.size and not np.all(np.isin(labels, (0, 1))):
            raise UnknownLabel("labels must be 0 or 1")
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.genres is not None:
            object.__setattr__(self, "genres", tuple(self.genres))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def subset(self, indices) -> "FeatureTable":
        indices = np.asarray(indices, dtype=int)
        return FeatureTable(
            rows=self.rows[indices],
            labels=self.labels[indices],
            ids=tuple(self.ids[i] for i in indices),
            genres=tuple(self.genres[i] for i in indices) if self.genres else None,
        )

    def with_rows(self, rows: np.ndarray) -> "FeatureTable":
        return FeatureTable(rows=rows, labels=self.labels, ids=self.ids, genres=self.genres)

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


@dataclass
class Normalizer:
    """Per-feature z-score statistics learned from training rows only."""

    mean: np.ndarray
    std: np.ndarray
    constant_features: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.std

    def invert(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "constant_features": [int(i) for i in self.constant_features],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            constant_features=np.asarray(d["constant_features"], dtype=int),
        )


def zscore_fit(train_rows: np.ndarray) -> Normalizer:
    """Population mean/std per feature; constant features get std 1 and a flag."""
    train_rows = np.asarray(train_rows, dtype=np.float64)
    if train_rows.size == 0:
        raise ValueError("cannot fit a normalizer on empty rows")
    mean = train_rows.mean(axis=0)
    std = train_rows.std(axis=0)
    constant = np.nonzero(std == 0.0)[0]
    if constant.size:
        std = std.copy()
        std[constant] = 1.0
    return Normalizer(mean=mean, std=std, constant_features=constant)


def zscore_apply(norm: Normalizer, rows: np.ndarray) -> np.ndarray:
    return norm.apply(rows)


def _class_indices(labels: np.ndarray) -> dict[int, np.ndarray]:
    return {c: np.nonzero(labels == c)[0] for c in (0, 1)}


def stratified_split(table: FeatureTable, test_fraction: float, seed: int) -> SplitIndices:
    """Per-class proportional train/test split, deterministic per seed."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    train_parts, test_parts = [], []
    for c, members in sorted(_class_indices(table.labels).items()):
        if members.size < 2:
            raise DegenerateClass(f"class {c} has {members.size} members; need >= 2")
        shuffled = members[rng.permutation(members.size)]
        n_test = round(members.size * test_fraction)
        test_parts.append(shuffled[:n_test])
        train_parts.append(shuffled[n_test:])
    return SplitIndices(
        train=np.sort(np.concatenate(train_parts)),
        test=np.sort(np.concatenate(test_parts)),
    )


def kfold(table: FeatureTable, k: int, seed: int) -> list[SplitIndices]:
    """Stratified k-fold partition; fold sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    assignment = np.empty(table.n, dtype=int)
    cursor = 0  # rotate fold assignment across classes so totals stay balanced
    for c, members in sorted(_class_indices(table.labels).items()):
        if members.size < k:
            raise TooFewSamples(f"class {c} has {members.size} members; need >= k={k}")
        shuffled = members[rng.permutation(members.size)]
        for idx in shuffled:
            assignment[idx] = cursor % k
            cursor += 1
    everything = np.arange(table.n)
    return [
        SplitIndices(train=everything[assignment != f], test=everything[assignment == f])
        for f in range(k)
    ]


def write_feature_csv(table: FeatureTable, path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = list(CSV_HEADER) + (["genre"] if table.genres is not None else [])
    writer.writerow(header)
    for i in range(table.n):
        row = [table.ids[i], INT_TO_LABEL[int(table.labels[i])]]
        row += [_fmt(v) for v in table.rows[i]]
        if table.genres is not None:
            row.append(table.genres[i])
        writer.writerow(row)
    Path(path).write_text(buffer.getvalue())


def read_feature_csv(path) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("empty feature file") from None
        has_genre = header == list(CSV_HEADER) + ["genre"]
        if not has_genre and header != list(CSV_HEADER):
            raise SchemaMismatch(
                f"feature CSV header does not match the frozen schema: {header[:6]}..."
            )
        ids, labels, genres = [], [], []
        rows = []
        for line in reader:
            if not line:
                continue
            expected = len(CSV_HEADER) + (1 if has_genre else 0)
            if len(line) != expected:
                raise SchemaMismatch(f"row for id {line[0]!r} has {len(line)} fields")
            ids.append(line[0])
            if line[1] not in LABEL_TO_INT:
                raise UnknownLabel(f"unknown label {line[1]!r} for id {line[0]!r}")
            labels.append(LABEL_TO_INT[line[1]])
            values = np.array([float(v) for v in line[2 : 2 + N_FEATURES]])
            if not np.all(np.isfinite(values)):
                raise NonFiniteValue(f"non-finite feature value for id {line[0]!r}")
            rows.append(values)
            if has_genre:
                genres.append(line[-1])
    return FeatureTable(
        rows=np.array(rows).reshape(len(rows), N_FEATURES),
        labels=np.array(labels, dtype=np.int64),
        ids=tuple(ids),
        genres=tuple(genres) if has_genre else None,
    )


def read_labels_csv(path) -> list[tuple[str, int, str]]:
    """Parse a labels manifest: path,label[,genre] rows -> (path, label, genre)."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["path", "label"]:
            raise SchemaMismatch("labels CSV must start with header path,label[,genre]")
        for line in reader:
            if not line:
                continue
            if line[1] not in LABEL_TO_INT:
                raise UnknownLabel(f"unknown label {line[1]!r} for {line[0]!r}")
            genre = line[2] if len(line) > 2 else ""
            entries.append((line[0], LABEL_TO_INT[line[1]], genre))
    return entries


def write_labels_csv(entries, path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["path", "label", "genre"])
    for file_path, label, genre in entries:
        writer.writerow([file_path, INT_TO_LABEL[int(label)], genre])
    Path(path).write_text(buffer.getvalue())
