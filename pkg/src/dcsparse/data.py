"""Dataset loading (LIBSVM text and CSV), fold generation, and standardization."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with +/-1 labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple | None = None

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=float)
        if feats.shape[0] != labels.size:
            raise ValueError("feature row count must match label count")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain NaN or Inf")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)

    def check_trainable(self):
        if self.m < 2 or not (np.any(self.labels > 0) and np.any(self.labels < 0)):
            raise ValueError("training needs at least 2 points with both classes present")


def _map_label(raw: str, path, line_no) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(path, line_no, f"unreadable label {raw!r}")
    if v == 1.0:
        return 1.0
    if v == -1.0:
        return -1.0
    if v in (0.0, 2.0):
        warnings.warn(f"{path}:{line_no}: label {raw} mapped to -1")
        return -1.0
    raise ParseError(path, line_no, f"unreadable label {raw!r}")


def load_libsvm(path) -> Dataset:
    """Parse `<label> <idx>:<val> ...` lines; indices 1-based, strictly increasing."""
    rows = []  # (label, [(idx, val), ...])
    n = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            label = _map_label(toks[0], path, line_no)
            pairs = []
            prev = 0
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(path, line_no, f"malformed token {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(path, line_no, f"malformed token {tok!r}")
                if idx <= prev:
                    raise ParseError(
                        path, line_no, f"indices not strictly increasing at {tok!r}"
                    )
                prev = idx
                pairs.append((idx, val))
            n = max(n, prev)
            rows.append((label, pairs))
    if not rows:
        raise ParseError(path, 0, "empty dataset")
    feats = np.zeros((len(rows), n))
    labels = np.empty(len(rows))
    for r, (label, pairs) in enumerate(rows):
        labels[r] = label
        for idx, val in pairs:
            feats[r, idx - 1] = val
    return Dataset(feats, labels)


def save_libsvm(dataset: Dataset, path):
    """Write in LIBSVM text form at 17 significant digits (round-trips exactly)."""
    with open(path, "w") as fh:
        for row, label in zip(dataset.features, dataset.labels):
            parts = [f"{int(label):+d}"]
            for i in np.flatnonzero(row != 0.0):
                parts.append(f"{i + 1}:{row[i]:.17g}")
            fh.write(" ".join(parts) + "\n")


def load_csv(path, label_col: str) -> Dataset:
    """CSV with a header row; every non-label column becomes a feature."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 0, "empty file")
        if label_col not in header:
            raise ParseError(path, 1, f"label column {label_col!r} not in header")
        li = header.index(label_col)
        names = tuple(h for j, h in enumerate(header) if j != li)
        feats, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    path, line_no, f"expected {len(header)} fields, got {len(row)}"
                )
            try:
                label = float(row[li])
                vals = [float(v) for j, v in enumerate(row) if j != li]
            except ValueError:
                raise ParseError(path, line_no, "non-numeric field")
            if label not in (-1.0, 1.0):
                raise ParseError(path, line_no, f"label {row[li]!r} not in {{+1, -1}}")
            labels.append(label)
            feats.append(vals)
    if not feats:
        raise ParseError(path, 0, "no data rows")
    return Dataset(np.array(feats), np.array(labels), names)


def kfold_indices(m: int, k: int, seed: int):
    """Seeded shuffle then contiguous chunks; deterministic for fixed inputs."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if m < k:
        raise ValueError(f"cannot make {k} folds from {m} points")
    perm = np.random.default_rng(seed).permutation(m)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def standardize(train: Dataset, test: Dataset | None = None):
    """Per-feature z-score using train statistics; constant features pass through."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    flat = std == 0.0
    if np.any(flat):
        warnings.warn(f"{int(flat.sum())} zero-variance feature(s) left unscaled")
    scale = np.where(flat, 1.0, std)
    shift = np.where(flat, 0.0, mean)
    train2 = Dataset((train.features - shift) / scale, train.labels, train.feature_names)
    if test is None:
        return train2, None
    test2 = Dataset((test.features - shift) / scale, test.labels, test.feature_names)
    return train2, test2
