"""Pairwise preference transformation of per-player scores.

Each clearly ordered pair of players ``(i, j)`` becomes two labelled
difference vectors: ``x_hi - x_lo`` with label +1 and its mirror with -1.
A pair is clear when the score gap exceeds ``pt`` times the lower score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class PreferencePair:
    diff: np.ndarray
    label: int
    source: tuple[str, str]


@dataclass(frozen=True, eq=False)
class PairwiseDataset:
    """Datapoints stored by reference: ``diff[k] = points[first[k]] - points[second[k]]``.

    Datapoints come in mirrored couples ordered by source pair, the +1
    datapoint first.
    """

    points: np.ndarray
    first: np.ndarray
    second: np.ndarray
    labels: np.ndarray
    ids: tuple[str, ...]
    pt_used: float

    def __post_init__(self):
        for name in ("points", "first", "second", "labels"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.points.ndim != 2 or self.points.shape[0] != len(self.ids):
            raise ValueError("points must be (n_players, n_features) with one id per row")

    @property
    def n_source_players(self) -> int:
        return len(self.ids)

    @property
    def n_features(self) -> int:
        return self.points.shape[1]

    @property
    def diffs(self) -> np.ndarray:
        return self.points[self.first] - self.points[self.second]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[PreferencePair]:
        diffs = self.diffs
        for k in range(len(self)):
            yield PreferencePair(
                diffs[k], int(self.labels[k]), (self.ids[self.first[k]], self.ids[self.second[k]])
            )

    def to_csv(self, path: str | Path) -> None:
        """Dump diffs, labels and source ids for external tools."""
        p = self.n_features
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*(f"d{c}" for c in range(p)), "label", "id_i", "id_j"])
            for k, d in enumerate(self.diffs):
                w.writerow([*map(repr, d.tolist()), int(self.labels[k]),
                            self.ids[self.first[k]], self.ids[self.second[k]]])


def clear_preference(y_hi, y_lo, pt: float):
    """Threshold rule on (higher, lower) scores; works elementwise on arrays."""
    y_hi = np.asarray(y_hi, dtype=float)
    y_lo = np.asarray(y_lo, dtype=float)
    gap = y_hi - y_lo
    # non-positive lower scores: relative threshold is meaningless, any strict gap counts
    return np.where(y_lo > 0, gap > pt * y_lo, gap > 0) & (gap > 0)


def transform(X, y, pt: float, ids: Sequence[str] | None = None) -> PairwiseDataset:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError(f"length mismatch: {n} feature vectors, {y.shape} scores")
    if n < 2:
        raise ValueError("need at least two players")
    if not np.isfinite(y).all():
        raise ValueError("scores must be finite")
    if not pt >= 0:
        raise ValueError(f"preference threshold must be >= 0, got {pt}")
    if ids is None:
        ids = [str(i) for i in range(n)]
    elif len(ids) != n:
        raise ValueError("one id per player required")

    i, j = np.triu_indices(n, 1)
    i_higher = y[i] > y[j]
    hi = np.where(i_higher, i, j)
    lo = np.where(i_higher, j, i)
    keep = clear_preference(y[hi], y[lo], pt)
    hi, lo = hi[keep], lo[keep]
    m = hi.size
    first = np.column_stack([hi, lo]).ravel()
    second = np.column_stack([lo, hi]).ravel()
    labels = np.tile(np.array([1, -1], dtype=np.int8), m)
    return PairwiseDataset(X, first, second, labels, tuple(map(str, ids)), float(pt))


@dataclass(frozen=True)
class RetentionStats:
    kept_fraction: float
    kept_pairs: int


def retention_stats(pds: PairwiseDataset) -> RetentionStats:
    """Kept datapoints as a fraction of the ``n (n - 1)`` possible ones."""
    n = pds.n_source_players
    if n < 2:
        raise ValueError("need at least two source players")
    return RetentionStats(len(pds) / (n * (n - 1)), len(pds))
