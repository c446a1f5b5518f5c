"""Exclusive play-style labels from k-means over aggregated features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import PLAY_STYLES, Dataset, Feature, FeatureKind, FeatureSchema
from .pipeline import Normalizer, fit_normalizer


@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray  # (k, p) in the space the model was fitted in
    ids: tuple[str, ...]
    labels: np.ndarray
    inertia: float
    seed: int
    history: tuple[float, ...] = ()  # inertia after each assignment of the winning restart
    feature_names: tuple[str, ...] = ()
    normalizer: Normalizer | None = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def assignments(self) -> dict[str, int]:
        return {pid: int(c) for pid, c in zip(self.ids, self.labels)}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "normalizer": self.normalizer.to_dict() if self.normalizer else None,
            "assignments": self.assignments,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] + (C * C).sum(1)[None, :] - 2.0 * X @ C.T
    return np.maximum(d, 0.0)


def _plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = _sqdist(X, centers[0][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        closest = np.minimum(closest, _sqdist(X, X[idx][None, :])[:, 0])
    return np.array(centers)


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int):
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sqdist(X, C)
        new = d.argmin(axis=1)
        history.append(float(d[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = C.copy()
        for j in range(C.shape[0]):
            members = labels == j
            if members.any():
                C[j] = X[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centroid
                far = int(np.argmax(((X - C[labels]) ** 2).sum(1)))
                C[j] = X[far]
                labels[far] = j
    d = _sqdist(X, C)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(len(X)), labels].sum())
    return C, labels, inertia, history


def kmeans_fit(X, k: int, seed: int = 0, max_iter: int = 300, restarts: int = 10,
               ids: Sequence[str] | None = None) -> ClusterModel:
    """Lloyd's algorithm from k-means++ seeds; keeps the restart with least inertia."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n (k={k}, n={n})")
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        C, labels, inertia, hist = _lloyd(X, _plusplus(X, k, rng), max_iter)
        if best is None or inertia < best[2]:
            best = (C, labels, inertia, hist)
    C, labels, inertia, hist = best
    return ClusterModel(C, ids, labels, inertia, seed, tuple(hist))


def cluster_players(ds: Dataset, k: int = 4, features: Sequence[str] | None = None, seed: int = 0,
                    max_iter: int = 300, restarts: int = 10) -> ClusterModel:
    """z-normalise the chosen features (default: the game metrics) and cluster players."""
    names = tuple(features) if features is not None else ds.schema.metric_names
    cols = [ds.schema.names.index(n) for n in names]
    norm = fit_normalizer(ds.X[:, cols])
    model = kmeans_fit(norm.apply(ds.X[:, cols]), k, seed, max_iter, restarts, ids=ds.ids)
    return ClusterModel(model.centroids, model.ids, model.labels, model.inertia, seed, model.history,
                        names, norm)


def assign_styles(model: ClusterModel, ds: Dataset, names: Sequence[str] = PLAY_STYLES) -> Dataset:
    """Append one-hot style columns from the cluster assignment.

    Any exclusive-category columns already in the schema are replaced, so the
    dataset keeps a single exclusive group.
    """
    names = tuple(names)
    if model.k != len(names):
        raise ValueError(f"model has {model.k} clusters but {len(names)} style names were given")
    assign = model.assignments
    missing = [p for p in ds.ids if p not in assign]
    if missing:
        raise ValueError(f"players without a cluster assignment: {missing[:5]}")
    keep = [i for i, f in enumerate(ds.schema.features) if f.kind != FeatureKind.EXCLUSIVE]
    feats = tuple(ds.schema.features[i] for i in keep)
    clash = set(names) & {f.name for f in feats}
    if clash:
        raise ValueError(f"style names clash with existing features: {sorted(clash)}")
    onehot = np.zeros((len(ds), len(names)))
    onehot[np.arange(len(ds)), [assign[p] for p in ds.ids]] = 1.0
    schema = FeatureSchema(feats + tuple(Feature(n, FeatureKind.EXCLUSIVE) for n in names), ds.schema.factor_names)
    return Dataset(schema, ds.ids, np.hstack([ds.X[:, keep], onehot]), ds.Y)
