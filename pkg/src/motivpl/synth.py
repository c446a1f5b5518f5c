"""Synthetic players with known latent utilities, and the brute-force oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import Dataset, FeatureKind, FeatureSchema
from .svm import Preference, predict_preference


@dataclass(frozen=True)
class LatentSpec:
    """Latent utility ``u(x)`` behind one factor score.

    ``linear``: ``scale * v.x + offset``; ``radial``: ``-scale * |x - c|^2 + offset``;
    ``table``: one utility per generated row, in order.
    """

    kind: str
    vector: tuple[float, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    scale: float = 1.0
    offset: float = 0.0
    table: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        if self.kind not in ("linear", "radial", "table"):
            raise ValueError(f"unknown latent kind {self.kind!r}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError("noise_sigma must be finite and >= 0")

    @classmethod
    def linear(cls, v, **kw) -> LatentSpec:
        return cls("linear", tuple(v), **kw)

    @classmethod
    def radial(cls, center, **kw) -> LatentSpec:
        return cls("radial", tuple(center), **kw)

    def utility(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "table":
            if len(self.table) != X.shape[0]:
                raise ValueError(f"utility table has {len(self.table)} rows, data has {X.shape[0]}")
            return np.array(self.table)
        v = np.array(self.vector)
        if v.size != X.shape[1]:
            raise ValueError(f"latent vector has {v.size} entries, schema has {X.shape[1]} features")
        if self.kind == "linear":
            return self.scale * (X @ v) + self.offset
        return -self.scale * ((X - v) ** 2).sum(axis=1) + self.offset

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "vector": list(self.vector), "noise_sigma": self.noise_sigma,
            "seed": self.seed, "scale": self.scale, "offset": self.offset, "table": list(self.table),
        }


def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def generate(n: int, schema: FeatureSchema, spec: LatentSpec | Sequence[LatentSpec]) -> Dataset:
    """Sample ``n`` players and their four factor scores.

    Continuous features are U[0, 1], binary flags fair coins, the exclusive
    group one-hot uniform. Each factor is ``clip(1 + 4 sigmoid(u(x) + eps), 1, 5)``
    with ``eps ~ N(0, noise_sigma^2)``. One latent drives all four factors (with
    independent noise) unless four are given. The seed of the first latent
    fixes the whole draw.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    specs = [spec] * 4 if isinstance(spec, LatentSpec) else list(spec)
    if len(specs) != 4:
        raise ValueError("give one LatentSpec or one per factor")
    rng = np.random.default_rng(specs[0].seed)
    p = len(schema)
    X = np.zeros((n, p))
    for j in schema.indices(FeatureKind.CONTINUOUS):
        X[:, j] = rng.uniform(0.0, 1.0, n)
    for j in schema.indices(FeatureKind.BINARY):
        X[:, j] = rng.integers(0, 2, n)
    excl = schema.indices(FeatureKind.EXCLUSIVE)
    if excl:
        pick = rng.integers(0, len(excl), n)
        X[np.arange(n), np.array(excl)[pick]] = 1.0
    Y = np.empty((n, 4))
    for f, s in enumerate(specs):
        eps = rng.normal(0.0, s.noise_sigma, n) if s.noise_sigma > 0 else np.zeros(n)
        Y[:, f] = np.clip(1.0 + 4.0 * _sigmoid(s.utility(X) + eps), 1.0, 5.0)
    ids = tuple(f"p{i:04d}" for i in range(n))
    return Dataset(schema, ids, X, Y)


def linear_latents(schema: FeatureSchema, seed: int = 0, noise_sigma: float = 0.0,
                   spread: float = 1.5) -> list[LatentSpec]:
    """Four random linear utilities over the game metrics (styles get zero weight).

    Weights are scaled so ``u`` has standard deviation ``spread`` under the
    generator's feature distribution and is centred on zero.
    """
    rng = np.random.default_rng(seed)
    metrics = schema.indices(FeatureKind.CONTINUOUS, FeatureKind.BINARY)
    specs = []
    for f in range(4):
        v = np.zeros(len(schema))
        raw = rng.normal(size=len(metrics))
        var = np.array([1 / 12 if schema.features[j].kind == FeatureKind.CONTINUOUS else 1 / 4 for j in metrics])
        raw *= spread / math.sqrt(float((raw**2 * var).sum()))
        v[metrics] = raw
        specs.append(LatentSpec.linear(v, noise_sigma=noise_sigma, seed=seed + f, offset=-0.5 * float(v.sum())))
    return specs


def corrupt(ds: Dataset, n_bad: int, seed: int = 0) -> tuple[Dataset, list[str]]:
    """Damage ``n_bad`` distinct records: half get a missing cell, half an extreme value."""
    if n_bad > len(ds):
        raise ValueError("more corrupted records requested than exist")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(len(ds), n_bad, replace=False))
    cont = ds.schema.indices(FeatureKind.CONTINUOUS) or list(range(len(ds.schema)))
    X = ds.X.copy()
    for r, row in enumerate(rows):
        col = cont[int(rng.integers(len(cont)))]
        X[row, col] = math.nan if r % 2 == 0 else 1e6
    return Dataset(ds.schema, ds.ids, X, ds.Y), [ds.ids[r] for r in rows]


def oracle_pair_accuracy(model, ds: Dataset, spec: LatentSpec, normalizer=None) -> float:
    """Agreement of ``model`` with the latent ordering over every unordered pair.

    Enumerates all pairs with distinct latent utility and calls
    ``predict_preference`` on each; predicted ties count one half.
    """
    u = spec.utility(ds.X)
    X = ds.X if normalizer is None else normalizer.apply(ds.X)
    hits, total = 0.0, 0
    n = len(ds)
    for i in range(n):
        for j in range(i + 1, n):
            if u[i] == u[j]:
                continue
            pref, _ = predict_preference(model, X[i], X[j])
            total += 1
            if pref is Preference.TIE:
                hits += 0.5
            elif (pref is Preference.A) == (u[i] > u[j]):
                hits += 1.0
    return hits / total if total else math.nan


def radial_latents(schema: FeatureSchema, seed: int = 0, noise_sigma: float = 0.0,
                   spread: float = 1.5) -> list[LatentSpec]:
    """Four radial utilities peaking at the centre of the feature cube.

    The scale gives ``u`` standard deviation ``spread`` and the offset centres
    it on zero under the generator's feature distribution.
    """
    cont = len(schema.indices(FeatureKind.CONTINUOUS))
    if cont == 0:
        raise ValueError("radial latents need continuous features")
    flags = len(schema) - cont
    scale = spread / math.sqrt(cont / 180.0)
    offset = scale * (cont / 12.0 + 0.25 * flags)
    center = (0.5,) * len(schema)
    return [LatentSpec.radial(center, noise_sigma=noise_sigma, seed=seed + f, scale=scale, offset=offset)
            for f in range(4)]
