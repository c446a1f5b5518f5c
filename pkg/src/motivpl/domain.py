"""Player dataset schema, CSV ingestion, cleaning and feature-set selection."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FACTORS: tuple[str, ...] = ("competence", "autonomy", "relatedness", "presence")
ID_COLUMN = "player_id"


class SchemaError(ValueError):
    """Raised when a schema is malformed or a file does not conform to it."""


class DataError(ValueError):
    """Raised for invalid dataset contents."""


class FeatureKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary-flag"
    EXCLUSIVE = "exclusive-category-member"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: FeatureKind = FeatureKind.CONTINUOUS

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature columns plus the four factor columns.

    The feature order is canonical: every matrix in the package lays its
    columns out in this order.
    """

    features: tuple[Feature, ...]
    factor_names: tuple[str, ...] = FACTORS

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "factor_names", tuple(self.factor_names))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dupes}")
        if len(self.factor_names) != 4 or len(set(self.factor_names)) != 4:
            raise SchemaError("schema needs exactly 4 distinct factor names")
        clash = (set(names) & set(self.factor_names)) | ({ID_COLUMN} & set(names))
        if clash:
            raise SchemaError(f"reserved or clashing column names: {sorted(clash)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def __len__(self) -> int:
        return len(self.features)

    def indices(self, *kinds: FeatureKind) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.kind in kinds]

    @property
    def style_names(self) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.indices(FeatureKind.EXCLUSIVE))

    @property
    def metric_names(self) -> tuple[str, ...]:
        return tuple(
            self.names[i] for i in self.indices(FeatureKind.CONTINUOUS, FeatureKind.BINARY)
        )

    def subset(self, names: Iterable[str]) -> FeatureSchema:
        wanted = set(names)
        unknown = wanted - set(self.names)
        if unknown:
            raise SchemaError(f"unknown features: {sorted(unknown)}")
        return FeatureSchema(tuple(f for f in self.features if f.name in wanted), self.factor_names)

    def to_dict(self) -> dict:
        return {
            "features": [{"name": f.name, "kind": f.kind.value} for f in self.features],
            "factor_names": list(self.factor_names),
        }

    @classmethod
    def from_dict(cls, data: dict) -> FeatureSchema:
        try:
            feats = tuple(Feature(f["name"], FeatureKind(f["kind"])) for f in data["features"])
            return cls(feats, tuple(data.get("factor_names", FACTORS)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed schema: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> FeatureSchema:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


GAME_METRICS: tuple[tuple[str, FeatureKind], ...] = (
    # general playtime
    ("Days Played", FeatureKind.CONTINUOUS),
    ("Days in Groups", FeatureKind.CONTINUOUS),
    ("Days in the Dark Zone", FeatureKind.CONTINUOUS),
    ("Sessions", FeatureKind.CONTINUOUS),
    ("Playtime", FeatureKind.CONTINUOUS),
    ("Group Playtime", FeatureKind.CONTINUOUS),
    ("Dark Zone Playtime", FeatureKind.CONTINUOUS),
    ("Playtime as Rogue", FeatureKind.CONTINUOUS),
    # completion
    ("Non-Daily Missions", FeatureKind.CONTINUOUS),
    ("Daily Missions", FeatureKind.CONTINUOUS),
    ("Side Missions", FeatureKind.CONTINUOUS),
    ("Days with Incursions", FeatureKind.CONTINUOUS),
    ("Incursions", FeatureKind.CONTINUOUS),
    # progression
    ("Gear-Score", FeatureKind.CONTINUOUS),
    ("Dark Zone Rank", FeatureKind.CONTINUOUS),
    ("Level", FeatureKind.CONTINUOUS),
    ("Early Level 30", FeatureKind.BINARY),
    ("Reached Level 30", FeatureKind.BINARY),
    # early gameplay
    ("Level Below 30", FeatureKind.CONTINUOUS),
    ("Early Playtime", FeatureKind.CONTINUOUS),
    ("Early Group Playtime", FeatureKind.CONTINUOUS),
    ("Early Dark Zone Playtime", FeatureKind.CONTINUOUS),
    ("Early Playtime as Rogue", FeatureKind.CONTINUOUS),
    # DLC gameplay
    ("Underground Playtime", FeatureKind.CONTINUOUS),
    ("Survival Playtime", FeatureKind.CONTINUOUS),
    ("Season-Pass", FeatureKind.BINARY),
)

PLAY_STYLES: tuple[str, ...] = ("Adventurer", "Elite", "PvE All-Rounder", "Social Dark Zone Player")


def default_schema() -> FeatureSchema:
    """The 26 game metrics followed by the 4 exclusive play-style flags."""
    feats = [Feature(n, k) for n, k in GAME_METRICS]
    feats += [Feature(n, FeatureKind.EXCLUSIVE) for n in PLAY_STYLES]
    return FeatureSchema(tuple(feats))


@dataclass(frozen=True)
class PlayerRecord:
    player_id: str
    features: tuple[float, ...]
    factors: tuple[float, ...]


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of players: ids, feature matrix ``X`` and factor matrix ``Y``.

    Missing values are stored as NaN and only survive until :func:`clean`.
    """

    schema: FeatureSchema
    ids: tuple[str, ...]
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        X = _frozen(self.X).reshape(len(ids), len(self.schema))
        Y = _frozen(self.Y).reshape(len(ids), 4)
        if len(set(ids)) != len(ids):
            seen, dupes = set(), []
            for i in ids:
                if i in seen:
                    dupes.append(i)
                seen.add(i)
            raise DataError(f"duplicate player_id: {dupes[:5]}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_records(cls, schema: FeatureSchema, records: Sequence[PlayerRecord]) -> Dataset:
        n, p = len(records), len(schema)
        X = np.array([r.features for r in records], dtype=float).reshape(n, p)
        Y = np.array([r.factors for r in records], dtype=float).reshape(n, 4)
        return cls(schema, tuple(r.player_id for r in records), X, Y)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def records(self) -> list[PlayerRecord]:
        return [
            PlayerRecord(pid, tuple(self.X[i].tolist()), tuple(self.Y[i].tolist()))
            for i, pid in enumerate(self.ids)
        ]

    def factor(self, name: str) -> np.ndarray:
        try:
            return self.Y[:, self.schema.factor_names.index(name)]
        except ValueError:
            raise DataError(f"unknown factor {name!r}; expected one of {self.schema.factor_names}") from None

    def take(self, rows: Sequence[int]) -> Dataset:
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.schema, tuple(self.ids[i] for i in rows), self.X[rows], self.Y[rows])

    def with_factors(self, Y: np.ndarray) -> Dataset:
        return Dataset(self.schema, self.ids, self.X, Y)

    def identical(self, other: Dataset) -> bool:
        """Bit-exact comparison (NaNs compare equal to NaNs)."""
        return (
            self.schema == other.schema
            and self.ids == other.ids
            and self.X.tobytes() == other.X.tobytes()
            and self.Y.tobytes() == other.Y.tobytes()
        )


def _parse_cell(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_csv(path: str | Path, schema: FeatureSchema, require_factors: bool = True) -> Dataset:
    """Read a player CSV laid out as ``player_id, <features...>, <factors...>``.

    Empty or unparseable cells become NaN missing markers. With
    ``require_factors=False`` the factor columns may be absent entirely, in
    which case factors are all missing (e.g. before survey aggregation).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        full = [ID_COLUMN, *schema.names, *schema.factor_names]
        has_factors = True
        if header != full:
            if not require_factors and header == full[: 1 + len(schema)]:
                has_factors = False
            else:
                raise SchemaError(f"{path}: header does not match schema (expected {full}, got {header})")
        ids, X, Y = [], [], []
        p = len(schema)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            ids.append(row[0])
            X.append([_parse_cell(c) for c in row[1 : 1 + p]])
            Y.append([_parse_cell(c) for c in row[1 + p :]] if has_factors else [math.nan] * 4)
    n = len(ids)
    return Dataset(schema, tuple(ids), np.array(X, dtype=float).reshape(n, p), np.array(Y, dtype=float).reshape(n, 4))


def _format_cell(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` so that :func:`load_csv` reproduces it bit-exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([ID_COLUMN, *ds.schema.names, *ds.schema.factor_names])
        for i, pid in enumerate(ds.ids):
            w.writerow([pid, *map(_format_cell, ds.X[i]), *map(_format_cell, ds.Y[i])])


@dataclass(frozen=True)
class OutlierRule:
    kind: str = "iqr"
    k: float = 1.5

    def __post_init__(self):
        if self.kind not in ("iqr", "zscore", "none"):
            raise ValueError(f"unknown outlier rule {self.kind!r}")
        if self.kind != "none" and not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError("outlier k must be positive")

    @classmethod
    def parse(cls, text: str) -> OutlierRule:
        """Parse ``iqr:1.5``, ``zscore:3`` or ``none``."""
        if text == "none":
            return cls("none", 0.0)
        kind, sep, k = text.partition(":")
        if not sep:
            raise ValueError(f"outlier rule must look like iqr:K, zscore:K or none, got {text!r}")
        try:
            return cls(kind, float(k))
        except ValueError as exc:
            raise ValueError(f"bad outlier rule {text!r}: {exc}") from None

    def __str__(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.k!r}"

    def outside(self, X: np.ndarray) -> np.ndarray:
        """Boolean (n, p) mask of cells outside the rule's bounds."""
        if self.kind == "none" or X.shape[0] == 0:
            return np.zeros(X.shape, dtype=bool)
        if self.kind == "iqr":
            q1, q3 = np.percentile(X, [25, 75], axis=0)
            iqr = q3 - q1
            return (X < q1 - self.k * iqr) | (X > q3 + self.k * iqr)
        mu, sd = X.mean(axis=0), X.std(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sd > 0, np.abs(X - mu) / np.where(sd > 0, sd, 1.0), 0.0)
        return z > self.k


@dataclass(frozen=True)
class CleanLog:
    entries: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    @property
    def dropped_ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"player_id": p, "reason": r}) + "\n" for p, r in self.entries)


def _record_defect(schema: FeatureSchema, x: np.ndarray, y: np.ndarray) -> str | None:
    if np.isnan(x).any() or np.isnan(y).any():
        return "missing"
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        return "non-finite"
    flags = schema.indices(FeatureKind.BINARY, FeatureKind.EXCLUSIVE)
    if flags and not np.isin(x[flags], (0.0, 1.0)).all():
        return "corrupted: flag not 0/1"
    excl = schema.indices(FeatureKind.EXCLUSIVE)
    if excl and x[excl].sum() > 1:
        return "corrupted: several exclusive categories set"
    if ((y < 1) | (y > 5)).any():
        return "corrupted: factor outside [1, 5]"
    return None


def clean(ds: Dataset, outlier_rule: OutlierRule | str = OutlierRule()) -> tuple[Dataset, CleanLog]:
    """Drop records with missing, non-finite or corrupted values, then outliers.

    The outlier pass is repeated on the survivors until no further record is
    dropped, which makes ``clean`` idempotent for a fixed rule.
    """
    rule = OutlierRule.parse(outlier_rule) if isinstance(outlier_rule, str) else outlier_rule
    reasons: dict[int, str] = {}
    for i in range(len(ds)):
        why = _record_defect(ds.schema, ds.X[i], ds.Y[i])
        if why:
            reasons[i] = why

    cont = ds.schema.indices(FeatureKind.CONTINUOUS)
    alive = np.array([i for i in range(len(ds)) if i not in reasons], dtype=int)
    while cont and alive.size:
        mask = rule.outside(ds.X[np.ix_(alive, cont)])
        bad = mask.any(axis=1)
        if not bad.any():
            break
        for row, cells in zip(alive[bad], mask[bad]):
            reasons[int(row)] = "outlier: " + ds.schema.names[cont[int(np.argmax(cells))]]
        alive = alive[~bad]

    if alive.size == 0:
        raise DataError("cleaning dropped every record")
    log = CleanLog(tuple((ds.ids[i], reasons[i]) for i in sorted(reasons)))
    return ds.take(alive), log


FEATURE_SETS = ("play_styles", "game_metrics", "all")
_SET_ALIASES = {"styles": "play_styles", "metrics": "game_metrics"}


def select_features(ds: Dataset, group: str) -> Dataset:
    """Restrict ``ds`` to the play-style flags, the game metrics, or everything."""
    group = _SET_ALIASES.get(group, group)
    if group == "play_styles":
        names = ds.schema.style_names
    elif group == "game_metrics":
        names = ds.schema.metric_names
    elif group == "all":
        return ds
    else:
        raise ValueError(f"unknown feature set {group!r}; expected one of {FEATURE_SETS}")
    if not names:
        raise SchemaError(f"schema has no features in group {group!r}")
    cols = [ds.schema.names.index(n) for n in names]
    return Dataset(ds.schema.subset(names), ds.ids, ds.X[:, cols], ds.Y)
