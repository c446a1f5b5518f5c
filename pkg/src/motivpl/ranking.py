"""Global player orderings from preference models, and top/bottom-k feature reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import Dataset
from .svm import DiffKernelModel, decision_matrix


@dataclass(frozen=True)
class Ordering:
    player_ids: tuple[str, ...]  # best first
    scores: tuple[float, ...]
    method: str
    margins: tuple[float, ...] | None = None  # summed Copeland margins, same order

    def to_dict(self) -> dict:
        return {"method": self.method, "player_ids": list(self.player_ids), "scores": list(self.scores),
                "margins": list(self.margins) if self.margins is not None else None}


def order_players(model, ds: Dataset, method: str = "copeland", normalizer=None) -> Ordering:
    """Rank every player of ``ds`` by the model.

    ``utility`` sorts by the model's utility (linear and pair-kernel models
    only). ``copeland`` plays a round robin of ``predict_preference``: a win
    scores 1, a tie 0.5; ties in points fall back to summed margins, then to
    player id.
    """
    X = ds.X if normalizer is None else normalizer.apply(ds.X)
    ids = ds.ids
    if method == "utility":
        if isinstance(model, DiffKernelModel) or not hasattr(model, "utility"):
            raise ValueError("utility ordering needs a model with a utility function; use copeland")
        u = model.utility(X)
        order = sorted(range(len(ids)), key=lambda i: (-u[i], ids[i]))
        return Ordering(tuple(ids[i] for i in order), tuple(float(u[i]) for i in order), "utility")
    if method != "copeland":
        raise ValueError(f"unknown ordering method {method!r}")
    G = decision_matrix(model, X)
    points = (G > 0).sum(axis=1) + 0.5 * ((G == 0).sum(axis=1) - 1)  # diagonal is a self-tie
    margins = G.sum(axis=1)
    order = sorted(range(len(ids)), key=lambda i: (-points[i], -margins[i], ids[i]))
    return Ordering(
        tuple(ids[i] for i in order),
        tuple(float(points[i]) for i in order),
        "copeland",
        tuple(float(margins[i]) for i in order),
    )


def minmax_columns(X: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns map to 0."""
    X = np.asarray(X, dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    return np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    feature_names: tuple[str, ...]
    player_ids: tuple[str, ...]
    values: np.ndarray  # (features, players)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def top_bottom_matrix(ordering: Ordering, ds: Dataset, k: int, scope: str = "dataset") -> FeatureMatrix:
    """Feature values of the first ``k`` and last ``k`` players of an ordering.

    Each feature is min-max scaled over the whole dataset (``scope="dataset"``)
    or over the shown players only (``scope="shown"``).
    """
    n = len(ordering.player_ids)
    if k < 1 or 2 * k > n:
        raise ValueError(f"need 1 <= k and 2k <= {n} players, got k={k}")
    shown = list(ordering.player_ids[:k]) + list(ordering.player_ids[n - k:])
    row_of = {pid: i for i, pid in enumerate(ds.ids)}
    try:
        rows = [row_of[p] for p in shown]
    except KeyError as exc:
        raise ValueError(f"player {exc.args[0]!r} of the ordering is not in the dataset") from None
    if scope == "dataset":
        vals = minmax_columns(ds.X)[rows]
    elif scope == "shown":
        vals = minmax_columns(ds.X[rows])
    else:
        raise ValueError(f"unknown normalisation scope {scope!r}")
    return FeatureMatrix(ds.schema.names, tuple(shown), vals.T.copy())


def write_matrix_csv(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *matrix.player_ids])
        for name, row in zip(matrix.feature_names, matrix.values):
            w.writerow([name, *map(repr, row.tolist())])


def read_matrix_csv(path) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = tuple(r[0] for r in rows[1:])
    vals = np.array([[float(c) for c in r[1:]] for r in rows[1:]], dtype=float)
    return FeatureMatrix(names, tuple(rows[0][1:]), vals.reshape(len(names), len(rows[0]) - 1))


def matrix_pixels(matrix: FeatureMatrix, zoom: int = 10) -> np.ndarray:
    """8-bit image, one ``zoom`` x ``zoom`` block per cell; darker means higher."""
    if zoom < 1:
        raise ValueError("zoom must be >= 1")
    grey = 255 - np.rint(255 * np.clip(matrix.values, 0.0, 1.0)).astype(np.uint8)
    return np.kron(grey, np.ones((zoom, zoom), dtype=np.uint8))


def write_pgm(pixels: np.ndarray, path, comment: str | None = None) -> None:
    h, w = pixels.shape
    header = b"P5\n"
    if comment:
        for line in comment.splitlines():
            header += b"# " + line.encode("utf-8") + b"\n"
    header += f"{w} {h}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + pixels.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    pos += 1  # single whitespace after maxval
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w).copy()


def render_report(matrix: FeatureMatrix, out_dir, name: str = "report", zoom: int = 10,
                  metadata: dict | None = None) -> dict[str, Path]:
    """Write ``<name>.csv``, ``<name>.pgm`` and a ``<name>.json`` sidecar into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{name}.csv", "pgm": out / f"{name}.pgm", "json": out / f"{name}.json"}
    meta = dict(metadata or {})
    write_matrix_csv(matrix, paths["csv"])
    comment = json.dumps(meta.get("config"), sort_keys=True) if meta.get("config") is not None else None
    write_pgm(matrix_pixels(matrix, zoom), paths["pgm"], comment)
    meta.update(features=list(matrix.feature_names), players=list(matrix.player_ids), zoom=zoom)
    paths["json"].write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return paths
