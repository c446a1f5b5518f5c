"""Ranking SVMs trained on pairwise preference datapoints.

Both models are bias-free: a mirrored training set makes the optimal bias
zero, so leaving it out enforces that exactly.

Three trainable forms share one dual solver:

* ``LinearModel`` - primal weights ``w``; decision ``w.x_a - w.x_b``.
* ``KernelModel`` - ranking SVM in RBF feature space. Each support datapoint
  is a couple of player vectors and the model defines a utility
  ``u(x) = sum_k c_k (K(first_k, x) - K(second_k, x))``.
* ``DiffKernelModel`` - an ordinary binary RBF classifier whose inputs are
  the difference vectors themselves, ``f(d) = sum_k c_k K(s_k, d)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Union

import numpy as np

from . import _solver
from .pairwise import PairwiseDataset


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainConfig:
    c: float = 1.0
    gamma: float = 0.5
    tol: float = 1e-3
    max_iter: int = 2000  # full sweeps over the datapoints
    seed: int = 0  # visiting order of the coordinate sweeps

    def __post_init__(self):
        for name in ("c", "gamma", "tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class Diagnostics:
    converged: bool
    sweeps: int
    max_violation: float
    dual_objective: float
    relative_gap: float
    n_datapoints: int
    n_support: int


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LinearModel:
    w: np.ndarray
    config: TrainConfig | None = None
    diagnostics: Diagnostics | None = None
    kind = "linear"

    def __post_init__(self):
        w = _readonly(self.w).ravel()
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        object.__setattr__(self, "w", w)

    @property
    def n_features(self) -> int:
        return self.w.size

    def utility(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w

    def score(self, d) -> float:
        return float(np.dot(self.w, d))

    def decision(self, x_a, x_b) -> float:
        return float(np.dot(x_a, self.w)) - float(np.dot(x_b, self.w))


@dataclass(frozen=True, eq=False)
class KernelModel:
    alphas: np.ndarray  # signed coefficients alpha_k * z_k
    support_first: np.ndarray
    support_second: np.ndarray
    gamma: float
    config: TrainConfig | None = None
    diagnostics: Diagnostics | None = None
    kind = "rbf-pair"

    def __post_init__(self):
        object.__setattr__(self, "alphas", _readonly(self.alphas).ravel())
        object.__setattr__(self, "support_first", _readonly(self.support_first))
        object.__setattr__(self, "support_second", _readonly(self.support_second))
        if not (len(self.alphas) == len(self.support_first) == len(self.support_second)):
            raise ValueError("one coefficient per support datapoint required")

    @property
    def n_features(self) -> int:
        return self.support_first.shape[1]

    @property
    def support_diffs(self) -> np.ndarray:
        return self.support_first - self.support_second

    def utility(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.alphas) == 0:
            return np.zeros(X.shape[0])
        k1 = rbf_kernel(X, self.support_first, self.gamma)
        k2 = rbf_kernel(X, self.support_second, self.gamma)
        return (k1 - k2) @ self.alphas

    def score(self, d) -> float:
        raise TypeError("pair-kernel models score player couples, not bare differences; use decision()")

    def decision(self, x_a, x_b) -> float:
        u = self.utility(np.vstack([x_a, x_b]))
        return float(u[0]) - float(u[1])


@dataclass(frozen=True, eq=False)
class DiffKernelModel:
    alphas: np.ndarray  # signed coefficients alpha_k * z_k
    support_diffs: np.ndarray
    gamma: float
    config: TrainConfig | None = None
    diagnostics: Diagnostics | None = None
    kind = "rbf-difference"

    def __post_init__(self):
        object.__setattr__(self, "alphas", _readonly(self.alphas).ravel())
        object.__setattr__(self, "support_diffs", _readonly(self.support_diffs))
        if len(self.alphas) != len(self.support_diffs):
            raise ValueError("one coefficient per support difference required")

    @property
    def n_features(self) -> int:
        return self.support_diffs.shape[1]

    def raw_scores(self, D) -> np.ndarray:
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if len(self.alphas) == 0:
            return np.zeros(D.shape[0])
        return rbf_kernel(D, self.support_diffs, self.gamma) @ self.alphas

    def score(self, d) -> float:
        return float(self.raw_scores(d)[0])

    def decision(self, x_a, x_b) -> float:
        d = np.asarray(x_a, dtype=float) - np.asarray(x_b, dtype=float)
        f = self.raw_scores(np.vstack([d, -d]))
        return (float(f[0]) - float(f[1])) / 2.0


Model = Union[LinearModel, KernelModel, DiffKernelModel]


def _check_dim(model: Model, *vectors) -> list[np.ndarray]:
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=float).ravel()
        if v.size != model.n_features:
            raise ValueError(f"dimension mismatch: model has {model.n_features} features, got {v.size}")
        out.append(v)
    return out


def score(model: Model, d) -> float:
    """Raw decision value of the trained classifier on a difference vector."""
    (d,) = _check_dim(model, d)
    return model.score(d)


class Preference(str, Enum):
    A = "a_preferred"
    B = "b_preferred"
    TIE = "tie"


def predict_preference(model: Model, x_a, x_b) -> tuple[Preference, float]:
    """Preferred player of a couple and the antisymmetric margin ``g``.

    ``g(a, b) == -g(b, a)`` holds exactly for every model type.
    """
    x_a, x_b = _check_dim(model, x_a, x_b)
    g = model.decision(x_a, x_b)
    if g > 0:
        return Preference.A, g
    if g < 0:
        return Preference.B, g
    return Preference.TIE, 0.0


def decision_matrix(model: Model, X) -> np.ndarray:
    """``G[a, b] = g(x_a, x_b)`` for every couple of rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(model, (LinearModel, KernelModel)):
        u = model.utility(X)
        return u[:, None] - u[None, :]
    n = X.shape[0]
    G = np.zeros((n, n))
    i, j = np.triu_indices(n, 1)
    block = 4096
    for s in range(0, i.size, block):
        ii, jj = i[s : s + block], j[s : s + block]
        d = X[ii] - X[jj]
        f = model.raw_scores(np.vstack([d, -d]))
        g = (f[: len(ii)] - f[len(ii) :]) / 2.0
        G[ii, jj] = g
        G[jj, ii] = -g
    return G


# ---------------------------------------------------------------- training


def _check_trainable(pds: PairwiseDataset):
    if len(pds) == 0:
        raise ValueError("cannot train on an empty pairwise dataset")
    if not np.isfinite(pds.points).all():
        raise ValueError("non-finite feature values in training data")


def _merge_oriented(pds: PairwiseDataset):
    """Orient every datapoint so its label is +1 and merge duplicates.

    For the linear and pair-kernel forms a datapoint and its mirror are the
    same constraint, so they fold into one dual variable whose box is the
    sum of theirs. Returns (a, b, multiplicity, inverse index per datapoint).
    """
    pos = pds.labels > 0
    a = np.where(pos, pds.first, pds.second)
    b = np.where(pos, pds.second, pds.first)
    key, inverse, counts = np.unique(
        np.column_stack([a, b]), axis=0, return_inverse=True, return_counts=True
    )
    return key[:, 0].copy(), key[:, 1].copy(), counts.astype(float), inverse.ravel()


def _run(mode, m, D, Kp, Q, a, b, upper, cfg: TrainConfig, state, n_datapoints, gap_tol=0.0):
    """Solve the reduced dual in place of ``state``; returns (beta, diagnostics)."""
    beta = np.zeros(m)
    sweeps, violation, converged = _solver.dcd(
        mode, m, D, Kp, Q, a, b, upper, float(cfg.tol), float(gap_tol), int(cfg.max_iter), beta, state, int(cfg.seed)
    )
    gap = _solver.relative_gap(mode, m, D, Kp, Q, a, b, upper, beta, state)
    if not converged:
        warnings.warn(
            f"dual solver stopped after {sweeps} sweeps (KKT violation {violation:.3g}, "
            f"relative gap {gap:.3g}, tol {cfg.tol})",
            ConvergenceWarning,
            stacklevel=3,
        )
    quad = _quadratic(mode, D, a, b, beta, state)
    diag = Diagnostics(
        converged=bool(converged),
        sweeps=int(sweeps),
        max_violation=float(violation),
        dual_objective=float(beta.sum() - 0.5 * quad),
        relative_gap=float(gap),
        n_datapoints=int(n_datapoints),
        n_support=int((beta > 0).sum()),
    )
    return beta, diag


def _quadratic(mode, D, a, b, beta, state) -> float:
    """``beta' Q beta`` from the solver state."""
    if mode == _solver.LINEAR:
        return float(state @ state)
    if mode == _solver.PAIR:
        return float(beta @ (state[a] - state[b]))
    return float(beta @ state)


_EMPTY2 = np.zeros((1, 1))
_EMPTYI = np.zeros(1, dtype=np.int64)


def train_linear(pds: PairwiseDataset, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    """Minimise ``0.5|w|^2 + C sum_k max(0, 1 - z_k w.d_k)`` over all datapoints.

    Stops once the relative primal-dual gap is within ``cfg.tol`` (or the KKT
    violation is), which certifies the objective to that relative accuracy.
    """
    _check_trainable(pds)
    a, b, mult, _ = _merge_oriented(pds)
    D = np.ascontiguousarray(pds.points[a] - pds.points[b])
    w = np.zeros(D.shape[1])
    beta, diag = _run(
        _solver.LINEAR, len(a), D, _EMPTY2, _EMPTY2, _EMPTYI, _EMPTYI, cfg.c * mult, cfg, w, len(pds), cfg.tol
    )
    return LinearModel(D.T @ beta, cfg, diag)


MAX_DENSE_DATAPOINTS = 6000


def train_rbf(pds: PairwiseDataset, cfg: TrainConfig = TrainConfig(), form: str = "pair"):
    """Train an RBF ranking SVM to KKT violation or relative duality gap <= ``cfg.tol``.

    ``form="pair"`` (default) learns a utility in RBF feature space using the
    ranking kernel ``K(a,a') + K(b,b') - K(a,b') - K(b,a')`` between datapoints
    ``(a, b)``; cost is driven by the number of players, so it scales to tens
    of thousands of pairs. ``form="difference"`` treats difference vectors as
    plain classifier inputs with ``K(d, d')``; it builds the dense kernel over
    all datapoints and is limited to ``MAX_DENSE_DATAPOINTS``.
    """
    _check_trainable(pds)
    if form == "pair":
        return _train_pair(pds, cfg)
    if form == "difference":
        return _train_difference(pds, cfg)
    raise ValueError(f"unknown RBF form {form!r}; expected 'pair' or 'difference'")


def _train_pair(pds: PairwiseDataset, cfg: TrainConfig) -> KernelModel:
    a, b, mult, inverse = _merge_oriented(pds)
    P = np.ascontiguousarray(pds.points)
    Kp = rbf_kernel(P, P, cfg.gamma)
    u = np.zeros(P.shape[0])
    beta, diag = _run(
        _solver.PAIR, len(a), _EMPTY2, Kp, _EMPTY2, a.astype(np.int64), b.astype(np.int64),
        cfg.c * mult, cfg, u, len(pds), cfg.tol,
    )
    # spread each merged variable back over its datapoints so every |alpha| <= C
    alpha = beta[inverse] / mult[inverse]
    keep = alpha > 0
    coef = alpha[keep] * pds.labels[keep]
    return KernelModel(coef, P[pds.first[keep]], P[pds.second[keep]], cfg.gamma, cfg, diag)


def _train_difference(pds: PairwiseDataset, cfg: TrainConfig) -> DiffKernelModel:
    m = len(pds)
    if m > MAX_DENSE_DATAPOINTS:
        raise ValueError(
            f"difference-form RBF builds a dense {m}x{m} kernel; limit is {MAX_DENSE_DATAPOINTS} datapoints"
        )
    Dm = pds.diffs
    z = pds.labels.astype(float)
    Q = np.ascontiguousarray(rbf_kernel(Dm, Dm, cfg.gamma) * np.outer(z, z))
    state = np.zeros(m)
    beta, diag = _run(_solver.DENSE, m, _EMPTY2, _EMPTY2, Q, _EMPTYI, _EMPTYI, np.full(m, cfg.c), cfg, state, m, cfg.tol)
    keep = beta > 0
    return DiffKernelModel(beta[keep] * z[keep], Dm[keep], cfg.gamma, cfg, diag)


def train(pds: PairwiseDataset, kernel: str, cfg: TrainConfig = TrainConfig(), rbf_form: str = "pair") -> Model:
    if kernel == "linear":
        return train_linear(pds, cfg)
    if kernel == "rbf":
        return train_rbf(pds, cfg, rbf_form)
    raise ValueError(f"unknown kernel {kernel!r}; expected 'linear' or 'rbf'")


# ----------------------------------------------------------- serialization


def model_to_dict(model: Model, schema_fingerprint: str | None = None) -> dict:
    out: dict = {"kind": model.kind, "schema_fingerprint": schema_fingerprint}
    if isinstance(model, LinearModel):
        out["w"] = model.w.tolist()
    elif isinstance(model, KernelModel):
        out.update(
            gamma=model.gamma,
            alphas=model.alphas.tolist(),
            support_first=model.support_first.tolist(),
            support_second=model.support_second.tolist(),
        )
    else:
        out.update(gamma=model.gamma, alphas=model.alphas.tolist(), support_diffs=model.support_diffs.tolist())
    out["train_config"] = asdict(model.config) if model.config else None
    out["diagnostics"] = asdict(model.diagnostics) if model.diagnostics else None
    return out


def model_from_dict(data: dict) -> Model:
    cfg = TrainConfig(**data["train_config"]) if data.get("train_config") else None
    diag = Diagnostics(**data["diagnostics"]) if data.get("diagnostics") else None
    kind = data.get("kind")
    if kind == "linear":
        return LinearModel(np.array(data["w"], dtype=float), cfg, diag)
    if kind == "rbf-pair":
        p = len(data["support_first"][0]) if data["support_first"] else 0
        return KernelModel(
            np.array(data["alphas"], dtype=float),
            np.array(data["support_first"], dtype=float).reshape(-1, p),
            np.array(data["support_second"], dtype=float).reshape(-1, p),
            float(data["gamma"]),
            cfg,
            diag,
        )
    if kind == "rbf-difference":
        p = len(data["support_diffs"][0]) if data["support_diffs"] else 0
        return DiffKernelModel(
            np.array(data["alphas"], dtype=float),
            np.array(data["support_diffs"], dtype=float).reshape(-1, p),
            float(data["gamma"]),
            cfg,
            diag,
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: Model, path, schema_fingerprint: str | None = None, extra: dict | None = None) -> None:
    data = model_to_dict(model, schema_fingerprint)
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
