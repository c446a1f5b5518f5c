"""Leakage-safe cross-validation, grid search and the feature-set x kernel x factor suite.

Per fold the order is fixed: split players, fit the z-normaliser on the
training players only, normalise both sides, pair-transform train and test
separately, train on train pairs, score on test pairs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .domain import FEATURE_SETS, Dataset, select_features
from .pairwise import PairwiseDataset, retention_stats, transform
from .svm import Model, TrainConfig, decision_matrix, train

log = logging.getLogger(__name__)

KERNELS = ("linear", "rbf")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignments: Mapping[str, int]

    def fold_of(self, player_id: str) -> int:
        return self.assignments[player_id]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for f in self.assignments.values():
            counts[f] += 1
        return counts

    def test_rows(self, ids: Sequence[str], fold: int) -> np.ndarray:
        missing = [i for i in ids if i not in self.assignments]
        if missing:
            raise ValueError(f"fold plan does not cover players {missing[:5]}")
        return np.array([self.assignments[i] == fold for i in ids], dtype=bool)


def kfold_split(player_ids: Sequence[str], k: int, seed: int) -> FoldPlan:
    """Seeded uniform partition into ``k`` folds whose sizes differ by at most one."""
    ids = list(player_ids)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(ids):
        raise ValueError(f"cannot make {k} folds from {len(ids)} players")
    if len(set(ids)) != len(ids):
        raise ValueError("player ids must be unique")
    perm = np.random.default_rng(seed).permutation(len(ids))
    assignments = {ids[int(r)]: pos % k for pos, r in enumerate(perm)}
    return FoldPlan(k, seed, assignments)


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (X - self.mean) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def fit_normalizer(X) -> Normalizer:
    """Per-feature mean and population standard deviation."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D training matrix")
    return Normalizer(X.mean(axis=0), X.std(axis=0))


def apply_normalizer(norm: Normalizer, X) -> np.ndarray:
    return norm.apply(X)


@dataclass(frozen=True)
class GridSpec:
    c_values: tuple[float, ...]
    gamma_values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))
        if not self.c_values:
            raise ValueError("grid needs at least one C value")
        if any(not v > 0 for v in self.c_values + self.gamma_values):
            raise ValueError("grid values must be positive")

    def cells(self, kernel: str) -> list[tuple[float, float | None]]:
        if kernel == "linear":
            return [(c, None) for c in self.c_values]
        if not self.gamma_values:
            raise ValueError("RBF grid needs at least one gamma value")
        return [(c, g) for c in self.c_values for g in self.gamma_values]


DEFAULT_GRID = GridSpec((1, 2, 3, 4, 5), (0.1, 0.5, 0.75, 1, 2))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    accuracy: float | None
    n_train_players: int
    n_test_players: int
    n_train_pairs: int  # mirrored datapoints
    n_test_pairs: int  # mirrored datapoints
    train_retention: float
    test_retention: float
    converged: bool | None = None
    sweeps: int | None = None

    @property
    def degenerate(self) -> bool:
        return self.accuracy is None


@dataclass(frozen=True)
class EvalReport:
    factor: str
    feature_set: str
    kernel: str
    c: float
    gamma: float | None
    pt: float
    folds: tuple[FoldResult, ...]
    mean_accuracy: float | None
    best_fold_accuracy: float | None
    std_accuracy: float | None
    ci95: tuple[float, float] | None

    @property
    def fold_accuracies(self) -> list[float | None]:
        return [f.accuracy for f in self.folds]

    @property
    def n_degenerate(self) -> int:
        return sum(f.degenerate for f in self.folds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_degenerate"] = self.n_degenerate
        return d


def _summarise(accs: list[float]):
    if not accs:
        return None, None, None, None
    a = np.array(accs)
    mean = float(a.mean())
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    half = 1.96 * std / math.sqrt(a.size)
    return mean, float(a.max()), std, (mean - half, mean + half)


def pair_accuracy(model: Model, pds: PairwiseDataset) -> float | None:
    """Share of unordered test pairs ranked correctly; predicted ties score 0.5."""
    pos = pds.labels > 0
    if not pos.any():
        return None
    G = decision_matrix(model, pds.points)
    g = G[pds.first[pos], pds.second[pos]]
    return float(np.where(g > 0, 1.0, np.where(g == 0, 0.5, 0.0)).mean())


@dataclass(frozen=True, eq=False)
class FoldFit:
    model: Model | None
    normalizer: Normalizer
    train_pairs: PairwiseDataset
    test_pairs: PairwiseDataset | None


def fit_fold(ds: Dataset, factor: str, kernel: str, cfg: TrainConfig, pt: float, plan: FoldPlan,
             fold: int, rbf_form: str = "pair") -> FoldFit:
    """Train the model of one fold; test rows never reach the normaliser or the trainer."""
    is_test = plan.test_rows(ds.ids, fold)
    y = ds.factor(factor)
    tr, te = np.flatnonzero(~is_test), np.flatnonzero(is_test)
    norm = fit_normalizer(ds.X[tr])
    train_ids = [ds.ids[i] for i in tr]
    train_pds = transform(norm.apply(ds.X[tr]), y[tr], pt, train_ids)
    test_pds = None
    if te.size >= 2:
        test_pds = transform(norm.apply(ds.X[te]), y[te], pt, [ds.ids[i] for i in te])
    model = train(train_pds, kernel, cfg, rbf_form) if len(train_pds) else None
    return FoldFit(model, norm, train_pds, test_pds)


def run_cv(ds: Dataset, factor: str, kernel: str, cfg: TrainConfig, pt: float, plan: FoldPlan, *,
           feature_set: str = "all", rbf_form: str = "pair") -> EvalReport:
    results = []
    for fold in range(plan.k):
        fit = fit_fold(ds, factor, kernel, cfg, pt, plan, fold, rbf_form)
        n_tr = fit.train_pairs.n_source_players
        test = fit.test_pairs
        acc = None
        if fit.model is not None and test is not None:
            acc = pair_accuracy(fit.model, test)
        if acc is None:
            log.warning("fold %d of %s/%s/%s is degenerate (no train or test pairs) and is excluded",
                        fold, feature_set, kernel, factor)
        diag = fit.model.diagnostics if fit.model is not None else None
        results.append(FoldResult(
            fold=fold,
            accuracy=acc,
            n_train_players=n_tr,
            n_test_players=test.n_source_players if test else int(plan.sizes()[fold]),
            n_train_pairs=len(fit.train_pairs),
            n_test_pairs=len(test) if test else 0,
            train_retention=retention_stats(fit.train_pairs).kept_fraction,
            test_retention=retention_stats(test).kept_fraction if test else 0.0,
            converged=diag.converged if diag else None,
            sweeps=diag.sweeps if diag else None,
        ))
    mean, best, std, ci = _summarise([r.accuracy for r in results if r.accuracy is not None])
    return EvalReport(factor, feature_set, kernel, cfg.c, cfg.gamma if kernel == "rbf" else None, pt,
                      tuple(results), mean, best, std, ci)


def _rank_key(rep: EvalReport):
    mean = rep.mean_accuracy if rep.mean_accuracy is not None else -math.inf
    return (-mean, rep.c, rep.gamma if rep.gamma is not None else 0.0)


def grid_search(ds: Dataset, factor: str, kernel: str, grid: GridSpec, pt: float, plan: FoldPlan, *,
                base_cfg: TrainConfig = TrainConfig(), feature_set: str = "all", rbf_form: str = "pair",
                workers: int = 1) -> tuple[TrainConfig, list[EvalReport]]:
    """Cross-validate every grid cell on the same folds.

    Best cell: highest mean accuracy, ties to smaller C then smaller gamma.
    Reports come back in grid order regardless of ``workers``.
    """
    cells = grid.cells(kernel)
    cfgs = [replace(base_cfg, c=c, gamma=g if g is not None else base_cfg.gamma) for c, g in cells]

    def one(cfg):
        return run_cv(ds, factor, kernel, cfg, pt, plan, feature_set=feature_set, rbf_form=rbf_form)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, cfgs))
    else:
        reports = [one(c) for c in cfgs]
    best = min(range(len(reports)), key=lambda i: _rank_key(reports[i]))
    return cfgs[best], reports


@dataclass
class SuiteResult:
    best: list[EvalReport] = field(default_factory=list)
    grids: dict[tuple[str, str, str], list[EvalReport]] = field(default_factory=dict)

    SUMMARY_COLUMNS = (
        "feature_set", "kernel", "factor", "c", "gamma", "mean_accuracy", "ci95_low", "ci95_high",
        "best_fold_accuracy", "std_accuracy", "best_grid_cell_accuracy", "n_folds", "n_degenerate",
        "mean_train_pairs", "mean_test_pairs",
    )

    def summary_rows(self) -> list[dict]:
        rows = []
        for rep in self.best:
            n_tr = [f.n_train_pairs for f in rep.folds]
            n_te = [f.n_test_pairs for f in rep.folds]
            rows.append({
                "feature_set": rep.feature_set,
                "kernel": rep.kernel,
                "factor": rep.factor,
                "c": rep.c,
                "gamma": rep.gamma,
                "mean_accuracy": rep.mean_accuracy,
                "ci95_low": rep.ci95[0] if rep.ci95 else None,
                "ci95_high": rep.ci95[1] if rep.ci95 else None,
                # best single fold of the chosen cell vs the chosen cell's mean:
                # both readings of a "best model" figure are reported
                "best_fold_accuracy": rep.best_fold_accuracy,
                "std_accuracy": rep.std_accuracy,
                "best_grid_cell_accuracy": rep.mean_accuracy,
                "n_folds": len(rep.folds),
                "n_degenerate": rep.n_degenerate,
                "mean_train_pairs": float(np.mean(n_tr)),
                "mean_test_pairs": float(np.mean(n_te)),
            })
        return rows

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.SUMMARY_COLUMNS)
        for row in self.summary_rows():
            w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in self.SUMMARY_COLUMNS])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary_rows(), indent=1, sort_keys=True) + "\n"


def run_experiment_suite(ds: Dataset, grid: GridSpec, pt: float, plan: FoldPlan, *,
                         factors: Sequence[str] | None = None, kernels: Sequence[str] = KERNELS,
                         feature_sets: Sequence[str] = FEATURE_SETS, base_cfg: TrainConfig = TrainConfig(),
                         rbf_form: str = "pair", workers: int = 1) -> SuiteResult:
    """Grid-search every feature set x kernel x factor combination on shared folds."""
    factors = list(factors or ds.schema.factor_names)
    out = SuiteResult()
    for fs in feature_sets:
        sub = select_features(ds, fs)
        fs_name = {"styles": "play_styles", "metrics": "game_metrics"}.get(fs, fs)
        for kernel in kernels:
            for factor in factors:
                _, reports = grid_search(sub, factor, kernel, grid, pt, plan, base_cfg=base_cfg,
                                         feature_set=fs_name, rbf_form=rbf_form, workers=workers)
                out.grids[(fs_name, kernel, factor)] = reports
                out.best.append(min(reports, key=_rank_key))
    return out
