"""Command-line entry point: ``motivpl <subcommand> [flags]``.

Subcommands run one stage each and read/write plain files. Every run writes
``manifest.json`` next to its artifacts with the validated run configuration,
library versions and SHA-256 digests of inputs and outputs. Nothing
time-dependent is recorded, so equal configs and inputs give equal bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .domain import (
    FACTORS,
    PLAY_STYLES,
    DataError,
    FeatureSchema,
    OutlierRule,
    SchemaError,
    clean,
    default_schema,
    load_csv,
    select_features,
    write_csv,
)
from .pairwise import retention_stats, transform
from .pipeline import (
    KERNELS,
    DEFAULT_GRID,
    GridSpec,
    _rank_key,
    fit_normalizer,
    grid_search,
    kfold_split,
    run_cv,
    run_experiment_suite,
)
from .profiles import assign_styles, cluster_players
from .ranking import order_players, render_report, top_bottom_matrix
from .survey import SurveyError, SurveyMapping, attach_scores, default_mapping, load_responses, validate_mapping
from .svm import TrainConfig, model_to_dict, train
from .synth import corrupt, generate, linear_latents, radial_latents

log = logging.getLogger("motivpl")


class UsageError(ValueError):
    """Bad command line or inconsistent options."""


USER_ERRORS = (UsageError, SchemaError, DataError, SurveyError, FileNotFoundError, ValueError)

FEATURE_CHOICES = ("styles", "metrics", "all")


@dataclass(frozen=True)
class RunConfig:
    command: str
    data: str | None = None
    schema: str | None = None
    survey: str | None = None
    mapping: str | None = None
    pt: float = 0.1
    folds: int = 10
    seed: int = 0
    grid_c: tuple[float, ...] = DEFAULT_GRID.c_values
    grid_gamma: tuple[float, ...] = DEFAULT_GRID.gamma_values
    features: tuple[str, ...] = ("all",)
    factors: tuple[str, ...] = FACTORS
    kernels: tuple[str, ...] = KERNELS
    outlier: str = "iqr:1.5"
    zoom: int = 10
    top: int = 10
    scope: str = "dataset"
    method: str = "copeland"
    c: float | None = None
    gamma: float | None = None
    tol: float = 1e-3
    max_iter: int = 2000
    rbf_form: str = "pair"
    n: int = 298
    latent: str = "linear"
    noise: float = 0.0
    spread: float = 1.5
    n_corrupt: int = 0
    k: int = 4
    restarts: int = 10
    style_names: tuple[str, ...] = PLAY_STYLES
    workers: int = 1

    def validate(self) -> None:
        if not 0 <= self.pt < 10:
            raise UsageError(f"--pt must be in [0, 10), got {self.pt}")
        if self.folds < 2:
            raise UsageError("--folds must be >= 2")
        if self.zoom < 1 or self.top < 1:
            raise UsageError("--zoom and --top must be >= 1")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if self.n < 2 or self.n_corrupt < 0 or self.n_corrupt > self.n:
            raise UsageError("--n must be >= 2 and 0 <= --corrupt <= --n")
        if self.c is not None and self.c <= 0:
            raise UsageError("--c must be > 0")
        if self.gamma is not None and self.gamma <= 0:
            raise UsageError("--gamma must be > 0")
        for f in self.factors:
            if f not in FACTORS:
                raise UsageError(f"unknown factor {f!r}")
        OutlierRule.parse(self.outlier)
        GridSpec(self.grid_c, self.grid_gamma)
        TrainConfig(c=self.c or 1.0, gamma=self.gamma or 0.5, tol=self.tol, max_iter=self.max_iter)
        needs_data = self.command not in ("synth",)
        if needs_data and not self.data:
            raise UsageError(f"{self.command} needs --data")
        if self.survey and not self.command == "ingest":
            raise UsageError("--survey is only used by ingest")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motivpl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"motivpl {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--schema", help="feature schema JSON (default: built-in 30 features)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("-v", "--verbose", action="store_true")
        if data:
            sp.add_argument("--data", required=True, help="dataset CSV")

    def protocol(sp, multi_kernel=False):
        sp.add_argument("--pt", type=float, default=0.1, help="preference threshold (default 0.1)")
        sp.add_argument("--folds", type=int, default=10)
        sp.add_argument("--grid-c", type=_floats, default=DEFAULT_GRID.c_values)
        sp.add_argument("--grid-gamma", type=_floats, default=DEFAULT_GRID.gamma_values)
        sp.add_argument("--factor", default="all", choices=(*FACTORS, "all"))
        if multi_kernel:
            sp.add_argument("--kernel", choices=KERNELS, action="append",
                            help="repeat to choose several (default: both)")
            sp.add_argument("--features", choices=FEATURE_CHOICES, nargs="+", default=list(FEATURE_CHOICES))
        else:
            sp.add_argument("--kernel", choices=KERNELS, default="rbf")
            sp.add_argument("--features", choices=FEATURE_CHOICES, default="all")
        sp.add_argument("--tol", type=float, default=1e-3)
        sp.add_argument("--max-iter", type=int, default=2000)
        sp.add_argument("--rbf-form", choices=("pair", "difference"), default="pair")

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    common(sp, data=False)
    sp.add_argument("--n", type=int, default=298)
    sp.add_argument("--latent", choices=("linear", "radial"), default="linear")
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--spread", type=float, default=1.5)
    sp.add_argument("--corrupt", type=int, default=0, dest="n_corrupt", help="records to damage")

    sp = sub.add_parser("ingest", help="load a dataset CSV, optionally scoring survey responses")
    common(sp)
    sp.add_argument("--survey", help="survey responses CSV (player_id + item columns)")
    sp.add_argument("--mapping", help="item-to-factor mapping JSON (default: built-in)")

    sp = sub.add_parser("clean", help="drop invalid and outlying records")
    common(sp)
    sp.add_argument("--outlier", default="iqr:1.5", help="iqr:k, zscore:k or none")

    sp = sub.add_parser("cluster", help="derive exclusive play-style columns with k-means")
    common(sp)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--names", nargs="+", default=list(PLAY_STYLES))

    sp = sub.add_parser("transform", help="dump the pairwise preference datapoints")
    common(sp)
    sp.add_argument("--pt", type=float, default=0.1)
    sp.add_argument("--factor", default="all", choices=(*FACTORS, "all"))
    sp.add_argument("--features", choices=FEATURE_CHOICES, default="all")

    sp = sub.add_parser("cv", help="cross-validate one kernel and feature set")
    common(sp)
    protocol(sp)
    sp.add_argument("--c", type=float, help="fix C instead of searching the grid")
    sp.add_argument("--gamma", type=float, help="fix gamma instead of searching the grid")

    sp = sub.add_parser("suite", help="feature set x kernel x factor grid search")
    common(sp)
    protocol(sp, multi_kernel=True)

    sp = sub.add_parser("rank", help="order all players and render top/bottom reports")
    common(sp)
    protocol(sp)
    sp.add_argument("--c", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--zoom", type=int, default=10)
    sp.add_argument("--method", choices=("copeland", "utility"), default="copeland")
    sp.add_argument("--scope", choices=("dataset", "shown"), default="dataset")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(ns).items() if v is not None and k not in ("out", "verbose", "factor",
                                                                          "kernel", "names", "features")}
    if getattr(ns, "factor", None):
        kw["factors"] = FACTORS if ns.factor == "all" else (ns.factor,)
    if getattr(ns, "kernel", None):
        kw["kernels"] = tuple(dict.fromkeys([ns.kernel] if isinstance(ns.kernel, str) else ns.kernel))
    if getattr(ns, "features", None):
        kw["features"] = (ns.features,) if isinstance(ns.features, str) else tuple(dict.fromkeys(ns.features))
    if getattr(ns, "names", None):
        kw["style_names"] = tuple(ns.names)
    for key in ("grid_c", "grid_gamma"):
        if key in kw:
            kw[key] = tuple(kw[key])
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


class Run:
    """Collects the outputs of one subcommand and writes the manifest."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def input(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {path}")
        self.inputs[p.name] = _sha256(p)
        return p

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def write_json(self, name: str, payload: dict) -> Path:
        p = self.path(name)
        p.write_text(_dumps({"config": self.cfg.to_dict(), **payload}), encoding="utf-8")
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        return p

    def finish(self) -> Path:
        manifest = {
            "tool": "motivpl",
            "version": __version__,
            "command": self.cfg.command,
            "config": self.cfg.to_dict(),
            "seeds": {"seed": self.cfg.seed},
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "numba": numba.__version__},
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {p.name: _sha256(p) for p in sorted(set(self.outputs))},
        }
        p = self.out / "manifest.json"
        p.write_text(_dumps(manifest), encoding="utf-8")
        return p


def _schema(run: Run) -> FeatureSchema:
    p = run.input(run.cfg.schema)
    return FeatureSchema.load(p) if p else default_schema()


def _write_dataset(run: Run, ds, name: str = "dataset.csv") -> None:
    write_csv(ds, run.path(name))
    run.write_text("schema.json", json.dumps(ds.schema.to_dict(), indent=1, sort_keys=True) + "\n")


def _train_cfg(cfg: RunConfig, c=None, gamma=None) -> TrainConfig:
    return TrainConfig(c=c if c is not None else 1.0, gamma=gamma if gamma is not None else 0.5,
                       tol=cfg.tol, max_iter=cfg.max_iter, seed=cfg.seed)


def cmd_synth(run: Run) -> None:
    cfg = run.cfg
    schema = _schema(run)
    make = linear_latents if cfg.latent == "linear" else radial_latents
    specs = make(schema, seed=cfg.seed, noise_sigma=cfg.noise, spread=cfg.spread)
    ds = generate(cfg.n, schema, specs)
    damaged = []
    if cfg.n_corrupt:
        ds, damaged = corrupt(ds, cfg.n_corrupt, seed=cfg.seed)
    _write_dataset(run, ds)
    run.write_json("latents.json", {"latents": [s.to_dict() for s in specs], "corrupted_ids": damaged})


def cmd_ingest(run: Run) -> None:
    cfg = run.cfg
    schema = _schema(run)
    data = run.input(cfg.data)
    ds = load_csv(data, schema, require_factors=cfg.survey is None)
    if cfg.survey:
        mp = run.input(cfg.mapping)
        mapping = SurveyMapping.from_json(mp, schema.factor_names) if mp else default_mapping()
        problems = validate_mapping(mapping)
        if problems:
            raise SurveyError("; ".join(problems))
        ds = attach_scores(ds, load_responses(run.input(cfg.survey)), mapping)
    _write_dataset(run, ds)
    missing = int(np.isnan(ds.Y).any(axis=1).sum())
    run.write_json("ingest.json", {"n_players": len(ds), "n_missing_factor_rows": missing})


def _load(run: Run):
    return load_csv(run.input(run.cfg.data), _schema(run))


def cmd_clean(run: Run) -> None:
    ds = _load(run)
    cleaned, clog = clean(ds, run.cfg.outlier)
    _write_dataset(run, cleaned)
    run.write_text("clean_log.jsonl", clog.to_jsonl())
    run.write_json("clean.json", {"n_in": len(ds), "n_out": len(cleaned), "n_dropped": len(clog)})


def cmd_cluster(run: Run) -> None:
    cfg = run.cfg
    ds = _load(run)
    model = cluster_players(ds, k=cfg.k, seed=cfg.seed, restarts=cfg.restarts)
    styled = assign_styles(model, ds, cfg.style_names)
    _write_dataset(run, styled)
    run.write_json("cluster_model.json", {"model": model.to_dict(), "style_names": list(cfg.style_names)})


def cmd_transform(run: Run) -> None:
    cfg = run.cfg
    sub = select_features(_load(run), cfg.features[0])
    norm = fit_normalizer(sub.X)
    stats = {}
    for factor in cfg.factors:
        pds = transform(norm.apply(sub.X), sub.factor(factor), cfg.pt, sub.ids)
        pds.to_csv(run.path(f"pairs_{factor}.csv"))
        st = retention_stats(pds)
        stats[factor] = asdict(st)
    run.write_json("retention.json", {"normalizer": norm.to_dict(), "retention": stats})


def _reports_jsonl(reports) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True, allow_nan=False) + "\n" for r in reports)


def cmd_cv(run: Run) -> None:
    cfg = run.cfg
    ds = _load(run)
    sub = select_features(ds, cfg.features[0])
    plan = kfold_split(sub.ids, cfg.folds, cfg.seed)
    kernel = cfg.kernels[0]
    fixed = cfg.c is not None and (kernel == "linear" or cfg.gamma is not None)
    fs = {"styles": "play_styles", "metrics": "game_metrics"}.get(cfg.features[0], cfg.features[0])
    best, grid = [], []
    for factor in cfg.factors:
        if fixed:
            rep = run_cv(sub, factor, kernel, _train_cfg(cfg, cfg.c, cfg.gamma), cfg.pt, plan,
                         feature_set=fs, rbf_form=cfg.rbf_form)
            reports = [rep]
        else:
            grid_spec = GridSpec(cfg.grid_c, (cfg.gamma,) if cfg.gamma is not None else cfg.grid_gamma)
            if cfg.c is not None:
                grid_spec = GridSpec((cfg.c,), grid_spec.gamma_values)
            _, reports = grid_search(sub, factor, kernel, grid_spec, cfg.pt, plan, base_cfg=_train_cfg(cfg),
                                     feature_set=fs, rbf_form=cfg.rbf_form, workers=cfg.workers)
            rep = min(reports, key=_rank_key)
        best.append(rep)
        grid.extend(reports)
    run.write_json("report.json", {"reports": [r.to_dict() for r in best],
                                   "fold_sizes": plan.sizes()})
    run.write_text("grid_reports.jsonl", _reports_jsonl(grid))


def cmd_suite(run: Run) -> None:
    cfg = run.cfg
    ds = _load(run)
    plan = kfold_split(ds.ids, cfg.folds, cfg.seed)
    result = run_experiment_suite(ds, GridSpec(cfg.grid_c, cfg.grid_gamma), cfg.pt, plan,
                                  factors=cfg.factors, kernels=cfg.kernels, feature_sets=cfg.features,
                                  base_cfg=_train_cfg(cfg), rbf_form=cfg.rbf_form, workers=cfg.workers)
    run.write_text("summary.csv", result.summary_csv())
    run.write_json("summary.json", {"summary": result.summary_rows(), "fold_sizes": plan.sizes()})
    run.write_text("reports.jsonl", _reports_jsonl(result.best))
    run.write_text("grid_reports.jsonl", _reports_jsonl(r for reps in result.grids.values() for r in reps))


def cmd_rank(run: Run) -> None:
    cfg = run.cfg
    ds = _load(run)
    sub = select_features(ds, cfg.features[0])
    kernel = cfg.kernels[0]
    if 2 * cfg.top > len(sub):
        raise UsageError(f"--top {cfg.top} needs at least {2 * cfg.top} players, dataset has {len(sub)}")
    plan = kfold_split(sub.ids, cfg.folds, cfg.seed)
    norm = fit_normalizer(sub.X)
    Z = norm.apply(sub.X)
    index = {}
    for factor in cfg.factors:
        c, gamma, cv_mean = cfg.c, cfg.gamma, None
        if c is None or (kernel == "rbf" and gamma is None):
            grid = GridSpec((c,) if c is not None else cfg.grid_c,
                            (gamma,) if gamma is not None else cfg.grid_gamma)
            best_cfg, reports = grid_search(sub, factor, kernel, grid, cfg.pt, plan, base_cfg=_train_cfg(cfg),
                                            rbf_form=cfg.rbf_form, workers=cfg.workers)
            c, gamma = best_cfg.c, best_cfg.gamma
            cv_mean = min(reports, key=_rank_key).mean_accuracy
        tcfg = _train_cfg(cfg, c, gamma)
        pds = transform(Z, sub.factor(factor), cfg.pt, sub.ids)
        if not len(pds):
            raise DataError(f"no clear preferences for {factor} at pt={cfg.pt}")
        model = train(pds, kernel, tcfg, cfg.rbf_form)
        ordering = order_players(model, sub, cfg.method, normalizer=norm)
        matrix = top_bottom_matrix(ordering, sub, cfg.top, cfg.scope)
        meta = {"config": cfg.to_dict(), "factor": factor, "kernel": kernel, "c": c,
                "gamma": gamma if kernel == "rbf" else None, "cv_mean_accuracy": cv_mean}
        paths = render_report(matrix, run.out, f"rank_{factor}", cfg.zoom, meta)
        run.outputs.extend(paths.values())
        run.write_json(f"ordering_{factor}.json", {"factor": factor, "ordering": ordering.to_dict()})
        run.write_json(f"model_{factor}.json", {
            "model": model_to_dict(model, sub.schema.fingerprint()), "normalizer": norm.to_dict(),
            "feature_names": list(sub.schema.names)})
        index[factor] = {k: str(p.name) for k, p in paths.items()}
    run.write_json("rank.json", {"reports": index})


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "clean": cmd_clean, "cluster": cmd_cluster,
    "transform": cmd_transform, "cv": cmd_cv, "suite": cmd_suite, "rank": cmd_rank,
}


def _fail(code: int, exc: BaseException) -> int:
    kind = "user_error" if code == 1 else "internal_error"
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = config_from_args(ns)
        run = Run(cfg, Path(ns.out))
        COMMANDS[cfg.command](run)
        run.finish()
        return 0
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except USER_ERRORS as exc:
        return _fail(1, exc)
    except Exception as exc:  # pragma: no cover - reported, not raised
        return _fail(2, exc)


if __name__ == "__main__":
    sys.exit(main())
