"""Per-city study workflow: seasonality, tuning, selection, baselines, reports."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .boosting import BoostParams, BoostedEnsemble
from .cluster import hier_cluster
from .dataset import (
    PREDICTOR_LABELS,
    GAP_POLICIES,
    NexusDataset,
    handle_gaps,
    ingest_all,
    lag_predictor,
    load_schema,
    standardize,
)
from .errors import ConfigurationError, NexusError, ValidationError
from .evaluation import (
    SIMILAR,
    TuningGrid,
    compare_models,
    cross_validate,
    make_folds,
    multivariate_fitter,
    select_variables,
    tune,
    univariate_fitter,
)
from .mvtboost import covariance_explained, relative_influence
from .seasonal import (
    DEFAULT_CANDIDATE_PERIODS,
    DEFAULT_PEAK_THRESHOLD,
    all_periods,
    decompose,
    detect_seasonality,
    periodogram,
)
from .svg import heatmap_svg, periodogram_svg

log = logging.getLogger(__name__)

MODES = ("with-seasonality", "deseasonalized")
RESPONSE_SHORT = {"water_use": "water", "electricity_use": "electricity"}


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    schema: str | None = None
    cities: tuple = ()
    mode: str = "both"
    grid: TuningGrid = field(default_factory=TuningGrid)
    top_m: int = 5
    influence_threshold: float | None = None
    seed: int = 0
    out: str = "results"
    folds: int = 5
    blocked_folds: bool = False
    alpha: float = 0.05
    gap_policy: str = "fail"
    candidate_periods: tuple | str = DEFAULT_CANDIDATE_PERIODS
    seasonality_threshold: float = DEFAULT_PEAK_THRESHOLD
    enso_lag: int = 0
    linkage: str = "average"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES + ("both",):
            raise ConfigurationError(f"mode must be one of {MODES + ('both',)}, got {self.mode!r}")
        if self.gap_policy not in GAP_POLICIES:
            raise ConfigurationError(f"gap_policy must be one of {GAP_POLICIES}")
        if self.top_m < 1:
            raise ConfigurationError("top_m must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def modes(self) -> tuple:
        return MODES if self.mode == "both" else (self.mode,)

    def hash(self) -> str:
        """Digest of everything that can change results (not paths or workers)."""
        doc = dataclasses.asdict(self)
        for key in ("out", "workers", "input", "schema"):
            doc.pop(key)
        text = json.dumps(doc, sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()


def _split_list(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _bool(value):
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Parse ``key = value`` lines (``#`` comments allowed) into a RunConfig.

    Keys: input, schema, cities, mode, seed, out, folds, blocked_folds,
    grid.n_iterations, grid.learning_rate, grid.max_depth, min_leaf, top_m,
    influence_threshold, alpha, gap_policy, candidate_periods ("all" or a
    list), seasonality_threshold, enso_lag, linkage, workers. Relative paths
    resolve against ``base_dir``.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value

    kwargs, grid = {}, {}
    try:
        for key, value in raw.items():
            if key in ("input", "schema", "out"):
                kwargs[key] = str(Path(base_dir, value)) if value else None
            elif key == "cities":
                kwargs[key] = _split_list(value)
            elif key in ("mode", "gap_policy", "linkage"):
                kwargs[key] = value
            elif key in ("seed", "folds", "top_m", "enso_lag", "workers"):
                kwargs[key] = int(value)
            elif key in ("alpha", "seasonality_threshold"):
                kwargs[key] = float(value)
            elif key == "influence_threshold":
                kwargs[key] = float(value) if value else None
            elif key == "blocked_folds":
                kwargs[key] = _bool(value)
            elif key == "candidate_periods":
                kwargs[key] = "all" if value == "all" else tuple(int(v) for v in _split_list(value))
            elif key == "grid.n_iterations":
                grid["n_iterations"] = tuple(int(v) for v in _split_list(value))
            elif key == "grid.learning_rate":
                grid["learning_rate"] = tuple(float(v) for v in _split_list(value))
            elif key == "grid.max_depth":
                grid["max_depth"] = tuple(int(v) for v in _split_list(value))
            elif key == "min_leaf":
                grid["min_leaf"] = int(value)
            else:
                raise ConfigurationError(f"unknown config key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad config value: {exc}") from None
    if grid:
        kwargs["grid"] = TuningGrid(**grid)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


# ---------------------------------------------------------------------------
# per-city computation


@dataclass
class ModeResult:
    mode: str
    periods: dict
    residual_periods: dict
    decompositions: dict
    tuning: object
    params: BoostParams
    full_report: object
    full_model: BoostedEnsemble
    selection: object
    final_report: object
    final_model: BoostedEnsemble
    verdict: dict
    univariate_report: object
    univariate_model: BoostedEnsemble
    final_predictors: tuple
    covariance: object
    row_dendrogram: object
    col_dendrogram: object


@dataclass
class CityResult:
    city: str
    n: int
    periods: dict = field(default_factory=dict)
    periodograms: dict = field(default_factory=dict)
    modes: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    error: dict | None = None


class StageError(NexusError):
    def __init__(self, stage, exc):
        self.stage = stage
        self.cause = exc
        super().__init__(f"stage {stage!r} failed: {exc}")


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _candidates(cfg, n):
    return all_periods(n) if cfg.candidate_periods == "all" else cfg.candidate_periods


def prepare_city(ds: NexusDataset, cfg: RunConfig) -> NexusDataset:
    ds = handle_gaps(ds, cfg.gap_policy)
    if cfg.enso_lag:
        ds = lag_predictor(ds, "enso_index", cfg.enso_lag)
    return standardize(ds, "responses")


def _run_mode(ds, cfg, mode, periods, result):
    names = ds.response_names
    decompositions, residual_periods = {}, {}
    if mode == "deseasonalized":
        with _stage("deseasonalize"):
            Y = ds.Y.copy()
            for k, name in enumerate(names):
                if periods[name] is None:
                    continue
                dec = decompose(Y[:, k], periods[name])
                decompositions[name] = dec
                Y[:, k] = Y[:, k] - dec.seasonal
                residual_periods[name] = detect_seasonality(
                    periodogram(Y[:, k]), _candidates(cfg, ds.n), cfg.seasonality_threshold
                )
                if residual_periods[name] is not None:
                    msg = (f"{ds.city_id}: {name} still shows a {residual_periods[name]}-month "
                           "peak after deseasonalization")
                    result.warnings.append(msg)
                    warnings.warn(msg)
            ds = ds.with_responses(Y, deseasonalized=True)

    plan = make_folds(ds.n, cfg.folds, cfg.seed, blocked=cfg.blocked_folds)
    with _stage("tune"):
        tuning = tune(ds, plan, cfg.grid, "multivariate")
        params = tuning.best
    with _stage("full-model"):
        details = {"mode": mode, "params": dataclasses.asdict(params), "tuned": "per-city"}
        full_report = cross_validate(ds, multivariate_fitter(params), plan, "full", details)
        full_model = multivariate_fitter(params)(ds.X, ds.Y)
    with _stage("variable-selection"):
        top_m = min(cfg.top_m, len(ds.predictor_names))
        selection = select_variables(ds, params, top_m, cfg.influence_threshold)
        if not selection.selected:
            raise ValidationError("variable selection kept no predictors")
    with _stage("reduced-model"):
        reduced = ds.select_predictors(selection.selected)
        details = dict(details, predictors=list(reduced.predictor_names))
        final_report = cross_validate(reduced, multivariate_fitter(params), plan, "final", details)
        final_model = multivariate_fitter(params)(reduced.X, reduced.Y)
        verdict = compare_models(final_report, full_report, cfg.alpha)
        for name, v in verdict.items():
            if v != SIMILAR:
                msg = (f"{ds.city_id} [{mode}]: reduced model is not statistically similar to "
                       f"the full model for {name} ({_verdict_text(v)})")
                result.warnings.append(msg)
                warnings.warn(msg)
    with _stage("univariate-baseline"):
        univariate_report = cross_validate(reduced, univariate_fitter(params), plan, "univariate", details)
        univariate_model = univariate_fitter(params)(reduced.X, reduced.Y)
    with _stage("covariance-explained"):
        cov = covariance_explained(final_model, reduced.X, reduced.Y,
                                   reduced.predictor_names, names)
        rows = hier_cluster(cov.entries, linkage=cfg.linkage)
        cols = hier_cluster(cov.entries.T, linkage=cfg.linkage)
    return ModeResult(
        mode=mode,
        periods=dict(periods),
        residual_periods=residual_periods,
        decompositions=decompositions,
        tuning=tuning,
        params=params,
        full_report=full_report,
        full_model=full_model,
        selection=selection,
        final_report=final_report,
        final_model=final_model,
        verdict=verdict,
        univariate_report=univariate_report,
        univariate_model=univariate_model,
        final_predictors=reduced.predictor_names,
        covariance=cov,
        row_dendrogram=rows,
        col_dendrogram=cols,
    )


def run_city(ds: NexusDataset, cfg: RunConfig) -> CityResult:
    """Run every stage for one city; a failing stage is recorded, not raised."""
    result = CityResult(ds.city_id, ds.n)
    try:
        with _stage("prepare"):
            ds = prepare_city(ds, cfg)
            result.n = ds.n
        with _stage("seasonality-detection"):
            for k, name in enumerate(ds.response_names):
                pg = periodogram(ds.Y[:, k])
                result.periodograms[name] = pg
                result.periods[name] = detect_seasonality(
                    pg, _candidates(cfg, ds.n), cfg.seasonality_threshold
                )
        for mode in cfg.modes:
            result.modes[mode] = _run_mode(ds, cfg, mode, result.periods, result)
    except StageError as exc:
        cause = exc.cause
        log.error("%s: %s", ds.city_id, exc)
        result.error = {
            "stage": exc.stage,
            "type": type(cause).__name__,
            "message": str(cause),
            "validation": isinstance(cause, ValidationError),
            "traceback": "".join(traceback.format_exception_only(type(cause), cause)).strip(),
        }
    return result


# ---------------------------------------------------------------------------
# report emission


def _fmt(value) -> str:
    return repr(float(value))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(header)
        writer.writerows(rows)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def score_table_rows(results, mode, variant="final", with_rmse=True):
    rows = []
    for res in results:
        if mode not in res.modes:
            continue
        report = getattr(res.modes[mode], f"{variant}_report")
        row = [res.city]
        for name in ("water_use", "electricity_use"):
            row.append(_fmt(report.metric(name, "r2")))
            if with_rmse:
                row.append(_fmt(report.metric(name, "rmse")))
        rows.append(row)
    return rows


SCORE_HEADER = ["city", "water_r2", "water_rmse", "electricity_r2", "electricity_rmse"]
UNIVARIATE_HEADER = ["city", "water_r2", "electricity_r2"]
TABLE_FILES = {
    "with-seasonality": "table2_with_seasonality",
    "deseasonalized": "table3_deseasonalized",
}


def ensure_writable(out) -> Path:
    """Create the output directory and prove it is writable, before any work."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _emit_city(res: CityResult, out: Path) -> list:
    files = []
    city_dir = out / _safe(res.city)
    city_dir.mkdir(parents=True, exist_ok=True)

    def record(path):
        files.append(str(path.relative_to(out)))
        return path

    for name, pg in res.periodograms.items():
        short = RESPONSE_SHORT.get(name, name)
        pg.to_csv(record(city_dir / f"periodogram_{short}.csv"))
        _write_text(record(city_dir / f"periodogram_{short}.svg"),
                    periodogram_svg(pg, f"{res.city}: {short} use", res.periods.get(name)))
    for mode, mr in res.modes.items():
        mdir = city_dir / mode
        mdir.mkdir(exist_ok=True)
        for name, dec in mr.decompositions.items():
            dec.to_csv(record(mdir / f"decomposition_{RESPONSE_SHORT.get(name, name)}.csv"))
        _write_csv(record(mdir / "tuning.csv"),
                   ["n_iterations", "learning_rate", "max_depth", "summed_pooled_rmse"],
                   [[t, _fmt(lr), d, _fmt(s)] for t, lr, d, s in mr.tuning.table])
        for variant in ("full", "final", "univariate"):
            _write_text(record(mdir / f"model_{variant}.json"),
                        getattr(mr, f"{variant}_model").to_json() + "\n")
            _write_json(record(mdir / f"scores_{variant}.json"),
                        json.loads(getattr(mr, f"{variant}_report").to_json()))
        mr.selection.influence.to_csv(record(mdir / "influence_full.csv"))
        relative_influence(mr.final_model, len(mr.final_predictors), mr.final_predictors,
                           mr.final_report.response_names).to_csv(record(mdir / "influence_final.csv"))
        _write_json(record(mdir / "selection.json"), {
            "ranking": [mr.selection.influence.predictor_labels[j] for j in mr.selection.ranking],
            "mean_influence": {mr.selection.influence.predictor_labels[j]: float(mr.selection.mean_influence[j])
                               for j in mr.selection.ranking},
            "selected": list(mr.final_predictors),
            "verdict_final_vs_full": mr.verdict,
            "params": dataclasses.asdict(mr.params),
        })
        cov = mr.covariance
        cov.to_csv(record(mdir / "covariance_explained.csv"))
        clustered = cov.reordered(list(mr.row_dendrogram.leaf_order), list(mr.col_dendrogram.leaf_order))
        clustered.to_csv(record(mdir / "covariance_explained_clustered.csv"))
        _write_json(record(mdir / "dendrograms.json"),
                    {"rows": mr.row_dendrogram.to_dict(), "columns": mr.col_dendrogram.to_dict()})
        _write_text(record(mdir / "heatmap.svg"), heatmap_svg(
            clustered.entries,
            [PREDICTOR_LABELS.get(p, p) for p in clustered.predictor_labels],
            clustered.pair_labels,
            f"{res.city} ({mode}): covariance explained",
        ))
    return files


def _safe(name: str) -> str:
    cleaned = "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
    return cleaned or "city"


def _verdict_text(verdict):
    return {"a_better": "reduced better", "b_better": "full better"}.get(verdict, verdict)


def summary_text(results, cfg: RunConfig) -> str:
    lines = [f"nexusboost {__version__} run summary", f"config hash: {cfg.hash()}", ""]
    for res in results:
        lines.append(f"== {res.city} ({res.n} months)")
        if res.error:
            lines.append(f"  FAILED at stage {res.error['stage']}: {res.error['message']}")
            lines.append("")
            continue
        for name, period in res.periods.items():
            lines.append(f"  seasonality {name}: {period if period else 'none'}")
        for mode, mr in res.modes.items():
            p = mr.params
            lines.append(f"  [{mode}] tuned: n_iterations={p.n_iterations} "
                         f"learning_rate={p.learning_rate} max_depth={p.tree.max_depth}")
            ranked = [mr.selection.influence.predictor_labels[j] for j in mr.selection.ranking]
            lines.append("  [{}] influence order: {}".format(mode, ", ".join(
                f"{label} ({mr.selection.mean_influence[j]:.1f}%)"
                for label, j in zip(ranked, mr.selection.ranking))))
            lines.append(f"  [{mode}] selected: {', '.join(mr.final_predictors)}")
            for name in mr.final_report.response_names:
                lines.append(
                    f"  [{mode}] {name}: final R2={mr.final_report.metric(name, 'r2'):.3f} "
                    f"RMSE={mr.final_report.metric(name, 'rmse'):.3f}; "
                    f"univariate R2={mr.univariate_report.metric(name, 'r2'):.3f}; "
                    f"reduced vs full: {_verdict_text(mr.verdict[name])}"
                )
        for w in res.warnings:
            lines.append(f"  warning: {w}")
        lines.append("")
    return "\n".join(lines) + "\n"


def emit_reports(results, cfg: RunConfig, started: str | None = None) -> dict:
    """Write every report file, then the manifest that lists them."""
    out = ensure_writable(cfg.out)
    entries = []
    top_files = []
    ok = [r for r in results if r.error is None]
    if results:
        for mode in cfg.modes:
            stem = TABLE_FILES[mode]
            rows = score_table_rows(ok, mode)
            _write_csv(out / f"{stem}.csv", SCORE_HEADER, rows)
            _write_json(out / f"{stem}.json", [dict(zip(SCORE_HEADER, r)) for r in rows])
            uni = score_table_rows(ok, mode, "univariate", with_rmse=False)
            _write_csv(out / f"table4_univariate_{mode}.csv", UNIVARIATE_HEADER, uni)
            _write_json(out / f"table4_univariate_{mode}.json", [dict(zip(UNIVARIATE_HEADER, r)) for r in uni])
            top_files += [f"{stem}.csv", f"{stem}.json",
                          f"table4_univariate_{mode}.csv", f"table4_univariate_{mode}.json"]
        _write_text(out / "summary.txt", summary_text(results, cfg))
        top_files.append("summary.txt")
    for res in results:
        files = _emit_city(res, out) if res.error is None else []
        entries.append({
            "city": res.city,
            "status": "ok" if res.error is None else "failed",
            "error": res.error,
            "periods": res.periods,
            "files": files,
        })
    manifest = {
        "software": f"nexusboost {__version__}",
        "config_hash": cfg.hash(),
        "started": started or _now(),
        "finished": _now(),
        "files": top_files,
        "cities": entries,
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def load_datasets(cfg: RunConfig) -> list:
    if cfg.input is None:
        raise ConfigurationError("no input file configured")
    schema = load_schema(cfg.schema) if cfg.schema else None
    datasets = ingest_all(cfg.input, schema)
    if cfg.cities:
        missing = [c for c in cfg.cities if c not in datasets]
        if missing:
            raise ValidationError(f"cities not found in input: {missing}")
        return [datasets[c] for c in cfg.cities]
    return list(datasets.values())


def run_all(cfg: RunConfig, datasets=None) -> dict:
    """Ingest, run every city (in parallel when ``workers > 1``) and emit reports."""
    started = _now()
    ensure_writable(cfg.out)
    if datasets is None:
        datasets = [] if cfg.input is None and not cfg.cities else load_datasets(cfg)
    if cfg.workers > 1 and len(datasets) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(datasets), os.cpu_count() or 1)) as pool:
            results = list(pool.map(run_city, datasets, [cfg] * len(datasets)))
    else:
        results = [run_city(ds, cfg) for ds in datasets]
    return emit_reports(results, cfg, started)
