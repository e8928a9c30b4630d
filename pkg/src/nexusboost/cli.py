"""Command-line entry point: ``nexusboost <subcommand> [options]``.

Exit codes: 0 success, 2 validation error, 3 runtime or model error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .boosting import BoostParams
from .cart import TreeParams
from .dataset import PREDICTOR_NAMES, find_gaps, load_schema, write_csv
from .errors import NexusError, ValidationError
from .evaluation import TuningGrid, cross_validate, make_folds, multivariate_fitter, tune, univariate_fitter
from .pipeline import (
    MODES,
    RESPONSE_SHORT,
    RunConfig,
    SCORE_HEADER,
    _write_csv,
    _write_text,
    ensure_writable,
    load_config,
    load_datasets,
    prepare_city,
    run_all,
)
from .seasonal import detect_seasonality, periodogram
from .svg import periodogram_svg
from .synthetic import SyntheticSpec, generate

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "input", None):
        overrides["input"] = args.input
    if getattr(args, "schema", None):
        overrides["schema"] = args.schema
    if getattr(args, "cities", None):
        overrides["cities"] = tuple(c for c in args.cities.split(",") if c)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _fixed_params(args):
    values = (args.n_iterations, args.learning_rate, args.max_depth)
    if all(v is None for v in values):
        return None
    if any(v is None for v in values):
        raise ValidationError("give all of --n-iterations, --learning-rate, --max-depth or none")
    return BoostParams(args.n_iterations, args.learning_rate,
                       TreeParams(max_depth=args.max_depth, min_leaf=args.min_leaf))


def _params_for(ds, cfg, args, plan, kind="multivariate"):
    fixed = _fixed_params(args)
    return fixed if fixed is not None else tune(ds, plan, cfg.grid, kind).best


def cmd_ingest(args) -> int:
    cfg = _config(args)
    out = ensure_writable(cfg.out)
    datasets = load_datasets(cfg)
    schema = load_schema(cfg.schema) if cfg.schema else None
    report = {}
    for ds in datasets:
        gaps = find_gaps(ds)
        report[ds.city_id] = {
            "months": ds.n,
            "first": str(ds.timeline[0]),
            "last": str(ds.timeline[-1]),
            "gaps": [[str(a), str(b), k] for a, b, k in gaps],
        }
        print(f"{ds.city_id}: {ds.n} months {ds.timeline[0]}..{ds.timeline[-1]}, {len(gaps)} gap(s)")
    write_csv(datasets, out / "validated.csv", schema)
    _write_text(out / "ingest_report.json", json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    out = ensure_writable(cfg.out)
    for ds in load_datasets(cfg):
        ds = prepare_city(ds, cfg)
        for k, name in enumerate(ds.response_names):
            pg = periodogram(ds.Y[:, k])
            candidates = cfg.candidate_periods
            if candidates == "all":
                from .seasonal import all_periods
                candidates = all_periods(ds.n)
            period = detect_seasonality(pg, candidates, cfg.seasonality_threshold)
            stem = f"{ds.city_id}_{RESPONSE_SHORT.get(name, name)}"
            pg.to_csv(out / f"periodogram_{stem}.csv")
            _write_text(out / f"periodogram_{stem}.svg",
                        periodogram_svg(pg, f"{ds.city_id}: {name}", period))
            print(f"{ds.city_id} {name}: {f'{period}-month' if period else 'no'} seasonality")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    out = ensure_writable(cfg.out)
    for ds in load_datasets(cfg):
        ds = prepare_city(ds, cfg)
        plan = make_folds(ds.n, cfg.folds, cfg.seed, cfg.blocked_folds)
        params = _params_for(ds, cfg, args, plan, args.kind)
        fitter = multivariate_fitter(params) if args.kind == "multivariate" else univariate_fitter(params)
        model = fitter(ds.X, ds.Y)
        path = out / f"model_{ds.city_id}_{args.kind}.json"
        _write_text(path, model.to_json() + "\n")
        print(f"{ds.city_id}: {len(model.stages)} stages -> {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out = ensure_writable(cfg.out)
    rows = []
    for ds in load_datasets(cfg):
        ds = prepare_city(ds, cfg)
        plan = make_folds(ds.n, cfg.folds, cfg.seed, cfg.blocked_folds)
        params = _params_for(ds, cfg, args, plan, args.kind)
        fitter = multivariate_fitter(params) if args.kind == "multivariate" else univariate_fitter(params)
        report = cross_validate(ds, fitter, plan, args.kind)
        row = [ds.city_id]
        for name in ("water_use", "electricity_use"):
            row += [repr(report.metric(name, "r2")), repr(report.metric(name, "rmse"))]
        rows.append(row)
        print(f"{ds.city_id}: water R2={report.metric('water_use', 'r2'):.3f} "
              f"electricity R2={report.metric('electricity_use', 'r2'):.3f}")
    _write_csv(out / f"scores_{args.kind}.csv", SCORE_HEADER, rows)
    return EXIT_OK


def cmd_run_all(args) -> int:
    cfg = _config(args)
    manifest = run_all(cfg)
    failed = [c for c in manifest["cities"] if c["status"] != "ok"]
    for entry in manifest["cities"]:
        status = "ok" if entry["error"] is None else f"FAILED at {entry['error']['stage']}: {entry['error']['message']}"
        print(f"{entry['city']}: {status}")
    print(f"wrote {Path(cfg.out) / 'manifest.json'}")
    if not failed:
        return EXIT_OK
    return EXIT_VALIDATION if all(c["error"]["validation"] for c in failed) else EXIT_RUNTIME


def cmd_synth(args) -> int:
    out = Path(args.out or "synthetic")
    ensure_writable(out)
    seed = args.seed or 0
    datasets = []
    for i in range(args.cities):
        spec = SyntheticSpec(n_months=args.months, seed=seed + i, coupling=args.coupling,
                             city_id=f"synth{i + 1}")
        ds, truth = generate(spec)
        datasets.append(ds)
        active = [[PREDICTOR_NAMES[j] for j in a] for a in truth.active_predictors]
        print(f"{spec.city_id}: seed {spec.seed}, active water={active[0]} electricity={active[1]}")
    write_csv(datasets, out / "synthetic.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration file")
    common.add_argument("--seed", type=int, help="seed for folds and synthetic data")
    common.add_argument("--mode", choices=MODES + ("both",))
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="CSV of monthly climate and demand records")
    data.add_argument("--schema", help="column-mapping file")
    data.add_argument("--cities", help="comma-separated city ids (default: all)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--kind", choices=("multivariate", "univariate"), default="multivariate")
    model.add_argument("--n-iterations", type=int)
    model.add_argument("--learning-rate", type=float)
    model.add_argument("--max-depth", type=int)
    model.add_argument("--min-leaf", type=int, default=TuningGrid().min_leaf)

    parser = argparse.ArgumentParser(prog="nexusboost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nexusboost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common, data], help="validate input CSV").set_defaults(func=cmd_ingest)
    sub.add_parser("detect-seasonality", parents=[common, data],
                   help="periodograms and detected periods").set_defaults(func=cmd_detect)
    sub.add_parser("fit", parents=[common, data, model], help="fit and save models").set_defaults(func=cmd_fit)
    sub.add_parser("evaluate", parents=[common, data, model],
                   help="cross-validated scores").set_defaults(func=cmd_evaluate)
    run = sub.add_parser("run-all", parents=[common, data], help="full per-city study")
    run.add_argument("--workers", type=int, help="cities processed in parallel")
    run.set_defaults(func=cmd_run_all)
    synth = sub.add_parser("synth", parents=[common], help="write a synthetic multi-city CSV")
    synth.add_argument("--cities", type=int, default=1)
    synth.add_argument("--months", type=int, default=120)
    synth.add_argument("--coupling", type=float, default=0.5)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NexusError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
