"""Command line entry point: ``failbench run|aggregate|report|study or|study ci``.

Every subcommand writes into ``--out`` and embeds a reproducibility stamp in
its JSON manifest. Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import configparser
import importlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .aggregate import ImputationPolicy, aggregate_report, impute, rows_to_csv, rows_to_json
from .core import FailbenchError, TableError, table_from_csv, table_from_json, table_to_csv, table_to_json
from .engine import ConfigError, RunConfig, RuntimeSubset, run_grid
from .report import FailureAnnotation, emit_failure_summary, emit_threefold, stamp

log = logging.getLogger("failbench")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class UsageError(ConfigError):
    pass


# -- argument helpers ----------------------------------------------------------

def parse_runtime_subset(text: str) -> tuple[str, RuntimeSubset]:
    """``method=NAME,fraction=F,seed=S``."""
    try:
        parts = dict(p.split("=", 1) for p in text.split(","))
        return parts["method"], RuntimeSubset(float(parts["fraction"]), int(parts["seed"]))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad --runtime-subset {text!r}: expected "
                         "method=NAME,fraction=F,seed=S") from exc


def read_config(path: str | None, section: str) -> dict[str, str]:
    """Key-value pairs from ``[section]`` (plus ``[DEFAULT]``) of an INI file."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path}")
    if section in cp:
        return dict(cp[section])
    return dict(cp.defaults())


def _apply_config(args: argparse.Namespace, section: str, parser: argparse.ArgumentParser) -> None:
    """Config values fill in options that were left at their defaults."""
    conf = read_config(args.config, section)
    for key, raw in conf.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} in [{section}]")
        if getattr(args, dest) != parser.get_default(dest):
            continue
        default = parser.get_default(dest)
        if isinstance(default, bool):
            value: Any = raw.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(default, int):
            value = int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, dest, value)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _config_doc(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def _load_table(path: str):
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".csv"):
        return table_from_csv(text)
    return table_from_json(text)


def _import_callable(spec: str):
    mod, _, attr = spec.partition(":")
    if not attr:
        raise UsageError(f"method {spec!r} must be module:callable")
    try:
        obj = importlib.import_module(mod)
        for part in attr.split("."):
            obj = getattr(obj, part)
    except (ImportError, AttributeError) as exc:
        raise UsageError(f"cannot import {spec!r}: {exc}") from exc
    return obj


# -- subcommands -----------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    """Evaluate ``NAME=module:callable`` methods on datasets from a JSON file."""
    methods = {}
    for item in args.method:
        name, _, spec = item.partition("=")
        if not spec:
            raise UsageError(f"--method {item!r} must be NAME=module:callable")
        methods[name] = _import_callable(spec)
    if not methods:
        raise UsageError("no --method given")
    if not args.datasets:
        raise UsageError("--datasets is required")
    try:
        datasets = json.loads(Path(args.datasets).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TableError(f"cannot read datasets: {exc}") from exc
    subsets = dict(parse_runtime_subset(s) for s in args.runtime_subset)
    cfg = RunConfig(master_seed=args.seed,
                    budget=None if args.budget_ms is None else args.budget_ms / 1000.0,
                    workers=args.workers, runtime_subset=subsets)
    out = _out_dir(args)
    table = run_grid(methods, datasets, cfg, measure=args.measure, direction=args.direction,
                     log_path=out / "cells.ndjson")
    _write(out / "results.json", table_to_json(table))
    _write(out / "results.csv", table_to_csv(table))
    _write(out / "manifest.json", json.dumps(
        {"stamp": stamp(args.seed, _config_doc(args)), "methods": list(table.methods),
         "n_datasets": len(table.datasets), "metadata": table.metadata}, indent=1, default=str))
    return EXIT_OK


def _policy(text: str | None) -> ImputationPolicy | None:
    if not text:
        return None
    name, _, rest = text.partition(":")
    kv = dict(p.split("=", 1) for p in rest.split(",") if p)
    try:
        if name == "worst":
            return ImputationPolicy.worst_value(float(kv["worst"]))
        if name == "mean-of-method":
            return ImputationPolicy.mean_of_method()
        if name == "cross-method-mean":
            return ImputationPolicy.cross_method_mean()
        if name == "threshold":
            return ImputationPolicy.threshold_rule(float(kv["threshold"]), float(kv["worst"]))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad --impute {text!r}: {exc}") from exc
    raise UsageError(f"unknown imputation policy {name!r}")


def cmd_aggregate(args: argparse.Namespace) -> int:
    table = _load_table(args.table)
    policy = _policy(args.impute)
    provenance = None
    if policy is not None:
        table = impute(table, policy)
        provenance = policy.name
    rows = aggregate_report(table)
    out = _out_dir(args)
    _write(out / "aggregate.csv", rows_to_csv(rows, provenance))
    doc = json.loads(rows_to_json(rows, provenance))
    doc["stamp"] = stamp(table.metadata.get("master_seed", args.seed), _config_doc(args))
    _write(out / "aggregate.json", json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .figures import failure_boxplot

    table = _load_table(args.table)
    annotations = []
    if args.annotations:
        for a in json.loads(Path(args.annotations).read_text(encoding="utf-8")):
            annotations.append(FailureAnnotation(a["method"], tuple(a.get("datasets", ())),
                                                 a.get("narrative", ""),
                                                 tuple(a.get("auto_facts", ()))))
    cfg = _config_doc(args)
    rep = emit_threefold(table, master_seed=args.seed, config=cfg)
    summary = emit_failure_summary(table, annotations, challenging_threshold=args.challenging,
                                   master_seed=args.seed, config=cfg)
    out = _out_dir(args)
    _write(out / "threefold.csv", rep.to_csv())
    _write(out / "threefold.json", rep.to_json())
    _write(out / "failure_summary.json", json.dumps(summary.to_dict(), indent=1, default=str))
    failure_boxplot(table, out / "boxplot.svg")
    return EXIT_OK


def cmd_study_or(args: argparse.Namespace) -> int:
    from .figures import rank_panels
    from .study_or import (OrScenario, OrStudyConfig, QUICK_REPS, default_scenarios,
                           run_or_study)
    from .study_or.report import or_study_outputs

    reps = QUICK_REPS if args.quick else args.reps
    if args.scenarios:
        cp = configparser.ConfigParser()
        if not cp.read(args.scenarios, encoding="utf-8"):
            raise UsageError(f"cannot read scenarios file {args.scenarios}")
        scenarios = [OrScenario(int(s.get("n_obs", "50")), float(s["true_or"]), float(s["p_x"]),
                                float(s.get("p0", args.p0)), reps)
                     for name, s in cp.items() if name != "DEFAULT"]
    else:
        scenarios = default_scenarios(args.p0, reps)
    cfg = OrStudyConfig(scenarios=scenarios, seed=args.seed, workers=args.workers,
                        signed_ranks=args.signed_ranks)
    t0 = time.perf_counter()
    result = run_or_study(cfg)
    log.info("OR study finished in %.1f s", time.perf_counter() - t0)
    out = _out_dir(args)
    files = or_study_outputs(result, out, stamp(args.seed, _config_doc(args)))
    labels = [s.scenario.label for s in result.scenarios]
    rank_panels(labels, [s.ranks_single for s in result.scenarios],
                [s.ranks_all for s in result.scenarios],
                [s.ranks_pipelines for s in result.scenarios], out)
    log.info("wrote %d files to %s", len(files) + 2, out)
    return EXIT_OK


def cmd_study_ci(args: argparse.Namespace) -> int:
    from .figures import coverage_bars
    from .study_ci import HANDLING_LABELS, HANDLINGS, CiDgm, CiStudyConfig, run_ci_study

    cfg = CiStudyConfig(dgm=CiDgm(n_total=args.n, beta=args.beta), n_iter=args.iters,
                        min_impurity_decrease=args.tau, seed=args.seed, workers=args.workers)
    result = run_ci_study(cfg)
    out = _out_dir(args)
    _write(out / "table5.csv", "\n".join(",".join(r) for r in result.table5_rows()) + "\n")
    with open(out / "iterations.ndjson", "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(rec.to_dict()) + "\n")
    manifest = {"stamp": stamp(args.seed, _config_doc(args)),
                "n_failure_proportion": result.n_failure_proportion,
                "c_N": 0.0, "c_C": cfg.spec_c.c, "coverage": result.coverage,
                "n_iter": cfg.n_iter}
    _write(out / "manifest.json", json.dumps(manifest, indent=1))
    coverage_bars(result.coverage, HANDLINGS, HANDLING_LABELS, out / "coverage.svg", cfg.level)
    log.info("N failure proportion %.3f", result.n_failure_proportion)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, seed: int = 0) -> None:
    p.add_argument("--config", help="INI file; keys mirror the long options")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", default="failbench_out")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="failbench",
                                     description="Failure-aware comparison studies.")
    parser.add_argument("--version", action="version", version=f"failbench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate methods on datasets")
    _common(p)
    p.add_argument("--method", action="append", default=[], metavar="NAME=module:callable")
    p.add_argument("--datasets", help="JSON object id -> dataset, or a JSON list")
    p.add_argument("--budget-ms", type=float, default=None)
    p.add_argument("--runtime-subset", action="append", default=[],
                   metavar="method=NAME,fraction=F,seed=S")
    p.add_argument("--measure", default="value")
    p.add_argument("--direction", default="HigherBetter")
    p.set_defaults(func=cmd_run, section="run")

    p = sub.add_parser("aggregate", help="aggregate a result table under every basis")
    _common(p)
    p.add_argument("--table", required=True, help="results .json or .csv")
    p.add_argument("--impute", help="worst:worst=W | mean-of-method | cross-method-mean | "
                                    "threshold:threshold=T,worst=W")
    p.set_defaults(func=cmd_aggregate, section="aggregate")

    p = sub.add_parser("report", help="three-fold report, failure summary, boxplot")
    _common(p)
    p.add_argument("--table", required=True)
    p.add_argument("--annotations", help="JSON list of failure annotations")
    p.add_argument("--challenging", type=float, default=0.5)
    p.set_defaults(func=cmd_report, section="report")

    p = sub.add_parser("study", help="bundled studies")
    studies = p.add_subparsers(dest="study", required=True)

    q = studies.add_parser("or", help="odds-ratio estimation with sampling zeros")
    _common(q, seed=20240101)
    q.add_argument("--scenarios", help="INI file, one section per scenario")
    q.add_argument("--p0", type=float, default=0.5)
    q.add_argument("--reps", type=int, default=100_000)
    q.add_argument("--quick", action="store_true", help="10 000 repetitions per scenario")
    q.add_argument("--signed-ranks", action="store_true")
    q.set_defaults(func=cmd_study_or, section="study or")

    q = studies.add_parser("ci", help="coverage of naive vs corrected AUC intervals")
    _common(q, seed=20240101)
    q.add_argument("--iters", type=int, default=1000)
    q.add_argument("--beta", type=float, default=0.3)
    q.add_argument("--tau", type=float, default=0.05)
    q.add_argument("--n", type=int, default=500)
    q.set_defaults(func=cmd_study_ci, section="study ci")
    return parser


def _subparser(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.ArgumentParser:
    actions = {a.dest: a for a in parser._actions if isinstance(a, argparse._SubParsersAction)}
    sp = actions["command"].choices[args.command]
    if args.command == "study":
        sp = {a.dest: a for a in sp._actions
              if isinstance(a, argparse._SubParsersAction)}["study"].choices[args.study]
    return sp


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args, args.section, _subparser(parser, args))
        return args.func(args)
    except ConfigError as exc:
        print(f"failbench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FailbenchError, OSError, ValueError, KeyError) as exc:
        print(f"failbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
