"""Command-line entry point: ``ppm-qrf <command> [options]``.

Settings come from a JSON config file (``--config`` or ``$PPM_QRF_CONFIG``)
and flags override individual fields.  Exit codes: 0 success, 1 a stage
failed at runtime, 2 invalid usage or configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .pipeline import (
    CONFIG_ENV, ConfigError, PipelineConfig, Run, StageFailed, load_config, pipeline_stages, run_stages,
)
from .qrf import GRID_AXES, load_grid

COMMANDS = {
    "generate": "write a synthetic event log, its ground truth and schema",
    "split": "split a log chronologically and encode features",
    "tune": "grid-search hyperparameters on the validation split",
    "train": "fit the quantile regression forest",
    "predict": "predict intervals for validation and test instances",
    "evaluate": "compute overall, per-activity and per-profile metrics",
    "profile": "calibrate uncertainty-profile thresholds and assign test instances",
    "explain": "KernelSHAP explanations for a sample of test instances",
    "report": "render plots with CSV twins and a summary report",
    "run": "run the whole pipeline",
}


def _ratios(text: str) -> list[float]:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three ratios, e.g. 0.85,0.075,0.075")
    return [float(p) for p in parts]


def _options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("paths")
    g.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    g.add_argument("--out", help="output directory (must exist)")
    g.add_argument("--log", help="event-log CSV")
    g.add_argument("--schema", help="attribute schema JSON (inferred from the log when omitted)")
    g.add_argument("--model", help="model file (default: OUT/model/model.json)")
    g.add_argument("--truth", help="ground-truth JSON of a synthetic log")
    g = p.add_argument_group("generator")
    g.add_argument("--cases", type=int)
    g.add_argument("--activities", type=int)
    g = p.add_argument_group("model")
    g.add_argument("--ratios", type=_ratios, help="train,validation,test case fractions")
    g.add_argument("--level", type=float, help="nominal interval level (default 0.90)")
    g.add_argument("--tune", action=argparse.BooleanOptionalAction, help="grid-search before training")
    g.add_argument("--grid", help="JSON file with mtry/trees/min_n value lists")
    g.add_argument("--mtry", type=int, help="features tried per split (default: floor(sqrt(p)))")
    g.add_argument("--trees", type=int)
    g.add_argument("--min-n", dest="min_n", type=int)
    g.add_argument("--weight-basis", dest="weight_basis", choices=("full", "bootstrap"))
    g.add_argument("--suffixes", dest="use_suffixes", action=argparse.BooleanOptionalAction,
                   help="expand training traces into suffixes")
    g = p.add_argument_group("profiles")
    g.add_argument("--p-low", dest="p_low", type=float)
    g.add_argument("--p-high", dest="p_high", type=float)
    g.add_argument("--epsilon", type=float, help="points at or below this have no rWidth")
    g = p.add_argument_group("explanations")
    g.add_argument("--background", type=int, help="background rows sampled from training data")
    g.add_argument("--budget", type=int, help="coalitions per instance")
    g.add_argument("--targets", help="comma-separated subset of point,lower,upper,width")
    g.add_argument("--explain-sample", dest="explain_sample", type=int, help="test instances to explain")
    g = p.add_argument_group("execution")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="thread cap; never changes results")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppm-qrf", description="Event processing time intervals with "
                                     "quantile regression forests.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _options()
    for name, help_text in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "predict":
            sp.add_argument("--input", help="additional event-log CSV to score")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    opts = vars(args).copy()
    opts.pop("command")
    opts.pop("input", None)
    doc = load_config(opts.pop("config", None))
    grid_path = opts.pop("grid", None)
    if grid_path is not None:
        if not os.path.isfile(grid_path):
            raise ConfigError(f"grid file not found: {grid_path}")
        with open(grid_path, encoding="utf-8") as fh:
            try:
                opts["grid"] = load_grid(fh)
            except (ValueError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad grid file {grid_path}: {exc}") from None
    elif isinstance(doc.get("grid"), dict) and set(doc["grid"]) - set(GRID_AXES):
        raise ConfigError(f"unknown grid axes in config: {sorted(set(doc['grid']) - set(GRID_AXES))}")
    doc.update(opts)
    try:
        cfg = PipelineConfig.from_mapping(doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    for name in ("log", "schema", "truth"):
        path = getattr(cfg, name)
        if path is not None and not os.path.isfile(path):
            raise ConfigError(f"{name} file not found: {path}")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if getattr(args, "input", None) and not os.path.isfile(args.input):
            raise ConfigError(f"input file not found: {args.input}")
        run = Run(cfg, input_log=getattr(args, "input", None))
        stages = pipeline_stages(cfg) if args.command == "run" else [args.command]
        run_stages(run, stages)
    except ConfigError as exc:
        print(f"ppm-qrf: error: {exc}", file=sys.stderr)
        return 2
    except StageFailed as exc:
        print(f"ppm-qrf: {exc}", file=sys.stderr)
        return 1
    print(f"ppm-qrf: {args.command} complete ({run.stamp_text}) -> {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
