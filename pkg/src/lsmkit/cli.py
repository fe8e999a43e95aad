"""Command-line entry point: ``lsmkit <verb> --config run.yaml [overrides]``.

Exit status is 0 on success, 1 when the configuration has diagnostics and 2
when a stage fails (the message names the stage).
"""
from __future__ import annotations

import argparse
import os
import sys

import yaml

from .pipeline import METHODS, MODEL_NAMES, STAGES, PipelineError, run_pipeline, validate_config
from .synthetic import synthetic_region, write_region


def _parser():
    p = argparse.ArgumentParser(prog="lsmkit", description="Landslide susceptibility pipeline.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in STAGES + ("run",):
        s = sub.add_parser(verb, help="run every stage" if verb == "run" else f"run the {verb} stage")
        s.add_argument("--config", required=True, help="YAML run configuration")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--out", help="override the output directory")
        s.add_argument("--factor-set", action="append", dest="factor_sets", metavar="NAME",
                       help="restrict to a factor set (repeatable)")
        s.add_argument("--model", action="append", dest="models", metavar="NAME",
                       help=f"restrict to a model (repeatable; one of {', '.join(MODEL_NAMES)})")
        s.add_argument("--method", action="append", dest="methods", metavar="NAME",
                       help=f"restrict to an explanation method (repeatable; one of {', '.join(METHODS)})")
    v = sub.add_parser("validate", help="check a configuration and list every problem")
    v.add_argument("--config", required=True)
    g = sub.add_parser("synth", help="write a synthetic study region and a matching configuration")
    g.add_argument("--out", required=True, help="directory to create")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nrows", type=int, default=120)
    g.add_argument("--ncols", type=int, default=160)
    return p


def _synth(args):
    rasters, mask, table = synthetic_region(args.nrows, args.ncols, args.seed)
    write_region(rasters, mask, table, args.out)
    cfg = {"inputs": {"samples": "samples.csv", "rasters": "rasters", "landslides": "landslides.asc"},
           "seed": args.seed, "output": "runs"}
    path = os.path.join(args.out, "config.yaml")
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)
    print(f"wrote {table.n} samples, {len(rasters)} rasters and {path}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verb == "synth":
        return _synth(args)
    if not os.path.isfile(args.config):
        print(f"error [validate]: cannot read configuration {args.config}", file=sys.stderr)
        return 2
    if args.verb == "validate":
        diags = validate_config(args.config)
        for d in diags:
            print(d)
        if not diags:
            print("configuration is valid")
        return 1 if diags else 0
    stages = STAGES if args.verb == "run" else (args.verb,)
    try:
        result = run_pipeline(args.config, stages=stages, seed=args.seed, out=args.out,
                              factor_sets=args.factor_sets, models=args.models, methods=args.methods)
    except PipelineError as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 2
    for model, fset, m, auc in result.metrics:
        print(f"{fset:>16} {model:>5}  accuracy {m.accuracy:.4f}  AUC {auc:.4f}")
    print(result.run_dir)
    return 0
