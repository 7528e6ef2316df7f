"""Command line interface: run experiments, validate configs, list the catalog."""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .config import (
    EXPERIMENT_DESCRIPTIONS,
    EXPERIMENT_IDS,
    EXPERIMENT_TITLES,
    ConfigError,
    apply_overrides,
    default_config,
    load_overrides,
    validate_config,
)
from .experiments import run_experiment
from .writers import write_results

__all__ = ["main", "build_parser"]

ENV_MASTER_SEED = "BRG_SEED"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brg", description="Body-reservoir governance experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment or the whole catalog")
    run.add_argument("experiment", help="experiment id (E1..E10) or 'all'")
    run.add_argument("--config", help="YAML override file")
    run.add_argument("--seeds", type=int, help="number of seeds (replaces the seed list with 0..N-1)")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    run.add_argument("--deterministic", action="store_true", help="disable intrinsic reservoir noise")
    run.add_argument(
        "--master-seed",
        type=int,
        default=None,
        help=f"master seed (wins over the {ENV_MASTER_SEED} environment variable)",
    )

    check = sub.add_parser("validate-config", help="validate a YAML override file against the catalog")
    check.add_argument("config_file")

    sub.add_parser("list", help="print the experiment catalog")
    return parser


def _resolve_master_seed(cli_value: int | None) -> int | None:
    if cli_value is not None:
        return cli_value
    env = os.environ.get(ENV_MASTER_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{ENV_MASTER_SEED} must be an integer, got {env!r}") from exc
    return None


def _configure(experiment_id: str, args) -> "ExperimentConfig":
    import dataclasses

    config = default_config(experiment_id)
    if args.config:
        config = apply_overrides(config, load_overrides(args.config))
    updates = {}
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError(f"--seeds must be positive, got {args.seeds}")
        updates["seeds"] = tuple(range(args.seeds))
    master = _resolve_master_seed(args.master_seed)
    if master is not None:
        updates["master_seed"] = master
    if args.deterministic:
        updates["deterministic"] = True
    if updates:
        config = dataclasses.replace(config, **updates)
    validate_config(config)
    return config


def _cmd_run(args) -> int:
    if args.experiment.lower() == "all":
        ids = list(EXPERIMENT_IDS)
    else:
        eid = args.experiment.upper()
        if eid not in EXPERIMENT_IDS:
            print(f"error: unknown experiment id {args.experiment!r} (expected E1..E10 or 'all')", file=sys.stderr)
            return 2
        ids = [eid]
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out_dir}: {exc}", file=sys.stderr)
        return 1
    if not os.access(out_dir, os.W_OK):
        print(f"error: output directory {out_dir} is not writable", file=sys.stderr)
        return 1
    for eid in ids:
        try:
            config = _configure(eid, args)
        except (ConfigError, OSError) as exc:
            print(f"error: {eid}: {exc}", file=sys.stderr)
            return 2
        start = time.perf_counter()
        result = run_experiment(config, jobs=args.jobs)
        manifest = write_results(result, out_dir)
        elapsed = time.perf_counter() - start
        files = ", ".join(p.name for p in manifest)
        print(f"{eid}: {len(result.grid.rows)} rows in {elapsed:.1f}s -> {files}")
        if result.failures:
            for message in result.failures:
                print(f"{eid}: cell failure: {message}", file=sys.stderr)
    return 0


def _cmd_validate(args) -> int:
    try:
        overrides = load_overrides(args.config_file)
        for eid in EXPERIMENT_IDS:
            validate_config(apply_overrides(default_config(eid), overrides))
    except (ConfigError, ValueError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    print(f"{args.config_file}: valid")
    return 0


def _cmd_list() -> int:
    for eid in EXPERIMENT_IDS:
        print(f"{eid:4s} {EXPERIMENT_TITLES[eid]}")
        print(f"     {EXPERIMENT_DESCRIPTIONS[eid]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate-config":
            return _cmd_validate(args)
        return _cmd_list()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
