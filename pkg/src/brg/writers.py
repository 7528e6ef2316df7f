"""Result emission: long-format CSV tables and JSON summaries.

File names follow ``E<k>_<table>.csv`` plus ``E<k>_summary.json``.  Every
write goes to a temporary file in the target directory followed by an
atomic rename, so a crash never leaves a partial artifact.  Floats are
rendered with shortest round-trip ``repr``; reruns with identical inputs
therefore produce byte-identical files.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .experiments import ExperimentResult, Table
from .reservoir import ReservoirParams, _freeze

__all__ = ["write_results", "save_reservoir", "load_reservoir", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(path: Path, table: Table) -> None:
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format_cell(v) for v in row])

    _atomic_write(path, emit)


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_results(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write all tables and the summary for one experiment; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    manifest: list[Path] = []
    for name, table in result.tables.items():
        path = out / f"{result.experiment_id}_{name}.csv"
        _write_table(path, table)
        manifest.append(path)
    payload = {
        "experiment": result.experiment_id,
        "title": result.title,
        "schema_version": SCHEMA_VERSION,
        "config": _jsonable(dataclasses.asdict(result.config)),
        "tables": {name: list(table.columns) for name, table in result.tables.items()},
        "summary": _jsonable(result.summary),
    }
    summary_path = out / f"{result.experiment_id}_summary.json"
    _atomic_write(summary_path, lambda fh: fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n"))
    manifest.append(summary_path)
    return manifest


def save_reservoir(params: ReservoirParams, path: str | Path) -> None:
    """Versioned reservoir snapshot (binary, reproducible round-trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(
            fh,
            schema_version=np.int64(SCHEMA_VERSION),
            w=params.w,
            w_in=params.w_in,
            bias=params.bias,
            sigma_xi=np.float64(params.sigma_xi),
            spectral_radius_target=np.float64(params.spectral_radius_target),
        )


def load_reservoir(path: str | Path) -> ReservoirParams:
    with np.load(path) as data:
        version = int(data["schema_version"])
        if version != SCHEMA_VERSION:
            raise ValueError(f"snapshot schema version {version} not supported (expected {SCHEMA_VERSION})")
        return ReservoirParams(
            w=_freeze(data["w"]),
            w_in=_freeze(data["w_in"]),
            bias=_freeze(data["bias"]),
            sigma_xi=float(data["sigma_xi"]),
            spectral_radius_target=float(data["spectral_radius_target"]),
        )
