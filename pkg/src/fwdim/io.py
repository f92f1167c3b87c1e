"""
CSV and JSON artefacts.

Every CSV starts with a ``# schema=<name>/<version>`` comment line followed by
the column header. Floats are written with ``repr`` so files round-trip
exactly and are byte-identical across runs.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from fwdim.errors import ValidationError
from fwdim.oracle import ImSurface

SCHEMAS = {
    "surface": ("fwdim.surface/1", ("path", "time", "im")),
    "profile": ("fwdim.profile/1", ("time", "im_mean", "im_stderr")),
    "comparison": ("fwdim.comparison/1", ("time", "im_oracle", "im_approx", "rel_err")),
    "training_log": ("fwdim.training_log/1", ("epoch", "mse")),
}


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def write_csv(path: Path, kind: str, rows: Iterable[Sequence]) -> None:
    schema, header = SCHEMAS[kind]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: Path, kind: str) -> dict[str, np.ndarray]:
    """Read a CSV written by :func:`write_csv`, checking schema and header."""
    schema, header = SCHEMAS[kind]
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != f"# schema={schema}":
            raise ValidationError(f"{path}: expected schema {schema!r}, found {first!r}")
        reader = csv.reader(fh)
        got = tuple(next(reader, ()))
        if got != header:
            raise ValidationError(f"{path}: expected columns {header}, found {got}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def write_surface(path: Path, surface: ImSurface) -> None:
    n_paths, n_obs = surface.im.shape
    rows = ((i, surface.times[k], surface.im[i, k]) for i in range(n_paths) for k in range(n_obs))
    write_csv(path, "surface", rows)


def write_profile(path: Path, times, mean, stderr) -> None:
    write_csv(path, "profile", zip(times, mean, stderr))


def write_surface_profile(path: Path, surface: ImSurface) -> None:
    write_profile(path, surface.times, surface.profile, surface.stderr)


def read_profile(path: Path) -> dict[str, np.ndarray]:
    return read_csv(path, "profile")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path: Path, obj) -> None:
    """Sorted-key JSON; non-finite floats become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text + "\n")
