"""Plot-ready CSV and JSON writers. Output bytes depend only on the data."""

import csv
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_plain(data), f, sort_keys=True, indent=2)
        f.write("\n")
    logger.debug("wrote %s", path)
    return path


def write_rows(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    logger.debug("wrote %s", path)
    return path


def write_space_time_csv(path: Path, field, stride: int = 1) -> Path:
    """Rows t,x,value for every stride-th slice (the last slice always included)."""
    steps = field.tgrid.steps
    ks = list(range(0, steps + 1, stride))
    if ks[-1] != steps:
        ks.append(steps)
    xs = field.grid.nodes

    def rows():
        for k in ks:
            t = field.tgrid.time(k)
            for x, value in zip(xs, field.values[k]):
                yield t, x, value

    return write_rows(path, ["t", "x", "value"], rows())


def write_value_field_csv(path: Path, field, t: float = 0.0) -> Path:
    return write_rows(path, ["t", "x", "value"], ((t, x, v) for x, v in zip(field.grid.nodes, field.values)))


def write_trajectory_csv(path: Path, trajectory) -> Path:
    return write_rows(path, ["t", "x", "u", "p"],
                      zip(trajectory.times, trajectory.x, trajectory.u, trajectory.p))


def write_field_manifest(path: Path, field, model) -> Path:
    """Sidecar manifest next to a field CSV: grid, dt, model echo and scheme flags."""
    path = Path(path)
    manifest = {
        "grid": {"n": field.grid.n, "length": field.grid.length},
        "dt": field.tgrid.dt,
        "model": model.describe(),
        "scheme": field.scheme(),
        "warnings": [w["event_type"] for w in field.warnings],
    }
    return write_json(path.with_name(path.stem + ".manifest.json"), manifest)
