"""CSV/JSON writers shared by the experiments.  Floats use 17 significant digits."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(v):
    return f"{float(v):.17g}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return float(fmt(x))
    return obj


def write_json(path, payload):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
    return Path(path)


def write_table(path, header, columns):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer))
                        and not isinstance(v, bool) else v for v in row])
    return Path(path)


def write_snapshot(field, stem):
    """``stem.csv`` with cell centres and values plus a ``stem.json`` sidecar."""
    stem = Path(stem)
    csv_path = write_table(stem.with_suffix(".csv"), ["x_center", "u"],
                           [field.grid.centers, field.values])
    json_path = write_json(stem.with_suffix(".json"), field.summary())
    return [csv_path, json_path]


def read_snapshot(stem):
    stem = Path(stem)
    data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(stem.with_suffix(".json").read_text())
    return data[:, 0], data[:, 1], meta
