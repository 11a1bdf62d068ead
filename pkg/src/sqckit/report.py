"""Deterministic JSON reports shared by the CLI and the corpus suite."""
from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .certify import NON_PROOF
from .kernels import BACKEND

TOOL = "sqckit"


def jsonable(obj):
    """Plain JSON types: ``+inf`` as ``"inf"``, ``-inf`` as ``"-inf"``, NaN as ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def header(command: str, config: dict, timestamp: bool = True) -> dict:
    out = {"tool": TOOL, "version": __version__, "command": command, "kernel_backend": BACKEND,
           "config": jsonable(config)}
    if timestamp:
        out["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return out


def build(command: str, config: dict, result: dict, timestamp: bool = True,
          no_violation: bool = False) -> dict:
    rep = header(command, config, timestamp)
    rep["result"] = jsonable(result)
    if no_violation:
        rep["disclaimer"] = NON_PROOF
    return rep


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))


def to_csv(header_row, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header_row)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()
