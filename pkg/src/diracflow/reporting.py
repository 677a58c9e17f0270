"""Report serialization: canonical JSON plus CSV side tables.

Reports are deterministic given config and seed: keys are sorted, floats
go through repr, and the only run-dependent field is generated_at (which
consumers are told to ignore when comparing runs).
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path


def make_report(kind: str, config_dict: dict, results: dict, criteria: list) -> dict:
    return {
        "experiment": kind,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "config": config_dict,
        "results": results,
        "criteria": criteria,
        "pass": all(c.get("passed", False) for c in criteria) if criteria else True,
    }


def criterion(name: str, value, oracle=None, tolerance=None, passed=None) -> dict:
    """One numeric claim: its value, the oracle it is judged against, the
    tolerance of the comparison, and the verdict."""
    entry = {"name": name, "value": value, "oracle": oracle, "tolerance": tolerance}
    if passed is None and oracle is not None and tolerance is not None:
        try:
            passed = abs(float(value) - float(oracle)) <= float(tolerance)
        except (TypeError, ValueError):
            passed = value == oracle
    entry["passed"] = bool(passed)
    return entry


def _sanitize(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_report(report: dict, out_dir, name: str = "report.json") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(_sanitize(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(rows, header, out_dir, name: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def write_error(exc: Exception, out_dir, config_dict=None) -> Path:
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "config": config_dict,
    }
    return write_report(payload, out_dir, name="error.json")


def snapshot_csv_rows(es):
    """Eigenvalue table of one snapshot, CSV-ready."""
    for k, lam in enumerate(es.eigenvalues):
        lam = complex(lam)
        yield (k, lam.real, lam.imag)
