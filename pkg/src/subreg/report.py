"""Report assembly: deterministic JSON, CSV rate curves, and shell figures.

A report is a plain dict with a fixed key set.  Serialization sorts keys and
rewrites non-finite floats as the strings "inf", "-inf", "nan", so two runs
of the same document with the same seed produce byte-identical text once the
`timings` key is dropped.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Iterable, Optional

import numpy as np

from . import REPORT_SCHEMA, __version__
from .bounds import BoundReport
from .certify import Certificate
from .rates import RateEstimate, SamplingSchedule

__all__ = [
    "build_report",
    "dumps",
    "loads_strict",
    "strip_timings",
    "result_payload",
    "iter_rate_estimates",
    "write_curves",
    "write_figures",
    "document_sha256",
]

_TOP_KEYS = {"schema", "artifact", "version", "document_sha256", "seed", "schedule", "tasks", "timings"}
_TASK_KEYS = {"id", "op", "status", "expected", "failures", "result"}


def document_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _jsonify(obj):
    """Recursive conversion to plain JSON types; non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def result_payload(result) -> dict:
    """Uniform JSON view of any per-task result object."""
    if hasattr(result, "to_json_dict"):
        return _jsonify(result.to_json_dict())
    if hasattr(result, "_asdict"):
        return _jsonify(result._asdict())
    if isinstance(result, dict):
        return _jsonify(result)
    if isinstance(result, (list, tuple)):
        return {"items": [result_payload(r) for r in result]}
    raise TypeError(f"cannot serialize result of type {type(result).__name__}")


def build_report(doc_text: str, schedule: SamplingSchedule, tasks: list, timings: Optional[dict] = None) -> dict:
    report = {
        "schema": REPORT_SCHEMA,
        "artifact": "subreg",
        "version": __version__,
        "document_sha256": document_sha256(doc_text),
        "seed": schedule.seed,
        "schedule": {
            "r0": schedule.r0,
            "decay": schedule.decay,
            "shells": schedule.shells,
            "points": schedule.points,
            "seed": schedule.seed,
        },
        "tasks": _jsonify(tasks),
    }
    if timings is not None:
        report["timings"] = _jsonify(timings)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings"}


def loads_strict(text: str) -> dict:
    """Parse a report, rejecting unknown fields and schema drift."""
    report = json.loads(text)
    if not isinstance(report, dict):
        raise ValueError("report must be a JSON object")
    unknown = set(report) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown report fields: {sorted(unknown)}")
    missing = (_TOP_KEYS - {"timings"}) - set(report)
    if missing:
        raise ValueError(f"missing report fields: {sorted(missing)}")
    if report["schema"] != REPORT_SCHEMA:
        raise ValueError(f"unsupported schema {report['schema']!r} (expected {REPORT_SCHEMA})")
    for entry in report["tasks"]:
        bad = set(entry) - _TASK_KEYS
        if bad:
            raise ValueError(f"unknown task fields: {sorted(bad)}")
    return report


def iter_rate_estimates(result) -> Iterable[tuple]:
    """(suffix, RateEstimate) pairs reachable from a task result."""
    if isinstance(result, RateEstimate):
        yield "", result
    elif isinstance(result, Certificate):
        yield "", result.rate
        if result.companion is not None:
            yield "companion", result.companion.rate
    elif isinstance(result, BoundReport):
        for key, cert in result.certificates.items():
            for suffix, est in iter_rate_estimates(cert):
                yield (key if not suffix else f"{key}-{suffix}"), est


def _curve_name(task_id: str, suffix: str) -> str:
    return task_id if not suffix else f"{task_id}-{suffix}"


def write_curves(curves: list, directory: str) -> list:
    """Write one CSV per rate estimate; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for task_id, suffix, est in curves:
        path = os.path.join(directory, _curve_name(task_id, suffix) + ".csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(est.csv_rows()) + "\n")
        paths.append(path)
    return paths


def write_figures(curves: list, directory: str) -> list:
    """Render one shell-profile figure per rate estimate (log-radius axis)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(directory, exist_ok=True)
    paths = []
    for task_id, suffix, est in curves:
        name = _curve_name(task_id, suffix)
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        radii = np.asarray(est.radii, dtype=float)
        ax.plot(radii, est.shell_min, marker="o", lw=1.0, label="shell min")
        ax.plot(radii, est.shell_max, marker=".", lw=0.7, alpha=0.6, label="shell max")
        ax.plot(radii, est.cumulative, lw=1.4, ls="--", label="cumulative min")
        ax.set_xscale("log")
        ax.invert_xaxis()
        ax.set_xlabel("shell radius")
        ax.set_ylabel("difference quotient")
        ax.set_title(f"{name} ({est.kind})", fontsize=10)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(directory, name + ".png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths
