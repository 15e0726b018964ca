"""Run report documents: JSON assembly, aggregates, schema validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict

import numpy as np

from .pipeline import PipelineConfig, RunResult

SCHEMA_VERSION = 1

_AGGREGATED = ("n", "k", "comp_rate", "gamma", "lhs", "rhs_bound", "speedup")


def item_record(run: RunResult) -> dict:
    fid = run.fidelity
    return {
        "n": run.n,
        "k": run.k,
        "comp_rate": fid.comp_rate,
        "gamma": fid.gamma,
        "lhs": fid.lhs,
        "rhs_bound": fid.rhs_bound,
        "bound_holds": fid.bound_holds,
        "flops_full": fid.flops_full,
        "flops_merged": fid.flops_merged,
        "speedup": (run.n / run.k) ** 2,
        "timings_ms": {k: float(v) for k, v in run.timings_ms.items()},
    }


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def build_report(cfg: PipelineConfig, runs: list) -> dict:
    """ReportDocument for a list of RunResults (see docs/report.schema.json)."""
    items = [item_record(r) for r in runs]
    aggregate = {key: _mean_std([it[key] for it in items]) for key in _AGGREGATED}
    return {
        "schema_version": SCHEMA_VERSION,
        "config": asdict(cfg),
        "items": items,
        "aggregate": aggregate,
    }


def write_report(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def strip_timings(doc: dict) -> dict:
    """Copy of a report with the hardware-dependent fields removed."""
    out = json.loads(json.dumps(doc))
    for item in out.get("items", []):
        item.pop("timings_ms", None)
    return out


def validate_report(doc: dict) -> None:
    """Structural validation mirroring the shipped JSON schema."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"schema_version must be {SCHEMA_VERSION}")
    if not isinstance(doc.get("config"), dict):
        raise ValueError("config must be an object")
    items = doc.get("items")
    if not isinstance(items, list) or not items:
        raise ValueError("items must be a nonempty list")
    for item in items:
        for key in ("n", "k", "comp_rate", "gamma", "lhs", "rhs_bound", "flops_full", "flops_merged"):
            value = item.get(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise ValueError(f"item field {key} must be a finite number")
        if not isinstance(item.get("bound_holds"), bool):
            raise ValueError("bound_holds must be a boolean")
        if not isinstance(item.get("timings_ms"), dict):
            raise ValueError("timings_ms must be an object")
    if not isinstance(doc.get("aggregate"), dict):
        raise ValueError("aggregate must be an object")
