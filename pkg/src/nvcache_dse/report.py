"""Serialization of study reports: JSON, flat CSV and per-figure plot data."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, is_dataclass

from .analysis import METRICS, NormalizedReport


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {(k.value if isinstance(k, enum.Enum) else str(k)): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if is_dataclass(obj):
        return _clean(asdict(obj))
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_to_dict(report: NormalizedReport, provenance: dict | None = None) -> dict:
    rows = []
    ratios = {(r.group, r.workload, r.tech): r for r in report.rows}
    groups = report.groups()
    per_group = len(report.results) // max(len(groups), 1)
    for i, res in enumerate(report.results):
        group = groups[i // per_group] if per_group else None
        ratio = ratios[(group, res.workload, res.tech)]
        rows.append({
            "group": group,
            "workload": res.workload,
            "tech": res.tech.value,
            "capacity_mb": res.capacity_mb,
            "dynamic_j": res.energy.dynamic_j,
            "leakage_j": res.energy.leakage_j,
            "dram_j": res.energy.dram_j,
            "total_j": res.energy.total_j,
            "delay_s": res.delay_s,
            "edp_js": res.edp_js,
            "dram_included": res.dram_included,
            "dram_transactions": res.dram_transactions,
            "leakage_duration_s": res.leakage_duration_s,
            "ratio": {m: getattr(ratio, m) for m in METRICS},
        })
    return {
        "study": report.study,
        "baseline": report.baseline.value,
        "parameters": report.parameters,
        "provenance": provenance or {},
        "rows": rows,
        "summary": [asdict(s) for s in report.summary],
        "extras": report.extras,
    }


def report_to_json(report: NormalizedReport, provenance: dict | None = None) -> str:
    return dumps(report_to_dict(report, provenance))


CSV_HEADER = ("group", "workload", "tech", "capacity_mb", "dynamic_j", "leakage_j", "dram_j",
              "total_j", "delay_s", "edp_js", "dram_included") + tuple(f"{m}_ratio" for m in METRICS)


def _cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def report_to_csv(report: NormalizedReport) -> str:
    doc = report_to_dict(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in doc["rows"]:
        w.writerow([_cell(r[k]) for k in CSV_HEADER[:11]] +
                   [_cell(r["ratio"][m]) for m in METRICS])
    return buf.getvalue()


def plot_data(report: NormalizedReport, metric: str) -> str:
    """x column plus one column per technology.

    Single-group studies put workloads on x; multi-group studies (batch size,
    capacity) put the group on x and use the geometric mean across workloads.
    """
    techs = list(dict.fromkeys(r.tech for r in report.rows))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    groups = report.groups()
    if len(groups) == 1:
        w.writerow(["workload", *(t.value for t in techs)])
        table = {(r.workload, r.tech): getattr(r, metric) for r in report.rows}
        for name in dict.fromkeys(r.workload for r in report.rows):
            w.writerow([name, *(_cell(table[(name, t)]) for t in techs)])
        w.writerow(["geomean", *(_cell(report.mean(t, metric)) for t in techs)])
    else:
        w.writerow(["x", *(t.value for t in techs)])
        for g in groups:
            w.writerow([f"{g:g}", *(_cell(report.mean(t, metric, g)) for t in techs)])
    return buf.getvalue()


def ppa_plot_data(report: NormalizedReport, field: str) -> str:
    """Capacity-scaling plot data for one PPA field from a scalability report."""
    grid = report.extras["ppa_grid_mb"]
    table = report.extras["ppa"]
    techs = list(table)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["capacity_mb", *techs])
    for i, c in enumerate(grid):
        w.writerow([f"{c:g}", *(repr(table[t][field][i]) for t in techs)])
    return buf.getvalue()
