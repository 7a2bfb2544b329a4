"""CSV and JSON emission. Numbers carry 10 significant digits; no timestamps."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from relayfield.models import (
    OutageReport,
    RateRow,
    RegionMap,
    SweepResult,
    ValidationReport,
)

OUTAGE_FIELDS = ["protocol", "kind", "value", "stderr"]
SWEEP_FIELDS = ["lambda", "protocol", "kind", "value", "stderr"]
RATE_FIELDS = ["k", "protocol", "t_max", "r_max"]
REGION_FIELDS = ["x", "y", "winner", "p_df", "p_cf_upper", "p_direct"]
VALIDATION_FIELDS = ["check", "passed", "detail"]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.10g}"
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def write_csv(path: Path, fields: Sequence[str], rows: Iterable[dict[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_value(row.get(k)) for k in fields})
    return path


def _finite(obj: Any) -> Any:
    # JSON has no inf; emit it as a string like the CSV does.
    if isinstance(obj, float) and not math.isfinite(obj):
        return format_value(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [_finite(v) for v in obj]
    return obj


def dumps(data: Any) -> str:
    return json.dumps(_finite(data), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Row builders
# ---------------------------------------------------------------------------


def outage_rows(report: OutageReport) -> list[dict[str, Any]]:
    return [
        {"protocol": e.protocol, "kind": e.kind, "value": e.value, "stderr": e.stderr}
        for e in report.estimates
    ]


def sweep_rows(sweep: SweepResult) -> list[dict[str, Any]]:
    return [
        {
            "lambda": point.value,
            "protocol": e.protocol,
            "kind": e.kind,
            "value": e.value,
            "stderr": e.stderr,
        }
        for point in sweep.points
        for e in point.estimates
    ]


def sweep_traces(sweep: SweepResult) -> dict[str, Any]:
    return {
        "axis": sweep.axis,
        "grid": sweep.grid,
        "traces": [
            {
                "lambda": p.value,
                "w_c": p.w_c,
                "wc_method": p.wc_method,
                "rho_df": p.rho_df,
                "rho_cutset": p.rho_cutset,
            }
            for p in sweep.points
        ],
    }


def rate_rows(rows: Sequence[RateRow]) -> list[dict[str, Any]]:
    return [
        {"k": r.k, "protocol": r.protocol, "t_max": r.t_max, "r_max": r.r_max} for r in rows
    ]


def region_rows(region: RegionMap) -> list[dict[str, Any]]:
    return [
        {
            "x": c.x,
            "y": c.y,
            "winner": c.winner.value if c.winner else "invalid",
            "p_df": c.p_df,
            "p_cf_upper": c.p_cf_upper,
            "p_direct": c.p_direct,
        }
        for c in region.cells
    ]


def validation_rows(report: ValidationReport) -> list[dict[str, Any]]:
    return [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks]


def render_report_text(report: OutageReport) -> str:
    """Aligned plain-text table for the terminal."""
    lines = [f"{'protocol':<8} {'kind':<15} {'value':>16} {'stderr':>12}"]
    for e in report.estimates:
        stderr = format_value(e.stderr) if e.stderr is not None else "-"
        lines.append(
            f"{e.protocol.value:<8} {e.kind.value:<15} {format_value(e.value):>16} {stderr:>12}"
        )
    lines.append(f"W_c = {format_value(report.w_c)} ({report.wc_method})")
    return "\n".join(lines)
