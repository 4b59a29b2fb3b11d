"""Baseline-relative sensitivity tables and heatmap emission (CSV/JSON/SVG)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metrics import MetricReport

ABS_DIFF_FLAG = "abs-diff fallback"

# fixed diverging ramp endpoints for z in [-3, +3]
_RAMP_LO = (33, 102, 172)    # deep blue
_RAMP_MID = (247, 247, 247)  # near-white
_RAMP_HI = (178, 24, 43)     # deep red
RAMP_MID_COLOR = "#f7f7f7"


def _round9(v: float) -> float:
    return float(format(float(v), ".9g"))


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def percent_change(baseline: float, value: float) -> tuple[float, str | None]:
    """Signed percent change from baseline. When |baseline| <= 1e-9 the
    relative form is meaningless, so the absolute difference x100 is returned
    with the "abs-diff fallback" flag."""
    if not (np.isfinite(baseline) and np.isfinite(value)):
        raise ValueError(f"non-finite input: baseline={baseline}, value={value}")
    if abs(baseline) > 1e-9:
        return 100.0 * (value - baseline) / abs(baseline), None
    return 100.0 * (value - baseline), ABS_DIFF_FLAG


def zscore_row(values) -> np.ndarray:
    """Standardize with the population std; (near-)constant rows map to zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("zscore_row requires at least one value")
    std = v.std()
    if std < 1e-12:
        return np.zeros_like(v)
    return (v - v.mean()) / std


@dataclass(frozen=True)
class SensitivityTable:
    """metrics x conditions grid of raw values, percent changes, and z-scores."""

    metrics: tuple[str, ...]
    conditions: tuple[str, ...]
    directions: tuple[str, ...]
    baseline: np.ndarray        # (m,)
    raw: np.ndarray             # (m, c)
    pct_change: np.ndarray      # (m, c)
    zscore: np.ndarray          # (m, c)
    flags: tuple[tuple[tuple[str, ...], ...], ...]  # per-cell notes

    def __post_init__(self):
        m, c = len(self.metrics), len(self.conditions)
        for name in ("baseline", "raw", "pct_change", "zscore"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            want = (m,) if name == "baseline" else (m, c)
            if arr.shape != want:
                raise ValueError(f"{name} shape {arr.shape}, expected {want}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite cells")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if len(self.directions) != m:
            raise ValueError("one direction per metric required")
        flags = tuple(tuple(tuple(cell) for cell in row) for row in self.flags)
        if len(flags) != m or any(len(row) != c for row in flags):
            raise ValueError("flags grid shape mismatch")
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "directions", tuple(self.directions))


def build_sensitivity(baseline_report: MetricReport,
                      condition_reports) -> SensitivityTable:
    """Assemble the sensitivity table from a baseline report and named
    condition reports (sequence of (name, report) pairs or a dict).

    Every report must carry exactly the baseline's metric set; z-scores are
    computed per metric across conditions.
    """
    if isinstance(condition_reports, dict):
        condition_reports = list(condition_reports.items())
    condition_reports = list(condition_reports)
    if not condition_reports:
        raise ValueError("at least one condition report is required")

    names = baseline_report.names()
    base_set = set(names)
    for cond, report in condition_reports:
        got = set(report.names())
        if got != base_set:
            offender = sorted(base_set.symmetric_difference(got))[0]
            raise ValueError(f"condition {cond!r} metric set mismatch on {offender!r}")

    m, c = len(names), len(condition_reports)
    baseline = np.array([baseline_report.value(n) for n in names])
    raw = np.empty((m, c))
    pct = np.empty((m, c))
    flags = [[() for _ in range(c)] for _ in range(m)]
    for j, (cond, report) in enumerate(condition_reports):
        for i, name in enumerate(names):
            raw[i, j] = report.value(name)
            pct[i, j], flag = percent_change(baseline[i], raw[i, j])
            if flag:
                flags[i][j] = (flag,)
    z = np.vstack([zscore_row(row) for row in pct])
    return SensitivityTable(
        metrics=names,
        conditions=tuple(cond for cond, _ in condition_reports),
        directions=tuple(baseline_report.entry(n).direction for n in names),
        baseline=baseline, raw=raw, pct_change=pct, zscore=z,
        flags=tuple(tuple(row) for row in flags),
    )


# --- emission -------------------------------------------------------------------


def zscore_color(z: float) -> str:
    """Fixed diverging color ramp, z clamped to [-3, 3]; z=0 is the midpoint."""
    z = float(np.clip(z, -3.0, 3.0))
    if z < 0:
        t = -z / 3.0
        rgb = [round(m + t * (lo - m)) for m, lo in zip(_RAMP_MID, _RAMP_LO)]
    else:
        t = z / 3.0
        rgb = [round(m + t * (hi - m)) for m, hi in zip(_RAMP_MID, _RAMP_HI)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _emit_csv(table: SensitivityTable, path) -> None:
    cols = ["metric", "direction", "baseline"]
    for cond in table.conditions:
        cols += [f"{cond}_pct", f"{cond}_z"]
    lines = [",".join(cols)]
    for i, name in enumerate(table.metrics):
        row = [name, table.directions[i], _fmt(table.baseline[i])]
        for j in range(len(table.conditions)):
            row += [_fmt(table.pct_change[i, j]), _fmt(table.zscore[i, j])]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _table_doc(table: SensitivityTable) -> dict:
    return {
        "metrics": list(table.metrics),
        "conditions": list(table.conditions),
        "directions": list(table.directions),
        "baseline": [_round9(v) for v in table.baseline],
        "raw": [[_round9(v) for v in row] for row in table.raw],
        "pct_change": [[_round9(v) for v in row] for row in table.pct_change],
        "zscore": [[_round9(v) for v in row] for row in table.zscore],
        "flags": [[list(cell) for cell in row] for row in table.flags],
    }


def _emit_json(table: SensitivityTable, path) -> None:
    with open(path, "w") as f:
        json.dump(_table_doc(table), f, indent=1)
        f.write("\n")


def read_sensitivity_json(path) -> SensitivityTable:
    with open(path) as f:
        doc = json.load(f)
    return SensitivityTable(
        metrics=tuple(doc["metrics"]),
        conditions=tuple(doc["conditions"]),
        directions=tuple(doc["directions"]),
        baseline=np.array(doc["baseline"]),
        raw=np.array(doc["raw"]),
        pct_change=np.array(doc["pct_change"]),
        zscore=np.array(doc["zscore"]),
        flags=tuple(tuple(tuple(cell) for cell in row) for row in doc["flags"]),
    )


_CELL_W = 64
_CELL_H = 22
_LABEL_W = 130
_LABEL_H = 90


def _emit_svg(table: SensitivityTable, path) -> None:
    m, c = len(table.metrics), len(table.conditions)
    width = _LABEL_W + c * _CELL_W
    height = _LABEL_H + m * _CELL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for j, cond in enumerate(table.conditions):
        x = _LABEL_W + j * _CELL_W + _CELL_W / 2
        parts.append(
            f'<text x="{x}" y="{_LABEL_H - 8}" text-anchor="start" '
            f'transform="rotate(-45 {x} {_LABEL_H - 8})">{_xml(cond)}</text>')
    for i, name in enumerate(table.metrics):
        y = _LABEL_H + i * _CELL_H
        parts.append(f'<text x="{_LABEL_W - 6}" y="{y + _CELL_H - 7}" '
                     f'text-anchor="end">{_xml(name)}</text>')
        for j in range(c):
            x = _LABEL_W + j * _CELL_W
            z = table.zscore[i, j]
            parts.append(f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                         f'fill="{zscore_color(z)}" stroke="#999" stroke-width="0.5"/>')
            parts.append(f'<text x="{x + _CELL_W / 2}" y="{y + _CELL_H - 7}" '
                         f'text-anchor="middle">{z:+.2f}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def _xml(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def emit_heatmap(table: SensitivityTable, fmt: str, path) -> None:
    """Write the table as csv, json, or an svg heatmap colored by z-score."""
    if len(table.metrics) == 0 or len(table.conditions) == 0:
        raise ValueError("cannot emit an empty table")
    if fmt == "csv":
        _emit_csv(table, path)
    elif fmt == "json":
        _emit_json(table, path)
    elif fmt == "svg":
        _emit_svg(table, path)
    else:
        raise ValueError(f"unknown heatmap format {fmt!r}")
