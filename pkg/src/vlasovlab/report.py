"""CSV reports: ``time,quantity,params,value,resolution``, floats at 17 significant digits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

REPORT_HEADER = ["time", "quantity", "params", "value", "resolution"]


@dataclass(frozen=True)
class ReportRow:
    time: float
    quantity: str
    params: str
    value: float
    resolution: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"report value for {self.quantity} ({self.params}) is not finite")


def _g17(x: float) -> str:
    return "%.17g" % x


def resolution_tag(grid, dt=None) -> str:
    tag = f"{grid.nx}x{grid.nv}"
    return tag if dt is None else f"{tag}/dt={_g17(dt)}"


def simulation_rows(out, scenario) -> list[ReportRow]:
    """Requested norms per snapshot, then one row per contraction ratio."""
    res = resolution_tag(scenario.grid, scenario.step)
    rows = []
    for snap in out.snapshots:
        for kind, k, r in scenario.norm_requests:
            rows.append(ReportRow(snap.time, f"norm_{kind}", f"k={k};r={r}",
                                  out.norm_history.get(kind, (k, r), snap.time), res))
    for i, ratio in enumerate(out.contraction_ratios, start=2):
        rows.append(ReportRow(out.T, "contraction_ratio", f"sweep={i}", ratio, res))
    return rows


def emit_report(rows: Iterable[ReportRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow([_g17(r.time), r.quantity, r.params, _g17(r.value), r.resolution])


def read_report(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected report header {header}")
        return [ReportRow(float(t), q, p, float(v), res) for t, q, p, v, res in reader]
