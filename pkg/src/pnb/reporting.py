"""Result emission: delimited records, bound time-series, and figures.

One row per run in a stable column order, a sidecar time-series file per
run, and a rendered bounds-over-time figure next to the delimited
output.  Values carry their fixed-point scale so timed objectives print
with two decimals and plain costs print as integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .search import SolveResult

COLUMNS = ("set", "name", "mode", "width", "heuristic", "seeded",
           "LB", "UB", "gap", "time_s", "closed", "queue_len")


@dataclass
class ResultRecord:
    set_name: str
    name: str
    mode: str
    width: int
    heuristic: str
    seeded: bool
    lower: Optional[int]
    upper: Optional[int]
    gap: float
    time_s: float
    closed: bool
    queue_len: int
    scale: int = 1

    @classmethod
    def from_result(cls, result: SolveResult, *, set_name: str, name: str,
                    mode: str, width: int, heuristic: str,
                    seeded: bool) -> "ResultRecord":
        return cls(set_name, name, mode, width, heuristic, seeded,
                   result.lower, result.upper, result.gap_percent,
                   result.wall_time, result.closed, result.queue_len,
                   result.scale)


def format_value(value: Optional[int], scale: int) -> str:
    if value is None:
        return "-"
    if scale == 1:
        return str(value)
    return f"{value / scale:.2f}"


def _row(record: ResultRecord) -> list:
    return [
        record.set_name,
        record.name,
        record.mode,
        str(record.width),
        record.heuristic,
        str(record.seeded).lower(),
        format_value(record.lower, record.scale),
        format_value(record.upper, record.scale),
        f"{record.gap:.2f}" if record.upper is not None else "100.00",
        f"{record.time_s:.2f}",
        str(record.closed).lower(),
        str(record.queue_len),
    ]


def emit_results(records: Iterable[ResultRecord], fmt: str = "csv") -> str:
    """Render records to csv (default) or json-lines text."""
    records = list(records)
    if fmt == "csv":
        lines = [",".join(COLUMNS)]
        for record in records:
            lines.append(",".join(_row(record)))
        return "\n".join(lines) + "\n"
    if fmt == "json-lines":
        lines = []
        for record in records:
            lines.append(json.dumps(dict(zip(COLUMNS, _row(record)))))
        return "\n".join(lines) + ("\n" if lines else "")
    raise ValueError(f"unknown format {fmt!r}")


def emit_timeline(timeline, scale: int = 1) -> str:
    """Sidecar csv for a run's bound evolution."""
    lines = ["elapsed,LB,UB,queue_len"]
    for elapsed, lower, upper, queue_len in timeline:
        lines.append(",".join([
            f"{elapsed:.3f}",
            format_value(lower, scale),
            format_value(upper, scale),
            str(queue_len),
        ]))
    return "\n".join(lines) + "\n"


def render_timeline_figure(timeline, out_path, title: str = "",
                           scale: int = 1) -> None:
    """Draw lower/upper bounds over elapsed time to an image file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    times = [t for t, _, _, _ in timeline]
    lowers = [(lb / scale if lb is not None else None)
              for _, lb, _, _ in timeline]
    uppers = [(ub / scale if ub is not None else None)
              for _, _, ub, _ in timeline]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    lb_pts = [(t, v) for t, v in zip(times, lowers) if v is not None]
    ub_pts = [(t, v) for t, v in zip(times, uppers) if v is not None]
    if lb_pts:
        ax.step([t for t, _ in lb_pts], [v for _, v in lb_pts],
                where="post", label="lower bound", color="#1f77b4")
    if ub_pts:
        ax.step([t for t, _ in ub_pts], [v for _, v in ub_pts],
                where="post", label="best solution", color="#d62728")
    ax.set_xlabel("elapsed seconds")
    ax.set_ylabel("objective")
    if title:
        ax.set_title(title)
    if lb_pts or ub_pts:
        ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
