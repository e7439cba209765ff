"""Comparison tables, CSV/JSON emission and plot-ready series."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

COLUMNS = (
    "local_throughput",
    "flush_throughput",
    "conflicts",
    "network_bytes",
    "barrier_wait",
    "slowdown",
)
KEYS = ("strategy", "node_count", "ranks_per_node")
FORMATS = ("csv", "json")


def sig6(value: float) -> float:
    return float(f"{value:.6g}")


@dataclass(frozen=True)
class Row:
    strategy: str
    node_count: int
    ranks_per_node: int
    local_throughput: float
    flush_throughput: float
    conflicts: int
    network_bytes: int
    barrier_wait: float
    slowdown: float

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.strategy, self.node_count, self.ranks_per_node)


def comparison_table(results: Iterable) -> list[Row]:
    """One row per (scenario, SimReport) pair; each key may appear only once."""
    rows: list[Row] = []
    seen = set()
    for scenario, rep in results:
        row = Row(
            strategy=rep.strategy,
            node_count=scenario.cluster.node_count,
            ranks_per_node=scenario.cluster.ranks_per_node,
            local_throughput=sig6(rep.local_throughput),
            flush_throughput=sig6(rep.flush_throughput),
            conflicts=rep.conflicted_stripe_count,
            network_bytes=rep.total_network_bytes,
            barrier_wait=sig6(rep.phase_barrier_wait_seconds),
            slowdown=sig6(rep.app_slowdown_estimate),
        )
        if row.key in seen:
            raise ValueError(f"duplicate table row for {row.key}")
        seen.add(row.key)
        rows.append(row)
    return rows


def emit_report(rows: Sequence[Row], fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    if not rows:
        raise ValueError("no results to report")
    if fmt == "json":
        return json.dumps([asdict(r) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(KEYS + COLUMNS)
    for r in rows:
        writer.writerow([getattr(r, k) for k in KEYS + COLUMNS])
    return buf.getvalue()


def parse_report(text: str, fmt: str) -> list[Row]:
    """Inverse of emit_report."""
    if fmt == "json":
        return [Row(**d) for d in json.loads(text)]
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    out = []
    for d in csv.DictReader(io.StringIO(text)):
        out.append(Row(
            strategy=d["strategy"],
            node_count=int(d["node_count"]),
            ranks_per_node=int(d["ranks_per_node"]),
            local_throughput=float(d["local_throughput"]),
            flush_throughput=float(d["flush_throughput"]),
            conflicts=int(d["conflicts"]),
            network_bytes=int(d["network_bytes"]),
            barrier_wait=float(d["barrier_wait"]),
            slowdown=float(d["slowdown"]),
        ))
    return out


def emit_plot_series(
    rows: Sequence[Row], metric: str, node_count: Optional[int] = None
) -> dict[str, list[tuple[int, float]]]:
    """Per strategy, (ranks_per_node, metric) points with x ascending.

    With several node counts in the table, pass ``node_count`` to pick one.
    """
    if metric not in COLUMNS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {COLUMNS}")
    series: dict[str, list[tuple[int, float]]] = {}
    for r in rows:
        if node_count is not None and r.node_count != node_count:
            continue
        series.setdefault(r.strategy, []).append((r.ranks_per_node, getattr(r, metric)))
    for name, pts in series.items():
        pts.sort()
        xs = [x for x, _ in pts]
        if len(set(xs)) != len(xs):
            raise ValueError(
                f"strategy {name} has several rows per ranks_per_node; select a node_count")
    return series
