"""CSV rows, the pivoted metrics table, resource files and SVG figures."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from .fuzzy import ResourceDescriptor
from .harness import FIELDS, PROTOCOLS, MetricsRow
from .ids import ConfigError

METRICS = {
    "avg_time_ms": "Average Communication Time",
    "avg_hops": "Number of Hops per Peer",
    "avg_messages": "Message per Peer",
    "memory_bytes": "Memory Consumed",
}
PROTOCOL_NAMES = {"chord": "Chord", "rvn": "RVN Chord", "fz": "FZ Chord"}

_TABLE_BLOCKS = [
    ("Messages", "avg_messages"),
    ("Hops", "avg_hops"),
    ("Communication Time", "avg_time_ms"),
    ("Memory Consumed", "memory_bytes"),
]


def write_rows(path: str | Path, rows: Iterable[MetricsRow], append: bool = False) -> None:
    path = Path(path)
    new_file = not append or not path.exists() or path.stat().st_size == 0
    with path.open("a" if append else "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new_file:
            writer.writerow(FIELDS)
        for row in rows:
            writer.writerow([getattr(row, f) for f in FIELDS])


def read_rows(path: str | Path) -> list[MetricsRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FIELDS:
            raise ConfigError(f"{path}: unexpected CSV header {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(MetricsRow(
                protocol=rec["protocol"],
                nodes=int(rec["nodes"]),
                m=int(rec["m"]),
                workload=rec["workload"],
                seed=int(rec["seed"]),
                lookups=int(rec["lookups"]),
                avg_hops=float(rec["avg_hops"]),
                avg_messages=float(rec["avg_messages"]),
                avg_time_ms=float(rec["avg_time_ms"]),
                memory_bytes=int(rec["memory_bytes"]),
                maintenance_messages=int(rec["maintenance_messages"]),
            ))
    return rows


def series(rows: Iterable[MetricsRow], metric: str) -> dict[str, list[tuple[int, float]]]:
    """Per-protocol (nodes, value) points, averaged over seeds, failed rows dropped."""
    acc: dict[tuple[str, int], list[float]] = defaultdict(list)
    for r in rows:
        value = float(getattr(r, metric))
        if r.failed or math.isnan(value):
            continue
        acc[r.protocol, r.nodes].append(value)
    out: dict[str, list[tuple[int, float]]] = {}
    for p in PROTOCOLS:
        pts = sorted((n, sum(v) / len(v)) for (q, n), v in acc.items() if q == p)
        if pts:
            out[p] = pts
    return out


def format_table(rows: Sequence[MetricsRow]) -> str:
    """Metric blocks x protocols x node counts, one decimal place."""
    node_counts = sorted({r.nodes for r in rows})
    data = [(title, series(rows, metric)) for title, metric in _TABLE_BLOCKS]
    widest = max((len(f"{v:.1f}") for _, s in data for pts in s.values() for _, v in pts), default=0)
    width = max(widest, len(str(node_counts[-1])) if node_counts else 0, 8) + 2
    lines = [f"{'Nodes':<20}" + "".join(f"{n:>{width}}" for n in node_counts)]
    for title, per_protocol in data:
        lines.append(f"{title}:")
        for p, pts in per_protocol.items():
            by_n = dict(pts)
            cells = "".join(
                f"{by_n[n]:>{width}.1f}" if n in by_n else f"{'-':>{width}}" for n in node_counts
            )
            lines.append(f"  {PROTOCOL_NAMES[p]:<18}" + cells)
    return "\n".join(lines) + "\n"


def parse_resources(path: str | Path) -> dict[int, frozenset[ResourceDescriptor]]:
    """Read ``<node-id>,<kind>:<attr>[;<kind>:<attr>]*`` records."""
    out: dict[int, frozenset[ResourceDescriptor]] = {}
    with Path(path).open() as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            node, sep, rest = line.partition(",")
            try:
                if not sep:
                    raise ValueError("missing ',' after node id")
                node_id = int(node.strip())
                if node_id < 0:
                    raise ValueError("negative node id")
                if node_id in out:
                    raise ValueError(f"node {node_id} listed twice")
                descs = [ResourceDescriptor.parse(d) for d in rest.split(";") if d.strip()]
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: malformed resource record: {exc}") from None
            out[node_id] = frozenset(descs)
    return out


def format_resources(mapping: dict[int, frozenset[ResourceDescriptor]]) -> str:
    return "".join(
        f"{nid}," + ";".join(str(d) for d in sorted(res)) + "\n"
        for nid, res in sorted(mapping.items())
    )


def plot_metric(rows: Sequence[MetricsRow], metric: str, out: str | Path) -> Path:
    """Write an SVG line chart of ``metric`` against node count (log2 axis)."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; valid metrics: {', '.join(METRICS)}")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    data = series(rows, metric)
    with plt.rc_context({"svg.hashsalt": "chordsim", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for p, pts in data.items():
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=PROTOCOL_NAMES[p], gid=f"series-{p}")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("Number of nodes")
        ax.set_ylabel(METRICS[metric])
        ax.set_title(METRICS[metric])
        if data:
            ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        out = Path(out)
        fig.savefig(out, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out
