"""``chordsim`` command line: simulate, sweep, plot.

Exit codes: 0 success, 1 some sweep cells failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .harness import (
    PROTOCOLS,
    WORKLOADS,
    ExperimentConfig,
    LatencyModel,
    MetricsRow,
    TraceRecord,
    WorkloadSpec,
    failed_row,
    run_experiment,
)
from .ids import ConfigError
from .report import METRICS, format_table, parse_resources, plot_metric, read_rows, write_rows

log = logging.getLogger("chordsim")

DEFAULT_NODE_COUNTS = [256, 512, 1024, 2048, 4096, 8192, 16384, 32768]


def auto_window(m: int, nodes: int) -> int:
    """Locality window of about four average node gaps."""
    return max(1, (1 << m) // nodes * 4)


@dataclass
class SweepConfig:
    node_counts: list[int] = field(default_factory=lambda: list(DEFAULT_NODE_COUNTS))
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    m: int = 20
    workload: str = "sequential"
    lookups: int = 2000
    zipf_s: float = 1.2
    window: int | str = "auto"
    latency: str = "uniform:10,100"
    churn_rate: float = 0.0
    seeds: list[int] = field(default_factory=lambda: [0])
    parallelism: int = 1
    csv: str = "sweep.csv"
    table: str | None = "sweep_table.txt"
    figures_dir: str | None = "figures"

    @classmethod
    def load(cls, path: str | Path | None) -> SweepConfig:
        if path is None:
            cfg = cls()
        else:
            try:
                raw = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read sweep config {path}: {exc}") from None
            unknown = set(raw) - set(cls.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"unknown sweep config fields: {sorted(unknown)}")
            cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.protocols or set(self.protocols) - set(PROTOCOLS):
            raise ConfigError(f"protocols must be a non-empty subset of {PROTOCOLS}")
        if not self.node_counts or self.node_counts != sorted(self.node_counts):
            raise ConfigError("node_counts must be non-empty and ascending")
        if self.node_counts[-1] > (1 << self.m):
            raise ConfigError(f"node count {self.node_counts[-1]} exceeds 2^{self.m}")
        if self.workload not in WORKLOADS:
            raise ConfigError(f"workload must be one of {WORKLOADS}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def cells(self) -> list[ExperimentConfig]:
        out = []
        for seed in self.seeds:
            latency = LatencyModel.parse(self.latency, seed=seed)
            for n in self.node_counts:
                window = auto_window(self.m, n) if self.window == "auto" else int(self.window)
                spec = WorkloadSpec(self.workload, self.lookups, seed, self.zipf_s,
                                    window if self.workload == "sequential" else None)
                for p in self.protocols:
                    out.append(ExperimentConfig(p, n, self.m, spec, latency,
                                                churn_rate=self.churn_rate, seed=seed))
        return out


def _run_cell(cfg: ExperimentConfig) -> tuple[MetricsRow, str | None]:
    try:
        return run_experiment(cfg), None
    except Exception as exc:  # one bad cell must not sink the sweep
        return failed_row(cfg), f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: SweepConfig) -> tuple[list[MetricsRow], list[str]]:
    cells = cfg.cells()
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    errors = [
        f"{c.protocol} N={c.nodes} seed={c.seed}: {err}"
        for c, (_, err) in zip(cells, results) if err
    ]
    return [row for row, _ in results], errors


def summary_line(row: MetricsRow) -> str:
    return (
        f"{row.protocol} N={row.nodes} m={row.m} {row.workload} seed={row.seed}: "
        f"hops={row.avg_hops:.2f} messages={row.avg_messages:.2f} "
        f"time={row.avg_time_ms:.1f}ms memory={row.memory_bytes}B "
        f"maintenance={row.maintenance_messages}"
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    resources = None
    if args.resources:
        resources = parse_resources(args.resources)
        if not any(resources.values()):
            raise ConfigError(f"{args.resources}: all nodes resourceless")
        if args.nodes is not None and args.nodes != len(resources):
            raise ConfigError(f"--nodes {args.nodes} disagrees with {len(resources)} records in --resources")
        nodes = len(resources)
    elif args.protocol == "fz" and not args.synthetic_resources:
        raise ConfigError("--protocol fz requires --resources <path> (or --synthetic-resources)")
    elif args.nodes is None:
        raise ConfigError("--nodes is required unless --resources is given")
    else:
        nodes = args.nodes
    if not 1 <= nodes <= (1 << args.m):
        raise ConfigError(f"--nodes {nodes} exceeds the 2^{args.m} identifier space")

    window = None
    if args.workload == "sequential":
        window = auto_window(args.m, nodes) if args.window is None else args.window
    spec = WorkloadSpec(args.workload, args.lookups, args.seed, args.zipf_s, window)
    cfg = ExperimentConfig(
        protocol=args.protocol,
        nodes=nodes,
        m=args.m,
        workload=spec,
        latency=LatencyModel.parse(args.latency, seed=args.seed),
        churn_rate=args.churn_rate,
        seed=args.seed,
        rvn_modular_guard=args.rvn_modular_guard,
        resources=resources,
        hashed_ids=args.hashed_ids,
    )
    cfg.validate()

    trace_fh = None
    trace = None
    if args.trace:
        trace_fh = open(args.trace, "w", newline="")
        writer = csv.writer(trace_fh, lineterminator="\n")
        writer.writerow(TraceRecord._fields)
        trace = writer.writerow
    try:
        row = run_experiment(cfg, trace=trace)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    if args.out:
        write_rows(args.out, [row], append=True)
    print(summary_line(row))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = SweepConfig.load(args.config)
    rows, errors = run_sweep(cfg)
    write_rows(cfg.csv, rows)
    if cfg.table:
        Path(cfg.table).write_text(format_table(rows))
    if cfg.figures_dir:
        fig_dir = Path(cfg.figures_dir)
        fig_dir.mkdir(parents=True, exist_ok=True)
        for metric in METRICS:
            plot_metric(rows, metric, fig_dir / f"{metric}.svg")
    print(format_table(rows), end="")
    for err in errors:
        print(f"cell failed: {err}", file=sys.stderr)
    return 1 if errors else 0


def cmd_plot(args: argparse.Namespace) -> int:
    if args.metric not in METRICS:
        raise ConfigError(f"unknown metric {args.metric!r}; valid metrics: {', '.join(METRICS)}")
    rows = read_rows(args.csv)
    out = plot_metric(rows, args.metric, args.out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chordsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment and append a CSV row")
    sim.add_argument("--protocol", choices=PROTOCOLS, required=True)
    sim.add_argument("--nodes", type=int)
    sim.add_argument("--m", type=int, default=16)
    sim.add_argument("--workload", choices=WORKLOADS, default="uniform")
    sim.add_argument("--zipf-s", type=float, default=1.2)
    sim.add_argument("--window", type=int, help="sequential locality window (default 4 x 2^m/N)")
    sim.add_argument("--lookups", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--churn-rate", type=float, default=0.0,
                     help="mean churn events per lookup (Poisson)")
    sim.add_argument("--latency", default="uniform:10,100",
                     help="fixed:<ms> or uniform:<lo>,<hi>")
    sim.add_argument("--resources", help="resource assignment file")
    sim.add_argument("--synthetic-resources", action="store_true",
                     help="draw seeded synthetic resources instead of reading a file")
    sim.add_argument("--out", help="CSV file to append the result row to")
    sim.add_argument("--trace", help="per-lookup CSV trace")
    sim.add_argument("--rvn-modular-guard", action="store_true")
    sim.add_argument("--hashed-ids", action="store_true",
                     help="derive node ids from SHA-1 of synthetic IP:port labels")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run the protocol x node-count grid")
    sw.add_argument("config", nargs="?", help="JSON sweep config (defaults if omitted)")
    sw.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render one metric of a sweep CSV as SVG")
    pl.add_argument("csv")
    pl.add_argument("--metric", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"chordsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
