import csv
import json
import xml.etree.ElementTree as ET

import pytest

from chordsim.cli import main
from chordsim.fuzzy import ResourceDescriptor as R
from chordsim.harness import FIELDS
from chordsim.ids import ConfigError
from chordsim.report import format_resources, parse_resources, read_rows

HEADER = "protocol,nodes,m,workload,seed,lookups,avg_hops,avg_messages,avg_time_ms,memory_bytes,maintenance_messages"
SVG = "{http://www.w3.org/2000/svg}"


def test_header_frozen():
    assert ",".join(FIELDS) == HEADER


def test_simulate_happy_path(tmp_path, capsys):
    out = tmp_path / "r.csv"
    args = ["simulate", "--protocol", "chord", "--nodes", "256", "--m", "16", "--workload", "uniform",
            "--lookups", "1000", "--seed", "7", "--out", str(out)]
    assert main(args) == 0
    assert "chord N=256" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 2
    assert main(args) == 0
    assert len(out.read_text().splitlines()) == 3


def test_simulate_fz_needs_resources(capsys):
    code = main(["simulate", "--protocol", "fz", "--nodes", "64", "--m", "10"])
    assert code == 2
    assert "--resources" in capsys.readouterr().err


def test_simulate_capacity_check(capsys):
    assert main(["simulate", "--protocol", "chord", "--nodes", "100", "--m", "6"]) == 2
    assert "2^6" in capsys.readouterr().err


def test_bad_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--protocol", "pastry", "--nodes", "5"])
    assert exc.value.code == 2


def test_simulate_with_resource_file_and_trace(tmp_path):
    res = tmp_path / "res.txt"
    res.write_text("# grid nodes\n2,ram:1ghz\n4,RAM:1GHZ\n\n9,ram:1ghz\n30,cpu:8core;gpu:a100\n")
    trace = tmp_path / "t.csv"
    code = main(["simulate", "--protocol", "fz", "--m", "6", "--resources", str(res),
                 "--lookups", "50", "--trace", str(trace), "--out", str(tmp_path / "o.csv")])
    assert code == 0
    rows = list(csv.DictReader(trace.open()))
    assert len(rows) == 50
    assert set(rows[0]) == {"protocol", "origin", "key", "owner", "hops", "messages", "time_ms"}
    assert {int(r["origin"]) for r in rows} <= {2, 4, 9, 30}
    assert read_rows(tmp_path / "o.csv")[0].nodes == 4


def test_simulate_synthetic_fz_and_flags(tmp_path):
    assert main(["simulate", "--protocol", "fz", "--synthetic-resources", "--nodes", "64", "--m", "10",
                 "--workload", "sequential", "--lookups", "100", "--churn-rate", "0.1",
                 "--latency", "fixed:20"]) == 0
    assert main(["simulate", "--protocol", "rvn", "--rvn-modular-guard", "--nodes", "64", "--m", "10",
                 "--workload", "zipf", "--zipf-s", "0.9", "--lookups", "100"]) == 0
    assert main(["simulate", "--protocol", "chord", "--nodes", "64", "--hashed-ids"]) == 0
    assert main(["simulate", "--protocol", "chord", "--nodes", "64", "--latency", "weird"]) == 2


def test_parse_resources(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("2,ram:1ghz\n4,ram:1ghz\n9,ram:1ghz\n7,cpu:8core;gpu:a100\n")
    got = parse_resources(p)
    assert got[2] == got[4] == got[9] == {R("ram", "1ghz")}
    assert got[7] == {R("cpu", "8core"), R("gpu", "a100")}
    assert "7,cpu:8core;gpu:a100\n" in format_resources(got)
    p.write_text(format_resources(got))
    assert parse_resources(p) == got


def test_parse_resources_errors(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("1,ram:1ghz\n\nbogus line\n")
    with pytest.raises(ConfigError, match=":3:"):
        parse_resources(p)
    p.write_text("")
    assert parse_resources(p) == {}


def test_empty_resource_file_rejected(tmp_path, capsys):
    p = tmp_path / "r.txt"
    p.write_text("")
    assert main(["simulate", "--protocol", "fz", "--m", "6", "--resources", str(p)]) == 2
    assert "resourceless" in capsys.readouterr().err


def small_sweep(tmp_path, name="a", **overrides):
    cfg = {
        "node_counts": [64, 128], "m": 12, "lookups": 200, "seeds": [1],
        "csv": str(tmp_path / f"{name}.csv"), "table": str(tmp_path / f"{name}.txt"),
        "figures_dir": str(tmp_path / f"{name}_fig"),
    }
    cfg.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def test_sweep_outputs(tmp_path):
    path, cfg = small_sweep(tmp_path)
    assert main(["sweep", str(path)]) == 0
    rows = read_rows(cfg["csv"])
    assert len(rows) == 6
    table = open(cfg["table"]).read()
    for title in ("Messages:", "Hops:", "Communication Time:", "Memory Consumed:", "RVN Chord"):
        assert title in table
    assert {p.name for p in (tmp_path / "a_fig").iterdir()} == {
        "avg_time_ms.svg", "avg_hops.svg", "avg_messages.svg", "memory_bytes.svg"}


def test_sweep_single_cell_and_rerun_identical(tmp_path):
    path, cfg = small_sweep(tmp_path, protocols=["rvn"], node_counts=[64], figures_dir=None)
    assert main(["sweep", str(path)]) == 0
    first = open(cfg["csv"]).read()
    assert len(first.splitlines()) == 2
    assert main(["sweep", str(path)]) == 0
    assert open(cfg["csv"]).read() == first


def test_sweep_bad_config(tmp_path):
    path, _ = small_sweep(tmp_path, node_counts=[128, 64])
    assert main(["sweep", str(path)]) == 2
    path, _ = small_sweep(tmp_path, name="b", colour="red")
    assert main(["sweep", str(path)]) == 2


def test_sweep_partial_failure(tmp_path, monkeypatch):
    import chordsim.cli as cli

    real = cli.run_experiment

    def flaky(cfg, *a, **kw):
        if cfg.protocol == "fz" and cfg.nodes == 128:
            raise RuntimeError("boom")
        return real(cfg, *a, **kw)

    monkeypatch.setattr(cli, "run_experiment", flaky)
    path, cfg = small_sweep(tmp_path, figures_dir=None)
    assert main(["sweep", str(path)]) == 1
    rows = read_rows(cfg["csv"])
    assert len(rows) == 6
    assert [r.failed for r in rows].count(True) == 1


def test_sweep_parallel_matches_serial(tmp_path):
    serial, cfg_s = small_sweep(tmp_path, name="s", figures_dir=None)
    par, cfg_p = small_sweep(tmp_path, name="p", figures_dir=None, parallelism=2)
    assert main(["sweep", str(serial)]) == 0
    assert main(["sweep", str(par)]) == 0
    assert open(cfg_s["csv"]).read() == open(cfg_p["csv"]).read()


def series_points(svg_path):
    root = ET.parse(svg_path).getroot()
    out = {}
    for g in root.iter(f"{SVG}g"):
        gid = g.get("id", "")
        if gid.startswith("series-"):
            d = next(g.iter(f"{SVG}path")).get("d")
            out[gid[len("series-"):]] = sum(1 for tok in d.split() if tok in ("M", "L"))
    return out, root


def title_text(root):
    return [t.text for t in root.iter(f"{SVG}text") if t.text]


def test_plot_figure_shape(tmp_path):
    path, cfg = small_sweep(tmp_path, node_counts=[32, 64, 128, 256, 512, 1024, 2048, 4096],
                            lookups=20, figures_dir=None)
    assert main(["sweep", str(path)]) == 0
    out = tmp_path / "hops.svg"
    assert main(["plot", cfg["csv"], "--metric", "avg_hops", "--out", str(out)]) == 0
    points, root = series_points(out)
    assert points == {"chord": 8, "rvn": 8, "fz": 8}
    assert "Number of Hops per Peer" in title_text(root)

    out = tmp_path / "time.svg"
    assert main(["plot", cfg["csv"], "--metric", "avg_time_ms", "--out", str(out)]) == 0
    assert "Average Communication Time" in title_text(series_points(out)[1])


def test_plot_single_row(tmp_path):
    csv_path = tmp_path / "one.csv"
    assert main(["simulate", "--protocol", "rvn", "--nodes", "32", "--m", "8", "--lookups", "10",
                 "--out", str(csv_path)]) == 0
    out = tmp_path / "one.svg"
    assert main(["plot", str(csv_path), "--metric", "avg_messages", "--out", str(out)]) == 0
    assert series_points(out)[0] == {"rvn": 1}


def test_plot_unknown_metric(tmp_path, capsys):
    csv_path = tmp_path / "x.csv"
    csv_path.write_text(HEADER + "\n")
    assert main(["plot", str(csv_path), "--metric", "latency", "--out", str(tmp_path / "x.svg")]) == 2
    err = capsys.readouterr().err
    assert "avg_hops" in err and "memory_bytes" in err
