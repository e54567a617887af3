import csv
import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from contagionlab.cli import main
from contagionlab.graphs import cycle_power, load_edge_list, watts_strogatz, write_edge_list


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def write_config(tmp_path, body, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body))
    return p


# -- generate / stats ------------------------------------------------------------------

def test_generate_c2(tmp_path, capsys):
    out = tmp_path / "c2.edges"
    assert main(["generate", "c2", "n=8", "-o", str(out)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["m"] == 16
    g = load_edge_list(out)
    assert g.m == 16 and g == cycle_power(8, 2)
    assert np.array_equal(g.labels, cycle_power(8, 2).labels)


def test_generate_empty_er(tmp_path):
    out = tmp_path / "er.edges"
    assert main(["generate", "er", "n=10", "p=0", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert all(l.startswith("#") for l in lines)
    assert load_edge_list(out).n == 10


def test_generate_eta_zero_matches_c2(tmp_path):
    a, b = tmp_path / "a.edges", tmp_path / "b.edges"
    main(["generate", "eta-c2", "n=100", "eta=0", "-o", str(a)])
    main(["generate", "c2", "n=100", "-o", str(b)])
    ga, gb = load_edge_list(a), load_edge_list(b)
    assert ga == gb and np.array_equal(ga.labels, gb.labels)


@pytest.mark.parametrize("args", [
    ["generate", "c2", "-o", "x"],
    ["generate", "blob", "n=5", "-o", "x"],
    ["generate", "c2", "n=8", "zz=1", "-o", "x"],
    ["generate", "c2", "n=4", "-o", "x"],
    ["generate", "c2", "n8", "-o", "x"],
])
def test_generate_bad_parameters_exit_1(args, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(args) == 1


def test_generate_other_models(tmp_path):
    for args in (["union", "n=50", "k=2", "D=6"], ["ws", "n=50", "k=2", "p=0.1"],
                 ["complete", "n=5"], ["star", "n=5"], ["path", "n=5"], ["cycle", "n=20", "k=3"],
                 ["eta-c2", "n=50", "delta=0.5"]):
        assert main(["generate", *args, "-o", str(tmp_path / "g.edges")]) == 0


def test_stats(tmp_path, capsys):
    p = tmp_path / "tri.txt"
    p.write_text("a b\nb c\nc a\nd d\n")
    assert main(["stats", str(p)]) == 0
    s = json.loads(capsys.readouterr().out)
    # mean local clustering; the isolated node contributes 0
    assert s["clustering_coefficient"] == 0.75 and s["self_loops_dropped"] == 1
    assert s["component_sizes"] == [3, 1]


def test_stats_missing_file_exit_2(tmp_path):
    assert main(["stats", str(tmp_path / "none.txt")]) == 2


def test_stats_malformed_file_exit_2(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1 2 3\n")
    assert main(["stats", str(p)]) == 2


# -- oracle -----------------------------------------------------------------------------

def oracle(capsys, *args):
    code = main(["oracle", *args])
    return code, (json.loads(capsys.readouterr().out) if code == 0 else None)


def test_oracle_k3(capsys):
    code, doc = oracle(capsys, "complete", "n=3", "--theta", "2")
    assert code == 0 and doc["expected_time"] == 1.0
    assert doc["closure"] == {"final": [0, 1, 2], "rounds": 1, "complete": True}


def test_oracle_c1_8_unreachable(capsys):
    _, doc = oracle(capsys, "c1", "n=8", "--theta", "2", "--q", "0")
    assert doc["expected_time"] == "unreachable"


def test_oracle_c1_4(capsys):
    _, doc = oracle(capsys, "c1", "n=4", "--theta", "2", "--q", "0.5", "--rho", "1")
    assert doc["expected_time"] == pytest.approx(2.0)


def test_oracle_file_and_labels(tmp_path, capsys):
    p = tmp_path / "c.edges"
    write_edge_list(cycle_power(6, 2), p)
    _, doc = oracle(capsys, str(p), "--theta", "2", "--q", "0.3", "--labels", "cycle1")
    assert doc["closure"]["complete"] and doc["expected_time"] == 2.0


def test_oracle_too_large_exit_3():
    assert main(["oracle", "c1", "n=30", "--theta", "2"]) == 3


def test_oracle_corpus(tmp_path, capsys):
    assert main(["oracle", "--corpus", str(tmp_path / "corp")]) == 0
    manifest = json.loads((tmp_path / "corp" / "manifest.json").read_text())
    assert len(manifest["cases"]) >= 30


def test_oracle_needs_source():
    assert main(["oracle"]) == 1


# -- run / sweep ----------------------------------------------------------------------------

DET_C2 = textwrap.dedent("""\
    graph:
      model: cycle_power
      n: 100
      k: 2
    activation:
      kind: noisy_threshold
      theta: 2
      q: 0.0
      rho: 1.0
    experiment:
      id: det
      replicates: 20
      root_seed: 1
    output:
      dir: out
""")


def test_run_deterministic_c2(tmp_path, capsys):
    cfg = write_config(tmp_path, DET_C2)
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    rows = read_rows(out / "results.csv")
    assert len(rows) == 20 and {r["spread_time"] for r in rows} == {"49"}
    summary = json.loads((out / "summary.json").read_text())
    cond = summary["conditions"][0]
    assert cond["mean"] == 49 and cond["ci_half_width"] == 0 and cond["censored_count"] == 0
    assert summary["root_seed"] == 1 and len(summary["config_hash"]) == 16
    header = (out / "results.csv").read_text().splitlines()[:3]
    assert header[0] == "# experiment_id: det"
    assert header[1] == f"# config_hash: {summary['config_hash']}"
    assert (out / "config.resolved.yaml").exists()


STOCH = textwrap.dedent("""\
    graph:
      model: cycle_union
      n: 300
      k: 1
      c: 2
    activation:
      kind: noisy_threshold
      theta: 2
      q: 0.05
    dynamics:
      sub_threshold_labels: [cycle1]
    experiment:
      id: stoch
      replicates: 10
      root_seed: 42
""")


def test_run_twice_byte_identical(tmp_path):
    cfg = write_config(tmp_path, STOCH)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("results.csv", "summary.json", "config.resolved.yaml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rerun_from_echoed_config(tmp_path):
    cfg = write_config(tmp_path, STOCH)
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a")])
    echoed = tmp_path / "a" / "config.resolved.yaml"
    main(["run", str(echoed), "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_four_conditions_on_one_file(tmp_path):
    g = watts_strogatz(60, 3, 0.05, np.random.default_rng(0))
    write_edge_list(g, tmp_path / "net.edges")
    cfg = write_config(tmp_path, """\
        graph:
          model: file
          path: net.edges
        activation:
          kind: noisy_threshold
          theta: 2
          q: 0.05
        dynamics:
          stop_fraction: 0.9
          seeding: adjacent
        intervention:
          fraction: 0.1
        experiment:
          id: fig5
          replicates: 500
          axes:
            intervention: [none, rewire, add_triad_closing, add_random]
    """)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "results.csv")
    assert len(rows) == 2000
    assert {r["intervention"] for r in rows} == {"none", "rewire", "add_triad_closing", "add_random"}


def test_run_censoring_is_not_an_error(tmp_path):
    cfg = write_config(tmp_path, DET_C2.replace("k: 2", "k: 1"))
    assert main(["run", str(cfg)]) == 0
    rows = read_rows(tmp_path / "out" / "results.csv")
    assert all(r["censored"] == "1" and r["spread_time"] == "" for r in rows)


def test_sweep_linear_slope(tmp_path):
    body = DET_C2.replace("  replicates: 20\n", "  replicates: 2\n  axes:\n    n: [1000, 2000, 4000]\n  slopes: [n]\n")
    cfg = write_config(tmp_path, body)
    assert main(["sweep", str(cfg)]) == 0
    slopes = json.loads((tmp_path / "out" / "slopes.json").read_text())
    assert slopes["slopes"][0]["slope"] == pytest.approx(1.0, abs=2e-3)
    rows = read_rows(tmp_path / "out" / "results.csv")
    assert {r["n"] for r in rows} == {"1000", "2000", "4000"}


def test_sweep_k_fixed_degree_shape(tmp_path):
    # fixed D = 15: fewer cycle edges (smaller k) is faster, down to k = 3 or 4; k = 2 is slower again
    cfg = write_config(tmp_path, """\
        graph:
          model: cycle_union
          n: 1000
          D: 15
        activation:
          kind: noisy_threshold
          theta: 2
          q: 0.0
        experiment:
          replicates: 100
          root_seed: 11
          axes:
            k: [2, 3, 4, 5, 6, 7]
          slopes: [k]
    """)
    assert main(["sweep", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    means = {c["values"]["k"]: c["mean"] for c in summary["conditions"]}
    assert all(c["censored_count"] == 0 for c in summary["conditions"])
    assert means[4] < means[5] < means[6] < means[7]
    assert means[2] > min(means.values())


def test_sweep_without_axes_exit_1(tmp_path):
    assert main(["sweep", str(write_config(tmp_path, DET_C2))]) == 1


def test_sweep_empty_axis_exit_1(tmp_path, capsys):
    body = DET_C2.replace("  replicates: 20\n", "  replicates: 2\n  axes:\n    n: []\n")
    assert main(["sweep", str(write_config(tmp_path, body))]) == 1
    assert "line" in capsys.readouterr().err


def test_run_unknown_key_exit_1(tmp_path, capsys):
    body = DET_C2.replace("  k: 2\n", "  k: 2\n  kk: 3\n")
    assert main(["run", str(write_config(tmp_path, body))]) == 1
    assert "line 5" in capsys.readouterr().err


def test_run_missing_config_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "g.edges"
    res = subprocess.run([sys.executable, "-m", "contagionlab.cli", "generate", "c1", "n=5",
                          "-o", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["m"] == 5
