"""End-to-end command-line runs on deliberately tiny scenarios."""

import csv
from types import SimpleNamespace

import pytest

from nvbath import cli

TINY_TRACE = """\
[bath]
spin_count = 1

[pulses]
mode = preset
target = bell2

[experiment]
sample_times_us = 0:8:5
seed = 11
out = trace.csv
"""

TINY_HISTOGRAM = """\
[bath]
densities_ppb = 5, 25
baths_per_density = 2
spin_count = 2

[pulses]
target = bell2

[experiment]
seed = 13
out = hist.csv
"""

TINY_BENCHMARK = """\
[bath]
spin_count = {count}

[pulses]
target = bell2

[experiment]
sample_times_us = 5, 20
benchmark_time_us = 20
seed = 17
out = bench.csv
"""


def write_cfg(tmp_path, text, name="scenario.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def test_trace_runs_and_is_reproducible(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_TRACE)
    out = tmp_path / "trace.csv"
    assert cli.main(["trace", "-c", cfg, "--out", str(out)]) == cli.EXIT_OK
    assert f"wrote {out}" in capsys.readouterr().out
    first = out.read_bytes()
    assert first.startswith(b"# nvbath ")
    rows = read_rows(out)
    labels = {r["order"] for r in rows}
    assert labels == {"unitary", "gcce0"}
    # the entangling time is always on the grid
    assert any(abs(float(r["time_us"]) - 7.1) < 1e-9 for r in rows)
    assert cli.main(["trace", "-c", cfg, "--out", str(out)]) == cli.EXIT_OK
    assert out.read_bytes() == first


def test_histogram_thread_pool_invariance(tmp_path):
    cfg = write_cfg(tmp_path, TINY_HISTOGRAM)
    serial = tmp_path / "serial.csv"
    pooled = tmp_path / "pooled.csv"
    assert cli.main(["histogram", "-c", cfg, "--out", str(serial)]) == 0
    assert cli.main(["histogram", "-c", cfg, "--out", str(pooled),
                     "--jobs", "3"]) == 0
    assert serial.read_bytes() == pooled.read_bytes()
    rows = read_rows(serial)
    assert sum(r["row"] == "record" for r in rows) == 4
    assert sum(r["row"] == "mean" for r in rows) == 2  # one per density


def test_benchmark_small_bath(tmp_path):
    cfg = write_cfg(tmp_path, TINY_BENCHMARK.format(count=3))
    out = tmp_path / "bench.csv"
    assert cli.main(["benchmark", "-c", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    record = next(r for r in rows if r["row"] == "record")
    assert record["n_spins"] == "3"
    assert float(record["err_gcce0"]) < 0.1
    assert any(r["row"] == "mean" for r in rows)


def test_benchmark_empty_bath_has_zero_error(tmp_path):
    cfg = write_cfg(tmp_path, TINY_BENCHMARK.format(count=0))
    out = tmp_path / "bench.csv"
    assert cli.main(["benchmark", "-c", cfg, "--out", str(out)]) == 0
    record = next(r for r in read_rows(out) if r["row"] == "record")
    assert float(record["err_gcce0"]) < 1e-12
    assert float(record["err_gcce2"]) < 1e-12
    assert float(record["f_exact"]) == pytest.approx(1.0)


def test_optimize_reaches_threshold(tmp_path, capsys):
    cfg = write_cfg(tmp_path, """\
[pulses]
mode = optimize
target = bell2
segments = 4
budget = 40
fidelity_threshold = 0.9

[experiment]
seed = 42
out = opt.txt
""")
    out = tmp_path / "opt.txt"
    assert cli.main(["optimize", "-c", cfg, "--out", str(out)]) == cli.EXIT_OK
    text = out.read_text()
    assert text.startswith("# nvbath optimize")
    assert "# below_target = false" in text
    assert "# f_process = " in text


def test_optimize_below_target_exit_code(tmp_path, capsys):
    # half a microsecond cannot build conditional phase on a 13.9 kHz split
    cfg = write_cfg(tmp_path, """\
[pulses]
mode = optimize
target = bell2
segments = 1
budget = 2
duration_cap_us = 0.5
fidelity_threshold = 0.999

[experiment]
seed = 3
out = opt.txt
""")
    out = tmp_path / "opt.txt"
    rc = cli.main(["optimize", "-c", cfg, "--out", str(out)])
    assert rc == cli.EXIT_BELOW_TARGET
    assert "below target" in capsys.readouterr().err
    assert "# below_target = true" in out.read_text()  # artifact still written


def test_bath_gen_output(tmp_path):
    cfg = write_cfg(tmp_path, """\
[bath]
r_min_nm = 30
r_max_nm = 60
spin_count = 4
baths_per_density = 2

[experiment]
seed = 23
out = bath.csv
""")
    out = tmp_path / "bath.csv"
    assert cli.main(["bath-gen", "-c", cfg, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 8
    for r in rows:
        radius = (float(r["x_nm"]) ** 2 + float(r["y_nm"]) ** 2
                  + float(r["z_nm"]) ** 2) ** 0.5
        assert 30.0 <= radius <= 60.0


def test_config_error_exit_code(tmp_path, capsys):
    missing_seed = write_cfg(tmp_path, "[bath]\nspin_count = 1\n", "a.cfg")
    assert cli.main(["trace", "-c", missing_seed]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    unknown = write_cfg(tmp_path, "[experiment]\nseed = 1\nwat = 2\n", "b.cfg")
    assert cli.main(["trace", "-c", unknown]) == cli.EXIT_CONFIG
    absent = str(tmp_path / "missing.cfg")
    assert cli.main(["trace", "-c", absent]) == cli.EXIT_CONFIG


def test_model_guard_exit_code(tmp_path, capsys):
    # a 24-dimensional target cannot live on the reduced register
    cfg = write_cfg(tmp_path, """\
[register]
kind = two-qubit

[bath]
spin_count = 1

[pulses]
target = ghz

[experiment]
seed = 5
out = t.csv
""")
    assert cli.main(["trace", "-c", cfg]) == cli.EXIT_GUARD
    assert "nvbath:" in capsys.readouterr().err


def test_out_directory_keeps_configured_name(tmp_path):
    cfg = write_cfg(tmp_path, TINY_TRACE)
    dest = tmp_path / "results"
    dest.mkdir()
    assert cli.main(["trace", "-c", cfg, "--out", str(dest)]) == 0
    assert (dest / "trace.csv").exists()


def test_seed_override_changes_output(tmp_path):
    cfg = write_cfg(tmp_path, TINY_TRACE)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert cli.main(["trace", "-c", cfg, "--out", str(a)]) == 0
    assert cli.main(["trace", "-c", cfg, "--out", str(b), "--seed", "99"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_paper_scale_raises_statistics(tmp_path, monkeypatch):
    captured = {}

    def fake_run_histogram(cfg, jobs):
        captured["cfg"] = cfg
        return SimpleNamespace(meta=[("seed", cfg.seed)], rows=[])

    monkeypatch.setattr(cli, "run_histogram", fake_run_histogram)
    cfg = write_cfg(tmp_path, TINY_HISTOGRAM)
    out = tmp_path / "hist.csv"
    assert cli.main(["histogram", "-c", cfg, "--out", str(out),
                     "--paper-scale"]) == 0
    assert captured["cfg"].baths_per_density == 300
    assert captured["cfg"].n_samples == 200
