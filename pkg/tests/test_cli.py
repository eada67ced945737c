import csv
import json

import pytest

from eicic import io
from eicic.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED, EXIT_OK, main

SMALL = "num_ues: 30\nnum_rbs: 10\nseed: 4\n"


def write_config(tmp_path, text=SMALL, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def no_temp_files(directory):
    return not [p for p in directory.iterdir() if p.name.endswith(".tmp")]


def test_generate_writes_scenario(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out), "--dump-rates"]) == EXIT_OK
    for name in ("ues.csv", "enbs.csv", "gains.npz", "config.yaml", "manifest.json", "rates.csv"):
        assert (out / name).is_file()
    ues = read_rows(out / "ues.csv")
    assert len(ues) == 120
    assert list(ues[0]) == ["ue_id", "x", "y", "weight"]
    enbs = read_rows(out / "enbs.csv")
    assert list(enbs[0]) == ["enb_id", "tier", "x", "y", "power_dbm"]
    assert [e["tier"] for e in enbs].count("pico") == 6
    assert float(enbs[0]["power_dbm"]) == pytest.approx(46.0)
    rates = read_rows(out / "rates.csv")
    assert list(rates[0]) == ["ue_id", "logical_enb_id", "kind", "rb", "rate_nabs", "rate_abs"]
    assert len(rates) == 120 * 15 * 100
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "generate" and manifest["seed"] == 0
    assert no_temp_files(out)


def test_generate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    for name in ("a", "b"):
        assert main(["generate", "--config", cfg, "--seed", "9", "--out", str(tmp_path / name)]) == EXIT_OK
    for name in ("ues.csv", "enbs.csv", "gains.npz", "config.yaml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_invalid_config_has_line_number(tmp_path, capsys):
    cfg = write_config(tmp_path, "num_ues: 30\n\nhotspot_radius: 300\n")
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "cfg.yaml:3" in err and "hotspot_radius" in err
    assert not (tmp_path / "x" / "manifest.json").exists()


@pytest.mark.parametrize(
    "text,line",
    [
        ("num_ues: 30\nfoo: 1\n", 2),
        ("num_ues: thirty\n", 1),
        ("num_ues: 30\nnum_rbs: [1\n", 3),
        ("seed: 1\nnum_ues: 30\nnum_ues: 40\n", 3),
        ("preset: huge\n", 1),
    ],
)
def test_config_errors(tmp_path, capsys, text, line):
    cfg = write_config(tmp_path, text)
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert f"cfg.yaml:{line}:" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    config = io.parse_config("preset: full\nnum_ues: 63\nmacro_pathloss: [128.1, 37.6]\n")
    assert config.num_macro_sites == 7 and config.num_ues == 63
    again = io.parse_config(io.dump_config(config))
    assert again == config


def test_missing_config_file(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_solve_report_pipeline(tmp_path):
    gen, run = tmp_path / "gen", tmp_path / "run"
    assert main(["generate", "--out", str(gen)]) == EXIT_OK
    assert main(["solve", "--scenario", str(gen), "--out", str(run)]) == EXIT_OK
    solution = json.loads((run / "solution.json").read_text())
    assert solution["converged"] is True
    assert solution["iterations"] <= 50
    trace = read_rows(run / "trace.csv")
    assert list(trace[0]) == ["iteration", "utility", "handovers", "beta"]
    assert (run / "manifest.json").is_file()

    assert main(["report", str(run)]) == EXIT_OK
    summary = json.loads((run / "summary.json").read_text())
    assert summary["utility"] == pytest.approx(float(trace[-1]["utility"]), abs=1e-9)
    assert summary["beta"] == pytest.approx(solution["beta"])
    assert 0.0 < summary["jain"] <= 1.0
    assert summary["upper_bound"] >= summary["utility"] - 1e-6
    metrics = read_rows(run / "metrics.csv")
    assert list(metrics[0]) == ["ue_id", "serving_enb", "tier", "throughput_bps"]
    assert len(metrics) == 120
    cdf = read_rows(run / "cdf.csv")
    assert float(cdf[-1]["fraction"]) == 1.0
    assert no_temp_files(run)


def test_solve_is_reproducible(tmp_path):
    cfg = write_config(tmp_path)
    for name in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / name)]) == EXIT_OK
    for name in ("association.csv", "trace.csv", "solution.json", "shares.npz"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_relaxed_emits_bound(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--association", "relaxed", "--schedule", "closed", "--out", str(out)]) == EXIT_OK
    solution = json.loads((out / "solution.json").read_text())
    assert solution["upper_bound"] is not None
    assert solution["label"] == "(NLP, Optimal, PF)"


def test_solve_zero_picos(tmp_path):
    cfg = write_config(tmp_path, "picos_per_sector: 0\nnum_ues: 20\nnum_rbs: 5\n")
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert main(["report", str(out)]) == EXIT_OK
    assert json.loads((out / "summary.json").read_text())["beta"] == 0.0


def test_solve_non_convergence_exit_code(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--max-iters", "1", "--out", str(out)]) == EXIT_NOT_CONVERGED
    assert json.loads((out / "solution.json").read_text())["converged"] is False
    assert (out / "manifest.json").is_file()


def test_scenario_flag_conflicts(tmp_path):
    gen = tmp_path / "gen"
    assert main(["generate", "--out", str(gen)]) == EXIT_OK
    assert main(["solve", "--scenario", str(gen), "--seed", "3", "--out", str(tmp_path / "r")]) == EXIT_CONFIG


def test_baseline_and_starvation(tmp_path):
    cfg = write_config(tmp_path)
    ok = tmp_path / "ok"
    assert main(["baseline", "--config", cfg, "--association", "biased_rsrp", "--bias-db", "18", "--beta", "0.4", "--out", str(ok)]) == EXIT_OK
    assert json.loads((ok / "solution.json").read_text())["label"] == "(CRE 18dB, 0.4, PF)"
    assert main(["report", str(ok), "--out", str(tmp_path / "rep")]) == EXIT_OK
    assert (tmp_path / "rep" / "summary.json").is_file()

    bad = tmp_path / "bad"
    code = main(["baseline", "--config", cfg, "--association", "biased_rsrp", "--bias-db", "18", "--beta", "0", "--out", str(bad)])
    assert code == EXIT_INFEASIBLE
    solution = json.loads((bad / "solution.json").read_text())
    assert solution["starved"] and solution["utility"] is None


def test_sweep_grid_and_purity(tmp_path):
    cfg = write_config(tmp_path)
    for name in ("a", "b"):
        args = ["sweep", "--config", cfg, "--out", str(tmp_path / name), "--threads", "3"]
        assert main(args) == EXIT_OK
    rows = read_rows(tmp_path / "a" / "sweep.csv")
    assert len(rows) == 24
    assert sorted({float(r["bias_db"]) for r in rows}) == [0.0, 6.0, 12.0, 18.0]
    assert sorted({float(r["beta"]) for r in rows}) == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()

    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "run")]) == EXIT_OK
    joint = json.loads((tmp_path / "run" / "solution.json").read_text())["utility"]
    assert max(float(r["utility"]) for r in rows) <= joint


def test_sweep_multiple_seeds(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "s"
    assert main(["sweep", "--config", cfg, "--seeds", "2", "--bias-grid", "0,9", "--beta-grid", "0:0.2:0.2", "--out", str(out)]) == EXIT_OK
    rows = read_rows(out / "sweep.csv")
    assert len(rows) == 8
    assert sorted({int(r["seed"]) for r in rows}) == [4, 5]


def test_report_missing_files(tmp_path, capsys):
    assert main(["report", str(tmp_path / "nothing")]) != EXIT_OK
    run = tmp_path / "run"
    cfg = write_config(tmp_path)
    assert main(["solve", "--config", cfg, "--out", str(run)]) == EXIT_OK
    (run / "shares.npz").unlink()
    assert main(["report", str(run)]) != EXIT_OK


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    target = tmp_path / "f.txt"
    io.atomic_write_text(target, "old")

    # the payload fails inside the temp-file write, after the temp file exists
    with pytest.raises(TypeError):
        io.atomic_write_bytes(target, 12345)
    assert target.read_text() == "old"
    assert no_temp_files(tmp_path)
