import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cipc import cli, model, optimize
from cipc.model import SystemConfig


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_db_conversion():
    assert cli.db_to_linear(10.0) == 10.0
    assert cli.db_to_linear(0.0) == 1.0


def test_outage_passthrough(capsys):
    code, out, _ = run(capsys, "outage", "--nt", "5", "--T", "150", "--R", "0.3", "--pmax-db", "10", "--q", "5")
    assert code == 0
    record = json.loads(out)
    assert record["outage"] == model.outage_probability(SystemConfig(5, 150, 0.3, 10.0), 5.0).outage
    assert record["in_convex_interval"] is True
    assert set(record) >= {"q", "snr", "eps", "pt", "outage", "rate_feasible", "eps_underflowed", "config"}


def test_outage_flags_rate_infeasible(capsys):
    _, out, _ = run(capsys, "outage", "--q", "0.1", "--R", "0.3")
    record = json.loads(out)
    assert record["rate_feasible"] is False
    assert record["in_convex_interval"] is False


def test_sigma2_scaling(capsys):
    _, a, _ = run(capsys, "outage", "--sigma2", "2", "--q", "5")
    _, b, _ = run(capsys, "outage", "--sigma2", "1", "--q", "2.5")
    assert json.loads(a)["eps"] == json.loads(b)["eps"]
    assert json.loads(a)["in_convex_interval"] is None


def test_pmax_linear_escape_hatch(capsys):
    _, a, _ = run(capsys, "outage", "--pmax-linear", "10", "--q", "5")
    _, b, _ = run(capsys, "outage", "--pmax-db", "10", "--q", "5")
    assert json.loads(a)["outage"] == json.loads(b)["outage"]


def test_config_file_and_override(capsys, tmp_path):
    path = tmp_path / "scenario.txt"
    path.write_text("# scenario\nnt = 3\nT=100\nR=0.5\npmax_linear=4\nq=2\n", encoding="utf-8")
    _, out, _ = run(capsys, "outage", "--config", str(path))
    rec = json.loads(out)
    assert rec["config"] == dict(n_t=3, blocklength=100, rate=0.5, p_max=4.0, noise_var=1.0)
    _, out, _ = run(capsys, "outage", "--config", str(path), "--nt", "6", "--pmax-db", "0")
    rec = json.loads(out)
    assert rec["config"]["n_t"] == 6 and rec["config"]["p_max"] == 1.0 and rec["q"] == 2.0


def test_bad_config_file_is_usage_error(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("antennas=4\n", encoding="utf-8")
    code, _, err = run(capsys, "outage", "--config", str(path), "--q", "1")
    assert code == cli.EXIT_USAGE and "usage error" in err


def test_optimize_json(capsys):
    code, out, _ = run(capsys, "optimize", "--nt", "5", "--T", "150", "--R", "0.3", "--pmax-db", "10")
    assert code == 0
    rec = json.loads(out)
    expected = optimize.optimize_q(SystemConfig(5, 150, 0.3, 10.0))
    assert rec["q_star"] == expected.q_star and rec["method"] == "certified_convex"
    assert rec["interval"]["hi"] == 40.0


def test_exit_codes(capsys):
    assert run(capsys, "outage")[0] == cli.EXIT_USAGE
    assert run(capsys, "outage", "--q", "-1")[0] == cli.EXIT_DOMAIN
    assert run(capsys, "outage", "--nt", "0", "--q", "1")[0] == cli.EXIT_DOMAIN
    assert run(capsys, "optimize", "--nt", "1", "--R", "5000")[0] == cli.EXIT_INFEASIBLE
    assert run(capsys, "sweep", "--variable", "q", "--start", "1", "--stop", "2", "--out", "/nonexistent/x.csv")[0] == cli.EXIT_IO
    assert run(capsys, "sweep", "--variable", "q", "--start", "2", "--stop", "1")[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["outage", "--pmax-db", "1", "--pmax-linear", "1", "--q", "1"])
    assert info.value.code == cli.EXIT_USAGE


def test_console_entry_point_exit_status():
    done = subprocess.run(
        [sys.executable, "-m", "cipc.cli", "outage", "--q", "0"], capture_output=True, text=True
    )
    assert done.returncode == cli.EXIT_DOMAIN


def test_q_sweep_csv_round_trip(capsys, tmp_path):
    out = tmp_path / "q.csv"
    code, _, _ = run(
        capsys, "sweep", "--variable", "q", "--start", "0.3", "--stop", "30", "--points", "25",
        "--scale", "log", "--out", str(out),
    )
    assert code == 0
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = read_csv(out)
    assert rows[0] == cli.CSV_HEADER and len(rows) == 26
    cfg = SystemConfig(5, 150, 0.3, 10.0)
    for row in rows[1:]:
        b = model.outage_probability(cfg, float(row[0]))
        for stored, fresh in zip(row[1:4], (b.eps, b.pt, b.outage)):
            assert abs(float(stored) - fresh) <= 1e-12 * max(abs(fresh), 1e-300)
        assert row[4:] == ["", ""]


def test_pmax_sweep_round_trip(capsys, tmp_path):
    out = tmp_path / "p.csv"
    run(capsys, "sweep", "--variable", "p_max_db", "--start", "0", "--stop", "16", "--points", "5", "--out", str(out))
    rows = read_csv(out)[1:]
    for row in rows:
        cfg = SystemConfig(5, 150, 0.3, cli.db_to_linear(float(row[0])))
        res = optimize.optimize_q(cfg)
        assert float(row[4]) == res.q_star
        assert abs(float(row[5]) - res.outage_star) <= 1e-12 * res.outage_star
        assert row[3] == row[5]


def test_rate_sweep_marks_infeasible_rows(capsys, tmp_path):
    out = tmp_path / "r.csv"
    run(
        capsys, "sweep", "--variable", "rate", "--start", "0.1", "--stop", "12", "--points", "4",
        "--pmax-linear", "1", "--nt", "2", "--out", str(out),
    )
    rows = read_csv(out)[1:]
    assert rows[0][4] != cli.INFEASIBLE
    assert rows[-1][1:] == [cli.INFEASIBLE] * 5


def test_sweep_default_output_dir_from_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(capsys, "sweep", "--variable", "rate", "--start", "0.1", "--stop", "0.5", "--points", "3")
    assert code == 0 and (tmp_path / "sweep_rate.csv").exists()


def test_fig2_preset(capsys, tmp_path):
    code, out, _ = run(capsys, "fig2", "--nt", "4", "--T", "150", "--out-dir", str(tmp_path))
    assert code == 0
    rows = read_csv(tmp_path / "fig2_nt4_T150.csv")[1:]
    assert len(rows) == 400
    x = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[3]) for r in rows])
    cfg = SystemConfig(4, 150, 0.3, 10.0)
    assert x[0] > cfg.q_rate and x[-1] == pytest.approx(1.2 * cfg.knee, rel=1e-12)
    i = int(np.argmin(y))
    assert 0 < i < len(y) - 1
    # one descent then one ascent: a unique interior minimum
    assert np.all(np.diff(y[: i + 1]) <= 0) and np.all(np.diff(y[i:]) >= 0)


def test_fig2_all_presets(capsys, tmp_path):
    run(capsys, "fig2", "--points", "20", "--out-dir", str(tmp_path))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig2_nt3_T100.csv", "fig2_nt3_T150.csv", "fig2_nt4_T100.csv", "fig2_nt4_T150.csv"]


def test_fig3_preset(capsys, tmp_path):
    run(capsys, "fig3", "--points", "17", "--out-dir", str(tmp_path))
    for rate in cli.FIG_RATES:
        col = [float(r[5]) for r in read_csv(tmp_path / f"fig3_R{rate}.csv")[1:]]
        assert len(col) == 17 and np.all(np.diff(col) <= 1e-15)


def test_fig4_preset(capsys, tmp_path):
    run(capsys, "fig4", "--points", "17", "--out-dir", str(tmp_path / "nested"))
    for rate in cli.FIG_RATES:
        col = [float(r[4]) for r in read_csv(tmp_path / "nested" / f"fig4_R{rate}.csv")[1:]]
        assert np.all(np.diff(col) >= 0)


def test_simulate_deterministic(capsys):
    args = ("simulate", "--trials", "20000", "--seed", "42", "--q", "3")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first == second
    assert "seed=42" in first[1]


def test_simulate_json_grid(capsys):
    code, out, _ = run(capsys, "simulate", "--q-grid", "--trials", "1000000", "--seed", "7", "--json")
    assert code == 0
    records = json.loads(out)["records"]
    assert len(records) == 20
    for r in records:
        assert abs(r["outage_delta"]) <= 4.0


def test_simulate_single_trial_warns(capsys):
    code, out, err = run(capsys, "simulate", "--trials", "1", "--q", "0.3", "--json")
    assert code == 0
    rec = json.loads(out)["records"][0]
    assert rec["std_err_outage"] == 0.0 and rec["outage_delta"] is None
    assert "warning" in err


def test_simulate_default_seed_printed(capsys):
    _, out, _ = run(capsys, "simulate", "--trials", "100", "--q", "1")
    assert f"seed={cli.DEFAULT_SEED}" in out


def test_simulate_needs_q(capsys):
    assert run(capsys, "simulate")[0] == cli.EXIT_USAGE
