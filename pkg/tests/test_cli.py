import csv

import numpy as np
import pytest

from noncolliding.cli import main

TINY = """
[system]
d = 3
gamma = nearest_neighbor(1.0)
b = sin
sigma = halfsin2
x0 = arithmetic(1.0, 1.0)
T = 1.0

[experiment]
schemes = sim, siem
k_min = 1
k_max = 2
paths = 4
seed = 11
"""


@pytest.fixture
def tiny_cfg(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# --- simulate ------------------------------------------------------------------


def test_simulate_writes_ordered_trajectories(tiny_cfg, tmp_path):
    out = tmp_path / "traj"
    rc = main(["simulate", "--config", str(tiny_cfg), "--out", str(out), "--level", "3"])
    assert rc == 0
    files = sorted(out.glob("trajectory_*.csv"))
    assert [f.name for f in files] == ["trajectory_siem_000.csv", "trajectory_sim_000.csv"]
    for f in files:
        rows = read_csv(f)
        assert rows[0] == ["t", "x1", "x2", "x3"]
        assert len(rows) == 1 + 9
        for row in rows[1:]:
            x = [float(v) for v in row[1:]]
            assert x[0] < x[1] < x[2]


def test_simulate_additive_noise_matches_increments(tmp_path):
    cfg = tmp_path / "oneparticle.cfg"
    cfg.write_text(
        TINY.replace("d = 3", "d = 1")
        .replace("x0 = arithmetic(1.0, 1.0)", "x0 = 2.0")
        .replace("b = sin", "b = zero")
        .replace("sigma = halfsin2", "sigma = constant(0.5)")
    )
    out = tmp_path / "traj1"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--level", "2"]) == 0
    rows = read_csv(out / "trajectory_sim_000.csv")
    vals = np.array([float(r[1]) for r in rows[1:]])
    from noncolliding.brownian import generate, split

    inc = generate(split(11, 0), 1, 2, 1.0).increments[0]
    expect = 2.0 + 0.5 * np.concatenate([[0.0], np.cumsum(inc)])
    assert np.allclose(vals, expect, rtol=1e-12)


def test_simulate_path_abort_exits_3(tiny_cfg, tmp_path, capsys):
    rc = main(
        ["simulate", "--config", str(tiny_cfg), "--out", str(tmp_path / "x"), "solver.max_iter=1"]
    )
    assert rc == 3
    assert "step" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 2


# --- converge ------------------------------------------------------------------


def test_converge_emits_three_csvs(tiny_cfg, tmp_path):
    out = tmp_path / "conv"
    rc = main(["converge", "--config", str(tiny_cfg), "--out", str(out)])
    assert rc == 0
    mse = read_csv(out / "mse.csv")
    assert mse[0] == ["scheme", "k", "mse", "stderr", "discards"]
    assert len(mse) == 1 + 2 * 2  # two schemes, k = 1..2
    assert {r[0] for r in mse[1:]} == {"sim", "siem"}
    for r in mse[1:]:
        assert float(r[2]) > 0 and r[4] == "0"
    rates = read_csv(out / "rates.csv")
    assert rates[0] == ["scheme", "beta", "intercept", "r2"]
    assert len(rates) == 3
    for r in rates[1:]:
        float(r[1]), float(r[2]), float(r[3])
    plot = read_csv(out / "plotdata.csv")
    assert plot[0] == ["scheme", "k", "log2_mse", "fitted_line"]
    for r in plot[1:]:
        assert float(r[2]) < 0 and float(r[3]) < 0


def test_converge_k_range_violation_exits_2(tiny_cfg, tmp_path):
    rc = main(
        ["converge", "--config", str(tiny_cfg), "--out", str(tmp_path), "experiment.k_max=1"]
    )
    assert rc == 2


def test_converge_negative_gamma_exits_2(tiny_cfg, tmp_path, capsys):
    rc = main(
        [
            "converge", "--config", str(tiny_cfg), "--out", str(tmp_path),
            "system.gamma=matrix(0 -1 0; -1 0 1; 0 1 0)",
        ]
    )
    assert rc == 2
    assert "gamma" in capsys.readouterr().err


def test_converge_discard_budget_exits_3(tiny_cfg, tmp_path):
    rc = main(
        ["converge", "--config", str(tiny_cfg), "--out", str(tmp_path), "solver.max_iter=1"]
    )
    assert rc == 3


def test_converge_exact_coupling_flags_degenerate(tmp_path, capsys):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text(
        TINY.replace("d = 3", "d = 1")
        .replace("x0 = arithmetic(1.0, 1.0)", "x0 = 0.0")
        .replace("b = sin", "b = zero")
        .replace("sigma = halfsin2", "sigma = constant(0.5)")
    )
    out = tmp_path / "conv0"
    rc = main(["converge", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    rates = read_csv(out / "rates.csv")
    assert all(r[1] == "DegenerateFit" for r in rates[1:])


def test_converge_quick_caps_paths(tiny_cfg, tmp_path, capsys):
    rc = main(["converge", "--config", str(tiny_cfg), "--out", str(tmp_path / "q"), "--quick"])
    assert rc == 0
    assert "paths=4" in capsys.readouterr().out  # already below the cap


def test_preset_configs_resolve(tmp_path):
    rc = main(
        [
            "converge", "--config", "case2", "--out", str(tmp_path / "p"),
            "experiment.paths=4", "experiment.k_max=2",
        ]
    )
    assert rc == 0


# --- config-dump ------------------------------------------------------------------


def test_config_dump_round_trips(tiny_cfg, capsys):
    assert main(["config-dump", "--config", str(tiny_cfg), "experiment.paths=9"]) == 0
    text = capsys.readouterr().out
    from noncolliding.config import parse_config

    cfg = parse_config(text)
    assert cfg.paths == 9
    assert cfg.d == 3


def test_config_dump_validates(tiny_cfg):
    assert main(["config-dump", "--config", str(tiny_cfg), "experiment.k_max=0"]) == 2


# --- validate ---------------------------------------------------------------------


def test_validate_quick_passes(capsys):
    rc = main(["validate", "--quick"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.count("PASS") == 4
    assert "FAIL" not in out


def test_validate_loosened_tolerance_fails(capsys):
    rc = main(["validate", "--quick", "solver.tol=1e-2"])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out
