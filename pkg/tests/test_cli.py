import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vlasovlab.cli import EXIT_HORIZON, EXIT_INVALID, EXIT_OK, main
from vlasovlab.grid import load_field
from vlasovlab.report import read_report

SMALL = """
[grid]
nx = 16
nv = 32
v_cut = 8.0
[advection]
kind = classical
[model]
kind = poisson
[initial]
kind = gaussian_perturbed
[run]
T = 0.04
dt = 0.01
output_cadence = 2
[norms]
requests = sobolev:0:0, sobolev:1:1
"""

# strongly attracting field over a long horizon: Picard cannot settle in 3 sweeps
HORIZON = """
[grid]
nx = 32
nv = 64
v_cut = 8.0
[advection]
kind = classical
[model]
kind = poisson
sign = -1
[initial]
kind = gaussian_perturbed
eps = 0.5
[run]
T = 2.0
dt = 0.02
picard_max = 3
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_thresholds(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["thresholds", "--d", "1", "--lambda", "0", "--r0", "0", "--out", str(out)]) == 0
    rows = {r.quantity: r.value for r in read_report(out)}
    assert rows == {"regularity_index_N": 5.5, "weight_index_R": 4.5}
    main(["thresholds", "--d", "3", "--lambda", "2", "--r0", "1", "--out", str(out)])
    rows = {r.quantity: r.value for r in read_report(out)}
    assert rows == {"regularity_index_N": 8.5, "weight_index_R": 1.5 + 2 * 3 * 4 + 1}


def test_counterexample1(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["counterexample1", "--k", "2", "--t", "1", "--direct", "--out", str(out)]) == 0
    rows = read_report(out)
    assert len(rows) == 4
    exact, quad = rows[0].value, rows[1].value
    assert abs(quad - exact) <= 1e-8 * exact
    assert rows[2].value == pytest.approx(exact, rel=1e-12)  # t = 1: both forms agree
    assert main(["counterexample1", "--k", "2", "--t", "5", "--out", str(out)]) == EXIT_INVALID


def test_invalid_inputs(tmp_path, small):
    out = str(tmp_path / "o.csv")
    assert main(["simulate", str(tmp_path / "missing.ini"), "--out", out]) == EXIT_INVALID
    bad = tmp_path / "bad.ini"
    bad.write_text(SMALL.replace("nx = 16", "nx = 100"))
    assert main(["simulate", str(bad), "--out", out]) == EXIT_INVALID
    bad.write_text(SMALL.replace("[run]", "[run]\nspeed = 3"))
    assert main(["simulate", str(bad), "--out", out]) == EXIT_INVALID
    with pytest.raises(SystemExit):
        main(["simulate", str(small)])  # --out is required


def test_simulate_and_dump(tmp_path, small):
    out, dump = tmp_path / "s.csv", tmp_path / "dump"
    assert main(["simulate", str(small), "--out", str(out), "--dump-dir", str(dump)]) == EXIT_OK
    rows = read_report(out)
    norms = [r for r in rows if r.quantity.startswith("norm_")]
    assert len(norms) == 3 * 2
    assert sorted({r.time for r in norms}) == pytest.approx([0.0, 0.02, 0.04])
    assert all(r.resolution == "16x32/dt=0.01" for r in rows)
    ratios = [r.value for r in rows if r.quantity == "contraction_ratio"]
    assert ratios and max(ratios) < 0.5
    snaps = sorted(dump.glob("*.vlg"))
    assert len(snaps) == 3
    f = load_field(snaps[-1])
    assert f.time == pytest.approx(0.04) and f.grid.shape == (16, 32)
    assert np.all(np.isfinite(f.values))


def test_horizon_exit(tmp_path):
    p = tmp_path / "h.ini"
    p.write_text(HORIZON)
    assert main(["simulate", str(p), "--out", str(tmp_path / "h.csv")]) == EXIT_HORIZON


def test_gate_halves_horizon(tmp_path):
    p = tmp_path / "h.ini"
    p.write_text(HORIZON.replace("picard_max = 3", "picard_max = 12"))
    out = tmp_path / "g.csv"
    assert main(["simulate", str(p), "--gate", "0.01", "--out", str(out)]) == EXIT_OK
    rows = read_report(out)
    ratios = [r for r in rows if r.quantity == "contraction_ratio"]
    assert ratios and all(r.value <= 0.01 for r in ratios)
    assert ratios[0].time == 0.25  # T = 2 halved three times


def test_averaging_and_commutation(tmp_path):
    sc = tmp_path / "a.ini"
    sc.write_text(SMALL.replace("nx = 16\nnv = 32", "nx = 32\nnv = 64").replace(
        "v_cut = 8.0", "v_cut = 6.0").replace("kind = poisson", "kind = external\namplitude = 1.0").replace(
        "kind = gaussian_perturbed", "kind = gaussian_perturbed\nvth = 0.75"))
    out = tmp_path / "a.csv"
    assert main(["averaging-probe", str(sc), "--out", str(out)]) == EXIT_OK
    rows = read_report(out)
    assert [r.params.split(";")[0] for r in rows] == ["mode=1", "mode=2", "mode=4", "mode=8"]
    assert all(r.value > 0 for r in rows)
    assert main(["commutation-check", str(sc), "--levels", "2", "--out", str(out)]) == EXIT_OK
    rows = read_report(out)
    res = [r.value for r in rows if r.quantity == "commutation_residual"]
    assert len(res) == 2 and res[1] < res[0]
    assert main(["commutation-check", str(sc), "--levels", "4", "--out", str(out)]) == EXIT_INVALID


def test_superposition_cli(tmp_path):
    out = tmp_path / "sp.csv"
    assert main(["superposition", "--which", "example3", "--T", "0.05", "--no-step-error",
                 "--out", str(out)]) == EXIT_OK
    rows = read_report(out)
    sup = [r.value for r in rows if r.quantity == "sup_decoupling_residual"]
    assert len(sup) == 1 and sup[0] < 1e-4
    assert not any(r.quantity == "step_error" for r in rows)


def test_console_entry_point(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "vlasovlab.cli", "thresholds", "--d", "1",
                           "--lambda", "0", "--r0", "0", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().splitlines()[0] == "time,quantity,params,value,resolution"
