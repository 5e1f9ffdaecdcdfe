import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vlasovlab.grid import build_grid
from vlasovlab.report import (REPORT_HEADER, ReportRow, emit_report, read_report,
                              resolution_tag, simulation_rows)
from vlasovlab.scenario_io import parse_config_text, build_scenario
from vlasovlab.solver import run_simulation


def test_empty_report_is_header_only(tmp_path):
    emit_report([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_bytes() == (",".join(REPORT_HEADER) + "\n").encode()
    assert read_report(tmp_path / "r.csv") == []


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(t=finite, v=finite, q=st.text("abcdefgh_", min_size=1), p=st.text("k=;r.,0123", max_size=12))
def test_row_roundtrips_bit_exactly(tmp_path_factory, t, v, q, p):
    path = tmp_path_factory.mktemp("r") / "r.csv"
    row = ReportRow(t, q, p, v, "64x128/dt=0.001")
    emit_report([row], path)
    (back,) = read_report(path)
    assert back == row and math.copysign(1, back.value) == math.copysign(1, v)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_non_finite_value_rejected(bad):
    with pytest.raises(ValueError, match="not finite"):
        ReportRow(0.0, "x", "", bad, "")


def test_bad_header(tmp_path):
    (tmp_path / "r.csv").write_text("t,quantity,params,value,resolution\n")
    with pytest.raises(ValueError, match="header"):
        read_report(tmp_path / "r.csv")


def test_resolution_tag():
    g = build_grid(32, 64, 8.0)
    assert resolution_tag(g) == "32x64"
    assert resolution_tag(g, 0.1) == "32x64/dt=0.10000000000000001"


def test_simulation_rows_count():
    cfg = parse_config_text("""
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
requests = sobolev:0:0, moment:2:0
""")
    sc = build_scenario(cfg)
    out = run_simulation(sc)
    rows = simulation_rows(out, sc)
    n_norm = len(out.snapshots) * 2
    assert len(out.snapshots) == 3
    assert len(rows) == n_norm + len(out.contraction_ratios)
    assert all(r.quantity == "contraction_ratio" for r in rows[n_norm:])
    assert [r.params for r in rows[n_norm:]] == [f"sweep={i + 2}" for i in
                                                 range(len(out.contraction_ratios))]
    assert rows[0].value == pytest.approx(np.sqrt(np.sum(sc.f0.values**2) * sc.grid.dx * sc.grid.dv),
                                          rel=1e-2)
