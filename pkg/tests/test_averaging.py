import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import dblquad

from vlasovlab.averaging import (AVERAGING_HEADER, Kernel, apply_K, apply_K_straight,
                                 gaussian_kernel, gaussian_oracle, ratio_slope, smoothing_ratio,
                                 spike_kernel, straight_grid, straighten_variable,
                                 write_ratio_csv, zero_kernel)
from vlasovlab.grid import SpatialField, build_grid
from vlasovlab.models import AdvectionField

CL = AdvectionField()
REL = AdvectionField("relativistic", 1.0)
G = build_grid(64, 256, 8.0)


def _quad_oracle(m, t, x):
    """Re[e^{ikx} (ik) int_0^t Uhat(k u) du] with Uhat by direct 2-D quadrature."""
    k = 2 * np.pi * m
    val, _ = dblquad(lambda v, u: np.exp(-v**2 / 2) * np.cos(k * u * v), 0, t, -12, 12,
                     epsabs=1e-13, epsrel=1e-12)
    return -k * val * np.sin(k * x)


def test_trivial_inputs_give_zero():
    assert np.abs(apply_K(gaussian_kernel(), np.ones(64), CL, 0.3, G).values).max() < 1e-13
    H = np.cos(2 * np.pi * G.x)
    assert np.all(apply_K(zero_kernel(), H, CL, 0.3, G).values == 0)
    assert np.all(apply_K(gaussian_kernel(), H, CL, 0.0, G).values == 0)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_single_mode_oracle(m):
    t = 0.25
    ref = _quad_oracle(m, t, G.x)
    assert np.abs(gaussian_oracle(m, t, G.x) - ref).max() < 1e-9
    out = apply_K(gaussian_kernel(), np.cos(2 * np.pi * m * G.x), CL, t, G).values
    assert np.abs(out - ref).max() < 1e-6


def test_self_convergence_gate():
    H = np.cos(2 * np.pi * 3 * G.x) + 0.5 * np.sin(2 * np.pi * 5 * G.x)
    base = apply_K(gaussian_kernel(), H, REL, 0.4, G, 129).values
    fine = apply_K(gaussian_kernel(), H, REL, 0.4, build_grid(64, 512, 8.0), 257).values
    assert np.abs(base - fine).max() < 1e-7


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(alpha, beta):
    g = build_grid(32, 64, 8.0)
    H1 = np.cos(2 * np.pi * g.x)
    H2 = np.sin(6 * np.pi * g.x)
    U1, U2 = gaussian_kernel(1.0), gaussian_kernel(0.5)
    K = lambda U, H: apply_K(U, H, REL, 0.3, g, 33).values
    lhs = K(U1, alpha * H1 + beta * H2)
    assert np.abs(lhs - alpha * K(U1, H1) - beta * K(U1, H2)).max() < 1e-12 * (1 + abs(alpha) + abs(beta))
    U12 = Kernel(lambda t, s, x, v: alpha * U1.U(t, s, x, v) + beta * U2.U(t, s, x, v))
    assert np.abs(K(U12, H1) - alpha * K(U1, H1) - beta * K(U2, H1)).max() < 1e-12 * (1 + abs(alpha) + abs(beta))


def test_time_dependent_H():
    g = build_grid(32, 128, 8.0)
    H = lambda s: SpatialField(32, (1 + s) * np.cos(2 * np.pi * g.x))
    a = apply_K(gaussian_kernel(), H, CL, 0.2, g).values
    b = apply_K(gaussian_kernel(), lambda s: (1 + s) * np.cos(2 * np.pi * g.x), CL, 0.2, g).values
    assert np.array_equal(a, b)


def test_straighten_variable():
    K = gaussian_kernel()
    assert straighten_variable(K, CL) is K
    Kw = straighten_variable(K, REL)
    x = np.zeros((1, 1))
    assert Kw.evaluate(0, 0, x, np.array([[0.0]]))[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(Kw.evaluate(0, 0, x, np.array([[-1.0, 1.0, 1.5]])) == 0)
    w = 0.6
    v = float(REL.inverse(w))
    assert Kw.evaluate(0, 0, x, np.array([[w]]))[0, 0] == pytest.approx(
        np.exp(-v**2 / 2) * (1 + v**2) ** 1.5, rel=1e-13)


@pytest.mark.parametrize("a,nv", [(CL, 256), (REL, 512)])
def test_modified_straight_consistency(a, nv):
    g = build_grid(64, nv, 8.0)
    H = np.cos(2 * np.pi * g.x) + 0.3 * np.sin(6 * np.pi * g.x)
    K = gaussian_kernel()
    mod = apply_K(K, H, a, 0.25, g).values
    w = g.v if a.kind == "classical" else straight_grid(a, g, 8193)
    straight = apply_K_straight(straighten_variable(K, a), H, 0.25, w).values
    assert np.abs(mod - straight).max() < 1e-6


def test_kernel_certificates():
    K = gaussian_kernel()
    assert K.meets_hypotheses
    assert not spike_kernel(0.1).meets_hypotheses
    cert = K.certificate(lam=2.0, provided_weight=10.0)
    assert cert["required_r"] == 8.0 + 3 * (1 + 8) and cert["shortfall"]
    v = np.linspace(-8, 8, 33)[None, :]
    assert K.check_decay(0, 0, np.zeros((1, 1)), v) <= 1.0


def test_smoothing_ratio_tables():
    g = build_grid(32, 128, 6.0)
    modes = [1, 2, 4, 8]
    assert all(r.ratio == 0 for r in smoothing_ratio(zero_kernel(), CL, modes, 0.5, g))
    rows = smoothing_ratio(gaussian_kernel(), CL, modes, 0.5, g)
    ratios = np.array([r.ratio for r in rows])
    assert np.all(ratios <= 3 * ratios[0])
    assert ratio_slope(rows) < 0.1
    spike = smoothing_ratio(spike_kernel(g.dv), CL, modes, 0.5, g)
    sr = np.array([r.ratio for r in spike])
    assert np.all(np.diff(sr) > 0) and sr[-1] > 3 * sr[0]
    with pytest.raises(ValueError):
        smoothing_ratio(gaussian_kernel(), CL, [0], 0.5, g)


def test_write_ratio_csv(tmp_path):
    rows = smoothing_ratio(gaussian_kernel(), CL, [1, 2], 0.2, build_grid(16, 64, 6.0), n_tau=5)
    p = tmp_path / "ratios.csv"
    write_ratio_csv(rows, p)
    with open(p) as fh:
        data = list(csv.reader(fh))
    assert data[0] == AVERAGING_HEADER and len(data) == 3
    assert float(data[1][1]) == rows[0].ratio
