import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from vlasovlab import interp
from vlasovlab.errors import NotADiffeomorphismError
from vlasovlab.grid import build_grid
from vlasovlab.interp import (MonotoneCubic, eval_near_shift, fourier_eval, pchip_local,
                              periodic_inverse, tensor_interp_direct, tensor_interp_shifted)


def _trig(x):
    return 1 + 0.3 * np.cos(2 * np.pi * x) + 0.2 * np.sin(6 * np.pi * x + 0.4)


def test_fourier_eval_exact_on_band_limited():
    x = np.arange(32) / 32
    pts = np.random.default_rng(1).uniform(-2, 3, 200)
    assert np.abs(fourier_eval(_trig(x), pts) - _trig(pts)).max() < 1e-13
    d = fourier_eval(_trig(x), pts, deriv=1)
    ref = -0.6 * np.pi * np.sin(2 * np.pi * pts) + 1.2 * np.pi * np.cos(6 * np.pi * pts + 0.4)
    assert np.abs(d - ref).max() < 1e-12


def test_eval_near_shift_matches_direct():
    nx = 64
    x = np.arange(nx) / nx
    vals = np.stack([_trig(x), _trig(x + 0.1)], axis=1)
    rng = np.random.default_rng(2)
    shift = np.array([0.013, -0.4])
    delta = 1e-4 * rng.standard_normal((nx, 2))
    out = eval_near_shift(np.fft.rfft(vals, axis=0), nx, shift, delta)
    ref = np.stack([_trig(x + shift[0] + delta[:, 0]), _trig(x + 0.1 + shift[1] + delta[:, 1])], 1)
    assert np.abs(out - ref).max() < 1e-13
    assert eval_near_shift(np.fft.rfft(vals, axis=0), nx, shift, 0.5 + delta) is None


def _stencil(f, v, s, h, limited=True):
    return pchip_local(f(v - 2 * h), f(v - h), f(v), f(v + h), f(v + 2 * h), f(v + 3 * h), s, h,
                       limited)


def test_hermite_reproduces_cubics_away_from_limiter():
    p = lambda v: 0.5 + v - 0.3 * v**2 + 0.1 * v**3
    v = np.linspace(-2, 2, 41)
    out = _stencil(p, v, 0.37, 0.1, limited=False)
    assert np.abs(out - p(v + 0.037)).max() < 1e-13


def test_fourth_order_on_gaussian():
    f = lambda v: np.exp(-v**2 / 2)
    errs = []
    for h in (0.2, 0.1, 0.05):
        v = np.arange(-6, 6, h)
        errs.append(np.abs(_stencil(f, v, 0.3, h) - f(v + 0.3 * h)).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.5), orders


@given(hnp.arrays(float, 12, elements=st.floats(0, 1)), st.floats(0, 1))
def test_monotone_data_gives_monotone_interpolant(inc, s):
    y = np.cumsum(inc)
    j = np.arange(2, 9)
    h = 0.5
    vals = pchip_local(y[j - 2], y[j - 1], y[j], y[j + 1], y[j + 2], y[j + 3], s, h)
    lo = np.minimum(y[j], y[j + 1])
    hi = np.maximum(y[j], y[j + 1])
    tol = 1e-12 * (1 + np.abs(y).max())
    assert np.all(vals >= lo - tol) and np.all(vals <= hi + tol)


@given(hnp.arrays(float, (6, 30), elements=st.floats(-5, 5)),
       hnp.arrays(float, (6, 30), elements=st.floats(-5, 5)),
       st.floats(-3, 3), st.floats(0, 1))
def test_unlimited_variant_is_linear(a, b, c, s):
    rows = lambda y: [y[i] for i in range(6)]
    lhs = pchip_local(*rows(a + c * b), s, 0.25, False)
    rhs = pchip_local(*rows(a), s, 0.25, False) + c * pchip_local(*rows(b), s, 0.25, False)
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(a).max() + abs(c) * np.abs(b).max())


def test_snap_floor_ignores_roundoff_noise():
    y = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    noisy = y + np.array([0, 0, 1e-15, 0, 0, 0])
    a = pchip_local(*y, 0.4, 1.0)
    b = pchip_local(*noisy, 0.4, 1.0)
    assert abs(a - b) < 1e-14
    assert interp.SNAP == 1e-13


def test_tensor_paths_agree_and_are_accurate():
    g = build_grid(64, 128, 8.0)
    X, V = g.mesh()
    f = _trig(X) * np.exp(-V**2 / 2)
    shift = -1e-3 * g.v
    rng = np.random.default_rng(0)
    delta = 1e-6 * rng.standard_normal(g.shape)
    Vf = V + 3e-3 * np.sin(2 * np.pi * X)
    fast = tensor_interp_shifted(f, g.v[0], g.dv, shift, delta, Vf)
    Xf = X + shift[None, :] + delta
    ref = tensor_interp_direct(f, g.v[0], g.dv, Xf, Vf)
    assert np.abs(fast - ref).max() < 1e-13
    exact = _trig(Xf) * np.exp(-Vf**2 / 2)
    assert np.abs(ref - exact).max() < 1e-5


def test_outside_velocity_grid_is_zero():
    g = build_grid(8, 16, 2.0)
    f = np.ones(g.shape)
    X = np.zeros((1, 2))
    V = np.array([[-10.0, 10.0]])
    assert np.all(tensor_interp_direct(f, g.v[0], g.dv, X, V) == 0)


def test_monotone_cubic_inverse_roundtrip():
    xs = np.linspace(-4, 4, 81)
    ys = xs + 0.01 * np.sin(3 * xs)
    mc = MonotoneCubic(xs, ys)
    w = np.linspace(ys[0], ys[-1], 1001)
    assert np.abs(mc(mc.inverse(w)) - w).max() < 1e-12
    assert np.isnan(mc.inverse(np.array([ys[-1] + 1]))[0])


def test_monotone_cubic_rejects_non_monotone():
    xs = np.linspace(0, 1, 11)
    with pytest.raises(NotADiffeomorphismError):
        MonotoneCubic(xs, np.sin(6 * xs)).inverse(0.5)
    with pytest.raises(ValueError):
        MonotoneCubic([0, 0, 1], [0, 1, 2])


def test_periodic_inverse():
    nx = 64
    x0 = np.arange(nx) / nx
    D = 0.05 * np.sin(2 * np.pi * x0)[:, None]
    targets = np.linspace(-0.3, 1.3, 50)[:, None]
    lab = periodic_inverse(D, targets)
    assert np.abs(lab[:, 0] + 0.05 * np.sin(2 * np.pi * lab[:, 0]) - targets[:, 0]).max() < 1e-13
    with pytest.raises(NotADiffeomorphismError):
        periodic_inverse(0.5 * np.sin(2 * np.pi * x0)[:, None], targets)
