import numpy as np
import pytest
import sympy as sp

from vlasovlab.grid import build_grid, PhaseField, spectral_dx
from vlasovlab.models import AdvectionField, ZeroForce, sinusoidal_force
from vlasovlab.operators import (CoeffPair, apply_L, commutation_residual, commutation_study,
                                 default_manufactured, integrate_coefficients, observed_orders,
                                 solve_coeff_system)

CL = AdvectionField()
REL = AdvectionField("relativistic", 1.0)
G = build_grid(32, 64, 8.0)


def test_commutator_identity_symbolic():
    """The coefficient ODEs are exactly the ones that cancel the commutator."""
    t, x, v = sp.symbols("t x v")
    g, F, phi, psi = (sp.Function(n)(t, x, v) for n in ("g", "F", "phi", "psi"))
    a = sp.Function("a")(v)
    ap = sp.diff(a, v)
    T = lambda u: sp.diff(u, t) + a * sp.diff(u, x) + F * sp.diff(u, v)
    L = lambda u: sp.diff(u, x, 2) + phi * sp.diff(u, x, v) + psi * sp.diff(u, v, 2)
    Fx, Fv = sp.diff(F, x), sp.diff(F, v)
    Tphi = 2 * ap * psi - ap * phi**2 + 2 * Fx + phi * Fv
    Tpsi = -ap * phi * psi + phi * Fx + 2 * psi * Fv
    LF = sp.diff(F, x, 2) + phi * sp.diff(F, x, v) + psi * sp.diff(F, v, 2)
    La = psi * sp.diff(a, v, 2)
    expr = L(T(g)) - T(L(g)) - LF * sp.diff(g, v) - La * sp.diff(g, x) - ap * phi * L(g)
    expr = expr.subs({
        sp.Derivative(phi, t): Tphi - a * sp.diff(phi, x) - F * sp.diff(phi, v),
        sp.Derivative(psi, t): Tpsi - a * sp.diff(psi, x) - F * sp.diff(psi, v)})
    assert sp.simplify(sp.expand(expr)) == 0


def test_zero_force_gives_zero_coefficients():
    c = solve_coeff_system(ZeroForce(), CL, G, 0.3)
    assert not np.any(c.phi) and not np.any(c.psi)
    assert c.times[0] == 0 and c.times[-1] == pytest.approx(0.3)


def test_coefficients_vanish_at_time_zero():
    c = solve_coeff_system(sinusoidal_force(), REL, G, 0.1)
    assert not np.any(c.phi[0]) and not np.any(c.psi[0])
    assert np.all(np.isfinite(c.phi)) and np.all(np.isfinite(c.psi))


def test_coefficients_match_fine_step_reference():
    F = sinusoidal_force()
    a = solve_coeff_system(F, CL, G, 0.2, 1e-3, times=[0.2])
    b = solve_coeff_system(F, CL, G, 0.2, 1e-4, times=[0.2])
    assert np.abs(a.phi - b.phi).max() < 1e-8 and np.abs(a.psi - b.psi).max() < 1e-8


def test_linearised_limit():
    """As eps -> 0 characteristics straighten and phi/eps -> 2 int_0^t F_x(x - (t-s)v) ds."""
    X, V = G.mesh()
    t = 0.2
    with np.errstate(invalid="ignore", divide="ignore"):
        lim = 2 * (np.sin(2 * np.pi * X) - np.sin(2 * np.pi * (X - t * V))) / V
    lim = np.where(V == 0, 4 * np.pi * t * np.cos(2 * np.pi * X), lim)
    gaps = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        _, _, phi, psi = integrate_coefficients(sinusoidal_force(eps), CL, X - t * V, V, t)
        gaps.append(np.abs(phi / eps - lim).max())
        assert np.abs(psi / eps).max() < 10 * eps
    assert gaps[0] < 0.1
    assert np.all(np.diff(np.log2(gaps)) < -0.9), gaps


def test_solve_is_deterministic():
    F = sinusoidal_force()
    a = solve_coeff_system(F, REL, G, 0.1)
    b = solve_coeff_system(F, REL, G, 0.1)
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.psi, b.psi)


def test_apply_L_examples():
    f = G.sample(lambda x, v: np.sin(2 * np.pi * x) * np.exp(-v**2))
    c = solve_coeff_system(sinusoidal_force(), CL, G, 0.1)
    assert np.abs(apply_L(c, f, 0.0).values - spectral_dx(f, 2).values).max() < 1e-12
    const = PhaseField(G, np.full(G.shape, 2.0))
    assert np.abs(apply_L(c, const, 0.1).values).max() < 1e-13


def test_apply_L_constant_coefficients_symbolic():
    x, v = sp.symbols("x v")
    expr = sp.sin(2 * sp.pi * x) * sp.exp(-v**2)
    L = sp.diff(expr, x, 2) + sp.diff(expr, x, v) + sp.diff(expr, v, 2)
    ref = sp.lambdify((x, v), L, "numpy")
    g = build_grid(32, 512, 8.0)
    ones = np.ones((1,) + g.shape)
    c = CoeffPair(ones, ones, np.array([0.0]), g)
    f = g.sample(lambda x, v: np.sin(2 * np.pi * x) * np.exp(-v**2))
    X, V = g.mesh()
    assert np.abs(apply_L(c, f, 0.0).values - ref(X, V)).max() < 1e-5


def test_free_commutation_residual_vanishes():
    F = ZeroForce()
    c = solve_coeff_system(F, CL, G, 0.21, 0.01, times=[0.19, 0.2, 0.21])
    assert commutation_residual(c, F, CL, default_manufactured(), 0.2, 0.01) < 1e-8


@pytest.mark.parametrize("a", [CL, REL])
def test_commutation_order_coarse(a):
    levels = [(16, 64, 0.0025), (32, 128, 0.00125), (64, 256, 0.000625)]
    res = [r[3] for r in commutation_study(sinusoidal_force(), a, levels, t=0.2, v_cut=6.0)]
    assert all(o >= 2 for o in observed_orders(res)), res


def test_observed_orders():
    assert observed_orders([1.0, 0.25, 0.0625]) == [2.0, 2.0]
