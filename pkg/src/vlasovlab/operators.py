"""The second-order operator L = dxx + phi dxdv + psi dvv in one dimension.

Its coefficients solve, with zero data at t = 0,

    T phi = 2 a' psi - a' phi^2 + 2 F_x + phi F_v
    T psi = -a' phi psi + phi F_x + 2 psi F_v

where T = dt + a(v) dx + F dv.  They make L commute with T up to lower
order terms:

    L T g = T L g + (LF) g_v + (La) g_x + a' phi L g,
    LF = F_xx + phi F_xv + psi F_vv,   La = psi a''.

See docs/coefficient_system.md for the derivation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .characteristics import DEFAULT_DT, _EscapeWatch, _nsteps, rk4_characteristics
from .errors import HorizonError, NumericalHorizonError
from .grid import Grid, PhaseField, dv_array, dx_array, integrate
from .models import AdvectionField, Force


@dataclass
class CoeffPair:
    phi: np.ndarray
    psi: np.ndarray
    times: np.ndarray
    grid: Grid

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients at time t, linear in time between stored samples."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"t = {t} outside stored range [{ts[0]}, {ts[-1]}]")
        j = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 1))
        if abs(ts[j] - t) <= 1e-12 * max(1.0, abs(t)) or j == len(ts) - 1:
            return self.phi[j], self.psi[j]
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        return ((1 - w) * self.phi[j] + w * self.phi[j + 1],
                (1 - w) * self.psi[j] + w * self.psi[j + 1])


def _coeff_rhs(force, a, t, X, V, phi, psi, linear):
    ap = a.derivative(V, 1)
    Fx = force.derivative(t, X, V, 1, 0)
    Fv = force.derivative(t, X, V, 0, 1)
    dphi = 2 * ap * psi + 2 * Fx + phi * Fv
    dpsi = phi * Fx + 2 * psi * Fv
    if not linear:
        dphi = dphi - ap * phi**2
        dpsi = dpsi - ap * phi * psi
    return dphi, dpsi


def integrate_coefficients(force: Force, a: AdvectionField, X0, V0, T: float,
                           dt: float = DEFAULT_DT, linear: bool = False):
    """RK4 on the augmented state (X, V, phi, psi) from (X0, V0, 0, 0) over [0, T]."""
    X = np.array(X0, dtype=float, copy=True)
    V = np.array(V0, dtype=float, copy=True)
    phi = np.zeros_like(X)
    psi = np.zeros_like(X)
    if T == 0:
        return X, V, phi, psi
    n = _nsteps(T, dt)
    h = T / n

    def rhs(t, X, V, p, q):
        dp, dq = _coeff_rhs(force, a, t, X, V, p, q, linear)
        return a(V), force(t, X, V), dp, dq

    for i in range(n):
        t = i * h
        k1 = rhs(t, X, V, phi, psi)
        s2 = [u + 0.5 * h * k for u, k in zip((X, V, phi, psi), k1)]
        k2 = rhs(t + 0.5 * h, *s2)
        s3 = [u + 0.5 * h * k for u, k in zip((X, V, phi, psi), k2)]
        k3 = rhs(t + 0.5 * h, *s3)
        s4 = [u + h * k for u, k in zip((X, V, phi, psi), k3)]
        k4 = rhs(t + h, *s4)
        X, V, phi, psi = [u + h / 6 * (p + 2 * q + 2 * r + s)
                          for u, p, q, r, s in zip((X, V, phi, psi), k1, k2, k3, k4)]
    return X, V, phi, psi


def solve_coeff_system(force: Force, a: AdvectionField, grid: Grid, T: float,
                       dt: float = DEFAULT_DT, times: Optional[Sequence[float]] = None,
                       store_every: int = 10, linear: bool = False) -> CoeffPair:
    """(phi, psi) on the grid at the requested times (default: every ``store_every`` steps).

    Each node is traced back to t = 0 and the augmented system is integrated
    forward along that characteristic from zero data.
    """
    if times is None:
        n = _nsteps(T, dt)
        h = T / n
        idx = list(range(0, n + 1, store_every))
        if idx[-1] != n:
            idx.append(n)
        times = [i * h for i in idx]
    times = np.asarray(sorted(times), dtype=float)
    xg, vg = grid.mesh()
    phis, psis = [], []
    for t in times:
        if t == 0:
            phis.append(np.zeros(grid.shape))
            psis.append(np.zeros(grid.shape))
            continue
        try:
            watch = _EscapeWatch(vg, grid.v_cut)
            X0, V0 = rk4_characteristics(force, a, t, 0.0, xg, vg, dt, watch)
        except NumericalHorizonError as exc:
            raise HorizonError(f"coefficient system: {exc}") from None
        _, _, p, q = integrate_coefficients(force, a, X0, V0, t, dt, linear)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise HorizonError(f"coefficient system blew up before t = {t}")
        phis.append(p)
        psis.append(q)
    return CoeffPair(np.array(phis), np.array(psis), times, grid)


def _L(values, phi, psi, grid):
    dxx = dx_array(values, 2)
    if phi is None:
        return dxx
    dxv = dv_array(dx_array(values, 1), 1, grid.dv)
    dvv = dv_array(values, 2, grid.dv)
    return dxx + phi * dxv + psi * dvv


def apply_L(coeffs: CoeffPair, g: PhaseField, t: float) -> PhaseField:
    phi, psi = coeffs.at(t)
    if not np.any(phi) and not np.any(psi):
        return PhaseField(g.grid, dx_array(g.values, 2), t)
    return PhaseField(g.grid, _L(g.values, phi, psi, g.grid), t)


@dataclass
class Manufactured:
    """Closed-form trajectory g(t, x, v) with its exact time derivative."""
    value: Callable
    dt: Callable
    name: str = "g"


def default_manufactured() -> Manufactured:
    """g = cos(2 pi x) exp(-v^2/2) (1 + t)."""
    return Manufactured(
        lambda t, x, v: np.cos(2 * np.pi * x) * np.exp(-v**2 / 2) * (1 + t),
        lambda t, x, v: np.cos(2 * np.pi * x) * np.exp(-v**2 / 2),
        "cos(2pi x) exp(-v^2/2) (1+t)")


def commutation_residual(coeffs: CoeffPair, force: Force, a: AdvectionField,
                         g: Manufactured, t: float, dt: float) -> float:
    """Grid L2 norm of L T g - T L g - (LF) g_v - (La) g_x - a' phi L g at time t.

    ``coeffs`` must hold samples at t - dt, t and t + dt.
    """
    grid = coeffs.grid
    xg, vg = grid.mesh()
    phi, psi = coeffs.at(t)

    def T_of(values, tt, dtv):
        return dtv + a(vg) * dx_array(values, 1) + force(tt, xg, vg) * dv_array(values, 1, grid.dv)

    gv = g.value(t, xg, vg)
    Tg = T_of(gv, t, g.dt(t, xg, vg))
    lhs = _L(Tg, phi, psi, grid)

    Lg = {}
    for tt in (t - dt, t, t + dt):
        p, q = coeffs.at(tt)
        Lg[tt] = _L(g.value(tt, xg, vg), p, q, grid)
    dLg = (Lg[t + dt] - Lg[t - dt]) / (2 * dt)
    TLg = T_of(Lg[t], t, dLg)

    LF = (force.derivative(t, xg, vg, 2, 0) + phi * force.derivative(t, xg, vg, 1, 1)
          + psi * force.derivative(t, xg, vg, 0, 2))
    La = psi * a.derivative(vg, 2)
    g_x = dx_array(gv, 1)
    g_v = dv_array(gv, 1, grid.dv)
    res = lhs - TLg - LF * g_v - La * g_x - a.derivative(vg, 1) * phi * Lg[t]
    return float(np.sqrt(integrate(res**2, grid)))


def commutation_study(force: Force, a: AdvectionField, levels, t: float = 0.2,
                      v_cut: float = 8.0, g: Optional[Manufactured] = None):
    """Residuals over a list of (nx, nv, dt) levels; returns [(nx, nv, dt, residual)]."""
    from .grid import build_grid
    g = g or default_manufactured()
    out = []
    for nx, nv, dt in levels:
        grid = build_grid(nx, nv, v_cut)
        coeffs = solve_coeff_system(force, a, grid, t + dt, dt, times=[t - dt, t, t + dt])
        out.append((nx, nv, dt, commutation_residual(coeffs, force, a, g, t, dt)))
    return out


def observed_orders(residuals: Sequence[float]) -> list[float]:
    r = np.asarray(residuals, dtype=float)
    return list(np.log2(r[:-1] / r[1:]))
