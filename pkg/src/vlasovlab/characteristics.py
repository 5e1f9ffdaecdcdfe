"""Characteristic flows, velocity-map inversion, Liouville determinants and
Burgers straightening.

All ODEs are integrated by classical RK4 with a fixed step.  Positions are
accumulated unwrapped and reduced mod 1 only when stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (NotADiffeomorphismError, ShockError, TruncationEscapeError)
from .grid import Grid, PhaseField
from .interp import MonotoneCubic, fourier_eval_columns, periodic_inverse
from .models import AdvectionField, Force

CORE_FRACTION = 0.95
DEFAULT_DT = 1e-3


def _nsteps(span: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return max(1, int(math.ceil(abs(span) / dt - 1e-9)))


class _EscapeWatch:
    """Raises once a characteristic that started in the velocity core leaves the grid."""

    def __init__(self, v_start, v_cut, enabled=True):
        self.enabled = enabled
        self.v_cut = v_cut
        self.core = np.abs(v_start) <= CORE_FRACTION * v_cut

    def __call__(self, V, t):
        if not self.enabled:
            return
        out = self.core & (np.abs(V) > self.v_cut)
        if np.any(out):
            worst = float(np.max(np.abs(V[out])))
            raise TruncationEscapeError(
                f"characteristic from |v| <= {CORE_FRACTION}*v_cut reached |V| = {worst:.4g} "
                f"> v_cut = {self.v_cut} at t = {t:.6g}")


def rk4_characteristics(force: Force, a: AdvectionField, t0: float, t1: float, X, V,
                        dt: float = DEFAULT_DT, watch: Optional[Callable] = None):
    """Integrate dX/ds = a(V), dV/ds = F(s, X, V) from s=t0 to s=t1 (either direction)."""
    X = np.array(X, dtype=float, copy=True)
    V = np.array(V, dtype=float, copy=True)
    if t1 == t0:
        return X, V
    n = _nsteps(t1 - t0, dt)
    h = (t1 - t0) / n
    for i in range(n):
        t = t0 + i * h
        k1x = a(V)
        k1v = force(t, X, V)
        k2x = a(V + 0.5 * h * k1v)
        k2v = force(t + 0.5 * h, X + 0.5 * h * k1x, V + 0.5 * h * k1v)
        k3x = a(V + 0.5 * h * k2v)
        k3v = force(t + 0.5 * h, X + 0.5 * h * k2x, V + 0.5 * h * k2v)
        k4x = a(V + h * k3v)
        k4v = force(t + h, X + h * k3x, V + h * k3v)
        X = X + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        V = V + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if watch is not None:
            watch(V, t + h)
    return X, V


# ------------------------------------------------------------------ flows

@dataclass
class FlowMap:
    """(X, V)(s, t, x, v): state at time s of the characteristic through (x, v) at time t."""
    s: float
    t: float
    X: np.ndarray
    V: np.ndarray
    grid: Grid
    X_unwrapped: Optional[np.ndarray] = None
    tracer: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.X_unwrapped is None:
            self.X_unwrapped = np.array(self.X, dtype=float)
        self.X = np.mod(self.X_unwrapped, 1.0)


def trace_flow(force: Force, a: AdvectionField, from_t: float, to_s: float, grid: Grid,
               dt: float = DEFAULT_DT, escape_check: bool = True) -> FlowMap:
    xg, vg = grid.mesh()
    if from_t == to_s:
        return FlowMap(to_s, from_t, xg.copy(), vg.copy(), grid, xg.copy(),
                       tracer=lambda x, v: (np.array(x, float), np.array(v, float)))
    watch = _EscapeWatch(vg, grid.v_cut, escape_check)
    Xu, V = rk4_characteristics(force, a, from_t, to_s, xg, vg, dt, watch)

    def tracer(x, v):
        return rk4_characteristics(force, a, from_t, to_s, x, v, dt)

    return FlowMap(to_s, from_t, Xu, V, grid, Xu, tracer=tracer)


class VelocityInverse:
    """Inverse of a sampled increasing velocity map on one x-column."""

    def __init__(self, v_nodes, V_column):
        self.forward = MonotoneCubic(v_nodes, V_column)
        if not self.forward.is_increasing():
            raise NotADiffeomorphismError(
                "v -> V(v) is not strictly increasing on this column (time too large)")

    def __call__(self, w):
        return self.forward.inverse(w)


def invert_velocity_map(flow: FlowMap, ix: int) -> VelocityInverse:
    return VelocityInverse(flow.grid.v, flow.V[ix])


def liouville_det(flow: FlowMap, h: float = 1e-4) -> PhaseField:
    """Jacobian determinant of (x, v) -> (X, V).

    With a tracer the partials are centred differences of re-traced
    characteristics at spacing h; otherwise grid differences are used
    (spectral in x on the periodic displacement, 4th order in v).
    """
    g = flow.grid
    xg, vg = g.mesh()
    if flow.tracer is not None:
        Xp, Vp = flow.tracer(xg + h, vg)
        Xm, Vm = flow.tracer(xg - h, vg)
        Xvp, Vvp = flow.tracer(xg, vg + h)
        Xvm, Vvm = flow.tracer(xg, vg - h)
        Xx, Vx = (Xp - Xm) / (2 * h), (Vp - Vm) / (2 * h)
        Xv, Vv = (Xvp - Xvm) / (2 * h), (Vvp - Vvm) / (2 * h)
    else:
        from .grid import dv_array, dx_array
        disp = flow.X_unwrapped - xg
        Xx = 1 + dx_array(disp, 1)
        Vx = dx_array(flow.V, 1)
        Xv = dv_array(flow.X_unwrapped, 1, g.dv)
        Vv = dv_array(flow.V, 1, g.dv)
    return PhaseField(g, Xx * Vv - Xv * Vx, flow.s)


# --------------------------------------------------------------- Burgers

@dataclass
class BurgersField:
    """Phi(t_i, x, v) on the grid, with the Lagrangian data it was re-gridded from.

    For label v the curves y(t; x0) with y(0) = x0 and phi(0) = v satisfy
    Phi(t, y(t; x0), v) = phi(t; x0); ``displacement[i] = y(t_i) - x0``.
    """
    Phi: np.ndarray
    times: np.ndarray
    grid: Grid
    displacement: np.ndarray
    lagrangian_phi: np.ndarray
    force: Optional[Force] = field(default=None, repr=False)
    advection: Optional[AdvectionField] = field(default=None, repr=False)
    dt: float = DEFAULT_DT

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a stored Burgers time")
        return i

    def at(self, t: float) -> np.ndarray:
        return self.Phi[self.index(t)]

    def max_deviation(self) -> np.ndarray:
        """sup |Phi - v| at each stored time."""
        return np.max(np.abs(self.Phi - self.grid.v[None, None, :]), axis=(1, 2))


def _regrid(disp: np.ndarray, lag: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Eulerian values at the grid x from Lagrangian samples on the label grid."""
    try:
        labels = periodic_inverse(disp, np.repeat(x[:, None], disp.shape[1], axis=1))
    except NotADiffeomorphismError as exc:
        raise ShockError(f"x-characteristics crossed: {exc}") from None
    return fourier_eval_columns(lag, labels), labels


def solve_burgers(force: Force, a: AdvectionField, grid: Grid, T: float,
                  dt: float = DEFAULT_DT, store_every: int = 10,
                  escape_check: bool = True) -> BurgersField:
    """dPhi/dt + a(Phi) dPhi/dx = F(t, x, Phi), Phi(0) = v, by forward characteristics."""
    n = _nsteps(T, dt)
    h = T / n
    x0, v = grid.mesh()
    y = x0.copy()
    phi = v.copy()
    watch = _EscapeWatch(v, grid.v_cut, escape_check)
    times, Phis, disps, lags = [0.0], [v.copy()], [np.zeros_like(v)], [v.copy()]
    for i in range(n):
        t = i * h
        y, phi = rk4_characteristics(force, a, t, t + h, y, phi, h)
        watch(phi, t + h)
        if np.any(np.diff(y, axis=0) <= 0) or np.any(y[0] + 1 - y[-1] <= 0):
            raise ShockError(f"x-characteristics crossed before t = {t + h:.6g}")
        if (i + 1) % store_every == 0 or i == n - 1:
            disp = y - x0
            Phi, _ = _regrid(disp, phi, grid.x)
            times.append(t + h)
            Phis.append(Phi)
            disps.append(disp)
            lags.append(phi.copy())
    return BurgersField(np.array(Phis), np.array(times), grid, np.array(disps), np.array(lags),
                        force, a, h)


def trace_burgers_label(force: Force, a: AdvectionField, x0, v, t: float,
                        dt: float = DEFAULT_DT):
    """Position and velocity at time t of the Burgers curve with y(0)=x0, phi(0)=v."""
    return rk4_characteristics(force, a, 0.0, t, x0, v, dt)


@dataclass
class StraightFlow:
    """The straightened characteristic map at a pair of times (t, s)."""
    t: float
    s: float
    X: np.ndarray
    xtilde: np.ndarray
    psi: np.ndarray
    grid: Grid

    def flow(self) -> FlowMap:
        xg, vg = self.grid.mesh()
        return FlowMap(self.t, self.s, self.X.copy(), vg.copy(), self.grid, self.X.copy())


def straightened_flow(burgers: BurgersField, a: AdvectionField, t: float, s: float) -> StraightFlow:
    """Curves dX/dt = a(Phi(t, X, v)) through x at time s, read off the Lagrangian data.

    X(t, s, x, v) = x + D_t(x0) - D_s(x0) where x0 solves x0 + D_s(x0) = x.
    Also returns Xtilde = (X - x)/(t - s) - a(v) and Psi solving
    X(t, s, x, Psi) = x + (t - s) a(v) by monotone inversion of each v-column.
    """
    g = burgers.grid
    it, is_ = burgers.index(t), burgers.index(s)
    xg, vg = g.mesh()
    if it == is_:
        return StraightFlow(t, s, xg.copy(), np.zeros_like(xg), vg.copy(), g)
    Ds, Dt = burgers.displacement[is_], burgers.displacement[it]
    try:
        labels = periodic_inverse(Ds, xg.copy())
    except NotADiffeomorphismError as exc:
        raise ShockError(str(exc)) from None
    X = xg + fourier_eval_columns(Dt, labels) - fourier_eval_columns(Ds, labels)
    av = a(g.v)
    xtilde = (X - xg) / (t - s) - av[None, :]
    psi = np.empty_like(X)
    target = (t - s) * av
    for i in range(g.nx):
        col = X[i]
        if t < s:
            mc = MonotoneCubic(g.v, -col)
            psi[i] = mc.inverse(-(xg[i, 0] + target))
        else:
            mc = MonotoneCubic(g.v, col)
            psi[i] = mc.inverse(xg[i, 0] + target)
    return StraightFlow(t, s, X, xtilde, psi, g)


def straight_position(burgers: BurgersField, t: float, s: float, x, v):
    """X(t, s, x, v) at arbitrary (x, v) by shooting on Burgers curves (independent of the grid)."""
    force, a, dt = burgers.force, burgers.advection, burgers.dt
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if s == 0:
        X, _ = trace_burgers_label(force, a, x, v, t, dt)
        return X
    x0 = x - s * a(v)
    eps = 1e-6
    for _ in range(30):
        ys, _ = trace_burgers_label(force, a, x0, v, s, dt)
        yp, _ = trace_burgers_label(force, a, x0 + eps, v, s, dt)
        step = (ys - x) / ((yp - ys) / eps)
        x0 = x0 - step
        if np.max(np.abs(step)) < 1e-13:
            break
    X, _ = trace_burgers_label(force, a, x0, v, t, dt)
    return X


def grid_transport_residual(G_prev, G_next, G_now, speed, dt):
    """Residual of dG/dt + speed dG/dx = 0 (centred in time, spectral in x)."""
    from .grid import dx_array
    return (G_next - G_prev) / (2 * dt) + speed * dx_array(G_now, 1)
