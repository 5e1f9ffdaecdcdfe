"""Semi-Lagrangian Picard solver.

Each sweep solves the linear problem

    dt f + a(v) dx f + F[f_prev] dv f = 0,   f(0) = f0,

by backward RK4 feet and tensor Fourier(x) x monotone-cubic(v)
interpolation, with the force of step n frozen at t_n and assembled from the
previous sweep.  ``march`` computes the fixed point of the sweep map directly
(force from the current state), which is what the sweeps converge to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .characteristics import CORE_FRACTION, rk4_characteristics
from .errors import ConfigurationError, NonConvergenceError, TruncationEscapeError
from .grid import (Grid, MomentSpec, NormReport, PhaseField, SpatialField, UNIT_MOMENT, aniso_norm,
                   hs_norm, integrate, moment, weighted_sobolev_norm, winf_norm)
from .interp import eval_near_shift, tensor_interp_direct, tensor_interp_shifted
from .models import (AdvectionField, Force, ForceModel, ZeroForce, force_assemble, model_fields)

NORM_KINDS = ("sobolev", "winf", "aniso", "moment")


@dataclass
class Scenario:
    grid: Grid
    advection: AdvectionField
    model: ForceModel
    f0: PhaseField
    T: float
    dt: float = 1e-3
    picard_tol: float = 1e-8
    picard_max: int = 25
    norm_requests: list = field(default_factory=list)
    output_cadence: int = 10
    r: float = 0.0
    ratio_gate: Optional[float] = None
    name: str = "scenario"
    limited: bool = True

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigurationError("run.T must be positive")
        if not self.dt > 0:
            raise ConfigurationError("run.dt must be positive")
        if not self.picard_tol > 0:
            raise ConfigurationError("run.picard_tol must be positive")
        if self.picard_max < 1:
            raise ConfigurationError("run.picard_max must be >= 1")
        if self.output_cadence < 1:
            raise ConfigurationError("run.output_cadence must be >= 1")
        for kind, _, _ in self.norm_requests:
            if kind not in NORM_KINDS:
                raise ConfigurationError(f"norms: unknown kind {kind!r}; expected one of {NORM_KINDS}")
        self.f0.require_decay()

    @property
    def nsteps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def step(self) -> float:
        return self.T / self.nsteps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nsteps + 1) * self.step

    def with_T(self, T: float) -> "Scenario":
        from dataclasses import replace
        return replace(self, T=T)


@dataclass
class SimOutput:
    snapshots: list
    force_history: list
    norm_history: NormReport
    contraction_ratios: list
    distances: list = field(default_factory=list)
    sweeps: int = 0
    T: float = 0.0
    times: Optional[np.ndarray] = None
    mass: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)


# ------------------------------------------------------------- transport

def _frozen_force(terms, nx, shift, delta, V):
    total = None
    for hat, coef in terms:
        ev = eval_near_shift(hat[:, None], nx, shift, delta)
        if ev is None:
            return None
        if coef is not None:
            ev = ev * coef(V)
        total = ev if total is None else total + ev
    return total


def _check_escape(V_foot, grid: Grid):
    v = grid.v[None, :]
    core = np.abs(v) <= CORE_FRACTION * grid.v_cut
    out = core & (np.abs(V_foot) > grid.v_cut)
    if np.any(out):
        raise TruncationEscapeError(
            f"foot velocity {float(np.max(np.abs(V_foot[out]))):.4g} left the grid "
            f"|v| <= {grid.v_cut}")


def _fast_foot(terms, a, grid, dt):
    """Backward RK4 feet as base shifts -c*dt*a(v_j) plus small per-node corrections."""
    nx = grid.nx
    v = grid.v
    av = a(v)
    F1 = sum((np.fft.irfft(hat, n=nx)[:, None] * (1.0 if coef is None else coef(v)[None, :])
              for hat, coef in terms), np.zeros((nx, grid.nv)))
    sh2 = -0.5 * dt * av
    sh4 = -dt * av
    V2 = v - 0.5 * dt * F1
    k2x = a(V2)
    k2v = _frozen_force(terms, nx, sh2, None, V2)
    V3 = v - 0.5 * dt * k2v
    k3x = a(V3)
    k3v = _frozen_force(terms, nx, sh2, -0.5 * dt * (k2x - av), V3)
    if k3v is None:
        return None
    V4 = v - dt * k3v
    k4x = a(V4)
    k4v = _frozen_force(terms, nx, sh4, -dt * (k3x - av), V4)
    if k4v is None:
        return None
    delta = -dt / 6 * (2 * (k2x - av) + 2 * (k3x - av) + (k4x - av))
    Vf = v - dt / 6 * (F1 + 2 * k2v + 2 * k3v + k4v)
    return sh4, delta, Vf


def transport_step(f: PhaseField, force: Force, a: AdvectionField, dt: float,
                   t0: Optional[float] = None, limited: bool = True) -> PhaseField:
    """One backward semi-Lagrangian step over [t0, t0 + dt], force frozen at t0.

    ``limited=False`` drops the monotone slope filter in v, which makes the
    step exactly linear in f for a given force.
    """
    t0 = f.time if t0 is None else t0
    if dt == 0:
        return f.with_values(f.values.copy(), t0)
    grid = f.grid
    v0 = -grid.v_cut
    if isinstance(force, ZeroForce):
        shift = -dt * a(grid.v)
        V = np.broadcast_to(grid.v, grid.shape)
        vals = tensor_interp_shifted(f.values, v0, grid.dv, shift, None, V, limited)
        return PhaseField(grid, vals, t0 + dt)
    terms = force.spatial_terms(t0)
    if terms is not None:
        foot = _fast_foot(terms, a, grid, dt)
        if foot is not None:
            shift, delta, Vf = foot
            _check_escape(Vf, grid)
            vals = tensor_interp_shifted(f.values, v0, grid.dv, shift, delta, Vf, limited)
            if vals is not None:
                return PhaseField(grid, vals, t0 + dt)
            X = grid.x[:, None] + shift[None, :] + delta
            return PhaseField(grid, tensor_interp_direct(f.values, v0, grid.dv, X, Vf, limited),
                              t0 + dt)
    xg, vg = grid.mesh()
    frozen = lambda t, x, v: force(t0, x, v)
    X, V = rk4_characteristics(frozen, a, t0 + dt, t0, xg, vg, dt)
    _check_escape(V, grid)
    return PhaseField(grid, tensor_interp_direct(f.values, v0, grid.dv, X, V, limited), t0 + dt)


# ----------------------------------------------------------------- sweeps

def _assemble(model: ForceModel, grid: Grid, values: np.ndarray, t: float) -> Force:
    return force_assemble(model, PhaseField(grid, values, t))


def _fields(model: ForceModel, grid: Grid, values: np.ndarray, t: float) -> list:
    return model_fields(model, PhaseField(grid, values, t))


def sweep(scenario: Scenario, forces: Sequence[Force]) -> np.ndarray:
    """Transport f0 through a prescribed per-step force sequence."""
    sc = scenario
    n, h = sc.nsteps, sc.step
    traj = np.empty((n + 1,) + sc.grid.shape)
    traj[0] = sc.f0.values
    f = PhaseField(sc.grid, sc.f0.values, 0.0)
    for i in range(n):
        f = transport_step(f, forces[i], sc.advection, h, i * h, sc.limited)
        traj[i + 1] = f.values
    return traj


def picard_iterate(f_prev: np.ndarray, scenario: Scenario) -> np.ndarray:
    """One Picard sweep: forces from the moments of ``f_prev``, transport f0 through them."""
    sc = scenario
    h = sc.step
    if f_prev.ndim == 2:
        f_prev = np.broadcast_to(f_prev, (sc.nsteps + 1,) + f_prev.shape)
    forces = [_assemble(sc.model, sc.grid, f_prev[i], i * h) for i in range(sc.nsteps)]
    return sweep(sc, forces)


def march(scenario: Scenario) -> np.ndarray:
    """Fixed point of the sweep map, computed causally (force from the current step)."""
    sc = scenario
    n, h = sc.nsteps, sc.step
    traj = np.empty((n + 1,) + sc.grid.shape)
    traj[0] = sc.f0.values
    f = PhaseField(sc.grid, sc.f0.values, 0.0)
    for i in range(n):
        force = _assemble(sc.model, sc.grid, f.values, i * h)
        f = transport_step(f, force, sc.advection, h, i * h, sc.limited)
        traj[i + 1] = f.values
    return traj


def trajectory_distance(A: np.ndarray, B: np.ndarray, grid: Grid, r: float = 0.0) -> float:
    """sup over time of the weighted L2 (H^0_r) distance between trajectories."""
    w = (1 + grid.v**2) ** r * grid.v_weights() * grid.dx
    per_t = (((A - B) ** 2) @ w).sum(axis=-1)
    return float(math.sqrt(float(np.max(per_t))))


# ------------------------------------------------------------ diagnostics

def mass(values: np.ndarray, grid: Grid) -> float:
    return integrate(values, grid)


def kinetic_energy(values: np.ndarray, grid: Grid, a: Optional[AdvectionField] = None) -> float:
    return integrate(values * (0.5 * grid.v**2)[None, :], grid)


def field_energy(model: ForceModel, values: np.ndarray, grid: Grid) -> float:
    if model.kind != "poisson":
        return 0.0
    E = _fields(model, grid, values, 0.0)[0].values
    return 0.5 * float(np.mean(E**2))


def total_energy(model, values, grid) -> float:
    return kinetic_energy(values, grid) + field_energy(model, values, grid)


def relative_drift(series: np.ndarray) -> float:
    s = np.asarray(series, dtype=float)
    return float(np.max(np.abs(s - s[0])) / abs(s[0]))


def _norm_value(f: PhaseField, kind: str, k, r) -> float:
    if kind == "sobolev":
        return weighted_sobolev_norm(f, int(k), float(r))
    if kind == "winf":
        return winf_norm(f, int(k), float(r))
    if kind == "aniso":
        return aniso_norm(f, float(k), float(r))
    if kind == "moment":
        spec = MomentSpec(lambda v, r=r: (1 + v**2) ** (float(r) / 2), r0=float(r), name=f"w{r}")
        return hs_norm(moment(f, spec), float(k))
    raise ConfigurationError(f"unknown norm kind {kind!r}")


def moment_regularity(traj: np.ndarray, times: np.ndarray, grid: Grid, n_prime: float,
                      spec: MomentSpec = UNIT_MOMENT) -> float:
    """||m_psi||_{L2(0,T; H^n')} with the time integral by the trapezoid rule."""
    psi = spec.sample(grid.v) * grid.v_weights()
    m = traj @ psi
    sq = np.array([hs_norm(mi, n_prime) ** 2 for mi in m])
    return float(math.sqrt(np.trapezoid(sq, times) if hasattr(np, "trapezoid") else np.trapz(sq, times)))


# ------------------------------------------------------------------ runs

def _finish(sc: Scenario, traj: np.ndarray, ratios, distances, sweeps) -> SimOutput:
    times = sc.times
    report = NormReport()
    snaps = []
    idx = list(range(0, sc.nsteps + 1, sc.output_cadence))
    if idx[-1] != sc.nsteps:
        idx.append(sc.nsteps)
    for i in idx:
        f = PhaseField(sc.grid, traj[i], float(times[i]))
        snaps.append(f)
        for kind, k, r in sc.norm_requests:
            report.add(kind, (k, r), f.time, _norm_value(f, kind, k, r))
    forces = [_fields(sc.model, sc.grid, traj[i], float(times[i])) for i in range(sc.nsteps + 1)]
    m = np.array([mass(traj[i], sc.grid) for i in range(sc.nsteps + 1)])
    e = np.array([total_energy(sc.model, traj[i], sc.grid) for i in range(sc.nsteps + 1)])
    return SimOutput(snaps, forces, report, list(ratios), list(distances), sweeps, sc.T, times,
                     m, e, traj)


def run_simulation(scenario: Scenario, keep_trajectory: bool = True) -> SimOutput:
    """Picard sweeps from f^(0) = f0 until sup_t ||f^(k+1) - f^(k)||_{H^0_r} < picard_tol."""
    sc = scenario
    prev = np.broadcast_to(sc.f0.values, (sc.nsteps + 1,) + sc.grid.shape)
    ratios, distances = [], []
    if sc.model.kind in ("zero", "external"):
        traj = picard_iterate(prev, sc)
        out = _finish(sc, traj, [], [], 1)
        if not keep_trajectory:
            out.trajectory = None
        return out
    for k in range(1, sc.picard_max + 1):
        traj = picard_iterate(prev, sc)
        d = trajectory_distance(traj, prev, sc.grid, sc.r)
        distances.append(d)
        if len(distances) > 1 and distances[-2] > 0:
            ratios.append(d / distances[-2])
            if sc.ratio_gate is not None and ratios[-1] > sc.ratio_gate + 1e-3:
                raise NonConvergenceError(
                    f"contraction ratio {ratios[-1]:.4f} exceeds gate {sc.ratio_gate} "
                    f"at sweep {k} (T = {sc.T})", ratios, distances)
        prev = traj
        if d < sc.picard_tol:
            out = _finish(sc, traj, ratios, distances, k)
            if not keep_trajectory:
                out.trajectory = None
            return out
    raise NonConvergenceError(
        f"Picard iteration did not reach tol {sc.picard_tol:g} in {sc.picard_max} sweeps "
        f"(T = {sc.T}); last ratio {ratios[-1] if ratios else float('nan'):.4g}",
        ratios, distances)


def bisect_horizon(scenario: Scenario, gate: float = 0.5, max_halvings: int = 8):
    """Halve T until the run converges with every contraction ratio <= gate.

    Returns (T, SimOutput, attempts) where attempts lists (T, error message or None).
    """
    from dataclasses import replace
    T = scenario.T
    attempts = []
    for _ in range(max_halvings + 1):
        sc = replace(scenario, T=T, ratio_gate=gate)
        try:
            out = run_simulation(sc)
            attempts.append((T, None))
            return T, out, attempts
        except NonConvergenceError as exc:
            attempts.append((T, str(exc)))
            T = 0.5 * T
            if T < scenario.dt:
                break
    raise NonConvergenceError(f"no horizon >= dt satisfies the ratio gate {gate}",
                              exc.ratios, exc.distances)
