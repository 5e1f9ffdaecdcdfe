"""Counterexamples bounding moment-regularity propagation.

* Free transport of g(x) phi(v) with g an indicator: the density is smooth for
  t > 0 but its x-derivatives blow up as t -> 0 (norm law below).
* Superposition of solutions with disjoint velocity supports (moment force,
  no shift) or disjoint spatial supports (moment force shifted by 1/4).
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from .errors import ConstructionError, OutOfValidityError
from .grid import MomentSpec, PhaseField, build_grid
from .models import AdvectionField, ForceModel, ZeroForce, bump, force_assemble
from .solver import Scenario, march, sweep, trajectory_distance

# ------------------------------------------------------------ bump algebra

_U = Polynomial([1.0, 0.0, -4.0])  # u = 1 - 4 v^2
_DU = _U.deriv()


def _bump_derivative_terms(n: int):
    """P_n, m_n with d^n/dv^n exp(-1/u) = P_n / u^{m_n} exp(-1/u)."""
    P, m = Polynomial([1.0]), 0
    for _ in range(n):
        P = P.deriv() * _U**2 - m * P * _DU * _U + P * _DU
        m += 2
    return P, m


def bump_derivative(v, n: int) -> np.ndarray:
    """n-th derivative of exp(-1/(1-4v^2)) on (-1/2, 1/2), zero elsewhere."""
    v = np.asarray(v, dtype=float)
    P, m = _bump_derivative_terms(n)
    out = np.zeros_like(v)
    inside = np.abs(v) < 0.5
    u = 1.0 - 4.0 * v[inside] ** 2
    out[inside] = P(v[inside]) / u**m * np.exp(-1.0 / u)
    return out


def phi_profile(v, order: int = 0) -> np.ndarray:
    """order-th derivative of phi = d/dv exp(-1/(1-4v^2)) (mean zero, support [-1/2, 1/2])."""
    return bump_derivative(v, order + 1)


@functools.lru_cache(maxsize=None)
def phi_norm(order: int) -> float:
    """L2 norm of phi^(order) by adaptive quadrature on its support."""
    val, _ = quad(lambda v: float(phi_profile(np.array([v]), order)[0]) ** 2, -0.5, 0.5,
                  limit=400, epsabs=0.0, epsrel=1e-13)
    return math.sqrt(val)


# ---------------------------------------------------------------- norm law

def _check_t(k: int, t: float):
    if k < 1:
        raise OutOfValidityError("k must be >= 1")
    if not t > 0:
        raise OutOfValidityError("t must be positive")
    if t >= 4:
        raise OutOfValidityError(f"t = {t} >= 4: translate supports overlap, law not valid")
    if t > 2:
        warnings.warn(f"t = {t} > 2: the two translates overlap, the norm law is not exact",
                      RuntimeWarning, stacklevel=3)


def _translate_norm(k: int, t: float, scale: float, n: int) -> float:
    """L2 norm over R of scale * (phi^(k-1)((x+1)/t) - phi^(k-1)((x-1)/t)) by trapezoid."""
    half = 0.5 * t
    x = np.linspace(-1 - half, 1 + half, n)
    vals = scale * (phi_profile((x + 1) / t, k - 1) - phi_profile((x - 1) / t, k - 1))
    return math.sqrt(np.trapezoid(vals**2, x) if hasattr(np, "trapezoid") else np.trapz(vals**2, x))


def counterexample1(k: int, t: float, n: int = 400001) -> tuple[float, float]:
    """(closed-form norm, quadrature norm) for the displayed translate formula

        d^k rho = t^{-(k-1)} (phi^(k-1)((x+1)/t) - phi^(k-1)((x-1)/t)),
        ||d^k rho||^2 = 2 t^{3-2k} ||phi^(k-1)||^2.
    """
    _check_t(k, t)
    exact = math.sqrt(2.0 * t ** (3 - 2 * k)) * phi_norm(k - 1)
    return exact, _translate_norm(k, t, t ** (-(k - 1)), n)


def counterexample1_direct(k: int, t: float, n: int = 400001) -> tuple[float, float]:
    """Same comparison from rho(t, x) = int_{(x-1)/t}^{(x+1)/t} phi dv itself.

    Differentiating gives d^k rho = t^{-k} (phi^(k-1)((x+1)/t) - phi^(k-1)((x-1)/t)),
    hence ||d^k rho||^2 = 2 t^{1-2k} ||phi^(k-1)||^2.
    """
    _check_t(k, t)
    exact = math.sqrt(2.0 * t ** (1 - 2 * k)) * phi_norm(k - 1)
    return exact, _translate_norm(k, t, t ** (-k), n)


def density_example1(t: float, x) -> np.ndarray:
    """rho(t, x) = int_{(x-1)/t}^{(x+1)/t} phi(v) dv = b((x+1)/t) - b((x-1)/t), b the bump."""
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros_like(x)
    return bump((x + 1) / t) - bump((x - 1) / t)


# ---------------------------------------------------- regularity scenarios

def smooth_vp_scenario(n: int, T: float = 0.5, dt: float = 1e-3, v_cut: float = 8.0,
                       nv: Optional[int] = None) -> Scenario:
    """Poisson model, f0 = (1 + 0.1 cos 2 pi x) times the unit Gaussian."""
    g = build_grid(n, nv or n, v_cut)
    f0 = g.sample(lambda x, v: (1 + 0.1 * np.cos(2 * np.pi * x))
                  * np.exp(-v**2 / 2) / np.sqrt(2 * np.pi))
    return Scenario(g, AdvectionField(), ForceModel("poisson", sign=1), f0, T, dt=dt,
                    name=f"vp_{n}")


def rough_moment_scenario(n: int, T: float = 0.25, dt: float = 1e-3) -> Scenario:
    """Free transport of 1_{[1/4, 3/4]}(x) phi(v): rho(0) = 0 yet rho leaves L2(0,T;H^2)."""
    g = build_grid(n, n, 1.0)
    f0 = g.sample(lambda x, v: ((x >= 0.25) & (x < 0.75)).astype(float) * phi_profile(v))
    return Scenario(g, AdvectionField(), ForceModel("zero"), f0, T, dt=dt, name=f"rough_{n}")


# ----------------------------------------------------------- superposition

def _bump_x(x, lo, hi):
    c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    d = (np.asarray(x) - c + 0.5) % 1.0 - 0.5  # periodic distance to the centre
    return bump(d, 0.0, w)


@dataclass
class SuperpositionSetup:
    which: str
    grid: object
    model: ForceModel
    f1: PhaseField
    f2: PhaseField
    T: float
    dt: float
    psi_support: tuple
    notes: dict = field(default_factory=dict)


@dataclass
class SuperpositionResult:
    which: str
    times: np.ndarray
    residual: np.ndarray
    neglected: np.ndarray
    contact_time: Optional[float]
    step_error: Optional[float]
    sup_residual: float
    force_scale: float = 0.0

    def residual_before(self, t: Optional[float] = None) -> float:
        """Largest residual up to time t (default: the first contact)."""
        t = self.contact_time if t is None else t
        if t is None:
            return self.sup_residual
        mask = self.times <= t + 1e-12
        return float(np.max(self.residual[mask]))

    @property
    def growth(self) -> float:
        """Final residual over the largest residual before contact."""
        before = self.residual_before()
        return float(self.residual[-1] / before) if before > 0 else math.inf


def _velocity_support(f: PhaseField, tol: float = 0.0):
    mass = np.max(np.abs(f.values), axis=0)
    idx = np.nonzero(mass > tol)[0]
    if idx.size == 0:
        return None
    v = f.grid.v
    return float(v[idx[0]]), float(v[idx[-1]])


def example2_setup(nx: int = 64, nv: int = 256, v_cut: float = 4.0, T: float = 0.2,
                   dt: float = 1e-3, amp1: float = 40.0, amp2: float = 1.0,
                   lower2: float = 1.0, with_f2: bool = True) -> SuperpositionSetup:
    """psi and f0^(1) live in |v| <= 1/2; f0^(2) lives in v in [lower2, lower2 + 1].

    psi = -bump makes the force decelerate f^(2) toward the support of psi.
    """
    g = build_grid(nx, nv, v_cut)
    spec = MomentSpec(lambda v: -bump(v), r0=0.0, name="-bump")
    model = ForceModel("moment_force", moment_specs=[spec], shift=0.0)
    f1 = g.sample(lambda x, v: amp1 * (1 + 0.5 * np.cos(2 * np.pi * x)) * bump(v))
    c2 = lower2 + 0.5
    f2 = g.sample(lambda x, v: (amp2 if with_f2 else 0.0)
                  * (1 + 0.5 * np.sin(2 * np.pi * x)) * bump(v, c2, 0.5))
    if lower2 < 0.5:
        raise ConstructionError("f0^(2) must be supported in v >= 1/2, away from psi")
    return SuperpositionSetup("example2", g, model, f1, f2, T, dt, (-0.5, 0.5))


def example3_setup(nx: int = 256, nv: int = 64, v_cut: float = 2.0, T: float = 0.1,
                   dt: float = 1e-3, amp1: float = 1.0, amp2: float = 20.0,
                   supp1=(0.0, 0.125), supp2=(0.25, 0.375), with_f2: bool = True
                   ) -> SuperpositionSetup:
    """x-supports [0, 1/8] and [1/4, 3/8]; the force is the psi-moment shifted by 1/4."""
    if supp1[1] > supp2[0] or supp1[1] - supp1[0] <= 0 or supp2[1] - supp2[0] <= 0:
        raise ConstructionError("spatial supports must be disjoint and ordered")
    if supp2[0] - supp1[1] < 0.125 - 1e-12:
        raise ConstructionError("supports must be separated by the 1/8 gap of the construction")
    g = build_grid(nx, nv, v_cut)
    spec = MomentSpec(lambda v: bump(v), r0=0.0, name="bump")
    model = ForceModel("moment_force", moment_specs=[spec], shift=0.25)
    f1 = g.sample(lambda x, v: amp1 * _bump_x(x, *supp1) * bump(v))
    f2 = g.sample(lambda x, v: (amp2 if with_f2 else 0.0) * _bump_x(x, *supp2) * bump(v))
    return SuperpositionSetup("example3", g, model, f1, f2, T, dt, (-0.5, 0.5),
                              {"supp1": supp1, "supp2": supp2})


def _scenario(setup, f0, model=None, dt=None):
    # unlimited cubic: the discrete step is then exactly additive in f
    return Scenario(setup.grid, AdvectionField(), model or setup.model, f0, setup.T,
                    dt=dt or setup.dt, name=setup.which, limited=False)


def _decoupled(setup: SuperpositionSetup, dt: float):
    """The two auxiliary solutions of the construction."""
    g = setup.grid
    sc1 = _scenario(setup, setup.f1, dt=dt)
    sc2 = _scenario(setup, setup.f2, dt=dt)
    h = sc1.step
    if setup.which == "example2":
        # f^(1): full equation alone; f^(2): linear, driven by the moments of f^(1)
        traj1 = march(sc1)
        forces = [force_assemble(setup.model, PhaseField(g, traj1[i], i * h))
                  for i in range(sc1.nsteps)]
        traj2 = sweep(sc2, forces)
    else:
        # f^(2): free transport; f^(1): linear, driven by the shifted moment of f^(2)
        traj2 = sweep(sc2, [ZeroForce()] * sc2.nsteps)
        forces = [force_assemble(setup.model, PhaseField(g, traj2[i], i * h))
                  for i in range(sc1.nsteps)]
        traj1 = sweep(sc1, forces)
    return traj1, traj2


def _force_term(setup: SuperpositionSetup, values: np.ndarray, source: np.ndarray) -> np.ndarray:
    from .grid import dv_array
    from .models import model_fields
    F = model_fields(setup.model, PhaseField(setup.grid, source, 0.0))[0].values[:, None]
    return F * dv_array(values, 1, setup.grid.dv)


def _l2(term, grid) -> float:
    from .grid import integrate
    return math.sqrt(integrate(term**2, grid))


def _neglected(setup: SuperpositionSetup, traj1, traj2) -> np.ndarray:
    """L2 norm of the force terms the decoupled construction drops, per time."""
    out = np.empty(traj1.shape[0])
    for i in range(traj1.shape[0]):
        f1, f2 = traj1[i], traj2[i]
        if setup.which == "example2":
            term = _force_term(setup, f1 + f2, f2)
        else:
            term = _force_term(setup, f1 + f2, f1) + _force_term(setup, f2, f2)
        out[i] = _l2(term, setup.grid)
    return out


def _eps_support(profile: np.ndarray, ref: float, eps: float) -> np.ndarray:
    return profile > eps * ref


def _in_contact(setup: SuperpositionSetup, f1: np.ndarray, f2: np.ndarray, ref1: float,
                ref2: float, eps: float) -> bool:
    g = setup.grid
    if setup.which == "example2":
        # psi only sees f^(2) once the latter reaches supp psi in v
        s2 = _eps_support(np.abs(f2).max(axis=0), ref2, eps)
        lo, hi = setup.psi_support
        return bool(np.any(s2 & (g.v > lo) & (g.v < hi)))
    s1 = _eps_support(np.abs(f1).max(axis=1), ref1, eps)
    s2 = _eps_support(np.abs(f2).max(axis=1), ref2, eps)
    q = g.nx // 4  # F[f](x) = m(x + 1/4): support shifted left by a quarter
    f1_force, f2_force = np.roll(s1, -q), np.roll(s2, -q)
    return bool(np.any(f1_force & (s1 | s2)) or np.any(f2_force & s2))


def counterexample_superposition(setup: SuperpositionSetup, contact_eps: float = 1e-3,
                                 step_error: bool = True) -> SuperpositionResult:
    """Coupled run vs the sum of the decoupled runs, with a support monitor.

    A component's support is where it exceeds ``contact_eps`` times its initial
    maximum; contact is the first time a dropped force term has overlapping
    supports.  ``neglected`` records the size of the dropped terms.
    """
    g = setup.grid
    if setup.which == "example2":
        lo = _velocity_support(setup.f2)
        if lo is not None and lo[0] < setup.psi_support[1]:
            raise ConstructionError("f0^(2) overlaps the velocity support of psi")
    f0 = setup.f1 + setup.f2
    sc = _scenario(setup, f0)
    coupled = march(sc)
    t1, t2 = _decoupled(setup, setup.dt)
    w = g.v_weights() * g.dx
    residual = np.sqrt((((coupled - t1 - t2) ** 2) @ w).sum(axis=-1))
    neglected = _neglected(setup, t1, t2)
    scale = _l2(_force_term(setup, f0.values, f0.values), g)
    times = sc.times
    ref1, ref2 = float(np.abs(t1[0]).max()), float(np.abs(t2[0]).max())
    contact = None
    if ref2 > 0:
        for i in range(times.size):
            if _in_contact(setup, t1[i], t2[i], ref1, ref2, contact_eps):
                contact = float(times[i])
                break
    serr = None
    if step_error:
        fine = march(_scenario(setup, f0, dt=0.5 * sc.step))
        serr = trajectory_distance(coupled, fine[::2], g)
    return SuperpositionResult(setup.which, times, residual, neglected, contact, serr,
                               float(residual.max()), scale)
