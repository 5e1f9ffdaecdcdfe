"""Advection fields a(v) and moment-determined force models.

Forces are represented by small evaluator objects exposing

    force(t, x, v)                     -> F
    force.derivative(t, x, v, kx, kv)  -> d^kx/dx^kx d^kv/dv^kv F

Grid-backed forces (``SeparableForce``) additionally expose their spatial
Fourier data so the transport kernels can take the shifted-FFT fast path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import MomentSpec, PhaseField, SpatialField, dx_array, hs_norm, moment
from .interp import fourier_eval


# ------------------------------------------------------------- advection

@dataclass(frozen=True)
class AdvectionField:
    kind: str = "classical"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("classical", "relativistic"):
            raise ConfigurationError(f"advection.kind must be classical or relativistic, got {self.kind!r}")
        if self.kind == "relativistic" and not self.c > 0:
            raise ConfigurationError("advection.c must be positive")

    @property
    def lam(self) -> float:
        """Growth exponent of the inverse map's derivatives."""
        return 0.0 if self.kind == "classical" else 2.0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "classical":
            return v.copy()
        return v / np.sqrt(1 + (v / self.c) ** 2)

    def derivative(self, v, order: int = 1):
        v = np.asarray(v, dtype=float)
        if self.kind == "classical":
            if order == 0:
                return v.copy()
            return np.ones_like(v) if order == 1 else np.zeros_like(v)
        q = 1 + (v / self.c) ** 2
        if order == 0:
            return self(v)
        if order == 1:
            return q ** -1.5
        if order == 2:
            return -3 * v / self.c**2 * q ** -2.5
        if order == 3:
            return (12 * (v / self.c) ** 2 - 3) / self.c**2 * q ** -3.5
        if order == 4:
            return (45 * v / self.c**2 - 60 * v**3 / self.c**4) / self.c**2 * q ** -4.5
        raise ValueError("relativistic derivatives implemented up to order 4")

    def inverse(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "classical":
            return w.copy()
        if np.any(np.abs(w) >= self.c):
            raise DomainError(f"|w| must be < c = {self.c} for the relativistic inverse")
        return w / np.sqrt(1 - (w / self.c) ** 2)

    def in_range(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "classical":
            return np.ones(w.shape, dtype=bool)
        return np.abs(w) < self.c


def advection_eval(a: AdvectionField, v):
    return a(v)


def advection_inverse(a: AdvectionField, w):
    return a.inverse(w)


CLASSICAL = AdvectionField("classical")


# ---------------------------------------------------------------- forces

class Force:
    """Base evaluator; subclasses override ``__call__`` and ``derivative``."""

    time_dependent = False

    def __call__(self, t, x, v):
        return self.derivative(t, x, v, 0, 0)

    def derivative(self, t, x, v, kx=0, kv=0):
        raise NotImplementedError

    def spatial_terms(self, t):
        """[(rfft of F^j on the x-grid, A_j or None)] or None if not grid-backed."""
        return None


class ZeroForce(Force):
    def derivative(self, t, x, v, kx=0, kv=0):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(v)).shape)


class AnalyticForce(Force):
    """Closed-form force; ``derivs`` maps (kx, kv) to callables (t, x, v)."""

    def __init__(self, fn: Callable, derivs: Optional[dict] = None, time_dependent: bool = False):
        self.fn = fn
        self.derivs = dict(derivs or {})
        self.derivs[(0, 0)] = fn
        self.time_dependent = time_dependent

    def derivative(self, t, x, v, kx=0, kv=0):
        try:
            g = self.derivs[(kx, kv)]
        except KeyError:
            raise ConfigurationError(f"derivative ({kx},{kv}) not supplied for this force") from None
        shape = np.broadcast(np.asarray(x), np.asarray(v)).shape
        return np.broadcast_to(np.asarray(g(t, x, v), dtype=float), shape).copy()


def sinusoidal_force(amplitude: float = 1.0, mode: int = 1) -> AnalyticForce:
    """F(x) = amplitude * sin(2 pi mode x), frozen in time, constant in v."""
    k = 2 * np.pi * mode
    zero = lambda t, x, v: 0.0 * x * v
    derivs = {
        (1, 0): lambda t, x, v: amplitude * k * np.cos(k * x) + 0.0 * v,
        (2, 0): lambda t, x, v: -amplitude * k**2 * np.sin(k * x) + 0.0 * v,
        (3, 0): lambda t, x, v: -amplitude * k**3 * np.cos(k * x) + 0.0 * v,
        (0, 1): zero, (1, 1): zero, (0, 2): zero, (2, 1): zero, (1, 2): zero, (0, 3): zero,
    }
    return AnalyticForce(lambda t, x, v: amplitude * np.sin(k * x) + 0.0 * v, derivs)


@dataclass
class ForceTerm:
    """One summand A(v) F^j(x) with F^j sampled on the periodic grid."""
    values: np.ndarray
    coef: Optional[Callable] = None
    coef_derivs: Sequence[Callable] = ()

    def coef_derivative(self, v, order):
        if self.coef is None:
            return np.ones_like(v) if order == 0 else np.zeros_like(v)
        if order == 0:
            return self.coef(v)
        if order - 1 < len(self.coef_derivs):
            return self.coef_derivs[order - 1](v)
        raise ConfigurationError(f"coefficient derivative of order {order} not supplied")


class SeparableForce(Force):
    """F(x, v) = sum_j A_j(v) F^j(x), each F^j given on the x-grid.

    Off-grid x values use trigonometric interpolation.
    """

    def __init__(self, terms: Sequence[ForceTerm]):
        self.terms = list(terms)
        self._hats = [np.fft.rfft(term.values) for term in self.terms]

    @classmethod
    def from_field(cls, field_: SpatialField, coef=None, coef_derivs=()):
        return cls([ForceTerm(np.asarray(field_.values, dtype=float), coef, tuple(coef_derivs))])

    @property
    def v_independent(self) -> bool:
        return all(t.coef is None for t in self.terms)

    def derivative(self, t, x, v, kx=0, kv=0):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast(x, v).shape
        out = np.zeros(shape)
        xb = np.broadcast_to(x, shape)
        vb = np.broadcast_to(v, shape)
        for term in self.terms:
            coef = term.coef_derivative(vb, kv)
            if np.all(coef == 0):
                continue
            out += coef * fourier_eval(term.values, xb, deriv=kx)
        return out

    def spatial_terms(self, t):
        return [(hat, term.coef) for hat, term in zip(self._hats, self.terms)]

    def on_grid(self, kx=0):
        """x-derivative of each F^j on the grid (list of arrays)."""
        return [dx_array(term.values, kx) for term in self.terms]


class TimeSeriesForce(Force):
    """Piecewise-constant-in-time sequence of separable forces (frozen per step)."""

    time_dependent = True

    def __init__(self, times: Sequence[float], forces: Sequence[SeparableForce]):
        self.times = np.asarray(times, dtype=float)
        self.forces = list(forces)

    def _pick(self, t):
        i = int(np.clip(np.searchsorted(self.times, t + 1e-12, side="right") - 1, 0, len(self.forces) - 1))
        return self.forces[i]

    def derivative(self, t, x, v, kx=0, kv=0):
        return self._pick(t).derivative(t, x, v, kx, kv)

    def spatial_terms(self, t):
        return self._pick(t).spatial_terms(t)


# ---------------------------------------------------------------- models

FORCE_KINDS = ("zero", "external", "poisson", "moment_force")


@dataclass
class ForceModel:
    kind: str = "zero"
    sign: int = 1
    shift: float = 0.0
    moment_specs: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    external: Optional[Force] = None

    def __post_init__(self):
        if self.kind not in FORCE_KINDS:
            raise ConfigurationError(f"model.kind must be one of {FORCE_KINDS}, got {self.kind!r}")
        if self.sign not in (1, -1):
            raise ConfigurationError("model.sign must be +1 (repulsive) or -1 (attractive)")
        if self.kind == "moment_force" and not self.moment_specs:
            raise ConfigurationError("moment_force model needs a MomentSpec")
        if self.kind == "external" and self.external is None:
            raise ConfigurationError("external model needs a force evaluator")


def poisson_force(rho: SpatialField, sign: int = 1) -> SpatialField:
    """Field sign * E with E = -phi', -phi'' = rho - mean(rho), solved spectrally."""
    n = rho.nx
    hat = np.fft.rfft(rho.values)
    k = 2 * np.pi * np.arange(n // 2 + 1)
    E_hat = np.zeros_like(hat)
    E_hat[1:] = -1j * hat[1:] / k[1:]
    if n % 2 == 0:
        E_hat[-1] = 0.0
    return SpatialField(n, sign * np.fft.irfft(E_hat, n=n), rho.time)


def shift_field(values: np.ndarray, shift: float) -> np.ndarray:
    """u(x + shift) by exact Fourier phase multiplication."""
    n = len(values)
    if shift == 0:
        return np.array(values, dtype=float)
    k = 2 * np.pi * np.arange(n // 2 + 1)
    raw = np.fft.rfft(values)
    hat = raw * np.exp(1j * k * shift)
    if n % 2 == 0:
        # real interpolant: Nyquist mode carries cos only
        hat[-1] = raw[-1] * np.cos(k[-1] * shift)
    return np.fft.irfft(hat, n=n)


def moment_force(f: PhaseField, spec: MomentSpec, shift: float = 0.0) -> SpatialField:
    m = moment(f, spec)
    return SpatialField(m.nx, shift_field(m.values, shift), f.time)


def model_fields(model: ForceModel, f: PhaseField) -> list[SpatialField]:
    """The spatial components F^j determined by the moments of f."""
    if model.kind == "poisson":
        rho = moment(f, model.moment_specs[0] if model.moment_specs else _unit())
        return [poisson_force(rho, model.sign)]
    if model.kind == "moment_force":
        return [moment_force(f, spec, model.shift) for spec in model.moment_specs]
    return []


def _unit():
    from .grid import UNIT_MOMENT
    return UNIT_MOMENT


def force_assemble(model: ForceModel, f: PhaseField) -> Force:
    if model.kind == "zero":
        return ZeroForce()
    if model.kind == "external":
        return model.external
    if model.kind in ("poisson", "moment_force"):
        fields = model_fields(model, f)
        coefs = model.coefficients or [None] * len(fields)
        if len(coefs) != len(fields):
            raise ConfigurationError("one coefficient A_j per force component required")
        terms = []
        for fld, coef in zip(fields, coefs):
            if coef is None or callable(coef):
                terms.append(ForceTerm(fld.values, coef))
            else:
                c, *dcs = coef
                terms.append(ForceTerm(fld.values, c, tuple(dcs)))
        return SeparableForce(terms)
    raise ConfigurationError(f"unsupported force kind {model.kind!r}")


def poisson_gain_bound(n: int, nx: int) -> float:
    """Exact supremum over resolved modes of the single-mode gain ratio."""
    k = 2 * np.pi * np.arange(1, nx // 2 + 1)
    return float(np.max(np.sqrt(1 + k**2) / k))


def poisson_gain_check(rho: SpatialField, n: int) -> float:
    """||E||_{H^n} / ||rho - mean||_{H^{n-1}} for the repulsive Poisson field."""
    if n < 1:
        raise ConfigurationError("poisson_gain_check needs n >= 1")
    centred = rho.values - rho.values.mean()
    denom = hs_norm(centred, n - 1)
    if denom <= 1e-14 * max(1.0, float(np.max(np.abs(rho.values)))):
        raise ConfigurationError("rho is constant: gain ratio undefined")
    return hs_norm(poisson_force(rho, 1), n) / denom


def bump(v, center: float = 0.0, half_width: float = 0.5):
    """exp(-1/(1-s^2)) on |s| < 1 with s = (v - center)/half_width, zero elsewhere."""
    s = (np.asarray(v, dtype=float) - center) / half_width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def derivative_bound(a: AdvectionField, v: np.ndarray, order: int) -> float:
    return float(np.max(np.abs(a.derivative(v, order))))


def max_abs(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


__all__ = [
    "AdvectionField", "CLASSICAL", "advection_eval", "advection_inverse",
    "Force", "ZeroForce", "AnalyticForce", "SeparableForce", "TimeSeriesForce", "ForceTerm",
    "sinusoidal_force", "ForceModel", "poisson_force", "moment_force", "shift_field",
    "force_assemble", "model_fields", "poisson_gain_check", "poisson_gain_bound", "bump",
    "math",
]
