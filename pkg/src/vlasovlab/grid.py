"""Phase-space grids, x/v calculus, weighted norms and velocity moments.

Layout convention: phase-space arrays have shape ``(nx, nv)``; axis 0 is the
periodic x direction on [0, 1), axis 1 the velocity on [-v_cut, v_cut).
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DecayError, ResolutionError

DECAY_TOL = 1e-10
MIN_ANISO_ORDER = -8
GRID_MAGIC = b"VLGRID1\0"
_HEADER = struct.Struct("<8sIIdd")


def _is_pow2(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    nx: int
    nv: int
    v_cut: float

    def __post_init__(self):
        if not _is_pow2(self.nx):
            raise ConfigurationError(f"grid.nx must be a power of two (got {self.nx})")
        if not _is_pow2(self.nv):
            raise ConfigurationError(f"grid.nv must be a power of two (got {self.nv})")
        if not (self.v_cut > 0 and math.isfinite(self.v_cut)):
            raise ConfigurationError(f"grid.v_cut must be positive (got {self.v_cut})")
        if not self.dv < 1:
            raise ConfigurationError(f"grid.dv = {self.dv} must be < 1; increase nv")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.v_cut / self.nv

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.v_cut + np.arange(self.nv) * self.dv

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nv)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v, indexing="ij")

    def sample(self, func: Callable, time: float = 0.0) -> "PhaseField":
        X, V = self.mesh()
        vals = np.broadcast_to(np.asarray(func(X, V), dtype=float), self.shape)
        return PhaseField(self, np.array(vals), time)

    def v_weights(self) -> np.ndarray:
        """Trapezoid weights on the open velocity grid."""
        w = np.full(self.nv, self.dv)
        w[0] = w[-1] = 0.5 * self.dv
        return w


def build_grid(nx: int, nv: int, v_cut: float) -> Grid:
    return Grid(int(nx) if isinstance(nx, (int, np.integer)) else nx,
                int(nv) if isinstance(nv, (int, np.integer)) else nv,
                float(v_cut))


@dataclass
class PhaseField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("PhaseField values must be finite")

    def decay_ratio(self) -> float:
        """max |f| on the two outermost v-rows relative to max |f|."""
        peak = np.max(np.abs(self.values))
        if peak == 0:
            return 0.0
        edge = np.abs(self.values[:, [0, 1, -2, -1]]).max()
        return float(edge / peak)

    def decays(self, tol: float = DECAY_TOL) -> bool:
        return self.decay_ratio() <= tol

    def require_decay(self, tol: float = DECAY_TOL) -> None:
        ratio = self.decay_ratio()
        if ratio > tol:
            raise DecayError(
                f"field at t={self.time} has edge/peak ratio {ratio:.3e} > {tol:.0e}; "
                "increase v_cut")

    def with_values(self, values, time=None) -> "PhaseField":
        return PhaseField(self.grid, values, self.time if time is None else time)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


@dataclass
class SpatialField:
    nx: int
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.nx,):
            raise ConfigurationError(f"SpatialField expects shape ({self.nx},)")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("SpatialField values must be finite")

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    def mean(self) -> float:
        return float(self.values.mean())

    def __getitem__(self, i):
        # periodic index semantics
        return self.values[np.mod(i, self.nx)]


def _vals(obj):
    return obj.values if hasattr(obj, "values") else obj


@dataclass(frozen=True)
class MomentSpec:
    """Velocity test function psi with polynomial growth exponent r0."""
    psi: Callable[[np.ndarray], np.ndarray]
    r0: float = 0.0
    derivative_order_available: int = 8
    name: str = "psi"

    def sample(self, v: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.psi(v), dtype=float), np.shape(v)).copy()

    def growth_constant(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(self.sample(v)) * (1 + v**2) ** (-self.r0 / 2)))

    def check_growth(self, v: np.ndarray, bound: float = 1e6) -> None:
        c = self.growth_constant(v)
        if not c <= bound:
            raise ConfigurationError(
                f"|psi|(1+v^2)^(-r0/2) reaches {c:.3e} > {bound:.1e} for MomentSpec {self.name}")


UNIT_MOMENT = MomentSpec(lambda v: np.ones_like(v), r0=0.0, name="one")


class NormReport:
    """Table (kind, params, time) -> value."""

    def __init__(self):
        self.entries: dict[tuple[str, tuple, float], float] = {}

    def add(self, kind: str, params: tuple, time: float, value: float) -> None:
        value = float(value)
        if not (value >= 0 and math.isfinite(value)):
            raise ValueError(f"norm {kind}{params} at t={time} is {value}")
        self.entries[(kind, tuple(params), float(time))] = value

    def get(self, kind, params, time):
        return self.entries[(kind, tuple(params), float(time))]

    def series(self, kind, params) -> tuple[np.ndarray, np.ndarray]:
        rows = sorted((t, v) for (k, p, t), v in self.entries.items()
                      if k == kind and p == tuple(params))
        if not rows:
            return np.empty(0), np.empty(0)
        t, v = zip(*rows)
        return np.array(t), np.array(v)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])))


# ---------------------------------------------------------------- calculus

def wavenumbers(nx: int) -> np.ndarray:
    """Angular wavenumbers 2*pi*m for the rfft of a length-nx periodic sample."""
    return 2 * np.pi * np.arange(nx // 2 + 1)


def dx_array(values: np.ndarray, k: int, axis: int = 0) -> np.ndarray:
    if k < 0:
        raise ConfigurationError("derivative order must be >= 0")
    if k == 0:
        return np.array(values, dtype=float, copy=True)
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    mult = (1j * wavenumbers(n)) ** k
    if k % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = -1
    hat = np.fft.rfft(values, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(hat, n=n, axis=axis)


def spectral_dx(f, k: int):
    """k-th x-derivative by the Fourier multiplier (2*pi*i*m)^k."""
    if isinstance(f, SpatialField):
        return SpatialField(f.nx, dx_array(f.values, k, axis=0), f.time)
    return PhaseField(f.grid, dx_array(f.values, k, axis=0), f.time)


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights on integer offsets (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    b = np.zeros(n)
    b[order] = math.factorial(order)
    return np.linalg.solve(A, b)


def _stencils(order: int):
    width = 5 if order == 1 else 6
    interior = np.arange(-2, 3)
    lo = [np.arange(width) - r for r in range(2)]
    hi = [np.arange(-width + 1, 1) + r for r in (1, 0)]
    return (fd_weights(interior, order), interior,
            [(fd_weights(o, order), o) for o in lo],
            [(fd_weights(o, order), o) for o in hi])


_D1 = _stencils(1)
_D2 = _stencils(2)


def _apply_stencil(values, stencil, h, order):
    w_int, off_int, lo, hi = stencil
    n = values.shape[-1]
    if n < 8:
        raise ResolutionError("fd_dv needs at least 8 velocity points")
    out = np.zeros_like(values)
    for w, o in zip(w_int, off_int):
        out[..., 2:n - 2] += w * values[..., 2 + o:n - 2 + o]
    for row, (w, o) in enumerate(lo):
        out[..., row] = values[..., row + o] @ w
    for row, (w, o) in zip((n - 2, n - 1), hi):
        out[..., row] = values[..., row + o] @ w
    return out / h**order


def dv_array(values: np.ndarray, k: int, dv: float) -> np.ndarray:
    """k-th derivative along the last axis, 4th order, one-sided at the two edge rows."""
    if k < 0:
        raise ConfigurationError("derivative order must be >= 0")
    out = np.array(values, dtype=float, copy=True)
    for _ in range(k // 2):
        out = _apply_stencil(out, _D2, dv, 2)
    if k % 2:
        out = _apply_stencil(out, _D1, dv, 1)
    return out


def fd_dv(f: PhaseField, k: int) -> PhaseField:
    out = PhaseField(f.grid, dv_array(f.values, k, f.grid.dv), f.time)
    if k > 0 and not f.decays():
        msg = (f"fd_dv: input edge/peak ratio {f.decay_ratio():.2e} exceeds {DECAY_TOL:.0e}; "
               "one-sided boundary stencils act on non-negligible data")
        out.warnings = (msg,)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out


def mixed_derivative(values: np.ndarray, grid: Grid, a: int, b: int) -> np.ndarray:
    return dv_array(dx_array(values, a, axis=0), b, grid.dv)


def _check_budget(grid: Grid, k: int) -> None:
    if k > grid.nv / 8:
        raise ResolutionError(
            f"derivative order {k} exceeds the budget nv/8 = {grid.nv / 8:g}")


def integrate(values: np.ndarray, grid: Grid) -> float:
    """Periodic rectangle rule in x times trapezoid in v."""
    return float(grid.dx * (values @ grid.v_weights()).sum())


def weighted_sobolev_norm(f: PhaseField, k: int, r: float) -> float:
    _check_budget(f.grid, k)
    g = f.grid
    weight = (1 + g.v**2) ** r
    total = 0.0
    for a in range(k + 1):
        fx = dx_array(f.values, a, axis=0)
        for b in range(k + 1 - a):
            d = dv_array(fx, b, g.dv)
            total += integrate(weight * d**2, g)
    return math.sqrt(total)


def winf_norm(f: PhaseField, k: int, r: float) -> float:
    _check_budget(f.grid, k)
    g = f.grid
    weight = (1 + g.v**2) ** (r / 2)
    total = 0.0
    for a in range(k + 1):
        fx = dx_array(f.values, a, axis=0)
        for b in range(k + 1 - a):
            total += float(np.max(np.abs(weight * dv_array(fx, b, g.dv))))
    return total


def aniso_norm(f: PhaseField, m: float, n: float) -> float:
    """H^{m,n} norm from the 2-D discrete transform (periodic x, windowed v).

    Normalised so that m = n = 0 reproduces the L2 norm of the grid quadrature.
    """
    if n < MIN_ANISO_ORDER:
        raise ResolutionError(f"v-order {n} below supported minimum {MIN_ANISO_ORDER}")
    f.require_decay()
    g = f.grid
    L = 2 * g.v_cut
    c = np.fft.fft2(f.values) / (g.nx * g.nv)
    k = 2 * np.pi * np.fft.fftfreq(g.nx, d=1.0 / g.nx)
    eta = 2 * np.pi * np.fft.fftfreq(g.nv, d=g.dv)
    w = (1 + k[:, None] ** 2) ** (m / 2) * (1 + eta[None, :] ** 2) ** (n / 2)
    return math.sqrt(L * float(np.sum((w * np.abs(c)) ** 2)))


def moment(f: PhaseField, spec: MomentSpec) -> SpatialField:
    psi = spec.sample(f.grid.v)
    return SpatialField(f.grid.nx, f.values @ (psi * f.grid.v_weights()), f.time)


def hs_norm(u, s: float) -> float:
    """Periodic H^s norm with multiplier (1 + (2 pi m)^2)^(s/2); s=0 gives the L2 norm."""
    vals = _vals(u)
    n = len(vals)
    c = np.fft.fft(vals) / n
    k = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    return math.sqrt(float(np.sum((1 + k**2) ** s * np.abs(c) ** 2)))


def compute_thresholds(d: int, lam: float, r0: float) -> tuple[float, float]:
    """Regularity index N and weight index R for dimension d, inverse growth lam, moment growth r0."""
    if d < 1 or lam < 0 or r0 < 0:
        raise ConfigurationError("need d >= 1, lambda >= 0, r0 >= 0")
    N = 1.5 * d + 4
    R = d / 2 + 2 * (1 + lam) * (1 + d) + r0
    return N, R


# ------------------------------------------------------------- binary dumps

def dump_field(f: PhaseField, path) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(GRID_MAGIC, g.nx, g.nv, g.v_cut, float(f.time)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> PhaseField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigurationError(f"{path}: truncated header")
        magic, nx, nv, v_cut, time = _HEADER.unpack(head)
        if magic != GRID_MAGIC:
            raise ConfigurationError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * nv:
        raise ConfigurationError(f"{path}: expected {nx * nv} values, found {data.size}")
    return PhaseField(Grid(nx, nv, v_cut), data.reshape(nx, nv).astype(float), time)


def replace_time(f: PhaseField, time: float) -> PhaseField:
    return replace(f, time=time)
