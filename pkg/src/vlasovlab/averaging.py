"""Kinetic averaging operator

    K_U(H)(t, x) = int_0^t int (dx H)(s, x - (t - s) a(v)) U(t, s, x, v) dv ds

and a numerical probe of its L2 boundedness (no derivative loss).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import simpson

from .grid import Grid, SpatialField, wavenumbers
from .interp import eval_near_shift
from .models import AdvectionField

D = 1
DEFAULT_S_POINTS = 129


@dataclass
class Kernel:
    """U(t, s, x, v) with its certified smoothness and decay.

    ``U`` must broadcast over x of shape (nx, 1) and v of shape (1, nv).
    """
    U: Callable
    smoothness_budget: int = 8
    decay_weight: float = 8.0
    kernel_id: str = "kernel"
    support: Optional[tuple] = None

    @property
    def meets_hypotheses(self) -> bool:
        """Smoothness k > 1 + d and decay sigma > d/2 (d = 1)."""
        return self.smoothness_budget >= D + 2 and self.decay_weight > D / 2

    def required_weight(self, lam: float, k: Optional[int] = None) -> float:
        k = self.smoothness_budget if k is None else k
        return self.decay_weight + (1 + lam) * (D + k)

    def certificate(self, lam: float, provided_weight: float, k: Optional[int] = None) -> dict:
        """Required vs provided weight r_k; shortfalls are flagged, not refused."""
        req = self.required_weight(lam, k)
        return {"kernel_id": self.kernel_id, "k": self.smoothness_budget,
                "sigma": self.decay_weight, "required_r": req, "provided_r": provided_weight,
                "shortfall": provided_weight < req, "meets_hypotheses": self.meets_hypotheses}

    def evaluate(self, t, s, x, v):
        out = np.asarray(self.U(t, s, x, v), dtype=float)
        return np.broadcast_to(out, np.broadcast(x, v).shape)

    def check_decay(self, t, s, x, v, bound: float = 1e6) -> float:
        c = float(np.max(np.abs(self.evaluate(t, s, x, v)) * (1 + v**2) ** (-self.decay_weight / 2)))
        if not c <= bound:
            raise ValueError(f"kernel {self.kernel_id}: weighted bound {c:.3e} exceeds {bound:.1e}")
        return c


def gaussian_kernel(width: float = 1.0) -> Kernel:
    return Kernel(lambda t, s, x, v: np.exp(-v**2 / (2 * width**2)) + 0.0 * x,
                  smoothness_budget=8, decay_weight=8.0, kernel_id=f"gaussian_{width:g}")


def zero_kernel() -> Kernel:
    return Kernel(lambda t, s, x, v: 0.0 * x * v, kernel_id="zero")


def spike_kernel(dv: float) -> Kernel:
    """Unit-mass spike on the single grid node v = 0: a grid delta, no smoothness."""
    return Kernel(lambda t, s, x, v: np.where(np.abs(v) < 0.5 * dv, 1.0 / dv, 0.0) + 0.0 * x,
                  smoothness_budget=0, decay_weight=0.0, kernel_id="spike")


HLike = Union[SpatialField, np.ndarray, Callable]


def _H_at(H: HLike, s: float) -> np.ndarray:
    if isinstance(H, SpatialField):
        return np.asarray(H.values, dtype=float)
    if isinstance(H, np.ndarray):
        return H
    out = H(s)
    return np.asarray(out.values if isinstance(out, SpatialField) else out, dtype=float)


def _quad_weights(v: np.ndarray) -> np.ndarray:
    dv = v[1] - v[0]
    w = np.full(v.size, dv)
    w[0] = w[-1] = 0.5 * dv
    return w


def _apply(U_eval: Callable, H: HLike, speeds: np.ndarray, v: np.ndarray, t: float,
           n_s: int) -> np.ndarray:
    if t == 0:
        return np.zeros(_H_at(H, 0.0).size)
    if n_s < 3 or n_s % 2 == 0:
        raise ValueError("Simpson rule needs an odd number >= 3 of s points")
    s_nodes = np.linspace(0.0, t, n_s)
    wv = _quad_weights(v)
    nx = _H_at(H, 0.0).size
    x = (np.arange(nx) / nx)[:, None]
    k = wavenumbers(nx)
    mult = 1j * k
    if nx % 2 == 0:
        mult[-1] = 0.0
    vals = np.empty((n_s, nx))
    for i, s in enumerate(s_nodes):
        hat = (np.fft.rfft(_H_at(H, s)) * mult)[:, None]
        shifted = eval_near_shift(hat, nx, -(t - s) * speeds)
        vals[i] = (shifted * U_eval(t, s, x, v[None, :])) @ wv
    return simpson(vals, x=s_nodes, axis=0)


def apply_K(kernel: Kernel, H: HLike, a: AdvectionField, t: float, grid: Grid,
            n_s: int = DEFAULT_S_POINTS) -> SpatialField:
    """Simpson in s, trapezoid over the velocity grid, exact Fourier shifts in x."""
    out = _apply(kernel.evaluate, H, a(grid.v), grid.v, t, n_s)
    return SpatialField(out.size, out, t)


def straighten_variable(kernel: Kernel, a: AdvectionField) -> Kernel:
    """U(t, s, x, a^{-1}(w)) / |a'(a^{-1}(w))| on a(R), zero outside."""
    if a.kind == "classical":
        return kernel

    def Uw(t, s, x, w):
        w = np.asarray(w, dtype=float)
        inside = a.in_range(w)
        wc = np.where(inside, w, 0.0)
        v = a.inverse(wc)
        val = np.asarray(kernel.U(t, s, x, v), dtype=float) / np.abs(a.derivative(v, 1))
        return np.where(inside, val, 0.0)

    return Kernel(Uw, kernel.smoothness_budget, kernel.decay_weight,
                  kernel.kernel_id + "_straight", support=(-a.c, a.c))


def apply_K_straight(kernel_w: Kernel, H: HLike, t: float, w: np.ndarray,
                     n_s: int = DEFAULT_S_POINTS) -> SpatialField:
    """K with free streaming at speed w over a uniform w-grid (the straight variable)."""
    w = np.asarray(w, dtype=float)
    out = _apply(kernel_w.evaluate, H, w, w, t, n_s)
    return SpatialField(out.size, out, t)


def straight_grid(a: AdvectionField, grid: Grid, n: int = 4097) -> np.ndarray:
    """Uniform w-grid covering a([-v_cut, v_cut]) (all of a(R) in the relativistic case)."""
    if a.kind == "classical":
        return np.linspace(-grid.v_cut, grid.v_cut, n)
    return np.linspace(-a.c, a.c, n)


def gaussian_oracle(m: int, t: float, x: np.ndarray, width: float = 1.0) -> np.ndarray:
    """K of H = cos(2 pi m x) for U = exp(-v^2/(2 width^2)), classical a.

    K = Re[e^{2 pi i m x} (2 pi i m) int_0^t Uhat(2 pi m u) du] with
    Uhat(k) = sqrt(2 pi) width exp(-(width k)^2 / 2).
    """
    k = 2 * np.pi * m
    integral = math.sqrt(2 * math.pi) * width * math.sqrt(math.pi / 2) / (width * k) \
        * math.erf(width * k * t / math.sqrt(2))
    return -k * integral * np.sin(k * x)


@dataclass
class RatioRow:
    mode: int
    ratio: float
    kernel_id: str
    t: float
    quadrature_level: int


def smoothing_ratio(kernel: Kernel, a: AdvectionField, modes: Sequence[int], t: float,
                    grid: Grid, n_tau: int = 17, n_s: int = DEFAULT_S_POINTS) -> list[RatioRow]:
    """||K(H_m)||_{L2(0,t;L2)} / ||H_m||_{L2(0,t;L2)} for H_m = cos(2 pi m x)."""
    taus = np.linspace(0.0, t, n_tau)
    x = grid.x
    rows = []
    for m in modes:
        if m == 0:
            raise ValueError("modes must be nonzero")
        H = np.cos(2 * np.pi * m * x)
        sq = np.array([np.mean(apply_K(kernel, H, a, tau, grid, n_s).values ** 2) for tau in taus])
        num = simpson(sq, x=taus)
        den = simpson(np.full(n_tau, np.mean(H**2)), x=taus)
        rows.append(RatioRow(int(m), float(math.sqrt(num / den)), kernel.kernel_id, float(t), n_s))
    return rows


def ratio_slope(rows: Sequence[RatioRow]) -> float:
    """Least-squares slope of ratio against mode."""
    m = np.array([r.mode for r in rows], dtype=float)
    y = np.array([r.ratio for r in rows])
    return float(np.polyfit(m, y, 1)[0])


AVERAGING_HEADER = ["mode", "ratio", "kernel_id", "t", "quadrature_level"]


def write_ratio_csv(rows: Sequence[RatioRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AVERAGING_HEADER)
        for r in rows:
            w.writerow([r.mode, "%.17g" % r.ratio, r.kernel_id, "%.17g" % r.t, r.quadrature_level])
