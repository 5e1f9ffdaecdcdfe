"""Interpolation kernels: trigonometric (periodic x) and monotone cubic (v).

Two evaluation paths exist for periodic data:

* ``fourier_eval`` sums the trigonometric interpolant directly (numba loop,
  O(points * modes)); it is the reference path.
* ``eval_near_shift`` evaluates at ``x_i + shift_c + delta_ic`` when the
  per-column shift is known and ``delta`` is small, using one phase multiply
  plus a Taylor series in ``delta``; every term is an inverse FFT.  The series
  is cut once the remaining terms are below double precision.

Velocity interpolation is piecewise cubic Hermite.  Node slopes are the
fourth-order centred estimate.  Where the five-point stencil is monotone the
slope is clipped (Hyman-type filter) to at most three times the smaller
adjacent secant, so every cell inside a monotone run is interpolated
monotonically; next to a flat secant the slope is zero.  Near discrete
extrema the centred slope is kept, which preserves fourth-order accuracy on
smooth data.  Differences below a roundoff floor (``SNAP`` times the largest
sample in the stencil) count as exactly flat, so noise that is negligible at
the local scale never switches the limiter branch.  The floor is local and
scale invariant, so the scheme stays additive for data with well separated
supports.  Fields are treated as zero outside the
v-grid.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import NotADiffeomorphismError

_TAYLOR_TOL = 1e-17
_MAX_TAYLOR = 40
SNAP = 1e-13


# ------------------------------------------------------------ trigonometric

def rfft_weights(nx: int) -> np.ndarray:
    w = np.full(nx // 2 + 1, 2.0)
    w[0] = 1.0
    if nx % 2 == 0:
        w[-1] = 1.0
    return w / nx


@numba.njit(cache=True)
def _fourier_eval_kernel(coef, pts):
    # coef already scaled by rfft_weights; Re(sum_m coef_m e^{2 pi i m x})
    out = np.empty(pts.shape[0])
    M = coef.shape[0]
    for p in range(pts.shape[0]):
        th = 2.0 * np.pi * pts[p]
        z = complex(math.cos(th), math.sin(th))
        zm = complex(1.0, 0.0)
        acc = 0.0
        for m in range(M):
            c = coef[m]
            acc += c.real * zm.real - c.imag * zm.imag
            zm = zm * z
        out[p] = acc
    return out


@numba.njit(cache=True)
def _fourier_eval_cols_kernel(coef, pts):
    # coef: (M, ncol); pts: (npts, ncol); column c of pts uses column c of coef
    npts, ncol = pts.shape
    M = coef.shape[0]
    out = np.empty((npts, ncol))
    for p in range(npts):
        for c in range(ncol):
            th = 2.0 * np.pi * pts[p, c]
            z = complex(math.cos(th), math.sin(th))
            zm = complex(1.0, 0.0)
            acc = 0.0
            for m in range(M):
                cc = coef[m, c]
                acc += cc.real * zm.real - cc.imag * zm.imag
                zm = zm * z
            out[p, c] = acc
    return out


def fourier_coefficients(values: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Scaled rfft coefficients (optionally differentiated) for ``fourier_eval``."""
    values = np.asarray(values, dtype=float)
    nx = values.shape[0]
    hat = np.fft.rfft(values, axis=0)
    mult = rfft_weights(nx).astype(complex)
    if deriv:
        mult = mult * (2j * np.pi * np.arange(nx // 2 + 1)) ** deriv
        if deriv % 2 == 1 and nx % 2 == 0:
            mult[-1] = 0.0
    shape = (-1,) + (1,) * (values.ndim - 1)
    return hat * mult.reshape(shape)


def fourier_eval(values: np.ndarray, points, deriv: int = 0) -> np.ndarray:
    """Trigonometric interpolant of periodic samples on [0, 1) evaluated anywhere."""
    coef = fourier_coefficients(values, deriv)
    pts = np.asarray(points, dtype=float)
    return _fourier_eval_kernel(coef, pts.ravel()).reshape(pts.shape)


def fourier_eval_columns(values: np.ndarray, points: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Evaluate column c of ``values`` (nx, ncol) at the points ``points[:, c]``."""
    coef = np.ascontiguousarray(fourier_coefficients(values, deriv))
    return _fourier_eval_cols_kernel(coef, np.ascontiguousarray(points, dtype=float))


def eval_near_shift(hat: np.ndarray, nx: int, shift: np.ndarray, delta=None) -> np.ndarray:
    """Evaluate periodic columns at ``x_i + shift[c] + delta[i, c]``.

    ``hat`` is ``np.fft.rfft(values, axis=0)`` with shape (nx//2+1, ncol), or
    shape (nx//2+1, 1) to broadcast one function over all columns.
    Returns None when ``delta`` is too large for the series to converge fast;
    callers then fall back to ``fourier_eval_columns``.
    """
    k = 2 * np.pi * np.arange(nx // 2 + 1)
    term = hat * np.exp(1j * k[:, None] * np.asarray(shift)[None, :])
    out = np.fft.irfft(term, n=nx, axis=0)
    if delta is None:
        return out
    dmax = float(np.max(np.abs(delta))) if np.size(delta) else 0.0
    if dmax == 0.0:
        return out
    kd = k[-1] * dmax
    if kd > 1.0:
        return None
    scale = float(np.max(np.abs(hat))) * (nx // 2 + 1) / nx * 2 + 1e-300
    dp = np.ones_like(delta)
    bound = 1.0
    for p in range(1, _MAX_TAYLOR):
        term = term * (1j * k)[:, None]
        dp = dp * delta / p
        out = out + np.fft.irfft(term, n=nx, axis=0) * dp
        bound *= kd / p
        if bound * scale < _TAYLOR_TOL * scale or bound < 1e-17:
            break
    return out


# ----------------------------------------------------------- monotone cubic

def pchip_slope(ym2, ym, y0, yp, yp2, h):
    """Limited slope at the middle of five equally spaced samples."""
    m = (ym2 - 8.0 * ym + 8.0 * yp - yp2) / (12.0 * h)
    tol = SNAP * np.maximum(np.maximum(np.maximum(np.abs(ym2), np.abs(ym)),
                                       np.maximum(np.abs(y0), np.abs(yp))), np.abs(yp2))
    dm, d0, d1, dp = (np.where(np.abs(d) <= tol, 0.0, d)
                      for d in (ym - ym2, y0 - ym, yp - y0, yp2 - yp))
    # cap only where the whole stencil is monotone (or flat beside it)
    mono = (d0 * d1 > 0) & (dm * d0 >= 0) & (d1 * dp >= 0)
    flat = (d0 == 0) | (d1 == 0)
    cap = 3.0 * np.minimum(np.abs(d0), np.abs(d1)) / h
    limited = np.where(m * d0 > 0, np.sign(m) * np.minimum(np.abs(m), cap), 0.0)
    return np.where(flat, 0.0, np.where(mono, limited, m))


def hermite(y0, y1, m0, m1, h, s):
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1)


def centred_slope(ym2, ym, y0, yp, yp2, h):
    return (ym2 - 8.0 * ym + 8.0 * yp - yp2) / (12.0 * h)


def pchip_local(ym2, ym, y0, y1, y2, y3, s, h, limited=True):
    """Cubic value at fraction s in [0,1) of the cell [y0, y1].

    ``limited=False`` keeps the centred slopes everywhere; the interpolant is
    then linear in the data.
    """
    slope = pchip_slope if limited else centred_slope
    return hermite(y0, y1, slope(ym2, ym, y0, y1, y2, h), slope(ym, y0, y1, y2, y3, h), h, s)


def _velocity_stencil(grid_v0, dv, nv, V):
    pos = (V - grid_v0) / dv
    j0 = np.floor(pos).astype(np.int64)
    return j0, pos - j0


def tensor_interp_direct(values: np.ndarray, v0: float, dv: float, X: np.ndarray,
                         V: np.ndarray, limited: bool = True) -> np.ndarray:
    """Fourier(x) x monotone-cubic(v) interpolation at arbitrary feet (reference path)."""
    nx, nv = values.shape
    coef = np.ascontiguousarray(fourier_coefficients(values))  # (M, nv)
    j0, s = _velocity_stencil(v0, dv, nv, V)
    flatX = X.ravel()
    rows = []
    for off in (-2, -1, 0, 1, 2, 3):
        j = (j0 + off).ravel()
        inside = (j >= 0) & (j < nv)
        jc = np.clip(j, 0, nv - 1)
        vals = _gather_eval(coef, flatX, jc)
        rows.append(np.where(inside, vals, 0.0).reshape(X.shape))
    return pchip_local(*rows, s, dv, limited)


@numba.njit(cache=True)
def _gather_eval(coef, xs, cols):
    out = np.empty(xs.shape[0])
    M = coef.shape[0]
    for p in range(xs.shape[0]):
        th = 2.0 * np.pi * xs[p]
        z = complex(math.cos(th), math.sin(th))
        zm = complex(1.0, 0.0)
        acc = 0.0
        c = cols[p]
        for m in range(M):
            cc = coef[m, c]
            acc += cc.real * zm.real - cc.imag * zm.imag
            zm = zm * z
        out[p] = acc
    return out


def tensor_interp_shifted(values: np.ndarray, v0: float, dv: float, shift: np.ndarray,
                          delta: np.ndarray, V: np.ndarray, limited: bool = True):
    """Fast path of ``tensor_interp_direct`` for feet X = x_i + shift[j] + delta[i, j].

    Requires every foot velocity to stay within one cell of its node
    (|V - v_j| < dv); returns None otherwise, or when delta is too large.
    """
    nx, nv = values.shape
    jnode = np.arange(nv)
    j0, s = _velocity_stencil(v0, dv, nv, V)
    rel = j0 - jnode[None, :]
    if rel.min() < -1 or rel.max() > 0:
        return None
    hat = np.fft.rfft(values, axis=0)
    padded = np.zeros((hat.shape[0], nv + 6), dtype=complex)
    padded[:, 3:nv + 3] = hat
    shifted = {}
    for o in range(-3, 4):
        cols = padded[:, 3 + o:3 + o + nv]
        ev = eval_near_shift(cols, nx, shift, delta)
        if ev is None:
            return None
        shifted[o] = ev
    # rel == 0: stencil rows j-2..j+3 ; rel == -1: rows j-3..j+2
    lo = rel == -1
    rows = [np.where(lo, shifted[o - 1], shifted[o]) for o in range(-2, 4)]
    return pchip_local(*rows, s, dv, limited)


# ------------------------------------------------------------ 1-D monotone

class MonotoneCubic:
    """Fritsch-Carlson monotone cubic on strictly increasing knots.

    End slopes follow the three-point rule with the usual monotonicity clamp.
    """

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.size < 3 or np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing with at least 3 points")
        self.xs, self.ys = xs, ys
        h = np.diff(xs)
        d = np.diff(ys) / h
        m = np.zeros_like(ys)
        w1 = 2 * h[1:] + h[:-1]
        w2 = h[1:] + 2 * h[:-1]
        same = d[:-1] * d[1:] > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            hm = (w1 + w2) / (w1 / d[:-1] + w2 / d[1:])
        m[1:-1] = np.where(same, hm, 0.0)
        m[0] = self._edge(h[0], h[1], d[0], d[1])
        m[-1] = self._edge(h[-1], h[-2], d[-1], d[-2])
        self.m, self.h = m, h

    @staticmethod
    def _edge(h0, h1, d0, d1):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            return 3 * d0
        return s

    def _seg(self, x):
        k = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)
        return k, (x - self.xs[k]) / self.h[k]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k, s = self._seg(x)
        return hermite(self.ys[k], self.ys[k + 1], self.m[k], self.m[k + 1], self.h[k], s)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        k, s = self._seg(x)
        h = self.h[k]
        y0, y1, m0, m1 = self.ys[k], self.ys[k + 1], self.m[k], self.m[k + 1]
        return ((6 * s**2 - 6 * s) * y0 / h + (3 * s**2 - 4 * s + 1) * m0
                + (-6 * s**2 + 6 * s) * y1 / h + (3 * s**2 - 2 * s) * m1)

    def is_increasing(self) -> bool:
        return bool(np.all(np.diff(self.ys) > 0))

    def inverse(self, y, tol: float = 1e-14, maxiter: int = 60):
        """Exact inverse of the (increasing) interpolant; NaN outside its range."""
        if not self.is_increasing():
            raise NotADiffeomorphismError("sampled map is not strictly increasing")
        y = np.asarray(y, dtype=float)
        inside = (y >= self.ys[0]) & (y <= self.ys[-1])
        yc = np.clip(y, self.ys[0], self.ys[-1])
        k = np.clip(np.searchsorted(self.ys, yc, side="right") - 1, 0, self.ys.size - 2)
        lo = self.xs[k].copy()
        hi = self.xs[k + 1].copy()
        dy = self.ys[k + 1] - self.ys[k]
        x = lo + (yc - self.ys[k]) / dy * (hi - lo)
        for _ in range(maxiter):
            r = self(x) - yc
            lo = np.where(r < 0, x, lo)
            hi = np.where(r > 0, x, hi)
            dr = self.derivative(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - r / dr
            bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            done = np.max(np.abs(xn - x), initial=0.0) <= tol * (1 + np.max(np.abs(x), initial=0.0))
            x = xn
            if done:
                break
        return np.where(inside, x, np.nan)


def periodic_inverse(displacement: np.ndarray, targets: np.ndarray, newton_steps: int = 8,
                     tol: float = 1e-14) -> np.ndarray:
    """Solve x0 + D(x0) = target for each column of a periodic displacement D.

    ``displacement`` has shape (nx, ncol), sampled on the uniform grid of labels
    x0 = i/nx; ``targets`` has shape (ntarget, ncol).  The map must be strictly
    increasing.  A monotone cubic inverse of the sampled relation gives the
    starting point, Newton on the trigonometric interpolant of D finishes.
    Returns unwrapped labels (possibly outside [0, 1)).
    """
    nx, ncol = displacement.shape
    x0 = np.arange(nx) / nx
    y = x0[:, None] + displacement
    if np.any(np.diff(y, axis=0) <= 0) or np.any(y[0] + 1 - y[-1] <= 0):
        raise NotADiffeomorphismError("label map is not strictly increasing")
    dprime = 1 + np.fft.irfft(np.fft.rfft(displacement, axis=0)
                              * (2j * np.pi * np.arange(nx // 2 + 1))[:, None], n=nx, axis=0)
    if np.any(dprime <= 0):
        raise NotADiffeomorphismError("label map has non-positive derivative")
    guess = np.empty(targets.shape)
    for c in range(ncol):
        ext_y = np.concatenate([y[-3:, c] - 1, y[:, c], y[:3, c] + 1])
        ext_x = np.concatenate([x0[-3:] - 1, x0, x0[:3] + 1])
        lo_wrap = np.floor(targets[:, c] - y[0, c])
        t = targets[:, c] - lo_wrap
        guess[:, c] = MonotoneCubic(ext_y, ext_x)(t) + lo_wrap
    xs = guess
    for _ in range(newton_steps):
        D = fourier_eval_columns(displacement, xs)
        Dp = fourier_eval_columns(displacement, xs, deriv=1)
        step = (xs + D - targets) / (1 + Dp)
        xs = xs - step
        if np.max(np.abs(step)) < tol:
            break
    return xs
