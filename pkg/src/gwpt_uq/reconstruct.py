"""Wave function assembly from (w, packet parameters) and Heller's exact Gaussian."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline

from .packet import PacketParams
from .potentials import Potential
from .wprop import WField


@dataclass(frozen=True)
class XGrid:
    """Uniform periodic grid x_i = x_min + i * dx, i = 0..n-1."""

    x_min: float = -np.pi
    x_max: float = np.pi
    n: int = 9600

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx)


@dataclass
class WaveField:
    grid: XGrid
    values: np.ndarray      # (n_nodes, n_x) complex
    time: float
    eps: float

    def mass(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=-1) * self.grid.dx


def normalization(eps: float, alpha0: complex = 1j) -> float:
    """Amplitude giving unit L2 mass to A exp(i alpha0 x^2 / eps)."""
    return (2.0 * np.imag(alpha0) / (np.pi * eps)) ** 0.25


def _offsets(x: np.ndarray, q: np.ndarray, grid: XGrid, periodic: bool) -> np.ndarray:
    xi = x[None, :] - q[:, None]
    if periodic:
        L = grid.length
        xi = (xi + 0.5 * L) % L - 0.5 * L
    return xi


def upsample_periodic(values: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation onto a grid ``factor`` times finer (last axis)."""
    if factor == 1:
        return values
    n = values.shape[-1]
    spec = sfft.fft(values, axis=-1)
    m = n * factor
    out = np.zeros(values.shape[:-1] + (m,), dtype=complex)
    h = n // 2
    out[..., :h] = spec[..., :h]
    out[..., m - h + 1:] = spec[..., h + 1:]
    # split the Nyquist coefficient between +/- frequencies
    out[..., h] = 0.5 * spec[..., h]
    out[..., m - h] = 0.5 * spec[..., h]
    return sfft.ifft(out, axis=-1) * factor


class _ProfileSampler:
    """Evaluates per-node w profiles at per-node eta points.

    w is refined spectrally by ``upsample`` and then interpolated with a
    natural cubic spline on the refined uniform grid; points with
    |eta| > eta_max - guard read as zero.
    """

    def __init__(self, w: WField, upsample: int = 16, guard: float = 2.0):
        g = w.grid
        fine = upsample_periodic(w.values, upsample)         # (nodes, m)
        m = fine.shape[-1]
        self.h = g.d_eta / upsample
        # close the period so the spline covers [eta_min, eta_max]
        knots = g.eta_min + self.h * np.arange(m + 1)
        data = np.concatenate([fine, fine[:, :1]], axis=1).T   # (m+1, nodes)
        self.c = CubicSpline(knots, data, axis=0, bc_type="natural").c  # (4, m, nodes)
        self.eta_min = g.eta_min
        self.m = m
        self.cut = min(abs(g.eta_min), g.eta_max) - guard

    def __call__(self, eta: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        # eta: (len(nodes), n_pts)
        s = (eta - self.eta_min) / self.h
        idx = np.clip(np.floor(s).astype(np.int64), 0, self.m - 1)
        d = (s - idx) * self.h
        col = nodes[:, None]
        c = self.c
        val = ((c[0][idx, col] * d + c[1][idx, col]) * d + c[2][idx, col]) * d + c[3][idx, col]
        return np.where(np.abs(eta) <= self.cut, val, 0.0)


def reconstruct_psi(w: WField, s: PacketParams, xgrid: XGrid, eps: float,
                    periodic: bool = True, upsample: int = 16, chunk: int = 64,
                    modulus_only: bool = False) -> WaveField:
    """psi(x) = w(B xi / sqrt(eps)) exp(i (Re(alpha) xi^2 + p xi + gamma) / eps), xi = x - q.

    ``w.values`` and the parameter arrays must share the node axis. With
    ``periodic`` the offset xi is wrapped into one period of the x grid.
    ``modulus_only`` skips the oscillatory phase (density work only).
    """
    n_nodes = w.values.shape[0]
    if len(s) != n_nodes:
        raise ValueError("w and packet parameters have different node counts")
    if np.any(s.alpha.imag <= 0) or np.any(s.B <= 0):
        raise ValueError("packet parameters must have Im(alpha) > 0 and B > 0")
    _support_check(w, s, xgrid, eps, periodic)
    sampler = _ProfileSampler(w, upsample)
    x = xgrid.points
    out = np.empty((n_nodes, xgrid.n), dtype=complex)
    for lo in range(0, n_nodes, chunk):
        nodes = np.arange(lo, min(lo + chunk, n_nodes))
        xi = _offsets(x, s.q[nodes], xgrid, periodic)
        eta = s.B[nodes, None] * xi / np.sqrt(eps)
        wt = sampler(eta, nodes)
        g = s.gamma[nodes, None]
        if modulus_only:
            out[nodes] = wt * np.exp(-g.imag / eps)
        else:
            phase = s.alpha[nodes, None].real * xi ** 2 + s.p[nodes, None] * xi + g
            out[nodes] = wt * np.exp(1j * phase / eps)
    return WaveField(xgrid, out, w.time, eps)


def _support_check(w: WField, s: PacketParams, xgrid: XGrid, eps: float, periodic: bool):
    eta = w.grid.points
    half = 0.5 * xgrid.length if periodic else None
    a2 = np.abs(w.values) ** 2
    total = a2.sum(axis=-1)
    if half is None:
        lo = s.B * (xgrid.x_min - s.q) / np.sqrt(eps)
        hi = s.B * (xgrid.x_max - s.q) / np.sqrt(eps)
    else:
        lo = -s.B * half / np.sqrt(eps)
        hi = s.B * half / np.sqrt(eps)
    outside = ((eta[None, :] < lo[:, None]) | (eta[None, :] > hi[:, None])) * a2
    frac = outside.sum(axis=-1) / np.maximum(total, np.finfo(float).tiny)
    if np.any(frac > 1e-6):
        k = int(np.argmax(frac))
        warnings.warn(f"{frac[k]:.2e} of the w mass at node {k} maps outside the x domain",
                      RuntimeWarning, stacklevel=3)


def heller_exact(s: PacketParams, xgrid: XGrid, eps: float, A: float = 1.0,
                 time: float = 0.0, periodic: bool = False,
                 V: Potential | None = None) -> WaveField:
    """A exp(i (alpha xi^2 + p xi + gamma) / eps) from Heller-gauge parameters.

    Passing the potential ``V`` guards against use outside the quadratic case.
    """
    if V is not None and not V.is_quadratic:
        raise ValueError(f"Heller's solution is exact only for quadratic potentials, not {V.shape!r}")
    xi = _offsets(xgrid.points, s.q, xgrid, periodic)
    phase = s.alpha[:, None] * xi ** 2 + s.p[:, None] * xi + s.gamma[:, None]
    return WaveField(xgrid, A * np.exp(1j * phase / eps), time, eps)
