"""Observables, statistics over z, Gamma-norms, error metrics and z-regularity diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import quadrature as qd
from .interp import Spline1D
from .quadrature import CollocationGrid
from .reconstruct import WaveField


def _dx_spectral(values: np.ndarray, k: np.ndarray) -> np.ndarray:
    ik = 1j * k
    if k.size % 2 == 0:
        ik = ik.copy()
        ik[k.size // 2] = 0.0    # odd derivative: drop the Nyquist mode so real stays real
    return sfft.ifft(ik * sfft.fft(values, axis=-1), axis=-1)


def density(psi: WaveField) -> np.ndarray:
    return np.abs(psi.values) ** 2


def current(psi: WaveField) -> np.ndarray:
    """j = eps Im(conj(psi) psi_x), derivative taken spectrally."""
    dpsi = _dx_spectral(psi.values, psi.grid.k)
    return psi.eps * np.imag(np.conj(psi.values) * dpsi)


def jtilde(psi: WaveField) -> np.ndarray:
    """Spatial integral of the current, one value per node."""
    return current(psi).sum(axis=-1) * psi.grid.dx


def expectation_values(psi: WaveField) -> tuple[np.ndarray, np.ndarray]:
    """Normalised <q> and <p> per node."""
    rho = density(psi)
    mass = rho.sum(axis=-1) * psi.grid.dx
    q = (rho * psi.grid.points).sum(axis=-1) * psi.grid.dx / mass
    dpsi = _dx_spectral(psi.values, psi.grid.k)
    p = np.real(-1j * psi.eps * np.sum(np.conj(psi.values) * dpsi, axis=-1)) * psi.grid.dx / mass
    return q, p


def _fields(f) -> np.ndarray:
    return f.values if isinstance(f, WaveField) else np.asarray(f)


def gamma_norm(fields, grid: CollocationGrid, dx: float | None = None) -> float:
    """sqrt(sum_k nu_k sum_i |f(x_i, z_k)|^2 dx)."""
    if isinstance(fields, WaveField):
        dx = fields.grid.dx
    if dx is None:
        raise ValueError("dx is required for raw arrays")
    a = _fields(fields)
    if a.shape[0] != len(grid):
        raise ValueError("fields and grid have different node counts")
    return float(np.sqrt(qd.expect(np.sum(np.abs(a) ** 2, axis=-1) * dx, grid)))


@dataclass
class ObservableSeries:
    name: str
    per_node: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    sd: np.ndarray


def stats(name: str, per_node, grid: CollocationGrid) -> ObservableSeries:
    v = np.asarray(per_node, dtype=float)
    var = qd.variance(v, grid)
    return ObservableSeries(name, v, qd.expect(v, grid), var, np.sqrt(var))


def er_psi(psi_g, psi_d, grid: CollocationGrid) -> float:
    """Relative Gamma-norm error ||psi_G - psi_D|| / ||psi_D|| on a shared grid."""
    a, b = _fields(psi_g), _fields(psi_d)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    if isinstance(psi_g, WaveField) and isinstance(psi_d, WaveField):
        if psi_g.grid != psi_d.grid:
            raise ValueError("fields live on different x grids")
    return gamma_norm(a - b, grid, 1.0) / gamma_norm(b, grid, 1.0)


@dataclass
class CurrentErrors:
    er1: float
    er2: float
    absolute: bool = False      # True when the reference mean or SD vanished


def er_j(jt_g, jt_d, grid: CollocationGrid, floor: float = 1e-14) -> CurrentErrors:
    """Relative errors in mean and SD of the integrated current."""
    jt_g, jt_d = np.asarray(jt_g, float), np.asarray(jt_d, float)
    if jt_g.shape != jt_d.shape or jt_g.shape[0] != len(grid):
        raise ValueError("current samples must align with the grid")
    diff = jt_g - jt_d
    e_diff, s_diff = abs(qd.expect(diff, grid)), float(qd.sd(diff, grid))
    e_ref, s_ref = abs(qd.expect(jt_d, grid)), float(qd.sd(jt_d, grid))
    if e_ref < floor or s_ref < floor:
        return CurrentErrors(e_diff, s_diff, absolute=True)
    return CurrentErrors(e_diff / e_ref, s_diff / s_ref)


def z_derivative_max(fields, z: np.ndarray, order: int = 1) -> float:
    """max over nodes and space of |d^order/dz^order Re(field)|.

    Re(field) is splined in z at every spatial point; the derivative is read
    at the nodes. ``fields`` has the node axis first.
    """
    a = np.real(_fields(fields))
    z = np.asarray(z, float)
    if z.ndim != 1:
        raise ValueError("z-derivative diagnostics need one-dimensional z")
    if z.size < 8:
        raise ValueError(f"need at least 8 z nodes, got {z.size}")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    s = Spline1D(z, a.reshape(z.size, -1))
    return float(np.max(np.abs(s(z, deriv=order))))
