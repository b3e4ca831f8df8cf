"""Direct second-order time-splitting spectral solver for psi (the "DS" reference).

Potential half steps surround a full kinetic step in Fourier space. The
potential does not depend on time, so consecutive half steps are fused.
All nodes advance together in blocks of ``chunk`` rows.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .potentials import Potential
from .reconstruct import WaveField, XGrid


def _factors(V: Potential, amp, grid: XGrid, eps: float, dt: float):
    x = grid.points
    half = np.exp(-0.5j * dt / eps * V.V(x[None, :], np.asarray(amp, float)[:, None]))
    kin = np.exp(-0.5j * eps * dt * grid.k ** 2)
    return half, kin


def ds_step(psi: WaveField, V: Potential, amp, eps: float, dt: float) -> WaveField:
    """One Strang step: half potential phase, kinetic multiplier, half potential phase."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    half, kin = _factors(V, amp, psi.grid, eps, dt)
    v = half * psi.values
    v = sfft.ifft(kin * sfft.fft(v, axis=-1), axis=-1)
    return WaveField(psi.grid, half * v, psi.time + dt, eps)


def ds_solve(psi0: WaveField, V: Potential, amp, eps: float, dt: float, T: float,
             chunk: int = 64, output_times=()) -> tuple[WaveField, dict]:
    """Evolve every node of ``psi0`` to time ``T``.

    Returns the final field and snapshots at ``output_times`` (multiples of dt).
    """
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt = {dt} does not divide T = {T}")
    amp = np.asarray(amp, dtype=float)
    if amp.shape[0] != psi0.values.shape[0]:
        raise ValueError("one potential amplitude per node is required")
    want = sorted({int(round(t / dt)) for t in output_times})
    snaps = {k: np.empty_like(psi0.values) for k in want}
    out = np.empty_like(psi0.values)
    grid = psi0.grid
    for lo in range(0, amp.shape[0], chunk):
        rows = slice(lo, min(lo + chunk, amp.shape[0]))
        half, kin = _factors(V, amp[rows], grid, eps, dt)
        full = half * half
        v = psi0.values[rows].copy()
        if 0 in snaps:
            snaps[0][rows] = v
        if n_steps:
            v *= half
        for n in range(1, n_steps + 1):
            v = sfft.ifft(kin * sfft.fft(v, axis=-1), axis=-1)
            if n in snaps:
                snaps[n][rows] = half * v
            v *= full if n < n_steps else half
        out[rows] = v
    snap_fields = {k * dt: WaveField(grid, a, k * dt, eps) for k, a in snaps.items()}
    return WaveField(grid, out, psi0.time + n_steps * dt, eps), snap_fields


def gaussian_initial(grid: XGrid, q0, p0, alpha0, eps: float, A: float,
                     periodic: bool = True) -> WaveField:
    """A exp(i (alpha0 xi^2 + p0 xi) / eps), xi = x - q0, for each node's (q0, p0)."""
    q0 = np.atleast_1d(np.asarray(q0, float))
    p0 = np.broadcast_to(np.asarray(p0, float), q0.shape)
    alpha0 = np.broadcast_to(np.asarray(alpha0, complex), q0.shape)
    xi = grid.points[None, :] - q0[:, None]
    if periodic:
        L = grid.length
        xi = (xi + 0.5 * L) % L - 0.5 * L
    phase = alpha0[:, None] * xi ** 2 + p0[:, None] * xi
    return WaveField(grid, A * np.exp(1j * phase / eps), 0.0, eps)
