"""Propagation of the rescaled profile w(t, eta; z) on a periodic eta grid.

The profile obeys

    w_t = (i/2) a w_etaeta - 2 i a eta^2 w - (i/eps) U_r w,   a = Im(alpha),

with coefficients supplied by the packet trajectory. Stepping is Strang
splitting: pointwise half steps around a Fourier-space kinetic step. Every
factor has unit modulus, so the discrete L2 norm is conserved to roundoff.
Arrays carry the node index first: ``values.shape == (n_nodes, n_eta)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .packet import PacketTrajectory, u_r_eval
from .potentials import Potential


class SupportEscapeError(RuntimeError):
    """w reached the edge of the periodic eta box."""


@dataclass(frozen=True)
class EtaGrid:
    eta_min: float = -20.0
    eta_max: float = 20.0
    n: int = 128

    def __post_init__(self):
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"n_eta must be a power of two, got {self.n}")
        if self.eta_max <= self.eta_min:
            raise ValueError("eta_max must exceed eta_min")

    @property
    def length(self) -> float:
        return self.eta_max - self.eta_min

    @property
    def d_eta(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.eta_min + self.d_eta * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.d_eta)


@dataclass
class WField:
    grid: EtaGrid
    values: np.ndarray      # (n_nodes, n_eta) complex
    time: float = 0.0

    def norm2(self) -> np.ndarray:
        """Discrete L2 norm squared per node."""
        return np.sum(np.abs(self.values) ** 2, axis=-1) * self.grid.d_eta

    def edge_ratio(self) -> np.ndarray:
        """max |w| over the two edge cells divided by max |w|, per node."""
        a = np.abs(self.values)
        edge = np.maximum(a[..., :2].max(axis=-1), a[..., -2:].max(axis=-1))
        return edge / np.maximum(a.max(axis=-1), np.finfo(float).tiny)


def w_initial(A: float, grid: EtaGrid, n_nodes: int = 1) -> WField:
    """A * exp(-eta^2): Gaussian packet data in rescaled variables (any eps)."""
    if A <= 0:
        raise ValueError("amplitude must be positive")
    w0 = A * np.exp(-grid.points ** 2).astype(complex)
    return WField(grid, np.tile(w0, (n_nodes, 1)), 0.0)


@dataclass(frozen=True)
class WCoefficients:
    """Coefficient samples (Im alpha, q, B) for every node at one time."""

    alpha_i: np.ndarray
    q: np.ndarray
    B: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: PacketTrajectory, i: int) -> "WCoefficients":
        return cls(traj.alpha[i].imag, traj.q[i], traj.B[i])


def _half_phase(w: WField, c: WCoefficients, V: Potential, amp, eps, dt):
    eta = w.grid.points[None, :]
    ai = c.alpha_i[:, None]
    u_r = u_r_eval(V, amp[:, None], c.q[:, None], c.B[:, None], eta, eps)
    return np.exp(-1j * (2.0 * ai * eta ** 2 + u_r / eps) * (0.5 * dt))


def wprop_step(w: WField, c_now: WCoefficients, c_mid: WCoefficients | None,
               c_next: WCoefficients, V: Potential, amp, eps: float, dt: float,
               edge_tol: float = 1e-8) -> WField:
    """One Strang step of length ``dt``.

    Potential half steps use the coefficients at t and t + dt; the kinetic
    step uses Im(alpha) averaged over the step by the trapezoid rule.
    ``c_mid`` is accepted for interface symmetry and is not needed by this
    scheme.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    amp = np.asarray(amp, dtype=float)
    k2 = w.grid.k[None, :] ** 2
    a_bar = 0.5 * (c_now.alpha_i + c_next.alpha_i)[:, None]
    v = w.values * _half_phase(w, c_now, V, amp, eps, dt)
    v = sfft.ifft(np.exp(-0.5j * a_bar * k2 * dt) * sfft.fft(v, axis=-1), axis=-1)
    v = v * _half_phase(w, c_next, V, amp, eps, dt)
    out = WField(w.grid, v, w.time + dt)
    ratio = out.edge_ratio()
    if np.any(ratio > edge_tol):
        node = int(np.argmax(ratio))
        raise SupportEscapeError(
            f"w reached the eta-box edge at node {node}, t = {out.time:.6g} "
            f"(edge/max = {ratio[node]:.3g})")
    return out


def propagate_w(w0: WField, traj: PacketTrajectory, V: Potential, amp, eps: float,
                dt_w: float, T: float, output_times=(), edge_tol: float = 1e-8):
    """Chain ``wprop_step`` from t = 0 to ``T``.

    ``traj`` must store samples every ``dt_w / 2`` (or finer, evenly). Returns
    the final field and a dict of snapshots at ``output_times``.
    """
    n_steps = int(round(T / dt_w))
    if abs(n_steps * dt_w - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"dt_w = {dt_w} does not divide T = {T}")
    if traj.times.size > 1:
        stride_f = dt_w / (traj.times[1] - traj.times[0])
        stride = int(round(stride_f))
        if abs(stride - stride_f) > 1e-9 or stride < 2 or stride % 2:
            raise ValueError("trajectory samples must split each w step into an even number of parts")
    else:
        stride = 2
    want = {round(float(t) / dt_w): float(t) for t in output_times}
    snaps = {}
    w = replace(w0)
    if 0 in want:
        snaps[want[0]] = w
    for n in range(n_steps):
        i0 = n * stride
        c0 = WCoefficients.from_trajectory(traj, i0)
        cm = WCoefficients.from_trajectory(traj, i0 + stride // 2)
        c1 = WCoefficients.from_trajectory(traj, i0 + stride)
        try:
            w = wprop_step(w, c0, cm, c1, V, amp, eps, dt_w, edge_tol)
        except SupportEscapeError as exc:
            raise SupportEscapeError(f"{exc} [step {n + 1}, t = {(n + 1) * dt_w:.6g}]") from exc
        if n + 1 in want:
            snaps[want[n + 1]] = w
    return w, snaps
