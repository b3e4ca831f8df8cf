"""Gaussian wave packet parameters: ODEs, RK4 integration, potential remainder.

All arrays are indexed by collocation node, so one RK4 step advances every
node at once. Nodes never interact; the vectorisation is only for speed.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .potentials import Potential


class PacketBlowUpError(RuntimeError):
    """Im(alpha) left the upper half plane at some node."""

    def __init__(self, node: int, time: float):
        super().__init__(f"Im(alpha) <= 0 at node {node}, t = {time:.6g}")
        self.node = node
        self.time = time


@dataclass
class PacketParams:
    """Packet parameters for a set of nodes (arrays of equal length)."""

    q: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    B: np.ndarray

    @classmethod
    def initial(cls, q0, p0, alpha0=1j, gamma0=0.0, n: int | None = None) -> "PacketParams":
        """Initial parameters; scalars are broadcast to ``n`` nodes.

        ``B`` starts at sqrt(Im alpha0) so that B**2 == Im(alpha) throughout.
        """
        q0, p0 = np.asarray(q0, dtype=float), np.asarray(p0, dtype=float)
        alpha0 = np.asarray(alpha0, dtype=complex)
        gamma0 = np.asarray(gamma0, dtype=complex)
        if n is None:
            n = max(np.size(q0), np.size(p0), np.size(alpha0), np.size(gamma0))
        if np.any(alpha0.imag <= 0):
            raise ValueError("initial alpha must have positive imaginary part")
        bc = lambda a, dt: np.broadcast_to(a, (n,)).astype(dt).copy()
        alpha = bc(alpha0, complex)
        return cls(bc(q0, float), bc(p0, float), alpha, bc(gamma0, complex),
                   np.sqrt(alpha.imag))

    def __len__(self) -> int:
        return self.q.shape[0]

    def take(self, idx) -> "PacketParams":
        return PacketParams(*(np.atleast_1d(getattr(self, f.name)[idx]) for f in fields(self)))

    def axpy(self, a: float, d: "PacketParams") -> "PacketParams":
        """self + a * d, componentwise."""
        return PacketParams(self.q + a * d.q, self.p + a * d.p, self.alpha + a * d.alpha,
                            self.gamma + a * d.gamma, self.B + a * d.B)


def packet_rhs(s: PacketParams, V: Potential, amp, eps: float) -> PacketParams:
    """Time derivative of the packet parameters.

    ``amp`` is the potential amplitude a(z) at each node. ``gamma`` picks up
    ``i eps Re(alpha)``, which keeps the normalisation in Im(gamma) while the
    Gaussian width lives in the transformed profile.
    """
    return PacketParams(
        q=s.p,
        p=-V.Vx(s.q, amp),
        alpha=-2.0 * s.alpha ** 2 - 0.5 * V.Vxx(s.q, amp),
        gamma=0.5 * s.p ** 2 - V.V(s.q, amp) + 1j * eps * s.alpha.real,
        B=-2.0 * s.B * s.alpha.real,
    )


def rk4_step(s: PacketParams, V: Potential, amp, eps: float, dt: float,
             t: float = 0.0) -> PacketParams:
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = packet_rhs(s, V, amp, eps)
    k2 = packet_rhs(s.axpy(0.5 * dt, k1), V, amp, eps)
    k3 = packet_rhs(s.axpy(0.5 * dt, k2), V, amp, eps)
    k4 = packet_rhs(s.axpy(dt, k3), V, amp, eps)
    out = PacketParams(*(
        getattr(s, f.name) + dt / 6.0 * (getattr(k1, f.name) + 2.0 * getattr(k2, f.name)
                                         + 2.0 * getattr(k3, f.name) + getattr(k4, f.name))
        for f in fields(PacketParams)))
    bad = np.flatnonzero(~(out.alpha.imag > 0))
    if bad.size:
        raise PacketBlowUpError(int(bad[0]), t + dt)
    return out


@dataclass
class PacketTrajectory:
    """Packet parameters sampled at ``times`` for every node.

    Each parameter array has shape ``(len(times), n_nodes)``.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    B: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.q.shape[1]

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a stored sample")
        return i

    def at(self, t: float) -> PacketParams:
        i = self.index_of(t)
        return PacketParams(self.q[i], self.p[i], self.alpha[i], self.gamma[i], self.B[i])

    def node(self, k: int) -> "PacketTrajectory":
        sl = slice(k, k + 1)
        return PacketTrajectory(self.times, self.q[:, sl], self.p[:, sl], self.alpha[:, sl],
                                self.gamma[:, sl], self.B[:, sl])


def _steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"dt = {dt} does not divide T = {T}")
    return n


def integrate_packets(V: Potential, z, eps: float, ic: PacketParams, dt_ode: float,
                      T: float, record_every: int = 1) -> PacketTrajectory:
    """Integrate the packet ODEs with RK4 at every node of ``z``.

    ``z`` holds node coordinates (``(n,)`` or ``(n, dim)``). Samples are
    stored every ``record_every`` steps, always including t = 0 and t = T.
    """
    n_steps = _steps(T, dt_ode) if T > 0 else 0
    if record_every < 1 or (n_steps and n_steps % record_every):
        raise ValueError("record_every must divide the number of ODE steps")
    amp = V.amplitude(z)
    if amp.shape[0] != len(ic):
        raise ValueError("initial data and node set differ in length")
    n_rec = n_steps // record_every + 1
    shape = (n_rec, len(ic))
    rec = {f.name: np.empty(shape, dtype=getattr(ic, f.name).dtype) for f in fields(PacketParams)}
    s = ic
    for f in fields(PacketParams):
        rec[f.name][0] = getattr(s, f.name)
    for k in range(1, n_steps + 1):
        s = rk4_step(s, V, amp, eps, dt_ode, t=(k - 1) * dt_ode)
        if k % record_every == 0:
            for f in fields(PacketParams):
                rec[f.name][k // record_every] = getattr(s, f.name)
    times = np.arange(n_rec) * (record_every * dt_ode)
    return PacketTrajectory(times, **rec)


def u_r_eval(V: Potential, amp, q, B, eta, eps: float):
    """Potential minus its second-order Taylor expansion about ``q``.

    Evaluated at x = q + s with s = sqrt(eps) * eta / B; broadcasts over
    node-shaped ``amp, q, B`` (use trailing axes for ``eta``).
    """
    s = np.sqrt(eps) * eta / B
    return (V.V(q + s, amp) - V.V(q, amp) - s * V.Vx(q, amp)
            - 0.5 * s * s * V.Vxx(q, amp))


# ---------------------------------------------------------------------------
# Heller's exact Gaussian for potentials quadratic in x
# ---------------------------------------------------------------------------

def heller_rhs(s: PacketParams, V: Potential, amp, eps: float) -> PacketParams:
    """Heller's parameter system: gamma carries i*eps*alpha (complex)."""
    d = packet_rhs(s, V, amp, eps)
    d.gamma = 0.5 * s.p ** 2 - V.V(s.q, amp) + 1j * eps * s.alpha
    return d


def heller_closed_form(V: Potential, amp, eps: float, q0, p0, alpha0, t: float,
                       n_sub: int = 2000) -> PacketParams:
    """Closed-form Heller parameters at time ``t`` for V = a * x**2 (or V = 0).

    With omega = sqrt(2 a) the centre follows the harmonic oscillator,
    alpha = u'/(2u) with u = cos(omega t) + (2 alpha0 / omega) sin(omega t),
    and gamma = (q p - q0 p0) / 2 + (i eps / 2) log u along a continuous
    branch; ``n_sub`` samples of u are used to unwrap its argument.
    """
    if not V.is_quadratic:
        raise ValueError("Heller's closed form needs a potential quadratic in x")
    amp = np.asarray(amp, dtype=float)
    if V.shape == "free":
        amp = np.zeros_like(amp)
    q0 = np.broadcast_to(np.asarray(q0, float), amp.shape)
    p0 = np.broadcast_to(np.asarray(p0, float), amp.shape)
    alpha0 = np.broadcast_to(np.asarray(alpha0, complex), amp.shape)
    omega = np.sqrt(2.0 * amp + 0j)

    def u_and_du(tt):
        wt = omega * tt
        small = np.abs(omega) < 1e-12
        sinc = np.where(small, tt, np.sin(wt) / np.where(small, 1.0, omega))
        u = np.cos(wt) + 2.0 * alpha0 * sinc
        du = -omega * np.sin(wt) + 2.0 * alpha0 * np.cos(wt)
        return u, du

    wt = omega * t
    small = np.abs(omega) < 1e-12
    sinc = np.where(small, t, np.sin(wt) / np.where(small, 1.0, omega))
    q = (q0 * np.cos(wt) + p0 * sinc).real
    p = (-q0 * omega * np.sin(wt) + p0 * np.cos(wt)).real
    u, du = u_and_du(t)
    alpha = du / (2.0 * u)
    ts = np.linspace(0.0, t, n_sub + 1)
    args = np.unwrap(np.angle(np.stack([u_and_du(tt)[0] for tt in ts])), axis=0)
    logu = np.log(np.abs(u)) + 1j * args[-1]
    gamma = 0.5 * (q * p - q0 * p0) + 0.5j * eps * logu
    B = np.sqrt(alpha.imag)
    return PacketParams(q, p, alpha, gamma, B)
