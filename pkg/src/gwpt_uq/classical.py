"""Classical limit: Hamilton dynamics per node and the induced densities in x.

Two density estimators are provided. The derivative form sums
pi(z) / |dq/dz| over the roots of q(t, z) = x on a fine z grid (q is splined
from the collocation nodes). The histogram form bins the node positions with
their quadrature weights. ``auto`` uses the derivative form away from
caustics and the histogram near them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as qd
from .interp import Spline1D
from .potentials import Potential
from .quadrature import CollocationGrid, Distribution

CAUSTIC_SLOPE = 1e-6


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    q: np.ndarray       # (n_times, n_nodes)
    p: np.ndarray

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a stored sample")
        return self.q[i], self.p[i]

    def energy(self, V: Potential, amp) -> np.ndarray:
        return 0.5 * self.p ** 2 + V.V(self.q, np.asarray(amp)[None, :])


def hamilton_integrate(V: Potential, z, q0, p0, dt: float, T: float,
                       record_every: int = 1) -> ClassicalTrajectory:
    """RK4 for q' = p, p' = -V_x(q, z) at every node."""
    amp = V.amplitude(z)
    n = amp.shape[0]
    q = np.broadcast_to(np.asarray(q0, float), (n,)).copy()
    p = np.broadcast_to(np.asarray(p0, float), (n,)).copy()
    n_steps = int(round(T / dt)) if T > 0 else 0
    if n_steps and abs(n_steps * dt - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"dt = {dt} does not divide T = {T}")
    if record_every < 1 or (n_steps and n_steps % record_every):
        raise ValueError("record_every must divide the number of steps")
    qs, ps = [q.copy()], [p.copy()]
    f = lambda q_: -V.Vx(q_, amp)
    for k in range(1, n_steps + 1):
        k1q, k1p = p, f(q)
        k2q, k2p = p + 0.5 * dt * k1p, f(q + 0.5 * dt * k1q)
        k3q, k3p = p + 0.5 * dt * k2p, f(q + 0.5 * dt * k2q)
        k4q, k4p = p + dt * k3p, f(q + dt * k3q)
        q = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if k % record_every == 0:
            qs.append(q.copy())
            ps.append(p.copy())
    times = np.arange(len(qs)) * dt * record_every
    return ClassicalTrajectory(times, np.array(qs), np.array(ps))


@dataclass
class ClassicalProfile:
    x: np.ndarray
    values: np.ndarray
    caustic: np.ndarray          # bool per x point: derivative form unusable there
    estimator: str


def _bins(x_min: float, x_max: float, width: float):
    n = max(1, int(round((x_max - x_min) / width)))
    edges = np.linspace(x_min, x_max, n + 1)
    return edges, 0.5 * (edges[1:] + edges[:-1])


def _wrap(q, x_min, x_max):
    L = x_max - x_min
    return (q - x_min) % L + x_min


def histogram_profile(q, weight, grid: CollocationGrid, x_min: float, x_max: float,
                      width: float, periodic: bool = True):
    """Weighted histogram of node positions, normalised to a density."""
    q = np.asarray(q, float)
    if periodic:
        q = _wrap(q, x_min, x_max)
    edges, centres = _bins(x_min, x_max, width)
    vals, _ = np.histogram(q, bins=edges, weights=grid.weights * weight)
    return centres, vals / np.diff(edges)


def _fine_z(grid: CollocationGrid, n_fine: int) -> np.ndarray:
    if grid.dist is Distribution.UNIFORM:
        return np.linspace(-1.0, 1.0, n_fine)
    zmax = max(8.0, float(np.abs(grid.z).max()))
    return np.linspace(-zmax, zmax, n_fine)


def _derivative_profile(q, weight, grid: CollocationGrid, x: np.ndarray, n_fine: int,
                        period: float | None):
    z = grid.z
    zf = _fine_z(grid, n_fine)
    sq = Spline1D(z, q)
    sw = Spline1D(z, weight) if np.ndim(weight) else None
    qf = sq(zf)
    lo, hi = qf.min(), qf.max()
    shifts = [0.0]
    if period:
        m_lo = int(np.floor((lo - x.max()) / period))
        m_hi = int(np.ceil((hi - x.min()) / period))
        shifts = [m * period for m in range(m_lo, m_hi + 1)]
    out = np.zeros_like(x, dtype=float)
    caustic = np.zeros(x.shape, dtype=bool)
    # folds of z -> q: flag x within two fine cells (in q) or half an x spacing of each turn
    dq = np.diff(qf)
    turns = np.flatnonzero(np.signbit(dq[:-1]) != np.signbit(dq[1:])) + 1
    half_dx = 0.5 * float(np.abs(np.diff(x)).max()) if x.size > 1 else 0.0
    for i in turns:
        band = max(np.abs(qf[max(i - 2, 0):i + 3] - qf[i]).max(), half_dx)
        for shift in shifts:
            caustic |= np.abs(x + shift - qf[i]) <= band
    for shift in shifts:
        target = x + shift
        g = qf[:, None] - target[None, :]                     # (n_fine, n_x)
        sign_change = np.signbit(g[:-1]) != np.signbit(g[1:])
        iz, ix = np.nonzero(sign_change)
        if iz.size == 0:
            continue
        a, b = zf[iz], zf[iz + 1]
        ga = g[iz, ix]
        tx = target[ix]
        for _ in range(50):
            mid = 0.5 * (a + b)
            gm = sq(mid) - tx
            left = np.signbit(gm) == np.signbit(ga)
            a = np.where(left, mid, a)
            ga = np.where(left, gm, ga)
            b = np.where(left, b, mid)
        root = 0.5 * (a + b)
        slope = np.abs(sq.derivative(root))
        bad = slope <= CAUSTIC_SLOPE
        w = sw(root) if sw is not None else weight
        contrib = np.where(bad, 0.0, grid.density(root) * w / np.where(bad, 1.0, slope))
        np.add.at(out, ix, contrib)
        np.logical_or.at(caustic, ix, bad)
    return out, caustic


def _classical_profile(q, weight, grid, x_min, x_max, x, bin_width, estimator, n_fine,
                       periodic):
    if estimator not in ("histogram", "derivative", "auto"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator == "histogram":
        centres, vals = histogram_profile(q, weight, grid, x_min, x_max, bin_width, periodic)
        return ClassicalProfile(centres, vals, np.zeros(centres.shape, bool), "histogram")
    if grid.dim != 1:
        raise ValueError("the derivative estimator needs one-dimensional z")
    x = np.asarray(x, float)
    period = (x_max - x_min) if periodic else None
    vals, caustic = _derivative_profile(q, weight, grid, x, max(n_fine, 512), period)
    if estimator == "auto" and caustic.any():
        centres, hist = histogram_profile(q, weight, grid, x_min, x_max, bin_width, periodic)
        idx = np.clip(np.searchsorted(centres, x) - 1, 0, centres.size - 1)
        vals = np.where(caustic, hist[idx], vals)
    return ClassicalProfile(x, vals, caustic, estimator)


def classical_density(q, grid: CollocationGrid, x_min: float = -np.pi, x_max: float = np.pi,
                      x=None, bin_width: float | None = None, estimator: str = "histogram",
                      n_fine: int = 2048, periodic: bool = True) -> ClassicalProfile:
    """Density of the node positions ``q`` (one per node of ``grid``).

    The histogram uses bins of ``bin_width`` (default: 1/64 of the domain);
    the derivative form is evaluated at the points ``x``.
    """
    bin_width = bin_width or (x_max - x_min) / 64
    if x is None:
        x = _bins(x_min, x_max, bin_width)[1]
    return _classical_profile(q, 1.0, grid, x_min, x_max, x, bin_width, estimator, n_fine,
                              periodic)


def classical_current(q, p, grid: CollocationGrid, x_min: float = -np.pi,
                      x_max: float = np.pi, x=None, bin_width: float | None = None,
                      estimator: str = "histogram", n_fine: int = 2048,
                      periodic: bool = True) -> ClassicalProfile:
    """Current density: the density estimators weighted by the node momenta ``p``."""
    bin_width = bin_width or (x_max - x_min) / 64
    if x is None:
        x = _bins(x_min, x_max, bin_width)[1]
    return _classical_profile(q, np.asarray(p, float), grid, x_min, x_max, x, bin_width,
                              estimator, n_fine, periodic)


def classical_moments(q, p, grid: CollocationGrid) -> tuple[float, float, float, float]:
    """(E[q], Var[q], E[p], Var[p]) by quadrature over the nodes."""
    return (float(qd.expect(q, grid)), float(qd.variance(q, grid)),
            float(qd.expect(p, grid)), float(qd.variance(p, grid)))
