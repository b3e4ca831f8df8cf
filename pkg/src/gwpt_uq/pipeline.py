"""Experiment orchestration: the three-level GWPT pipeline, the DS reference and comparisons.

Stage tags (see ``STAGES``) label both failures and wall-clock timings.
"""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import observables as obs
from .classical import (ClassicalProfile, classical_current, classical_density,
                        classical_moments, hamilton_integrate)
from .config import ExperimentConfig
from .interp import transfer
from .packet import PacketParams, PacketTrajectory, heller_closed_form, integrate_packets
from .quadrature import CollocationGrid, build_grid
from .reconstruct import WaveField, heller_exact, normalization, reconstruct_psi
from .reference import ds_solve, gaussian_initial
from .wprop import WField, propagate_w, w_initial

log = logging.getLogger(__name__)

STAGES = ("ode", "wprop", "reconstruct", "reference", "stats", "classical", "output")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str, timings: dict[str, float]):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def grids(cfg: ExperimentConfig) -> dict[str, CollocationGrid]:
    dist, dim = cfg.distribution, cfg.z_dim
    return {f"M{i}": build_grid(dist, n, dim, level=f"M{i}")
            for i, n in ((1, cfg.nz1), (2, cfg.nz2), (3, cfg.nz3), (4, cfg.nz4))}


def amplitude(cfg: ExperimentConfig) -> float:
    return normalization(cfg.eps, cfg.initial.alpha0) if cfg.normalize else 1.0


def _move(values: np.ndarray, src: CollocationGrid, dst: CollocationGrid) -> np.ndarray:
    """Transfer nodal data (node axis first) between collocation grids."""
    if src.same_as(dst):
        return values
    if src.dim != 1:
        raise ValueError("grid transfers are only supported for one-dimensional z")
    return transfer(src.z, values, dst.z)


def transfer_trajectory(traj: PacketTrajectory, src: CollocationGrid, dst: CollocationGrid,
                        index=slice(None)) -> PacketTrajectory:
    """Spline every packet component in z, independently at each stored time."""
    times = traj.times[index]
    if src.same_as(dst):
        pick = lambda a: a[index]
        return PacketTrajectory(np.atleast_1d(times), *(np.atleast_2d(pick(a)) for a in
                                (traj.q, traj.p, traj.alpha, traj.gamma, traj.B)))

    def move(a):
        a = np.atleast_2d(a[index])
        return _move(a.T, src, dst).T

    return PacketTrajectory(np.atleast_1d(times), move(traj.q), move(traj.p), move(traj.alpha),
                            move(traj.gamma), move(traj.B))


def solve_packets(cfg: ExperimentConfig, grid: CollocationGrid | None = None) -> PacketTrajectory:
    grid = grid or grids(cfg)["M1"]
    q0, p0 = cfg.initial.evaluate(grid.nodes)
    ic = PacketParams.initial(q0, p0, cfg.initial.alpha0, cfg.initial.gamma0, n=len(grid))
    return integrate_packets(cfg.build_potential(), grid.nodes, cfg.eps, ic, cfg.dt_ode, cfg.T,
                             record_every=cfg.w_ratio // 2)


@dataclass
class GwptResult:
    cfg: ExperimentConfig
    grids: dict[str, CollocationGrid]
    traj: PacketTrajectory                          # on M1
    w: dict[float, WField]                          # on M2
    params: dict[float, PacketParams] = field(default_factory=dict)   # on M3
    psi: dict[float, WaveField] = field(default_factory=dict)         # on M3
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.cfg.T


def run_gwpt(cfg: ExperimentConfig, output_times=None, traj: PacketTrajectory | None = None,
             reconstruct: bool = True, modulus_only: bool = False) -> GwptResult:
    """ODEs on M1, w on M2, reconstruction on M3 at each output time."""
    times = sorted(set(output_times or [cfg.T]))
    timings: dict[str, float] = {}
    g = grids(cfg)
    V = cfg.build_potential()
    with stage("ode", timings):
        if traj is None:
            traj = solve_packets(cfg, g["M1"])
    with stage("wprop", timings):
        traj2 = transfer_trajectory(traj, g["M1"], g["M2"])
        amp2 = V.amplitude(g["M2"].nodes)
        w0 = w_initial(amplitude(cfg), cfg.eta_grid, len(g["M2"]))
        _, w_snaps = propagate_w(w0, traj2, V, amp2, cfg.eps, cfg.dt_w, cfg.T,
                                 output_times=times)
    res = GwptResult(cfg, g, traj, w_snaps, timings=timings)
    if reconstruct:
        with stage("reconstruct", timings):
            for t in times:
                i = traj.index_of(t)
                s3 = transfer_trajectory(traj, g["M1"], g["M3"], index=i)
                p3 = PacketParams(s3.q[0], s3.p[0], s3.alpha[0], s3.gamma[0], s3.B[0])
                w3 = WField(cfg.eta_grid, _move(w_snaps[t].values, g["M2"], g["M3"]), t)
                res.params[t] = p3
                res.psi[t] = reconstruct_psi(w3, p3, cfg.x_grid, cfg.eps,
                                             periodic=V.is_periodic, upsample=cfg.upsample,
                                             modulus_only=modulus_only)
    return res


@dataclass
class ReferenceResult:
    cfg: ExperimentConfig
    grid: CollocationGrid                           # M4
    psi: dict[float, WaveField]
    timings: dict[str, float] = field(default_factory=dict)


def run_reference(cfg: ExperimentConfig, output_times=None) -> ReferenceResult:
    """Direct splitting on M4 with the configured mesh."""
    times = sorted(set(output_times or [cfg.T]))
    timings: dict[str, float] = {}
    g4 = grids(cfg)["M4"]
    V = cfg.build_potential()
    with stage("reference", timings):
        q0, p0 = cfg.initial.evaluate(g4.nodes)
        psi0 = gaussian_initial(cfg.x_grid, q0, p0, cfg.initial.alpha0, cfg.eps, amplitude(cfg),
                                periodic=V.is_periodic)
        final, snaps = ds_solve(psi0, V, V.amplitude(g4.nodes), cfg.eps, cfg.ds_dt, cfg.T,
                                output_times=times)
    snaps[cfg.T] = final
    psi = {t: min(snaps.items(), key=lambda kv: abs(kv[0] - t))[1] for t in times}
    return ReferenceResult(cfg, g4, psi, timings)


@dataclass
class ErrorRow:
    eps: float
    nz2: int
    T: float
    er_psi: float
    er1_j: float
    er2_j: float
    timings: dict[str, float] = field(default_factory=dict)

    def as_dict(self, with_timing: bool = False) -> dict:
        d = {"eps": self.eps, "Nz2": self.nz2, "T": self.T, "Er_psi": self.er_psi,
             "Er1_j": self.er1_j, "Er2_j": self.er2_j}
        if with_timing:
            for k in ("ode", "wprop", "reconstruct"):
                d[f"wall_{'w' if k == 'wprop' else 'rec' if k == 'reconstruct' else k}_s"] = \
                    self.timings.get(k, float("nan"))
            d["wall_ds_s"] = self.timings.get("reference", float("nan"))
        return d


def compare(gw: GwptResult, ref: ReferenceResult, t: float | None = None) -> ErrorRow:
    """Er[psi], Er1[j], Er2[j] on M5 = M3."""
    t = gw.T if t is None else t
    timings: dict[str, float] = {}
    g3, g4 = gw.grids["M3"], ref.grid
    with stage("stats", timings):
        psi_g = gw.psi[t]
        psi_d = ref.psi[t]
        d_on_3 = _move(psi_d.values, g4, g3)
        e_psi = obs.er_psi(psi_g.values, d_on_3, g3)
        jt_g = obs.jtilde(psi_g)
        jt_d = _move(obs.jtilde(psi_d), g4, g3)
        ej = obs.er_j(jt_g, jt_d, g3)
    all_t = {**gw.timings, **ref.timings, **timings}
    return ErrorRow(gw.cfg.eps, gw.cfg.nz2, t, e_psi, ej.er1, ej.er2, all_t)


def self_compare(coarse: GwptResult, fine: GwptResult, t: float | None = None) -> ErrorRow:
    """Errors between two GWPT runs sharing M3 (used for N_z,2 convergence)."""
    t = coarse.T if t is None else t
    g3 = coarse.grids["M3"]
    a, b = coarse.psi[t], fine.psi[t]
    timings = dict(coarse.timings)
    with stage("stats", timings):
        ej = obs.er_j(obs.jtilde(a), obs.jtilde(b), g3)
        e_psi = obs.er_psi(a.values, b.values, g3)
    return ErrorRow(coarse.cfg.eps, coarse.cfg.nz2, t, e_psi, ej.er1, ej.er2, timings)


def run_comparison(cfg: ExperimentConfig, sweep: str | None = None, values=None) -> list[ErrorRow]:
    """Error table rows.

    ``sweep``: ``None`` (single row), ``"eps"`` (values are eps), ``"nz2"``
    (values are N_z,2; each compared with a run at 2 N_z,2), ``"time"``
    (values are output times; steps are adjusted to divide each time).
    """
    if sweep is None:
        gw = run_gwpt(cfg)
        return [compare(gw, run_reference(cfg))]
    if sweep == "eps":
        rows = []
        for eps in values:
            c = cfg.replace(eps=float(eps))
            rows.append(compare(run_gwpt(c), run_reference(c)))
        return rows
    if sweep == "nz2":
        traj = solve_packets(cfg)
        cache: dict[int, GwptResult] = {}

        def get(n):
            if n not in cache:
                cache[n] = run_gwpt(cfg.replace(nz2=int(n)), traj=traj)
            return cache[n]
        return [self_compare(get(int(n)), get(2 * int(n))) for n in values]
    if sweep == "time":
        rows = []
        for T in values:
            c = config_for_time(cfg, float(T))
            rows.append(compare(run_gwpt(c), run_reference(c)))
        return rows
    raise ValueError(f"unknown sweep {sweep!r}")


def config_for_time(cfg: ExperimentConfig, T: float) -> ExperimentConfig:
    """Copy of ``cfg`` with final time ``T`` and steps shrunk to divide it."""
    n_w = max(1, int(round(T / cfg.dt_w)))
    dt_w = T / n_w
    n_ds = max(1, int(round(T / cfg.ds_dt)))
    return cfg.replace(T=T, dt_w=dt_w, dt_ode=dt_w / cfg.w_ratio, ds_dt=T / n_ds)


def heller_errors(cfg: ExperimentConfig, gw: GwptResult | None = None) -> np.ndarray:
    """Per-node relative L2 error of GWPT psi on M3 against Heller's closed form at T.

    Only meaningful for potentials quadratic in x, where the remainder vanishes.
    """
    V = cfg.build_potential()
    if not V.is_quadratic:
        raise ValueError("the Heller comparison needs a potential quadratic in x")
    gw = gw or run_gwpt(cfg)
    g3 = gw.grids["M3"]
    q0, p0 = cfg.initial.evaluate(g3.nodes)
    with stage("stats", gw.timings):
        h = heller_closed_form(V, V.amplitude(g3.nodes), cfg.eps, q0, p0, cfg.initial.alpha0,
                               cfg.T)
        h.gamma = h.gamma + cfg.initial.gamma0
        exact = heller_exact(h, cfg.x_grid, cfg.eps, amplitude(cfg), cfg.T, V.is_periodic, V)
        diff = np.sum(np.abs(gw.psi[cfg.T].values - exact.values) ** 2, axis=-1)
        return np.sqrt(diff / np.sum(np.abs(exact.values) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# Statistics, diagnostics and the classical comparison
# ---------------------------------------------------------------------------

@dataclass
class Summary:
    scalars: dict[str, obs.ObservableSeries]
    profiles: dict[str, obs.ObservableSeries]
    mass: np.ndarray
    gamma_norm: float


def summarize(psi: WaveField, grid: CollocationGrid) -> Summary:
    q, p = obs.expectation_values(psi)
    scalars = {"jtilde": obs.stats("jtilde", obs.jtilde(psi), grid),
               "q": obs.stats("q", q, grid), "p": obs.stats("p", p, grid)}
    profiles = {"rho": obs.stats("rho", obs.density(psi), grid),
                "j": obs.stats("j", obs.current(psi), grid)}
    return Summary(scalars, profiles, psi.mass(), obs.gamma_norm(psi, grid))


@dataclass
class ZDiag:
    eps: float
    psi_max: float
    w_max: float


def zdiag(cfg: ExperimentConfig, order: int = 1) -> ZDiag:
    """max |d_z Re psi| over M3 and max |d_z Re w| over M2 at time T."""
    gw = run_gwpt(cfg)
    g = gw.grids
    with stage("stats", gw.timings):
        return ZDiag(cfg.eps,
                     obs.z_derivative_max(gw.psi[cfg.T].values, g["M3"].z, order),
                     obs.z_derivative_max(gw.w[cfg.T].values, g["M2"].z, order))


@dataclass
class ClassicalResult:
    cfg: ExperimentConfig
    density: ClassicalProfile
    current: ClassicalProfile
    moments: tuple[float, float, float, float]
    q: np.ndarray
    p: np.ndarray


def run_classical(cfg: ExperimentConfig, estimator: str = "histogram", x=None,
                  bin_factor: int = 32) -> ClassicalResult:
    """Hamilton dynamics on M3 and the classical density / current at time T.

    Histogram bins are ``bin_factor`` reconstruction cells wide.
    """
    g3 = grids(cfg)["M3"]
    V = cfg.build_potential()
    with stage("classical", {}):
        q0, p0 = cfg.initial.evaluate(g3.nodes)
        tr = hamilton_integrate(V, g3.nodes, q0, p0, cfg.dt_ode, cfg.T,
                                record_every=int(round(cfg.T / cfg.dt_ode)))
        q, p = tr.at(cfg.T)
        width = bin_factor * cfg.x_grid.dx
        kw = dict(x_min=cfg.x_min, x_max=cfg.x_max, x=x, bin_width=width, estimator=estimator,
                  periodic=V.is_periodic)
        return ClassicalResult(cfg, classical_density(q, g3, **kw),
                               classical_current(q, p, g3, **kw), classical_moments(q, p, g3), q, p)


def classical_distance(cfg: ExperimentConfig, estimator: str = "derivative") -> float:
    """L1 distance between E[rho] from GWPT and the classical density at time T."""
    gw = run_gwpt(cfg, modulus_only=True)
    rho = obs.stats("rho", obs.density(gw.psi[cfg.T]), gw.grids["M3"]).mean
    x = cfg.x_grid.points
    cl = run_classical(cfg, estimator=estimator, x=x)
    if estimator == "histogram":
        edges = np.linspace(cfg.x_min, cfg.x_max, cl.density.x.size + 1)
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, cl.density.x.size - 1)
        cl_on_x = cl.density.values[idx]
    else:
        cl_on_x = cl.density.values
    return float(np.sum(np.abs(rho - cl_on_x)) * cfg.x_grid.dx)


@dataclass
class TimingRow:
    eps: float
    n: int
    wall_gwpt_s: float
    wall_ds_s: float
    er_psi: float

    @property
    def ratio(self) -> float:
        return self.wall_ds_s / self.wall_gwpt_s


def timing_config(cfg: ExperimentConfig, eps: float, n: int, T: float = 0.3) -> ExperimentConfig:
    """Matched meshes: N_z,1 = N_z,3 = N_z,4 = n, DS step about 1/n and 6 n grid points.

    The DS step is rounded so that it divides ``T``.
    """
    ds_dt = T / max(1, int(round(T * n)))
    return cfg.replace(eps=float(eps), T=T, nz1=n, nz3=n, nz4=n, ds_dt=ds_dt, n_x=6 * n)


def run_timing(cfg: ExperimentConfig, pairs, T: float = 0.3, warmup: bool = True) -> list[TimingRow]:
    """Wall-clock of the full GWPT pipeline and of DS for each (eps, n) pair.

    One untimed warm-up run of the smallest case precedes the measurements.
    """
    pairs = [(float(e), int(n)) for e, n in pairs]
    if warmup and pairs:
        e, n = min(pairs, key=lambda en: en[1])
        small = timing_config(cfg, e, min(n, 16), T)
        run_reference(small.replace(ds_dt=T))
        run_gwpt(small)
    rows = []
    for eps, n in pairs:
        c = timing_config(cfg, eps, n, T)
        t0 = time.perf_counter()
        gw = run_gwpt(c)
        t1 = time.perf_counter()
        ref = run_reference(c)
        t2 = time.perf_counter()
        rows.append(TimingRow(eps, n, t1 - t0, t2 - t1, compare(gw, ref).er_psi))
    return rows
