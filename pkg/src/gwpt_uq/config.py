"""Experiment configuration, validation and the built-in test problems."""
from __future__ import annotations

import ast
import dataclasses
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .potentials import Potential, make_potential
from .quadrature import Distribution
from .reconstruct import XGrid
from .wprop import EtaGrid

OUTPUTS = {"psi", "rho", "j", "stats", "errors", "zdiag", "classical", "timing"}
TEST_IDS = ("a1i", "a1ii", "a2", "a3", "a4", "b", "c", "d", "custom")


class ConfigError(ValueError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _arith(node):
    if isinstance(node, ast.Expression):
        return _arith(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_arith(node.left), _arith(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_arith(node.operand)
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id == "sqrt" and len(node.args) == 1):
        return math.sqrt(_arith(node.args[0]))
    raise ValueError("unsupported expression")


def parse_number(value) -> float:
    """Float from a number or an arithmetic string such as ``"1/256"`` or ``"pi/2"``."""
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return _arith(ast.parse(str(value).strip(), mode="eval"))
    except (ValueError, SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {value!r}") from exc


@dataclass
class PotentialSpec:
    shape: str = "cosine"
    base: float = 1.0
    coef: tuple[float, ...] = (0.9,)
    coef_scaling: str = "const"     # const | eps | sqrt_eps

    def build(self, eps: float) -> Potential:
        return make_potential(self.shape, self.base, self.coef, self.coef_scaling, eps)


@dataclass
class InitialSpec:
    """Affine-in-z packet data: q0(z) = q0 + q0_coef . z, p0 likewise."""

    q0: float = math.pi / 2
    q0_coef: tuple[float, ...] = ()
    p0: float = 0.0
    p0_coef: tuple[float, ...] = ()
    alpha0: complex = 1j
    gamma0: float = 0.0

    def evaluate(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nodes = np.asarray(nodes, float)
        q = np.full(nodes.shape[0], self.q0)
        p = np.full(nodes.shape[0], self.p0)
        if self.q0_coef:
            q = q + nodes @ np.asarray(self.q0_coef)
        if self.p0_coef:
            p = p + nodes @ np.asarray(self.p0_coef)
        return q, p


@dataclass
class ExperimentConfig:
    test_id: str = "custom"
    eps: float = 1 / 256
    T: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    z_dist: str = "uniform"
    z_dim: int = 1
    nz1: int = 500
    nz2: int = 32
    nz3: int = 500
    nz4: int = 500
    dt_ode: float = 2.5e-4
    dt_w: float = 0.01
    eta_min: float = -20.0
    eta_max: float = 20.0
    n_eta: int = 128
    x_min: float = -math.pi
    x_max: float = math.pi
    n_x: int = 9600
    ds_dt: float = 1 / 600
    normalize: bool = True
    upsample: int = 16
    outputs: tuple[str, ...] = ("stats", "errors")

    def __post_init__(self):
        self.validate()

    # -- derived objects ----------------------------------------------------
    @property
    def distribution(self) -> Distribution:
        return Distribution.parse(self.z_dist)

    def build_potential(self) -> Potential:
        return self.potential.build(self.eps)

    @property
    def eta_grid(self) -> EtaGrid:
        return EtaGrid(self.eta_min, self.eta_max, self.n_eta)

    @property
    def x_grid(self) -> XGrid:
        return XGrid(self.x_min, self.x_max, self.n_x)

    @property
    def w_ratio(self) -> int:
        return int(round(self.dt_w / self.dt_ode))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- validation ---------------------------------------------------------
    def validate(self):
        if self.test_id not in TEST_IDS:
            raise ConfigError(f"test_id: unknown test {self.test_id!r}")
        for name in ("eps", "T", "dt_ode", "dt_w", "ds_dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("nz1", "nz2", "nz3", "nz4", "n_x", "upsample"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {v}")
        Distribution.parse(self.z_dist)
        if self.z_dim not in (1, 2):
            raise ConfigError(f"z_dim: must be 1 or 2, got {self.z_dim}")
        ratio = self.dt_w / self.dt_ode
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 2 or round(ratio) % 2:
            raise ConfigError(f"dt_w: dt_w / dt_ode must be an even integer >= 2, got {ratio:g}")
        for name, dt in (("dt_w", self.dt_w), ("ds_dt", self.ds_dt)):
            n = self.T / dt
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ConfigError(f"{name}: must divide T = {self.T}")
        if self.z_dim == 2 and not (self.nz1 == self.nz2 == self.nz3):
            raise ConfigError("nz2: two-dimensional z requires nz1 == nz2 == nz3")
        if len(self.potential.coef) not in (0, self.z_dim):
            raise ConfigError(f"potential: coef must have z_dim = {self.z_dim} entries")
        for name in ("q0_coef", "p0_coef"):
            c = getattr(self.initial, name)
            if len(c) not in (0, self.z_dim):
                raise ConfigError(f"initial.{name}: must have z_dim = {self.z_dim} entries")
        if not np.imag(self.initial.alpha0) > 0:
            raise ConfigError("initial.alpha0: imaginary part must be positive")
        try:
            self.eta_grid
        except ValueError as exc:
            raise ConfigError(f"n_eta: {exc}") from None
        bad = set(self.outputs) - OUTPUTS
        if bad:
            raise ConfigError(f"outputs: unknown entries {sorted(bad)}")
        try:
            make_potential(self.potential.shape, self.potential.base, self.potential.coef,
                           self.potential.coef_scaling, self.eps)
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from None

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        a = complex(self.initial.alpha0)
        d["initial"]["alpha0"] = [a.real, a.imag]
        d["outputs"] = list(self.outputs)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        base = {}
        if data.get("test_id") not in (None, "custom"):
            eps = data.get("eps")
            base = builtin_config(data["test_id"], parse_number(eps) if eps is not None else None).to_dict()
        merged = {**base, **{k: v for k, v in data.items() if k not in ("potential", "initial")}}
        pot = {**base.get("potential", {}), **data.get("potential", {})}
        ini = {**base.get("initial", {}), **data.get("initial", {})}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for name in ("eps", "T", "dt_ode", "dt_w", "ds_dt", "x_min", "x_max", "eta_min", "eta_max"):
            if name in merged:
                merged[name] = parse_number(merged[name])
        if pot:
            pot["coef"] = tuple(parse_number(c) for c in pot.get("coef", ()))
            pot["base"] = parse_number(pot.get("base", 1.0))
            merged["potential"] = PotentialSpec(**pot)
        if ini:
            for name in ("q0", "p0", "gamma0"):
                if name in ini:
                    ini[name] = parse_number(ini[name])
            for name in ("q0_coef", "p0_coef"):
                ini[name] = tuple(parse_number(c) for c in ini.get(name, ()))
            if "alpha0" in ini:
                a = ini["alpha0"]
                ini["alpha0"] = complex(parse_number(a[0]), parse_number(a[1])) \
                    if isinstance(a, (list, tuple)) else complex(a)
            merged["initial"] = InitialSpec(**ini)
        if "outputs" in merged:
            merged["outputs"] = tuple(merged["outputs"])
        return cls(**merged)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_HALF_PI = math.pi / 2


def builtin_config(test_id: str, eps: float | None = None, **overrides) -> ExperimentConfig:
    """Configuration of one of the named test problems.

    Collocation sizes default to 500 / 32 / 500 / 500 on M1..M4, except
    test ``d`` (32 everywhere, eps = 0.1).
    """
    cosine = lambda coef, scaling="const": PotentialSpec("cosine", 1.0, coef, scaling)
    table = {
        "a1i": dict(potential=PotentialSpec("harmonic", 1.0, (0.95,)), z_dist="uniform"),
        "a1ii": dict(potential=cosine((0.9,)), z_dist="uniform"),
        "a2": dict(potential=cosine((0.9,)), z_dist="normal"),
        "a3": dict(potential=cosine((1.0,), "eps"), z_dist="normal"),
        "a4": dict(potential=cosine((1.0,), "sqrt_eps"), z_dist="normal"),
        "b": dict(potential=PotentialSpec("cosine", 1.0, ()), z_dist="uniform",
                  initial=InitialSpec(q0=_HALF_PI, q0_coef=(0.5 * _HALF_PI,))),
        "c": dict(potential=PotentialSpec("cosine", 1.0, ()), z_dist="uniform", T=0.5,
                  initial=InitialSpec(q0=_HALF_PI, q0_coef=(0.5 * _HALF_PI,), p0_coef=(0.5,))),
        "d": dict(potential=cosine((0.2, 0.7)), z_dist="uniform", z_dim=2, eps=0.1,
                  nz1=32, nz2=32, nz3=32, nz4=32),
    }
    if test_id not in table:
        raise ConfigError(f"test_id: unknown builtin test {test_id!r}")
    params = {"test_id": test_id, **table[test_id]}
    if eps is not None:
        params["eps"] = float(eps)
    params.update(overrides)
    return ExperimentConfig(**params)
