"""Collocation grids in the random variable and quadrature statistics.

Weights are probability weights: the density of z is folded into them, so an
expectation is a plain weighted sum over the nodes.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermitenorm, roots_legendre


class Distribution(str, enum.Enum):
    UNIFORM = "uniform"    # U(-1, 1) per axis
    NORMAL = "normal"      # N(0, 1) per axis

    @classmethod
    def parse(cls, value: "str | Distribution") -> "Distribution":
        if isinstance(value, Distribution):
            return value
        aliases = {"uniform": cls.UNIFORM, "legendre": cls.UNIFORM,
                   "normal": cls.NORMAL, "gaussian": cls.NORMAL, "hermite": cls.NORMAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown distribution {value!r}") from None


@dataclass(frozen=True)
class CollocationGrid:
    """Quadrature nodes and probability weights in z.

    ``nodes`` has shape ``(n, dim)``; ``weights`` has shape ``(n,)``.
    ``level`` is a free-form tag such as ``"M1"``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    dist: Distribution
    n_per_axis: int
    dim: int = 1
    level: str = ""

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def z(self) -> np.ndarray:
        """1-D node coordinates (only for ``dim == 1``)."""
        if self.dim != 1:
            raise ValueError("z is only defined for one-dimensional grids")
        return self.nodes[:, 0]

    def density(self, z: np.ndarray) -> np.ndarray:
        """Probability density of a single axis evaluated at ``z``."""
        z = np.asarray(z, dtype=float)
        if self.dist is Distribution.UNIFORM:
            return np.where(np.abs(z) <= 1.0, 0.5, 0.0)
        return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)

    def same_as(self, other: "CollocationGrid") -> bool:
        return (self.dist is other.dist and self.dim == other.dim
                and self.n_per_axis == other.n_per_axis)

    def with_level(self, level: str) -> "CollocationGrid":
        return CollocationGrid(self.nodes, self.weights, self.dist,
                               self.n_per_axis, self.dim, level)


def _axis_rule(dist: Distribution, n: int) -> tuple[np.ndarray, np.ndarray]:
    # scipy switches to asymptotic formulas for large n, where the
    # recurrence-based rules overflow; outer Hermite weights may underflow to 0
    if dist is Distribution.UNIFORM:
        x, w = roots_legendre(n)
        w = 0.5 * w
    else:
        x, w = roots_hermitenorm(n)
        w = w / np.sqrt(2.0 * np.pi)
    # enforce exact mirror symmetry of the rule
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    return x, w


def build_grid(dist: "str | Distribution", n_per_axis: int, dim: int = 1,
               level: str = "") -> CollocationGrid:
    """Gauss rule for ``dist`` with ``n_per_axis`` points per axis.

    Gauss-Legendre for the uniform law and probabilists' Gauss-Hermite for
    the standard normal; both integrate polynomials of degree ``2n - 1``
    exactly against the density. ``dim == 2`` builds the full tensor product
    with the first axis varying slowest.
    """
    dist = Distribution.parse(dist)
    n = int(n_per_axis)
    if n < 1:
        raise ValueError(f"n_per_axis must be >= 1, got {n_per_axis}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    x, w = _axis_rule(dist, n)
    if dim == 1:
        nodes = x[:, None].copy()
        weights = w.copy()
    else:
        nodes = np.array(list(itertools.product(x, x)))
        weights = np.outer(w, w).ravel()
    return CollocationGrid(nodes, weights, dist, n, dim, level)


def _check(values, grid: CollocationGrid) -> np.ndarray:
    values = np.asarray(values)
    if values.shape[0] != len(grid):
        raise ValueError(
            f"values has {values.shape[0]} entries along axis 0, grid has {len(grid)} nodes")
    return values


def expect(values, grid: CollocationGrid):
    """Quadrature mean over z. ``values`` may carry trailing axes (profiles)."""
    values = _check(values, grid)
    return np.tensordot(grid.weights, values, axes=(0, 0))


def variance(values, grid: CollocationGrid):
    values = _check(values, grid)
    mean = expect(values, grid)
    second = expect(np.abs(values) ** 2, grid)
    return np.maximum(second - np.abs(mean) ** 2, 0.0)


def sd(values, grid: CollocationGrid):
    return np.sqrt(variance(values, grid))
