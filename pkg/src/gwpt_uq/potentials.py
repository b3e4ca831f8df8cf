"""Random potentials of the separable form V(x, z) = a(z) * f(x).

``a(z) = base + sum_i coef_i * z_i`` is affine in the random variable and
``f`` is one of the registered analytic shapes, each with hand-coded first
and second derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Shape = tuple[Callable, Callable, Callable]

SHAPES: dict[str, Shape] = {
    "harmonic": (lambda x: x * x, lambda x: 2.0 * x, lambda x: 2.0 + 0.0 * x),
    "cosine": (lambda x: 1.0 - np.cos(x), np.sin, np.cos),
    "free": (lambda x: 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x),
}

QUADRATIC_SHAPES = {"harmonic", "free"}
PERIODIC_SHAPES = {"cosine", "free"}


@dataclass(frozen=True)
class Potential:
    shape: str
    base: float = 1.0
    coef: tuple[float, ...] = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown potential shape {self.shape!r}; known: {sorted(SHAPES)}")
        object.__setattr__(self, "coef", tuple(float(c) for c in self.coef))

    @property
    def is_quadratic(self) -> bool:
        return self.shape in QUADRATIC_SHAPES

    @property
    def is_periodic(self) -> bool:
        return self.shape in PERIODIC_SHAPES

    @property
    def zdim(self) -> int:
        return len(self.coef)

    def amplitude(self, z) -> np.ndarray:
        """a(z) for node coordinates ``z`` of shape ``(n, dim)`` (or ``(n,)``)."""
        z = np.asarray(z, dtype=float)
        if not self.coef:
            return np.full(z.shape[0] if z.ndim else 1, self.base)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[1] != len(self.coef):
            raise ValueError(f"potential expects {len(self.coef)}-dimensional z, got {z.shape[1]}")
        return self.base + z @ np.asarray(self.coef)

    # The evaluators take an amplitude array broadcastable against x.
    def V(self, x, amp):
        return amp * SHAPES[self.shape][0](x)

    def Vx(self, x, amp):
        return amp * SHAPES[self.shape][1](x)

    def Vxx(self, x, amp):
        return amp * SHAPES[self.shape][2](x)


def make_potential(shape: str, base: float = 1.0, coef: Sequence[float] = (),
                   coef_scaling: str = "const", eps: float | None = None) -> Potential:
    """Build a potential, optionally scaling the random coefficients by eps or sqrt(eps)."""
    scale = 1.0
    if coef_scaling == "eps":
        scale = float(eps)
    elif coef_scaling == "sqrt_eps":
        scale = float(np.sqrt(eps))
    elif coef_scaling != "const":
        raise ValueError(f"unknown coef_scaling {coef_scaling!r}")
    return Potential(shape, float(base), tuple(scale * float(c) for c in coef))
