"""Cubic spline interpolation for transfers between collocation grids.

Values may be real or complex and may carry trailing axes; the spline runs
along axis 0. Outside the knot range the end cubic is continued linearly
(value and slope at the end knot).
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline


class Spline1D:
    """Natural cubic spline with linear extension beyond the end knots."""

    def __init__(self, xs, ys, bc_type="natural"):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys)
        if xs.ndim != 1:
            raise ValueError("knots must be one-dimensional")
        if xs.size < 4:
            raise ValueError(f"cubic spline needs at least 4 knots, got {xs.size}")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing")
        if ys.shape[0] != xs.size:
            raise ValueError("ys must have one entry per knot along axis 0")
        if not np.iscomplexobj(ys):
            ys = ys.astype(float)
        self.knots = xs
        self._cs = CubicSpline(xs, ys, axis=0, bc_type=bc_type)
        self._d1 = self._cs.derivative(1)
        lo, hi = xs[0], xs[-1]
        self._ends = ((lo, self._cs(lo), self._d1(lo)),
                      (hi, self._cs(hi), self._d1(hi)))

    @property
    def coefficients(self) -> np.ndarray:
        """Per-interval power-basis coefficients, shape ``(4, n - 1, ...)``."""
        return self._cs.c

    def _extend(self, x, out, deriv):
        (lo, vlo, dlo), (hi, vhi, dhi) = self._ends
        below = x < lo
        above = x > hi
        if not (below.any() or above.any()):
            return out
        tail = (slice(None),) + (None,) * (out.ndim - 1)
        if deriv == 0:
            if below.any():
                out[below] = vlo + (x[below] - lo)[tail] * dlo
            if above.any():
                out[above] = vhi + (x[above] - hi)[tail] * dhi
        else:
            out[below] = dlo if deriv == 1 else 0.0
            out[above] = dhi if deriv == 1 else 0.0
        return out

    def __call__(self, x, deriv: int = 0):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xf = np.atleast_1d(x).ravel()
        out = np.array(self._cs(xf, deriv))
        out = self._extend(xf, out, deriv)
        out = out.reshape(x.shape + out.shape[1:]) if not scalar else out[0]
        return out

    def derivative(self, x):
        return self(x, deriv=1)


def spline_fit(xs, ys) -> Spline1D:
    return Spline1D(xs, ys)


def spline_eval(s: Spline1D, x):
    return s(x)


def spline_derivative(s: Spline1D, x):
    return s(x, deriv=1)


def _lagrange(xs, ys, x):
    # fewer than four nodes: the global polynomial through all of them
    xs = np.asarray(xs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = xs.size
    basis = np.ones((x.size, n))
    for j in range(n):
        for k in range(n):
            if k != j:
                basis[:, j] *= (x - xs[k]) / (xs[j] - xs[k])
    return np.tensordot(basis, ys, axes=(1, 0))


def transfer(src, values, dst):
    """Interpolate nodal ``values`` from the points ``src`` to ``dst`` along axis 0.

    Identical point sets are passed through unchanged. With four or more
    source points a natural cubic spline is used; with fewer, the unique
    polynomial through the points.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    values = np.asarray(values)
    if src.shape == dst.shape and np.array_equal(src, dst):
        return values
    if src.size >= 4:
        return Spline1D(src, values)(dst)
    return _lagrange(src, values, dst)
