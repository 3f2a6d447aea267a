"""Finite-difference stencils for the uniform time grid.

Spatial derivatives are spectral throughout the package; only the time
axis is differenced (4th order, one-sided at the ends).
"""

from __future__ import annotations

import numpy as np

from .errors import GridTooCoarseInTime


def fd_weights(xs, x0, order):
    """Fornberg finite-difference weights for the given derivative order."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _apply_banded(V, dt, order):
    nt = V.shape[0]
    width = 5 if order == 1 else min(6, nt)
    out = np.empty_like(V)
    # interior: central 5-point stencil
    w = fd_weights(np.arange(-2, 3) * dt, 0.0, order)
    interior = slice(2, nt - 2)
    acc = np.zeros_like(V[interior])
    for off, wk in zip(range(-2, 3), w):
        acc += wk * V[2 + off:nt - 2 + off]
    out[interior] = acc
    # boundary rows: one-sided stencils of the same order of accuracy
    for i in (0, 1):
        pts = np.arange(0, width)
        wi = fd_weights((pts - i) * dt, 0.0, order)
        out[i] = np.tensordot(wi, V[pts], axes=(0, 0))
    for i in (nt - 2, nt - 1):
        pts = np.arange(nt - width, nt)
        wi = fd_weights((pts - i) * dt, 0.0, order)
        out[i] = np.tensordot(wi, V[pts], axes=(0, 0))
    return out


def time_derivative(V, dt, order=1):
    """4th-order d^order/dt^order along axis 0 of V on a uniform grid.

    order 1 uses 5-point stencils; order 2 uses 5-point central and
    6-point one-sided rows (5-point, 3rd order, in the minimal nt == 5
    case the operator contract still admits).
    """
    if order not in (1, 2):
        raise ValueError("only first and second time derivatives supported")
    nt = V.shape[0]
    if nt < 5:
        raise GridTooCoarseInTime(
            f"need at least 5 time levels for 4th-order differencing, got {nt}")
    return _apply_banded(np.asarray(V), float(dt), order)
