"""Fractional Sobolev norms on slices, realized as Fourier multipliers.

The slice operator powers act modewise as (1 + xi_n^2)^(k/2) with
xi_n = 2*pi*n/L_ref, so fractional k is free and the heat-semigroup
mollifier is just another multiplier.  All norms use the flat reference
metric on the slice (uniform trapezoid weights); the induced time-dependent
metrics give equivalent norms, which a quadrature-ratio property test pins
down quantitatively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridFunction:
    """C^m-valued samples on the N uniform nodes of one slice.

    values has shape (N, m), node-major.  Immutable by convention; all
    operations return fresh instances and validate finiteness.
    """

    __slots__ = ("values", "L_ref")

    def __init__(self, values, L_ref):
        v = np.asarray(values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"expected (N,) or (N, m) samples, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function contains non-finite entries")
        self.values = v
        self.L_ref = float(L_ref)

    @classmethod
    def zeros(cls, N, m, L_ref):
        return cls(np.zeros((N, m), dtype=complex), L_ref)

    @classmethod
    def from_callable(cls, fn, x, L_ref, m=1):
        vals = np.asarray(fn(x), dtype=complex)
        if vals.ndim == 1 and m == 1:
            vals = vals[:, None]
        return cls(vals, L_ref)

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    def wavenumbers(self):
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.L_ref / self.N)

    def copy(self):
        return GridFunction(self.values.copy(), self.L_ref)

    def __add__(self, other):
        return GridFunction(self.values + other.values, self.L_ref)

    def __sub__(self, other):
        return GridFunction(self.values - other.values, self.L_ref)

    def __mul__(self, scalar):
        return GridFunction(self.values * scalar, self.L_ref)

    __rmul__ = __mul__

    def __repr__(self):
        return f"GridFunction(N={self.N}, m={self.m}, L_ref={self.L_ref:g})"


def spectral_derivative(u):
    """d/dx via the Fourier multiplier i*xi (exact on resolved modes)."""
    xi = u.wavenumbers()
    out = np.fft.ifft(1j * xi[:, None] * np.fft.fft(u.values, axis=0), axis=0)
    return GridFunction(out, u.L_ref)


def apply_multiplier(u, mult):
    """Apply a diagonal Fourier multiplier mult(xi) to every component."""
    xi = u.wavenumbers()
    out = np.fft.ifft(mult(xi)[:, None] * np.fft.fft(u.values, axis=0), axis=0)
    return GridFunction(out, u.L_ref)


def apply_Dk(u, k):
    """Fractional power of (laplacian + id): modewise (1 + xi^2)^(k/2).

    apply_Dk(u, 0) is the identity; apply_Dk(apply_Dk(u, k), -k) inverts
    exactly modewise.
    """
    if k == 0:
        return u.copy()
    return apply_multiplier(u, lambda xi: (1.0 + xi**2) ** (k / 2.0))


def l2_norm(u):
    """Trapezoid L^2 norm over the periodic slice (all components)."""
    dx = u.L_ref / u.N
    return float(np.sqrt(dx * np.sum(np.abs(u.values) ** 2)))


def sobolev_norm(u, k):
    """H^k norm: L^2 norm of apply_Dk(u, k) against the flat metric."""
    return l2_norm(apply_Dk(u, k))


def mollify(u, eps):
    """Heat-semigroup mollifier: modewise factor exp(-eps*(1 + xi^2)).

    A strict contraction in every H^k since the factor is <= exp(-eps) < 1.
    """
    if eps <= 0:
        raise ValueError(f"mollifier width must be positive, got {eps}")
    return apply_multiplier(u, lambda xi: np.exp(-eps * (1.0 + xi**2)))


@dataclass(frozen=True)
class SliceEnergy:
    """k-energy of a slice: position part plus weighted velocity part."""

    k: float
    parts: tuple

    @property
    def value(self):
        return self.parts[0] + self.parts[1]


def energy_k(u, v, st, s, k):
    """Slice energy ||u||_{H^k}^2 + ||beta^{-1/2} v||_{H^{k-1}}^2.

    v is the plain time derivative of u at time s; the lapse weight converts
    it to the unit-normal derivative.
    """
    if u.N != v.N or u.m != v.m:
        raise ValueError("u and v must share a grid and rank")
    if not st.contains_time(s):
        raise ValueError(f"slice time {s} outside {st.t_range}")
    w = st.beta_at(s, st.x) ** -0.5
    vw = GridFunction(w[:, None] * v.values, v.L_ref)
    return SliceEnergy(k=float(k),
                       parts=(sobolev_norm(u, k) ** 2,
                              sobolev_norm(vw, k - 1) ** 2))
