"""Compactly supported smooth profiles used by scenarios and probes.

power_bump: polynomial-free cosine-power bump, C^(p-1) at its edges with
moderate derivative constants (resolves well on coarse grids, unlike
exp-type bumps).

plateau_window: exact convolution of an interval indicator with a
power_bump, so it is identically 1 on the flat core, identically 0
outside the support, and C^(p-1) in between; all evaluations are closed
form (the bump's CDF is a short cosine series).
"""

from __future__ import annotations

import math

import numpy as np


def power_bump(z, power=16):
    """cos^power(pi z / 2) on |z| < 1, exactly zero outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = np.abs(z) < 1.0
    out[m] = np.cos(np.pi * z[m] / 2.0) ** power
    return out


def _cos_power_series(power):
    """cos^power(v) = a0 + sum_j a[j] cos(2 j v) for even power."""
    if power % 2 != 0:
        raise ValueError("power must be even")
    k = power // 2
    scale = 0.5**power
    a0 = scale * math.comb(power, k)
    aj = [2.0 * scale * math.comb(power, k - j) for j in range(1, k + 1)]
    return a0, aj


def bump_cdf(u, half_width, power=16):
    """Integral of power_bump((.)/half_width) from -half_width to u."""
    u = np.asarray(u, dtype=float)
    h = float(half_width)
    a0, aj = _cos_power_series(power)
    mass = 2.0 * h * a0
    out = np.empty_like(u)
    out[u <= -h] = 0.0
    out[u >= h] = mass
    mid = (u > -h) & (u < h)
    um = u[mid]
    acc = a0 * (um + h)
    for j, a in enumerate(aj, start=1):
        acc = acc + a * (h / (j * math.pi)) * (np.sin(j * math.pi * um / h)
                                               + math.sin(j * math.pi))
    out[mid] = acc
    return out


def plateau_window(x, flat_radius, support_radius, power=16):
    """1 on |x| <= flat_radius, 0 on |x| >= support_radius, C^(power-1).

    Built as indicator([-r_mid, r_mid]) convolved with a unit-mass
    power_bump of half-width (support_radius - flat_radius)/2; the flat
    core and the outside zeros are exact, not just small.
    """
    if not 0.0 <= flat_radius < support_radius:
        raise ValueError("need 0 <= flat_radius < support_radius")
    x = np.asarray(x, dtype=float)
    h = 0.5 * (support_radius - flat_radius)
    r_mid = flat_radius + h
    a0, _ = _cos_power_series(power)
    mass = 2.0 * h * a0
    w = (bump_cdf(x + r_mid, h, power) - bump_cdf(x - r_mid, h, power)) / mass
    np.clip(w, 0.0, 1.0, out=w)
    return w


def power_bump_d1(z, power=16):
    """d/dz of power_bump."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = np.abs(z) < 1.0
    zm = z[m]
    out[m] = (-power * (np.pi / 2.0) * np.cos(np.pi * zm / 2.0) ** (power - 1)
              * np.sin(np.pi * zm / 2.0))
    return out


def _window_geometry(flat_radius, support_radius, power):
    h = 0.5 * (support_radius - flat_radius)
    r_mid = flat_radius + h
    a0, _ = _cos_power_series(power)
    return h, r_mid, 2.0 * h * a0


def plateau_window_d1(x, flat_radius, support_radius, power=16):
    """Exact first derivative of plateau_window."""
    x = np.asarray(x, dtype=float)
    h, r_mid, mass = _window_geometry(flat_radius, support_radius, power)
    return (power_bump((x + r_mid) / h, power)
            - power_bump((x - r_mid) / h, power)) / mass


def plateau_window_d2(x, flat_radius, support_radius, power=16):
    """Exact second derivative of plateau_window."""
    x = np.asarray(x, dtype=float)
    h, r_mid, mass = _window_geometry(flat_radius, support_radius, power)
    return (power_bump_d1((x + r_mid) / h, power)
            - power_bump_d1((x - r_mid) / h, power)) / (mass * h)


def smooth_step(y, power=16):
    """Monotone C^(power-1) step: 0 for y <= -1, 1 for y >= 1, 1/2 at 0."""
    h = 1.0
    a0, _ = _cos_power_series(power)
    return bump_cdf(y, h, power) / (2.0 * h * a0)


def smooth_step_moment2(y, power=16):
    """C^(power-2) step whose derivative has vanishing second moment.

    S = K/m0 + y k/(2 m0) with k the power bump and K its CDF: mollifying
    an indicator with S' perturbs smooth integrands at O(width^4) instead
    of O(width^2).  S slightly over/undershoots [0, 1] inside the
    transition, which is harmless for source gating.
    """
    y = np.asarray(y, dtype=float)
    a0, _ = _cos_power_series(power)
    m0 = 2.0 * a0
    return (bump_cdf(y, 1.0, power) / m0
            + y * power_bump(y, power) / (2.0 * m0))


_ONE_SIDED_CACHE = {}


#: one-sided step geometry: rise on [0, 1], correction lobes centered at
#: 2 and 4.5 with half-widths 1 and 1.5, full span [0, 6]
ONE_SIDED_SPAN = 6.0


def _one_sided_coeffs(power):
    """Lobe weights restoring the 0th and 1st moments of the one-sided
    step (rise on [0, 1], exactly zero below 0).  Wide lobes keep the
    correction resolvable on coarse grids."""
    hit = _ONE_SIDED_CACHE.get(power)
    if hit is not None:
        return hit
    y = np.linspace(0.0, ONE_SIDED_SPAN, 6001)
    a0, _ = _cos_power_series(power)
    m0 = 2.0 * a0
    s0 = bump_cdf(2.0 * y - 1.0, 1.0, power) / m0
    b1 = power_bump(y - 2.0, power)
    b2 = power_bump((y - 4.5) / 1.5, power)
    h = np.where(y > 0, 1.0, 0.0)
    h[0] = 0.5

    def mom(f, k):
        return np.trapezoid(f * y**k, y)

    A = np.array([[mom(b1, 0), mom(b2, 0)], [mom(b1, 1), mom(b2, 1)]])
    rhs = -np.array([mom(s0 - h, 0), mom(s0 - h, 1)])
    c = np.linalg.solve(A, rhs)
    _ONE_SIDED_CACHE[power] = c
    return c


def one_sided_step_moment2(y, power=16):
    """Step that is exactly 0 for y <= 0 and 1 for y >= ONE_SIDED_SPAN,
    with the 0th and 1st moments of (step - indicator) vanishing.

    Rising on [0, 1] with wide overshoot lobes on [1, 6]: gating a
    causal-future indicator with it never sources the region at or below
    the surface, and the far field sees an O(width^3) perturbation.
    """
    y = np.asarray(y, dtype=float)
    a0, _ = _cos_power_series(power)
    m0 = 2.0 * a0
    c1, c2 = _one_sided_coeffs(power)
    return (bump_cdf(2.0 * y - 1.0, 1.0, power) / m0
            + c1 * power_bump(y - 2.0, power)
            + c2 * power_bump((y - 4.5) / 1.5, power))
