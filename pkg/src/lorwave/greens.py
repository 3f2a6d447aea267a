"""Green's formula on lightlike boundaries: null frames, the boundary
density, and the bulk-vs-boundary residual.

For the graph t = sigma(x), the tangent (sigma', 1) is null; the frame is

    L      = (|sigma'|, sign sigma')           (future-directed, tangent)
    Lcheck = (1/(2 a sqrt(beta)), -s/(2 a^2))  (transverse, g(L, Lcheck) = -1)

and the pullback of Lcheck . vol along x -> (sigma(x), x), with the
increasing-x orientation, is identically 1 in this normalization (the
calibrated orientation choice: it makes the residual vanish on smooth
scenarios).  Rescaling L -> alpha L sends the density to (1/alpha) times
itself, which the boundary integrand cancels exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cauchy import SpacetimeSolution
from .geometry import graph_derivative, one_sided_slopes
from .operators import SpacetimeFunction, apply_P, dual_operator, volume_weight


@dataclass
class NullFrame:
    """Per-node null tangent L, transverse null Lcheck, and density a_L."""

    surface: object
    L: np.ndarray        # (N, 2): (L^t, L^x)
    Lcheck: np.ndarray   # (N, 2)
    aL: np.ndarray       # (N,)
    kink_flags: np.ndarray  # True where the frame is one-sided
    scale: float = 1.0   # L relative to the graph-tangent normalization

    def rescale(self, alpha):
        """Frame with L -> alpha L (density scales inversely).

        alpha < 0 breaks future-directedness; the boundary integrand is
        invariant regardless, which is exactly what the rescaling law
        asserts.
        """
        if alpha == 0:
            raise ValueError("rescaling factor must be nonzero")
        return NullFrame(self.surface, alpha * self.L, self.Lcheck / alpha,
                         self.aL / alpha, self.kink_flags,
                         self.scale * alpha)

    def identities(self, st=None):
        """Nodewise |g(L,L)|, |g(Lcheck,Lcheck)|, |g(L,Lcheck) + 1|."""
        st = st or self.surface.spacetime
        sig = self.surface.sigma
        beta = st.beta_at(sig, st.x)
        a2 = st.a_at(sig, st.x) ** 2

        def g(v, w):
            return -beta * v[:, 0] * w[:, 0] + a2 * v[:, 1] * w[:, 1]

        return (np.abs(g(self.L, self.L)),
                np.abs(g(self.Lcheck, self.Lcheck)),
                np.abs(g(self.L, self.Lcheck) + 1.0))


def _frame_from_slopes(st, surf, slopes):
    beta = st.beta_at(surf.sigma, st.x)
    a = st.a_at(surf.sigma, st.x)
    s = np.where(slopes >= 0, 1.0, -1.0)
    L = np.stack([np.abs(slopes), s], axis=1)
    Lcheck = np.stack([1.0 / (2 * a * np.sqrt(beta)), -s / (2 * a**2)],
                      axis=1)
    # pullback of Lcheck . (sqrt(beta) a dt ^ dx) along x -> (sigma(x), x)
    aL = np.sqrt(beta) * a * (Lcheck[:, 0] - Lcheck[:, 1] * slopes)
    return L, Lcheck, aL


def null_frame(st, surf):
    """Null frame and quadrature density at every surface node.

    Slope signs come from the graph; slope magnitudes from the null
    condition a/sqrt(beta) (the graph is null by construction, and the
    analytic magnitude keeps the frame identities at roundoff on every
    metric).  Kink nodes take the right-sided sign and are flagged; the
    boundary integral averages both one-sided integrands there.
    """
    fd = surf.slopes()
    s = np.where(fd >= 0, 1.0, -1.0)
    mag = (st.a_at(surf.sigma, st.x)
           / np.sqrt(st.beta_at(surf.sigma, st.x)))
    slopes = s * mag
    L, Lcheck, aL = _frame_from_slopes(st, surf, slopes)
    flags = np.zeros(st.N, dtype=bool)
    for k in surf.kinks:
        flags[k] = True
    return NullFrame(surface=surf, L=L, Lcheck=Lcheck, aL=aL,
                     kink_flags=flags)


def _surface_samples(field, surf):
    """(N, m) samples of a space-time field at the surface graph nodes."""
    if isinstance(field, SpacetimeSolution):
        field = field.u
    st = field.spacetime
    out = np.zeros((st.N, field.m), dtype=complex)
    for j in range(st.N):
        out[j] = field.eval_slice(surf.sigma[j])[j]
    return out


def _segments(N, kinks):
    breakpoints = sorted(set([0, N - 1] + list(kinks)))
    out = []
    prev = breakpoints[0]
    for k in breakpoints[1:]:
        if k > prev:
            out.append((prev, k))
        prev = k
    return out or [(0, N - 1)]


def _composite_cubic(vals, dx):
    """4th-order composite integral of samples over their full span."""
    n = len(vals)
    if n < 4:
        w = np.full(n, dx)
        w[0] = w[-1] = dx / 2
        return np.sum(vals * w)
    total = 0.0j
    total += (9 * vals[0] + 19 * vals[1] - 5 * vals[2] + vals[3]) / 24.0
    for k in range(1, n - 2):
        total += (-vals[k - 1] + 13 * vals[k] + 13 * vals[k + 1]
                  - vals[k + 2]) / 24.0
    total += (vals[n - 4] - 5 * vals[n - 3] + 19 * vals[n - 2]
              + 9 * vals[n - 1]) / 24.0
    return total * dx


def _segmented_integral(vals, dx, kinks, override=None):
    """Composite-cubic integral over [0, N-1] split at kink nodes.

    override maps a kink index to its (left, right) one-sided integrand
    values, used as the segment endpoint on each side.
    """
    total = 0.0j
    for lo, hi in _segments(len(vals), kinks):
        seg = np.array(vals[lo:hi + 1])
        if override:
            if lo in override:
                seg[0] = override[lo][1]
            if hi in override:
                seg[-1] = override[hi][0]
        total += _composite_cubic(seg, dx)
    return total


def boundary_integral(frame, surf, u, psi):
    """Integral over the surface of (D_L psi^T u - psi^T D_L u) a_L.

    D_L is the tangential derivative along the graph scaled to L: the
    graph tangent is (sigma', 1) = sign(sigma') L, so D_L w =
    sign(sigma') d/dx [w(sigma(x), x)].  Quadrature is composite cubic
    per smooth leg, with one-sided integrand values at the kinks.
    """
    st = surf.spacetime
    uu = _surface_samples(u, surf)
    pp = _surface_samples(psi, surf)

    # D_L w = L^x * d/dx[w(sigma(x), x)] since the graph tangent is
    # (sigma', 1) and L = scale * sign(sigma') * (sigma', 1)
    du = graph_derivative(st, uu, surf.kinks)
    dp = graph_derivative(st, pp, surf.kinks)
    vals = (np.sum(dp * uu, axis=1)
            - np.sum(pp * du, axis=1)) * frame.L[:, 1] * frame.aL

    override = {}
    for k in surf.kinks:
        from .geometry import _one_sided_derivative
        sides = {}
        left, right = one_sided_slopes(surf, k)
        for key, side, slope in (("L", -1, left), ("R", +1, right)):
            du_k = _one_sided_derivative(uu, k, st.dx, side, st.N)
            dp_k = _one_sided_derivative(pp, k, st.dx, side, st.N)
            _, _, aL_k = _frame_from_slopes(st, surf, np.full(st.N, slope))
            sgn = (1.0 if slope >= 0 else -1.0) * frame.scale
            sides[key] = (np.sum(dp_k * uu[k]) - np.sum(pp[k] * du_k)) \
                * sgn * aL_k[k] / frame.scale
        override[k] = (sides["L"], sides["R"])
        vals[k] = 0.5 * (sides["L"] + sides["R"])

    if st.is_circle:
        return complex(np.sum(vals) * st.dx)
    return complex(_segmented_integral(vals, st.dx, surf.kinks, override))


def _cubic_piece(col, nt, r_a, r_b):
    """Integral (in dt units) of the cubic interpolant of col over
    [r_a, r_b], with the 4-point stencil nearest the interval."""
    base = min(max(int(np.floor(r_a)) - 1, 0), nt - 4)
    offs = np.arange(4)
    sa, sb = r_a - base, r_b - base
    # weights: integrate each Lagrange basis polynomial over [sa, sb]
    w = np.zeros(4)
    for i in range(4):
        others = offs[offs != offs[i]]
        denom = np.prod(offs[i] - others)
        poly_int = np.polyint(np.poly(others) / denom)
        w[i] = np.polyval(poly_int, sb) - np.polyval(poly_int, sa)
    return w @ col[base:base + 4]


def _column_integral(col, nt, r0):
    """4th-order integral of sampled col over [r0, nt-1] (dt units).

    Composite cubic cell rule over the whole cells above the cut, plus an
    exact cubic-interpolant integral over the partial cell.
    """
    k0 = int(np.ceil(r0 - 1e-12))
    if k0 >= nt:
        return 0.0j
    k0 = max(k0, 0)
    total = 0.0j
    for k in range(k0, nt - 1):
        if 1 <= k <= nt - 3:
            total += (-col[k - 1] + 13 * col[k] + 13 * col[k + 1]
                      - col[k + 2]) / 24.0
        elif k == 0:
            total += (9 * col[0] + 19 * col[1] - 5 * col[2] + col[3]) / 24.0
        else:  # k == nt - 2 with no k+2 neighbour
            total += (col[nt - 4] - 5 * col[nt - 3] + 19 * col[nt - 2]
                      + 9 * col[nt - 1]) / 24.0
    if k0 > 0 and r0 < k0:
        total += _cubic_piece(col, nt, r0, float(k0))
    return total


def _cut_cell_integral(st, surf, B, t0, dt):
    """Column-wise integral of B over {t >= sigma(x)}, with the cell cut
    by the surface covered exactly by a cubic-interpolant piece; the
    x-integral of the columns is composite cubic per smooth leg (the
    column profile is only Lipschitz across a cone apex)."""
    nt = B.shape[0]
    cols = np.empty(st.N, dtype=complex)
    for j in range(st.N):
        r0 = (surf.sigma[j] - t0) / dt
        cols[j] = _column_integral(B[:, j], nt, r0)
    if st.is_circle:
        return np.sum(cols) * dt * st.dx
    return _segmented_integral(cols, st.dx, surf.kinks) * dt


def green_residual(op, st, surf, u, psi):
    """Bulk minus boundary side of Green's formula on J^+ of the surface.

    lhs: space-time integral of (psi^T P u - (P^dual psi)^T u) sqrt(beta) a
    over {t >= sigma(x)}, cut cells fractionally weighted; rhs: the
    boundary integral with the calibrated orientation.
    """
    if isinstance(u, SpacetimeSolution):
        u = u.u
    if isinstance(psi, SpacetimeSolution):
        psi = psi.u
    if u.values.shape != psi.values.shape or u.t0 != psi.t0 or u.dt != psi.dt:
        raise ValueError("u and psi must share one sample grid")
    dop = dual_operator(op, st)
    pu = apply_P(op, st, u)
    pd = apply_P(dop, st, psi)
    ts = u.times()
    dens = np.broadcast_to(
        np.asarray(volume_weight(st)(ts[:, None], st.x[None, :]), dtype=float),
        (u.nt, st.N))
    B = (np.sum(psi.values * pu.values, axis=2)
         - np.sum(pd.values * u.values, axis=2)) * dens
    lhs = _cut_cell_integral(st, surf, B, u.t0, u.dt)
    frame = null_frame(st, surf)
    rhs = boundary_integral(frame, surf, u, psi)
    residual = lhs - rhs
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "residual": residual,
        "relative_residual": abs(residual) / scale,
    }
