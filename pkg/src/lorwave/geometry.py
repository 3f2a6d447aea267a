"""Globally hyperbolic 1+1 spacetimes in temporal-splitting form.

The metric is g = -beta(t,x) dt^2 + a(t,x)^2 dx^2 on I x S, where S is a
circle of circumference L or a periodic box [-X, X) standing in for the
real line via guard regions sized to the finite propagation speed.  The
coordinate speed of light is sqrt(beta)/a.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadGuardRegion,
    NonPositiveLapse,
    NonPositiveScale,
    SliceNotSpacelike,
    SurfaceLeavesDomain,
)
from .expressions import Expression, parse_expression
from .stencils import fd_weights as _fd_weights

#: positive floor for beta and a on the validation grid
POSITIVITY_FLOOR = 1e-12

#: time samples used for construction-time positivity / speed scans
_VALIDATION_NT = 129

PRESETS = {
    "minkowski": {"beta": "1", "a": "1"},
    # breathing: unit lapse, spatial scale pulsing in t and x
    "breathing": {"beta": "1", "a": "1 + {eps}*sin(t)*cos(x)"},
}


@dataclass(frozen=True)
class CircleTopology:
    L: float

    @property
    def x_min(self):
        return 0.0

    @property
    def period(self):
        return self.L


@dataclass(frozen=True)
class LineTopology:
    """Periodic box [-X, X) with guard width G at both ends."""

    X: float
    G: float

    @property
    def x_min(self):
        return -self.X

    @property
    def period(self):
        return 2.0 * self.X


class Spacetime1D:
    """Validated spacetime I x S with cached grid and coefficient scans.

    Immutable after construction; share freely.
    """

    def __init__(self, topology, t_range, beta, a, N, guard_travel_check=True):
        if N % 2 != 0 or N <= 0:
            raise ValueError(f"N must be an even positive integer, got {N}")
        t0, t1 = float(t_range[0]), float(t_range[1])
        if not t1 > t0:
            raise ValueError(f"empty time range {t_range}")
        self.topology = topology
        self.t_range = (t0, t1)
        self.beta = parse_expression(beta)
        self.a = parse_expression(a)
        self.N = int(N)
        self.x = topology.x_min + topology.period / N * np.arange(N)
        self.dx = topology.period / N

        ts = np.linspace(t0, t1, _VALIDATION_NT)
        tt, xx = np.meshgrid(ts, self.x, indexing="ij")
        bv = np.broadcast_to(np.asarray(self.beta(tt, xx), dtype=float), tt.shape)
        av = np.broadcast_to(np.asarray(self.a(tt, xx), dtype=float), tt.shape)
        if not np.all(np.isfinite(bv)):
            raise NonPositiveLapse("beta is not finite on the grid")
        if not np.all(np.isfinite(av)):
            raise NonPositiveScale("a is not finite on the grid")
        self.beta_min = float(bv.min())
        self.a_min = float(av.min())
        if self.beta_min <= POSITIVITY_FLOOR:
            raise NonPositiveLapse(
                f"beta_min = {self.beta_min:g} <= {POSITIVITY_FLOOR:g}")
        if self.a_min <= POSITIVITY_FLOOR:
            raise NonPositiveScale(
                f"a_min = {self.a_min:g} <= {POSITIVITY_FLOOR:g}")
        #: max coordinate light speed sqrt(beta)/a over the validation grid
        self.speed_max = float(np.max(np.sqrt(bv) / av))

        if isinstance(topology, LineTopology):
            if not 0.0 < topology.G < topology.X:
                raise BadGuardRegion("guard width must lie in (0, X)")
            # A light cone spanning the box needs t_range taller than X/speed,
            # which makes the travel bound unsatisfiable (G would have to
            # exceed X).  Surface-container spacetimes therefore opt out and
            # the solver enforces the underlying isolation condition
            # (support radius + travel inside the box) per solve.
            travel = self.speed_max * (t1 - t0)
            if guard_travel_check and not topology.G > travel:
                raise BadGuardRegion(
                    f"guard width {topology.G:g} must exceed the total "
                    f"coordinate travel distance {travel:g}")

    # --- helpers ---------------------------------------------------------

    @property
    def is_circle(self):
        return isinstance(self.topology, CircleTopology)

    @property
    def L_ref(self):
        return self.topology.period

    def beta_at(self, t, x):
        """beta(t, x) broadcast to the shape of t op x."""
        shape = np.broadcast(np.asarray(t), np.asarray(x)).shape
        return np.broadcast_to(np.asarray(self.beta(t, x), dtype=float), shape)

    def a_at(self, t, x):
        """a(t, x) broadcast to the shape of t op x."""
        shape = np.broadcast(np.asarray(t), np.asarray(x)).shape
        return np.broadcast_to(np.asarray(self.a(t, x), dtype=float), shape)

    def speed(self, t, x):
        """Coordinate light speed sqrt(beta)/a at (t, x)."""
        return np.sqrt(self.beta_at(t, x)) / self.a_at(t, x)

    def guard_mask(self):
        """Boolean mask of nodes inside the guard region (line topology)."""
        if self.is_circle:
            return np.zeros(self.N, dtype=bool)
        X, G = self.topology.X, self.topology.G
        return (self.x <= -X + G) | (self.x >= X - G)

    def check_supported_inside(self, values, what="data"):
        """Raise BadGuardRegion unless values vanish on the guard region.

        Accepts arrays with the node axis first ((N,), (N, m)) or second
        ((N_t, N, m)).
        """
        if self.is_circle:
            return
        v = np.asarray(values)
        axis = 1 if v.ndim == 3 else 0
        if v.shape[axis] != self.N:
            raise ValueError(f"array of shape {v.shape} has no node axis {self.N}")
        mask = self.guard_mask()
        worst = float(np.max(np.abs(np.compress(mask, v, axis=axis)))) if v.size else 0.0
        if worst != 0.0:
            raise BadGuardRegion(
                f"{what} reaches into the guard region (max {worst:g})")

    def contains_time(self, t, strict=False):
        t0, t1 = self.t_range
        if strict:
            return np.all((t > t0) & (t < t1))
        return np.all((t >= t0) & (t <= t1))

    def __repr__(self):
        kind = "circle" if self.is_circle else "line"
        return (f"Spacetime1D({kind}, N={self.N}, t_range={self.t_range}, "
                f"beta_min={self.beta_min:g}, a_min={self.a_min:g})")


def make_spacetime(config):
    """Build a Spacetime1D from a scenario-style mapping.

    Keys: topology {kind: circle|line, L | X, G}, t_range [t0, t1],
    N, and either preset (minkowski | breathing with eps) or expression
    strings beta, a.
    """
    topo_cfg = config["topology"]
    if topo_cfg["kind"] == "circle":
        topology = CircleTopology(float(topo_cfg["L"]))
    elif topo_cfg["kind"] == "line":
        topology = LineTopology(float(topo_cfg["X"]), float(topo_cfg["G"]))
    else:
        raise ValueError(f"unknown topology kind {topo_cfg['kind']!r}")

    if "preset" in config:
        name = config["preset"]
        if name not in PRESETS:
            raise ValueError(f"unknown spacetime preset {name!r}")
        fields = dict(PRESETS[name])
        if name == "breathing":
            eps = float(config.get("eps", 0.1))
            fields["a"] = fields["a"].format(eps=repr(eps))
        beta, a = fields["beta"], fields["a"]
    else:
        beta, a = config["beta"], config["a"]

    return Spacetime1D(topology, config["t_range"], beta, a, config["N"],
                       guard_travel_check=not config.get("relax_guard", False))


# --- characteristic surfaces ----------------------------------------------

class CharacteristicSurface:
    """Lightlike graph t = sigma(x) over the spatial nodes.

    Kinks (cone apexes) are first class: sigma is not smoothed, slopes are
    one-sided there, and the null residual is only enforced away from them.
    """

    def __init__(self, spacetime, sigma, kinks=(), orientation="past_boundary",
                 tol_null=None):
        self.spacetime = spacetime
        self.sigma = np.asarray(sigma, dtype=float)
        if self.sigma.shape != (spacetime.N,):
            raise ValueError("sigma must have one value per spatial node")
        self.kinks = tuple(sorted(int(k) for k in kinks))
        self.orientation = orientation
        if tol_null is None:
            # 10 * dx^4 * (5th-derivative proxy, taken as 1)
            tol_null = 10.0 * spacetime.dx**4
        self.tol_null = float(tol_null)

        t0, t1 = spacetime.t_range
        if not (np.all(self.sigma > t0) and np.all(self.sigma < t1)):
            raise SurfaceLeavesDomain(
                "sigma must map into the interior of the time range")
        res = self.null_residual()
        worst = float(np.max(res)) if res.size else 0.0
        if worst > self.tol_null:
            raise ValueError(
                f"null residual {worst:g} exceeds tolerance {self.tol_null:g}")

    def slopes(self):
        """4th-order slopes, one-sided at kinks and box ends."""
        return _graph_slopes(self.spacetime, self.sigma, self.kinks)

    def null_residual(self):
        """|-beta*sigma'^2 + a^2| at every non-kink node."""
        st = self.spacetime
        sp = self.slopes()
        res = np.abs(-st.beta(self.sigma, st.x) * sp**2
                     + st.a(self.sigma, st.x) ** 2)
        keep = np.ones(st.N, dtype=bool)
        for k in self.kinks:
            keep[k] = False
        if not st.is_circle:
            keep[0] = keep[-1] = True  # one-sided ends still checked
        return res[keep]

    def interp(self, x):
        """sigma at arbitrary x, linear between nodes."""
        st = self.spacetime
        xq = (np.asarray(x, dtype=float) - st.topology.x_min) % st.topology.period
        j = np.minimum((xq / st.dx).astype(int), st.N - 1)
        frac = xq / st.dx - j
        jp = (j + 1) % st.N
        return (1 - frac) * self.sigma[j] + frac * self.sigma[jp]

    def min_time(self):
        return float(self.sigma.min())

    def __repr__(self):
        return (f"CharacteristicSurface(min={self.sigma.min():g}, "
                f"max={self.sigma.max():g}, kinks={self.kinks})")


def graph_derivative(st, values, kinks):
    """Nodewise d/dx of node samples along a graph, 4th order, one-sided
    at kinks and box ends.  values: (N,) or (N, m); kink nodes get the
    right-sided value by convention."""
    values = np.asarray(values)
    N, dx = st.N, st.dx
    sp = np.empty_like(values)
    if st.is_circle and not kinks:
        idx = np.arange(N)
        return (values[idx - 2] - 8 * values[idx - 1]
                + 8 * values[(idx + 1) % N]
                - values[(idx + 2) % N]) / (12 * dx)
    # break the node line into smooth segments delimited by kinks/box ends
    breakpoints = sorted(set([0, N - 1] + list(kinks)))
    segments = []
    prev = 0
    for k in breakpoints:
        if k > prev:
            segments.append((prev, k))
        prev = k
    if prev < N - 1:
        segments.append((prev, N - 1))
    if not segments:
        segments = [(0, N - 1)]
    w_central = _fd_weights(np.arange(-2, 3) * dx, 0.0, 1)
    for lo, hi in segments:
        for j in range(lo, hi + 1):
            if j - 2 >= lo and j + 2 <= hi:
                sp[j] = w_central @ values[j - 2:j + 3]
            else:
                base = min(max(lo, j - 2), hi - 4) if hi - lo >= 4 else lo
                pts = np.arange(base, min(base + 5, hi + 1))
                w = _fd_weights((pts - j) * dx, 0.0, 1)
                sp[j] = w @ values[pts]
    for k in kinks:
        sp[k] = _one_sided_derivative(values, k, dx, +1, N)
    return sp


def _graph_slopes(st, sigma, kinks):
    return graph_derivative(st, np.asarray(sigma, dtype=float), kinks)


def _one_sided_derivative(values, j, dx, side, N):
    if side > 0:
        pts = np.arange(j, min(j + 5, N))
    else:
        pts = np.arange(max(0, j - 4), j + 1)
    w = _fd_weights((pts - j) * dx, 0.0, 1)
    return w @ values[pts]


def _one_sided_slope(sigma, j, dx, side, N):
    return float(_one_sided_derivative(np.asarray(sigma, dtype=float),
                                       j, dx, side, N))


def one_sided_slopes(surf, j):
    """(left, right) slopes of sigma at node j."""
    st = surf.spacetime
    return (_one_sided_slope(surf.sigma, j, st.dx, -1, st.N),
            _one_sided_slope(surf.sigma, j, st.dx, +1, st.N))


def _rk4_step(f, x, y, h):
    k1 = f(x, y)
    k2 = f(x + h / 2, y + h / 2 * k1)
    k3 = f(x + h / 2, y + h / 2 * k2)
    k4 = f(x + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lightlike_graph(st, apex, shape, slope_sign=+1, tol_null=None):
    """Integrate a lightlike graph t = sigma(x) outward from an apex.

    shape: "future_cone" | "past_cone" | "line".  The apex x-coordinate is
    snapped to the nearest grid node.  sigma solves sigma' =
    s * a(sigma,x)/sqrt(beta(sigma,x)) legwise (RK4 per node spacing).
    """
    if st.is_circle:
        raise ValueError("lightlike graphs require line topology")
    t_apex, x_apex = float(apex[0]), float(apex[1])
    t0, t1 = st.t_range
    if not (t0 < t_apex < t1):
        raise SurfaceLeavesDomain("apex is outside the interior of t_range")
    j0 = int(round((x_apex - st.topology.x_min) / st.dx))
    j0 = min(max(j0, 0), st.N - 1)

    def speed(x, s):
        return st.a(s, x) / np.sqrt(st.beta(s, x))

    if shape == "future_cone":
        sign_right, sign_left = +1.0, -1.0
        kinks = (j0,)
    elif shape == "past_cone":
        sign_right, sign_left = -1.0, +1.0
        kinks = (j0,)
    elif shape == "line":
        sign_right = sign_left = float(slope_sign)
        kinks = ()
    else:
        raise ValueError(f"unknown shape {shape!r}")

    sigma = np.empty(st.N)
    sigma[j0] = t_apex

    def march(j_start, j_stop, step, sign):
        y = sigma[j_start]
        for j in range(j_start, j_stop, step):
            xj = st.x[j]
            h = step * st.dx
            y = _rk4_step(lambda xx, yy: sign * speed(xx, yy), xj, y, h)
            if not (t0 < y < t1):
                raise SurfaceLeavesDomain(
                    f"sigma left the time range at x = {xj + h:g}")
            sigma[j + step] = y

    march(j0, st.N - 1, +1, sign_right)
    march(j0, 0, -1, sign_left)
    return CharacteristicSurface(st, sigma, kinks=kinks, tol_null=tol_null)


def in_causal_future(surf, event):
    """True iff the event (t, x) lies in J^+ of the surface: t >= sigma(x)."""
    t, x = event
    return bool(np.asarray(t) >= surf.interp(x))


def is_past_compact(surf):
    """V-shape criterion for J^+(surface) to be past compact.

    True iff sigma' is the ingoing null slope (-a/sqrt(beta)) at the left
    box end and the outgoing one (+a/sqrt(beta)) at the right end.  Lambda
    shapes and monotone null lines give False.
    """
    st = surf.spacetime
    if st.is_circle:
        raise ValueError("past compactness probe requires line topology")
    left = _one_sided_slope(surf.sigma, 0, st.dx, +1, st.N)
    right = _one_sided_slope(surf.sigma, st.N - 1, st.dx, -1, st.N)
    return bool(left < 0.0 and right > 0.0)


# --- tilted (boosted) spacelike slices -------------------------------------

@dataclass(frozen=True)
class TiltedSlice:
    """Graph slice t = tau + h(x); must be uniformly spacelike."""

    tau: float
    h: np.ndarray = field(repr=False)

    def times(self, st):
        return self.tau + self.h

    def validate_spacelike(self, st, margin=0.05):
        times = self.times(st)
        if not st.contains_time(times):
            raise SurfaceLeavesDomain("tilted slice exits the time range")
        hp = _graph_slopes(st, np.asarray(self.h, dtype=float), ())
        bound = st.a(times, st.x) / np.sqrt(st.beta(times, st.x)) - margin
        if not np.all(np.abs(hp) < bound):
            raise SliceNotSpacelike(
                f"slope {np.max(np.abs(hp)):g} reaches the causal bound")
        return self


def boost_slice(st, tau, velocity):
    """TiltedSlice {t = tau + velocity * x} (flat-space Lorentz reslice)."""
    return TiltedSlice(tau=tau, h=velocity * st.x).validate_spacelike(st)
