"""Method-of-lines Cauchy solver and its verification suite.

Classical RK4 with a fixed step from the CFL bound, on the first-order
system (u, v = dt u).  Evolution runs forward and backward from the data
time to cover the requested window; everything is deterministic bit for
bit for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CflViolation,
    NonFiniteState,
    SliceNotSpacelike,
    SupportEscapesBox,
)
from .geometry import Spacetime1D
from .operators import RhsEvaluator, SpacetimeFunction, spectral_dx
from .sobolev import GridFunction, energy_k, sobolev_norm


@dataclass(frozen=True)
class CauchyData:
    """Initial position and unit-normal derivative on the slice t = tau."""

    tau: float
    u0: GridFunction
    u1: GridFunction

    def __post_init__(self):
        if self.u0.N != self.u1.N or self.u0.m != self.u1.m:
            raise ValueError("u0 and u1 must share a grid and rank")


class SpacetimeSolution:
    """Dense record of (u, dt u) on the uniform solver time grid."""

    def __init__(self, u, v, meta):
        self.u = u
        self.v = v
        self.meta = meta

    def times(self):
        return self.u.times()

    @property
    def spacetime(self):
        return self.u.spacetime

    def slice_pair(self, i):
        return self.u.slice_at(i), self.v.slice_at(i)

    def eval_u(self, t, xq):
        return self.u.eval_at(t, xq)

    def eval_v(self, t, xq):
        return self.v.eval_at(t, xq)

    def eval_dxu(self, t, xq):
        from .operators import _trig_eval
        sl = self.u.eval_slice(t)
        dsl = spectral_dx(sl, self.spacetime.L_ref, axis=0)
        return _trig_eval(dsl, self.spacetime.L_ref,
                          self.spacetime.topology.x_min, xq)

    def __repr__(self):
        return f"SpacetimeSolution({self.u!r})"


def _support_radius(values, x):
    """Largest |x| over nodes with any nonzero component; -inf if none."""
    v = np.asarray(values)
    flat = np.abs(v).reshape(v.shape[0], -1).max(axis=1) if v.ndim > 1 \
        else np.abs(v)
    nz = flat > 0
    if not np.any(nz):
        return -math.inf
    return float(np.max(np.abs(x[nz])))


def _choose_steps(span, dt_target):
    return max(1, int(math.ceil(span / dt_target - 1e-12)))


def _plan_grid(st, tau, dt_target, t_window):
    """Uniform dt and node index of tau over the window; tau must land on
    the grid (commensurable), which every shipped scenario satisfies."""
    t_lo, t_hi = t_window
    if not (t_lo - 1e-12 <= tau <= t_hi + 1e-12):
        raise ValueError(f"tau = {tau} outside the solve window {t_window}")
    span = t_hi - t_lo
    if span <= 0:
        raise ValueError("empty solve window")
    n0 = _choose_steps(span, dt_target)
    if abs(tau - t_lo) < 1e-12 * max(1.0, abs(tau)):
        return n0, 0
    if abs(tau - t_hi) < 1e-12 * max(1.0, abs(tau)):
        return n0, n0
    r = (tau - t_lo) / span
    for n in range(n0, n0 + 4096):
        k = r * n
        if abs(k - round(k)) < 1e-9:
            return n, int(round(k))
    raise ValueError(
        f"tau = {tau} is not commensurable with the window {t_window}; "
        "choose tau on the solver grid")


def solve_cauchy(op, st, data, source=None, cfl=0.5, dt=None, t_window=None,
                 check_guard=True):
    """Evolve Cauchy data over the window (default: the full t_range).

    source: None, a SpacetimeFunction (cubic in t at stage times), or a
    callable s -> (N, m) array evaluated exactly at stage times.
    cfl in (0, 1] sets dt = cfl * dx / max(sqrt(beta)/a); a fixed dt above
    the cfl = 1 bound raises CflViolation.
    """
    if data.u0.N != st.N:
        raise ValueError("data grid does not match the spacetime")
    m = data.u0.m
    t_window = tuple(t_window) if t_window is not None else st.t_range
    if not (st.contains_time(t_window[0]) and st.contains_time(t_window[1])):
        raise ValueError(f"solve window {t_window} outside {st.t_range}")

    bound = st.dx / st.speed_max
    if dt is not None:
        if dt > bound * (1 + 1e-12):
            raise CflViolation(f"dt = {dt:g} above the CFL bound {bound:g}")
        dt_target = float(dt)
    else:
        if not 0 < cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
        dt_target = cfl * bound

    if check_guard and not st.is_circle:
        st.check_supported_inside(data.u0.values, "initial data u0")
        st.check_supported_inside(data.u1.values, "initial data u1")
        if isinstance(source, SpacetimeFunction):
            st.check_supported_inside(source.values, "source")
        # isolation certificate: support plus coordinate travel stays off
        # the periodic seam
        r0 = max(_support_radius(data.u0.values, st.x),
                 _support_radius(data.u1.values, st.x))
        if isinstance(source, SpacetimeFunction):
            r0 = max(r0, _support_radius(
                np.moveaxis(source.values, 1, 0), st.x))
        if r0 > -math.inf:
            travel = st.speed_max * max(t_window[1] - data.tau,
                                        data.tau - t_window[0])
            if r0 + travel >= st.topology.X - st.dx:
                raise SupportEscapesBox(
                    f"support radius {r0:g} + travel {travel:g} reaches the "
                    f"box edge {st.topology.X:g}")

    n_steps, k_tau = _plan_grid(st, data.tau, dt_target, t_window)
    dt_eff = (t_window[1] - t_window[0]) / n_steps

    if isinstance(source, SpacetimeFunction):
        def source_at(s):
            return source.eval_slice(s)
    elif callable(source):
        source_at = source
    elif source is None:
        source_at = None
    else:
        raise TypeError(f"unsupported source type {type(source)!r}")

    rhs = RhsEvaluator(op, st)
    beta_tau = st.beta_at(data.tau, st.x)
    U0 = data.u0.values.astype(complex)
    V0 = np.sqrt(beta_tau)[:, None] * data.u1.values

    def step(s, U, V, h):
        f1 = source_at(s) if source_at else None
        k1u, k1v = rhs(s, U, V, f1)
        f2 = source_at(s + h / 2) if source_at else None
        k2u, k2v = rhs(s + h / 2, U + h / 2 * k1u, V + h / 2 * k1v, f2)
        k3u, k3v = rhs(s + h / 2, U + h / 2 * k2u, V + h / 2 * k2v, f2)
        f4 = source_at(s + h) if source_at else None
        k4u, k4v = rhs(s + h, U + h * k3u, V + h * k3v, f4)
        Un = U + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        Vn = V + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        return Un, Vn

    rows_u = np.empty((n_steps + 1, st.N, m), dtype=complex)
    rows_v = np.empty_like(rows_u)
    rows_u[k_tau], rows_v[k_tau] = U0, V0

    U, V = U0, V0
    for i in range(k_tau, n_steps):
        s = t_window[0] + i * dt_eff
        U, V = step(s, U, V, dt_eff)
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise NonFiniteState(f"blow-up at t = {s + dt_eff:g}")
        rows_u[i + 1], rows_v[i + 1] = U, V

    U, V = U0, V0
    for i in range(k_tau, 0, -1):
        s = t_window[0] + i * dt_eff
        U, V = step(s, U, V, -dt_eff)
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise NonFiniteState(f"blow-up at t = {s - dt_eff:g}")
        rows_u[i - 1], rows_v[i - 1] = U, V

    meta = {
        "op": op, "spacetime": st, "source": source, "data": data,
        "dt": dt_eff, "n_steps": n_steps, "tau": data.tau,
        "t_window": t_window, "integrator": "rk4-classical",
        "cfl": None if dt is not None else cfl,
    }
    u_fn = SpacetimeFunction(rows_u, t_window[0], dt_eff, st)
    v_fn = SpacetimeFunction(rows_v, t_window[0], dt_eff, st)
    return SpacetimeSolution(u_fn, v_fn, meta)


# --- verification suite -------------------------------------------------------


def finite_propagation_check(sol, K, threshold):
    """Max |u| outside the coordinate-causal expansion of K (plus one cell).

    The expansion radius integrates the slicewise maximal light speed from
    the data time.
    """
    st = sol.spacetime
    ts = sol.times()
    tau = sol.meta["tau"]
    k_lo, k_hi = K
    smax = np.array([float(np.max(st.speed(t, st.x))) for t in ts])
    radius = np.empty(len(ts))
    i_tau = int(round((tau - ts[0]) / sol.u.dt))
    radius[i_tau] = 0.0
    for i in range(i_tau + 1, len(ts)):
        radius[i] = radius[i - 1] + 0.5 * (smax[i - 1] + smax[i]) * sol.u.dt
    for i in range(i_tau - 1, -1, -1):
        radius[i] = radius[i + 1] + 0.5 * (smax[i + 1] + smax[i]) * sol.u.dt

    worst = 0.0
    worst_t = ts[0]
    for i, t in enumerate(ts):
        lo = k_lo - radius[i] - st.dx
        hi = k_hi + radius[i] + st.dx
        outside = (st.x < lo) | (st.x > hi)
        if np.any(outside):
            leak = float(np.max(np.abs(sol.u.values[i][outside])))
            if leak > worst:
                worst, worst_t = leak, t
    return {
        "max_leakage": worst,
        "worst_time": float(worst_t),
        "threshold": float(threshold),
        "passes": worst <= threshold,
    }


def _h1_mode_perturbation(st, m, mode=1):
    """Single Fourier mode, H^1-normalized, in the first component."""
    xi = 2 * np.pi * mode / st.L_ref
    vals = np.zeros((st.N, m), dtype=complex)
    vals[:, 0] = np.exp(1j * xi * (st.x - st.topology.x_min))
    g = GridFunction(vals, st.L_ref)
    return g * (1.0 / sobolev_norm(g, 1.0))


def uniqueness_probe(op, st, data, source=None, delta=0.0, mode=1,
                     solve_kwargs=None):
    """Determinism at delta = 0; perturbation response for delta > 0."""
    kw = dict(solve_kwargs or {})
    base = solve_cauchy(op, st, data, source, **kw)
    if delta == 0.0:
        again = solve_cauchy(op, st, data, source, **kw)
        return {
            "delta": 0.0,
            "bitwise_equal": bool(
                np.array_equal(base.u.values, again.u.values)
                and np.array_equal(base.v.values, again.v.values)),
        }
    pert = _h1_mode_perturbation(st, data.u0.m, mode)
    data2 = CauchyData(data.tau, data.u0 + delta * pert, data.u1)
    other = solve_cauchy(op, st, data2, source, **kw)
    sup = 0.0
    for i, t in enumerate(base.times()):
        du = base.u.slice_at(i) - other.u.slice_at(i)
        dv = base.v.slice_at(i) - other.v.slice_at(i)
        sup = max(sup, math.sqrt(energy_k(du, dv, st, t, 1.0).value))
    return {"delta": delta, "sup_sqrt_E1": sup, "ratio": sup / delta}


def perturbation_slope(op, st, data, deltas, source=None, solve_kwargs=None):
    """Log-log slope of the perturbation response across deltas."""
    sups = [uniqueness_probe(op, st, data, source, d,
                             solve_kwargs=solve_kwargs)["sup_sqrt_E1"]
            for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(sups), 1)[0]
    return {"deltas": list(deltas), "responses": sups, "slope": float(slope)}


def convergence_study(build, resolutions, dt, reference, error_time=None,
                      temporal_dts=None, temporal_N=None):
    """Richardson-style convergence report.

    build(N) -> (op, st, data, source); reference(t, x) is the exact
    solution.  Spatial part: fixed (tiny) dt across the given resolutions.
    Temporal part: fixed resolution across the given dts; order estimated
    from closed-form errors at the final time.
    """
    report = {}
    if resolutions:
        errs = []
        for N in resolutions:
            op, st, data, source = build(N)
            sol = solve_cauchy(op, st, data, source, dt=dt)
            t_star = error_time if error_time is not None else st.t_range[1]
            exact = reference(t_star, st.x)
            got = sol.u.eval_slice(t_star)[:, 0]
            errs.append(float(np.max(np.abs(got - np.asarray(exact)))))
        ratios = [errs[i] / max(errs[i + 1], 1e-300)
                  for i in range(len(errs) - 1)]
        report["spatial"] = {"N": list(resolutions), "errors": errs,
                             "ratios": ratios}
    if temporal_dts:
        errs = []
        for dt_k in temporal_dts:
            op, st, data, source = build(temporal_N)
            sol = solve_cauchy(op, st, data, source, dt=dt_k)
            t_star = error_time if error_time is not None else st.t_range[1]
            exact = reference(t_star, st.x)
            got = sol.u.eval_slice(t_star)[:, 0]
            errs.append(float(np.max(np.abs(got - np.asarray(exact)))))
        orders = [math.log2(errs[i] / errs[i + 1])
                  for i in range(len(errs) - 1)]
        report["temporal"] = {
            "dts": list(temporal_dts), "errors": errs, "orders": orders,
            "observed_order": float(np.mean(orders)),
        }
    return report


# --- Lorentz reslicing --------------------------------------------------------

_BOOST_LIMIT = 0.6


def _require_boost_invariant(op):
    if not (op.tag == "dalembert" or op.tag.startswith("klein_gordon")):
        raise ValueError(
            f"boost reslicing needs a boost-invariant preset, got {op.tag!r}")


def boost_reslice_check(sol, velocity, tau_prime, compare_time,
                        box=None, N_B=None, cfl_B=None, dt_B=None,
                        reference=None, validity_radius=None):
    """Re-solve from a boosted slice of a flat-box solution and compare.

    sol must come from a dalembert/klein_gordon preset on a Minkowski line
    box.  tau_prime is the slice intercept {t = tau_prime + velocity x};
    compare_time an original-frame time to compare on.  box = (X, G) sizes
    the boosted-frame spacetime.  reference(t, x), when given, is a closed
    form valid for |x| + speed*|t| inside validity_radius; both runs are
    compared against it there.
    """
    st = sol.spacetime
    op = sol.meta["op"]
    _require_boost_invariant(op)
    if st.is_circle:
        raise ValueError("boost reslicing needs line topology")
    if not (st.beta.is_constant() and st.beta.constant_value() == 1.0
            and st.a.is_constant() and st.a.constant_value() == 1.0):
        raise ValueError("boost reslicing is defined on the Minkowski box")
    w = float(velocity)
    if abs(w) > _BOOST_LIMIT:
        raise SliceNotSpacelike(
            f"|velocity| = {abs(w):g} outside the allowed range "
            f"(0, {_BOOST_LIMIT}]")
    gam = 1.0 / math.sqrt(1.0 - w * w)

    data = sol.meta["data"]
    r0 = max(_support_radius(data.u0.values, st.x),
             _support_radius(data.u1.values, st.x))
    tau = sol.meta["tau"]

    def support_bound(t):
        return r0 + abs(t - tau) + 2 * st.dx

    # boosted-frame spacetime; the window covers the boosted images of the
    # whole comparison slice, below and above the data slice, on a grid
    # whose rows contain the data time exactly
    t_tilde0 = gam * tau_prime
    if box is None:
        box = (st.topology.X, st.topology.G)
    X_B, G_B = box
    n_b = N_B or st.N
    dx_B = 2.0 * X_B / n_b
    if dt_B is None:
        dt_B = (cfl_B or sol.meta.get("cfl") or 0.5) * dx_B
    pad = 4 * dt_B
    down = max(0.0, t_tilde0 - (gam * (compare_time - abs(w) * st.topology.X)
                                - pad))
    up = max(2 * dt_B,
             gam * (compare_time + abs(w) * st.topology.X) + pad - t_tilde0)
    k_dn = int(math.ceil(down / dt_B))
    k_up = int(math.ceil(up / dt_B))
    t_lo_B = t_tilde0 - k_dn * dt_B
    t_hi_B = t_tilde0 + k_up * dt_B
    st_B = Spacetime1D(
        st.topology.__class__(X_B, G_B), (t_lo_B, t_hi_B),
        "1", "1", n_b, guard_travel_check=False)

    # data on the boosted slice, read off run A
    u0t = np.zeros((st_B.N, data.u0.m), dtype=complex)
    v0t = np.zeros_like(u0t)
    t_lo, t_hi = sol.u.t0, sol.u.t1
    for j, xt in enumerate(st_B.x):
        t_e = gam * (t_tilde0 + w * xt)
        x_e = gam * (xt + w * t_tilde0)
        if t_lo - 1e-12 <= t_e <= t_hi + 1e-12:
            if abs(x_e) > st.topology.X:
                if abs(x_e) <= support_bound(t_e):
                    raise SupportEscapesBox(
                        "boosted slice meets support outside the box")
                continue
            u0t[j] = sol.eval_u(t_e, x_e)
            v = sol.eval_v(t_e, x_e)
            ux = sol.eval_dxu(t_e, x_e)
            v0t[j] = gam * (v + w * ux)
        elif abs(x_e) <= support_bound(t_e):
            raise SupportEscapesBox(
                f"boosted slice exits the solved window inside the support "
                f"cone at x_tilde = {xt:g}")
    data_B = CauchyData(t_tilde0,
                        GridFunction(u0t, st_B.L_ref),
                        GridFunction(v0t, st_B.L_ref))
    sol_B = solve_cauchy(op, st_B, data_B, dt=dt_B, check_guard=False)

    # compare at an original-frame time slice
    t_star = compare_time
    du = np.zeros((st.N, data.u0.m), dtype=complex)
    dv = np.zeros_like(du)
    uA = sol.u.eval_slice(t_star)
    vA = sol.v.eval_slice(t_star)
    max_ref_err = 0.0
    for j, xj in enumerate(st.x):
        tt = gam * (t_star - w * xj)
        xt = gam * (xj - w * t_star)
        if not (sol_B.u.t0 - 1e-12 <= tt <= sol_B.u.t1 + 1e-12) or \
                abs(xt) > X_B:
            if abs(xj) <= support_bound(t_star):
                raise SupportEscapesBox(
                    "comparison point inside the support cone is not covered "
                    "by the boosted run")
            continue
        uB = sol_B.eval_u(tt, xt)
        vB = sol_B.eval_v(tt, xt)
        uBx = sol_B.eval_dxu(tt, xt)
        du[j] = uA[j] - uB
        dv[j] = vA[j] - gam * (vB - w * uBx)
        if reference is not None and validity_radius is not None:
            if abs(xj) + abs(t_star - tau) <= validity_radius:
                ref = reference(t_star, xj)
                max_ref_err = max(max_ref_err,
                                  float(np.max(np.abs(uA[j] - ref))),
                                  float(np.max(np.abs(uB - ref))))

    gu = GridFunction(du, st.L_ref)
    gv = GridFunction(dv, st.L_ref)
    e1 = energy_k(gu, gv, st, t_star, 1.0).value
    return {
        "velocity": w,
        "compare_time": t_star,
        "max_pointwise": float(np.max(np.abs(du))),
        "E1_discrepancy": float(e1),
        "max_reference_error": max_ref_err,
        "boosted_solution": sol_B,
    }
