"""Characteristic initial value problems and the uniqueness dichotomy."""

import math

import numpy as np
import pytest

from lorwave.errors import LiftTooWide
from lorwave.geometry import LineTopology, Spacetime1D, lightlike_graph
from lorwave.goursat import (
    CharacteristicTrace,
    GoursatParams,
    goursat_uniqueness_probe,
    region_l2_error,
    solve_goursat,
    trace_on_surface,
    traveling_wave_counterexample,
)
from lorwave.operators import SpacetimeFunction, WaveOperatorSpec
from lorwave.profiles import plateau_window, plateau_window_d2, power_bump
from lorwave.sobolev import GridFunction, l2_norm, sobolev_norm

OM = 1.3  # manufactured-solution frequency


def cone_box(N, X=6.0, G=2.0, t_range=(-2.2, 6.4)):
    st = Spacetime1D(LineTopology(X, G), t_range, "1", "1", N,
                     guard_travel_check=False)
    surf = lightlike_graph(st, (0.0, 0.0), "future_cone")
    return st, surf


def manufactured(st, surf, flat=0.8, supp=2.6):
    def W(x):
        return plateau_window(x, flat, supp)

    def Wpp(x):
        return plateau_window_d2(x, flat, supp)

    def U(t, x):
        return np.cos(OM * t) * W(x)

    def f(s):
        vals = -OM**2 * np.cos(OM * s) * W(st.x) - np.cos(OM * s) * Wpp(st.x)
        return vals[:, None].astype(complex)

    u0 = GridFunction(U(surf.sigma, st.x), st.L_ref)
    return CharacteristicTrace(surf, u0), f, U


# --- trace_on_surface ---------------------------------------------------------

def test_trace_of_linear_time_field():
    st, surf = cone_box(128)
    w = SpacetimeFunction.from_callable(st, lambda t, x: t + 0.0 * x, nt=65)
    tr = trace_on_surface(w, surf)
    np.testing.assert_allclose(tr.values.values[:, 0], np.abs(st.x),
                               atol=1e-12)


# --- solve_goursat -------------------------------------------------------------

def test_zero_problem_zero_solution():
    st, surf = cone_box(128)
    zero = GridFunction.zeros(st.N, 1, st.L_ref)
    rep = solve_goursat(WaveOperatorSpec.dalembert(), st,
                        CharacteristicTrace(surf, zero), t_top=2.0)
    assert rep.replay_error == 0.0
    assert np.max(np.abs(rep.solution.u.values)) == 0.0


def test_manufactured_solution_converges():
    op = WaveOperatorSpec.dalembert()
    errs, replays, defects = {}, {}, {}
    for N in (128, 256):
        st, surf = cone_box(N)
        trace, f, U = manufactured(st, surf)
        params = GoursatParams()
        rep = solve_goursat(op, st, trace, f, params, t_top=2.8)
        errs[N] = region_l2_error(rep.solution, U, surf,
                                  params.eps_moll(st.dx), t_top=2.8)
        replays[N] = rep.replay_error
        defects[N] = rep.collar_defect
    tol = 1e-3  # times ||u0||_{H^1}, checked against the coarser trace
    st, surf = cone_box(128)
    trace, _, _ = manufactured(st, surf)
    h1 = sobolev_norm(trace.values, 1.0)
    assert errs[256] <= 0.02
    assert errs[256] < errs[128]
    assert replays[256] <= tol * h1
    assert defects[256] < defects[128]


def test_round_trip_replay():
    st, surf = cone_box(256)
    trace, f, _ = manufactured(st, surf)
    rep = solve_goursat(WaveOperatorSpec.dalembert(), st, trace, f,
                        t_top=2.8)
    replay = trace_on_surface(rep.solution, surf, outside="zero")
    err = l2_norm(replay.values - trace.values)
    assert err <= 1e-3 * sobolev_norm(trace.values, 1.0)


def test_apex_symmetric_data_gives_symmetric_solution():
    st, surf = cone_box(128)
    u0 = GridFunction(power_bump(st.x / 1.5, 8), st.L_ref)
    rep = solve_goursat(WaveOperatorSpec.dalembert(), st,
                        CharacteristicTrace(surf, u0), t_top=2.0)
    vals = rep.solution.u.values[:, :, 0]
    mirrored = np.roll(vals[:, ::-1], 1, axis=1)  # x -> -x on the node ring
    scale = np.max(np.abs(vals))
    assert np.max(np.abs(vals - mirrored)) <= 1e-9 * scale


def test_linearity_in_data_and_source():
    op = WaveOperatorSpec.dalembert()
    st, surf = cone_box(128)
    trace, f, _ = manufactured(st, surf)
    zero = GridFunction.zeros(st.N, 1, st.L_ref)
    bump = GridFunction(0.3 * power_bump(st.x / 1.2, 8), st.L_ref)
    tr2 = CharacteristicTrace(surf, bump)
    alpha = 2.0
    combo = CharacteristicTrace(surf, alpha * trace.values + bump)

    def f_scaled(s):
        return alpha * f(s)

    r1 = solve_goursat(op, st, trace, f, t_top=2.8)
    r2 = solve_goursat(op, st, tr2, None, t_top=2.8)
    r12 = solve_goursat(op, st, combo, f_scaled, t_top=2.8)
    lhs = r12.solution.u.values
    rhs = alpha * r1.solution.u.values + r2.solution.u.values
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * np.max(np.abs(lhs))


def test_support_causality():
    from dataclasses import replace
    op = WaveOperatorSpec.dalembert()
    st, surf = cone_box(256)
    # data on the smooth cone legs, away from the apex (apex-crossing data
    # puts a genuine H^1 kink on the apex characteristics, which a
    # spectral solver rings on); C^15 profiles and a resolved gate layer
    # keep every feature below the 1e-9 leakage budget
    params = replace(GoursatParams(), eps_cells=20.0, delta0=2.0)
    u0 = GridFunction(power_bump((np.abs(st.x) - 1.1) / 0.7, 16), st.L_ref)
    rep = solve_goursat(op, st, CharacteristicTrace(surf, u0), None,
                        params, t_top=2.0)
    vals = np.abs(rep.solution.u.values[:, :, 0])
    ts = rep.solution.times()
    tau0 = ts[0]
    pad = params.delta_lift() + 3 * params.eps_moll(st.dx) + 2 * st.dx
    # outside the causal expansion of the data hull
    hull = 1.8
    outside = np.abs(st.x)[None, :] > hull + (ts[:, None] - tau0) + pad
    assert np.max(vals[outside]) <= 1e-9
    # below the surface minus the collar
    below = ts[:, None] < surf.sigma[None, :] - pad
    assert np.max(vals[below]) <= 1e-9


def test_lift_too_wide():
    st, surf = cone_box(128)
    trace, f, _ = manufactured(st, surf)
    with pytest.raises(LiftTooWide):
        solve_goursat(WaveOperatorSpec.dalembert(), st, trace, f,
                      GoursatParams(delta0=0.5, lift_fraction=1.1),
                      t_top=2.0)


# --- uniqueness probe ------------------------------------------------------------

def test_probe_identical_parameters_bitwise():
    st, surf = cone_box(128)
    trace, f, _ = manufactured(st, surf)
    rep = goursat_uniqueness_probe(WaveOperatorSpec.dalembert(), st, trace, f,
                                   params_a=GoursatParams(),
                                   params_b=GoursatParams(), t_top=2.8)
    assert rep["bitwise_equal"] is True


def test_probe_zero_data():
    st, surf = cone_box(128)
    zero = GridFunction.zeros(st.N, 1, st.L_ref)
    rep = goursat_uniqueness_probe(WaveOperatorSpec.dalembert(), st,
                                   CharacteristicTrace(surf, zero),
                                   t_top=2.0)
    assert rep["relative_discrepancy"] == 0.0


def test_probe_past_compact_discrepancy_small_and_decreasing():
    op = WaveOperatorSpec.dalembert()
    disc = {}
    for N in (128, 256):
        st, surf = cone_box(N)
        trace, f, _ = manufactured(st, surf)
        rep = goursat_uniqueness_probe(op, st, trace, f, t_top=2.8)
        assert rep["past_compact"] is True
        disc[N] = rep["relative_discrepancy"]
    assert disc[256] <= 5e-3
    assert disc[256] < disc[128]


# --- counterexample ---------------------------------------------------------------

@pytest.fixture(scope="module")
def counterexample():
    return traveling_wave_counterexample(N=704, nt=1793)


def test_counterexample_zero_trace_nonzero_future(counterexample):
    rep = counterexample
    assert rep["trace_sup"] <= 1e-12
    assert rep["future_sup"] == pytest.approx(rep["max_v"], rel=1e-12)
    assert rep["future_sup"] >= 0.9  # amplitude-one bump meets the future


def test_counterexample_residual(counterexample):
    # 4th-order differencing of v(t - x) with the shipped bump profile;
    # the one-sided stencils on the first/last rows carry a much larger
    # error constant
    assert counterexample["residual_interior"] <= 2e-5
    assert counterexample["residual_sup"] <= 1e-3


def test_counterexample_past_compact_flags(counterexample):
    flags = counterexample["past_compact"]
    assert flags["future_cone"] is True
    assert flags["past_cone"] is False
    assert flags["null_line"] is False


def test_counterexample_cone_meets_strip(counterexample):
    assert counterexample["cone_trace_sup"] >= 0.5
