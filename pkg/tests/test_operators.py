"""Wave operator application, formal duals, principal symbol."""

import numpy as np
import pytest

from lorwave.geometry import CircleTopology, Spacetime1D
from lorwave.operators import (
    MatrixField,
    SpacetimeFunction,
    WaveOperatorSpec,
    apply_P,
    dual_operator,
    first_order_rhs,
    pairing_integral,
    principal_symbol_check,
)
from lorwave.sobolev import GridFunction

L = 2 * np.pi


def circle(N=64, t_range=(0.0, 5.0), beta="1", a="1"):
    return Spacetime1D(CircleTopology(L), t_range, beta, a, N)


# --- apply_P ------------------------------------------------------------------

def test_apply_p_standing_wave_residual():
    st = circle(N=64)
    w = SpacetimeFunction.from_callable(
        st, lambda t, x: np.cos(t) * np.cos(x), nt=257)
    res = apply_P(WaveOperatorSpec.dalembert(), st, w)
    assert float(np.max(np.abs(res.values))) <= 100 * w.dt**4


def test_apply_p_klein_gordon_dispersion():
    st = circle(N=64, t_range=(0.0, 2.0))
    mu = 1.0
    om = np.sqrt(1 + mu**2)
    w = SpacetimeFunction.from_callable(
        st, lambda t, x: np.exp(1j * om * t) * np.exp(1j * x), nt=257)
    res = apply_P(WaveOperatorSpec.klein_gordon(mu), st, w)
    assert float(np.max(np.abs(res.values))) <= 200 * w.dt**4


def test_apply_p_constant_hits_mass_term():
    st = circle(N=32, t_range=(0.0, 1.0))
    mu = 0.7
    w = SpacetimeFunction.from_callable(st, lambda t, x: np.ones_like(t), nt=33)
    res = apply_P(WaveOperatorSpec.klein_gordon(mu), st, w)
    np.testing.assert_allclose(res.values, mu**2, atol=1e-11)


# --- dual operator --------------------------------------------------------------

def _coeff_mesh(op, st, nt=7):
    ts = np.linspace(*st.t_range, nt)[:, None]
    xs = st.x[None, :]
    return (op.Z0.evaluate(ts, xs), op.Z1.evaluate(ts, xs),
            op.C.evaluate(ts, xs))


def test_dalembert_self_dual():
    st = circle(beta="1 + 0.3*sin(x)", a="1 + 0.1*cos(x)")
    op = WaveOperatorSpec.dalembert()
    for got, want in zip(_coeff_mesh(dual_operator(op, st), st),
                         _coeff_mesh(op, st)):
        np.testing.assert_allclose(got, want, atol=1e-14)


def test_klein_gordon_self_dual():
    st = circle()
    op = WaveOperatorSpec.klein_gordon(1.3)
    for got, want in zip(_coeff_mesh(dual_operator(op, st), st),
                         _coeff_mesh(op, st)):
        np.testing.assert_allclose(got, want, atol=1e-14)


def rank2_operator():
    return WaveOperatorSpec.custom(
        2,
        Z0=[["0.2*sin(x)", "0.1"], ["0", "0.3*cos(x)"]],
        Z1=[["0.1*cos(x)", "0"], [complex(0.0, 0.2), "0.1"]],
        C=[["1", "0.5*sin(x)"], ["0.2", "2"]],
        tag="rank2-static")


def test_dual_involution_exact():
    st = circle(beta="1 + 0.2*sin(x)", a="1")
    op = rank2_operator()
    ddop = dual_operator(dual_operator(op, st), st)
    for got, want in zip(_coeff_mesh(ddop, st), _coeff_mesh(op, st)):
        np.testing.assert_allclose(got, want, atol=1e-12)


def _random_band_limited(st, nt, t_range, seed, m, modes=4, omega_max=3):
    """Smooth random field, compact in t inside the sampled slab."""
    rng = np.random.default_rng(seed)
    ta, tb = t_range
    tc, th = 0.5 * (ta + tb), 0.45 * (tb - ta)

    ks = np.arange(-modes, modes + 1)
    cx = (rng.normal(size=(m, ks.size)) + 1j * rng.normal(size=(m, ks.size)))
    cx /= 1.0 + ks[None, :] ** 2
    omegas = rng.uniform(-omega_max, omega_max, size=(m, ks.size))

    def fn(t, x):
        z = (t - tc) / th
        window = np.where(np.abs(z) < 1, np.cos(np.pi * z / 2) ** 8, 0.0)
        comps = []
        for i in range(m):
            acc = np.zeros(np.broadcast(t, x).shape, dtype=complex)
            for k, c, om in zip(ks, cx[i], omegas[i]):
                acc += c * np.exp(1j * (k * 2 * np.pi / st.L_ref) * x
                                  + 1j * om * t)
            comps.append(window * acc)
        return np.stack(comps, axis=-1)

    return SpacetimeFunction.from_callable(st, fn, nt, t_range=t_range, m=m)


def test_duality_residual_static_coefficients():
    # static-in-t metric and coefficients: discrete summation by parts is
    # exact, so the residual probes only aliasing and roundoff
    st = Spacetime1D(CircleTopology(L), (0.0, 2.0),
                     "1 + 0.2*sin(x)", "1 + 0.1*cos(x)", 128)
    op = rank2_operator()
    dop = dual_operator(op, st)
    u = _random_band_limited(st, 257, st.t_range, seed=101, m=2)
    psi = _random_band_limited(st, 257, st.t_range, seed=202, m=2)
    lhs = pairing_integral(st, psi, apply_P(op, st, u))
    rhs = pairing_integral(st, apply_P(dop, st, psi), u)
    scale = abs(lhs) + abs(rhs) + 1.0
    assert abs(lhs - rhs) <= 1e-6 * scale


def test_duality_residual_fourth_order_refinement():
    # time-dependent coefficients: the residual is pure truncation error
    # and must shrink at 4th order under simultaneous refinement
    def setup(N, nt):
        st = Spacetime1D(CircleTopology(L), (0.0, 2.0),
                         "1 + 0.2*sin(x)*cos(t)", "1 + 0.1*cos(x+t)", N)
        op = WaveOperatorSpec.custom(
            1, Z0=[["0.3*cos(t)*sin(x)"]], Z1=[["0.2*sin(t)"]],
            C=[["1 + 0.5*cos(x)"]], tag="dynamic")
        dop = dual_operator(op, st)
        u = _random_band_limited(st, nt, st.t_range, seed=7, m=1)
        psi = _random_band_limited(st, nt, st.t_range, seed=8, m=1)
        lhs = pairing_integral(st, psi, apply_P(op, st, u))
        rhs = pairing_integral(st, apply_P(dop, st, psi), u)
        return abs(lhs - rhs)

    coarse = setup(64, 129)
    fine = setup(128, 257)
    assert fine <= coarse / 12.0  # ~16 for clean 4th order


# --- principal symbol ------------------------------------------------------------

@pytest.fixture(scope="module")
def flat_box():
    from lorwave.geometry import LineTopology
    return Spacetime1D(LineTopology(4.0, 1.2), (-0.5, 0.5), "1", "1", 64)


def test_symbol_null_covector(flat_box):
    rep = principal_symbol_check(WaveOperatorSpec.dalembert(), flat_box, (1.0, 1.0))
    assert abs(rep["limit"]) <= 5e-3
    assert rep["expected"] == 0


def test_symbol_timelike_covector(flat_box):
    rep = principal_symbol_check(WaveOperatorSpec.dalembert(), flat_box, (1.0, 0.0))
    assert rep["expected"] == pytest.approx(-1.0)
    assert abs(rep["limit"] - rep["expected"]) <= 5e-3


def test_symbol_speed_two_metric():
    from lorwave.geometry import LineTopology
    st = Spacetime1D(LineTopology(4.0, 1.2), (-0.5, 0.5), "4", "1", 64,
                     guard_travel_check=False)
    rep = principal_symbol_check(WaveOperatorSpec.dalembert(), st, (1.0, 1.0))
    assert rep["expected"] == pytest.approx(0.75)
    assert abs(rep["limit"] - rep["expected"]) <= 5e-3


# --- first_order_rhs ---------------------------------------------------------------

def test_rhs_laplacian_only():
    st = circle(N=64)
    op = WaveOperatorSpec.dalembert()
    u = GridFunction(np.cos(st.x), L)
    v = GridFunction.zeros(64, 1, L)
    du, dv = first_order_rhs(op, st, 0.0, u, v)
    np.testing.assert_allclose(du.values, 0.0, atol=1e-14)
    np.testing.assert_allclose(dv.values[:, 0], -np.cos(st.x), atol=1e-12)


def test_rhs_source_only():
    st = circle(N=64, beta="4")
    op = WaveOperatorSpec.dalembert()
    z = GridFunction.zeros(64, 1, L)
    g = GridFunction(np.sin(2 * st.x), L)
    _, dv = first_order_rhs(op, st, 0.0, z, z, g)
    np.testing.assert_allclose(dv.values, 4.0 * g.values, atol=1e-12)


def test_rhs_du_is_v():
    st = circle(N=32)
    op = WaveOperatorSpec.klein_gordon(2.0)
    u = GridFunction(np.cos(st.x), L)
    v = GridFunction(np.sin(st.x) + 2.0, L)
    du, _ = first_order_rhs(op, st, 1.0, u, v)
    np.testing.assert_allclose(du.values, v.values, atol=0)


def test_apply_p_linearity_exact():
    st = circle(N=32, t_range=(0.0, 1.0), beta="1 + 0.1*sin(x)")
    op = rank2_operator()
    u = _random_band_limited(st, 33, st.t_range, seed=1, m=2)
    w = _random_band_limited(st, 33, st.t_range, seed=2, m=2)
    lin = SpacetimeFunction(2.5 * u.values + w.values, u.t0, u.dt, st)
    left = apply_P(op, st, lin).values
    right = 2.5 * apply_P(op, st, u).values + apply_P(op, st, w).values
    np.testing.assert_allclose(left, right, atol=1e-12)
