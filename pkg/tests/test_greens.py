"""Null frames, the boundary density, and Green's formula residuals."""

import numpy as np
import pytest

from lorwave.geometry import LineTopology, Spacetime1D, lightlike_graph
from lorwave.greens import boundary_integral, green_residual, null_frame
from lorwave.operators import SpacetimeFunction, WaveOperatorSpec
from lorwave.profiles import plateau_window


def minkowski_cone(N=256, X=6.0, apex=(-0.8, 0.0), t_range=(-1.5, 5.4)):
    st = Spacetime1D(LineTopology(X, 2.0), t_range, "1", "1", N,
                     guard_travel_check=False)
    return st, lightlike_graph(st, apex, "future_cone")


def random_window_field(st, nt, seed, m=1, k_modes=3, om_max=2.0,
                        t_center=0.0, t_half=1.26, x_flat=1.2, x_supp=3.2):
    rng = np.random.default_rng(seed)
    ks = np.arange(-k_modes, k_modes + 1)
    c = rng.normal(size=(m, ks.size)) + 1j * rng.normal(size=(m, ks.size))
    c /= 1 + ks**2
    oms = rng.uniform(-om_max, om_max, size=(m, ks.size))

    def fn(t, x):
        wt = plateau_window((t - t_center) / t_half, 0.4, 1.0)
        wx = plateau_window(x, x_flat, x_supp)
        comps = []
        for i in range(m):
            acc = sum(cc * np.exp(1j * (kk * 2 * np.pi / st.L_ref) * x
                                  + 1j * om * t)
                      for kk, cc, om in zip(ks, c[i], oms[i]))
            comps.append(wt * wx * acc)
        return np.stack(comps, axis=-1)

    return SpacetimeFunction.from_callable(st, fn, nt, m=m)


# --- null frames ----------------------------------------------------------------

def test_minkowski_right_leg_frame():
    st, surf = minkowski_cone()
    fr = null_frame(st, surf)
    j = 3 * st.N // 4  # right leg
    np.testing.assert_allclose(fr.L[j], [1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(fr.Lcheck[j], [0.5, -0.5], atol=1e-10)
    assert fr.aL[j] == pytest.approx(1.0, abs=1e-10)
    j = st.N // 4  # left leg
    np.testing.assert_allclose(fr.L[j], [1.0, -1.0], atol=1e-10)
    assert fr.aL[j] == pytest.approx(1.0, abs=1e-10)


def test_frame_identities_flat():
    st, surf = minkowski_cone()
    fr = null_frame(st, surf)
    for ident in fr.identities():
        assert float(np.max(ident[~fr.kink_flags])) <= 1e-12


def test_frame_identities_curved():
    st = Spacetime1D(LineTopology(6.0, 2.0), (-1.0, 9.0),
                     "1 + 0.2*sin(x)", "1", 256, guard_travel_check=False)
    surf = lightlike_graph(st, (0.0, 0.0), "future_cone")
    fr = null_frame(st, surf)
    for ident in fr.identities():
        assert float(np.max(ident[~fr.kink_flags])) <= 1e-10


def test_rescaling_law():
    st, surf = minkowski_cone()
    fr = null_frame(st, surf)
    fr2 = fr.rescale(2.0)
    np.testing.assert_array_equal(fr2.L, 2.0 * fr.L)
    np.testing.assert_array_equal(fr2.aL, fr.aL / 2.0)


def test_future_directed():
    st, surf = minkowski_cone()
    fr = null_frame(st, surf)
    assert np.all(fr.L[:, 0] > 0)
    assert np.all(fr.Lcheck[:, 0] > 0)


# --- boundary integral ------------------------------------------------------------

@pytest.fixture(scope="module")
def flat_setup():
    st, surf = minkowski_cone()
    u = random_window_field(st, 769, seed=11)
    psi = random_window_field(st, 769, seed=22)
    return st, surf, u, psi


def test_boundary_integral_vanishing_trace(flat_setup):
    st, surf, _, psi = flat_setup
    # field supported strictly above the surface: u and D_L u vanish on it
    def fn(t, x):
        band = plateau_window((t - (np.abs(x - 0.0) - 0.8) - 2.6) / 0.9,
                              0.3, 1.0)
        return (band * plateau_window(x, 1.0, 2.8)).astype(complex)[..., None]
    u_above = SpacetimeFunction.from_callable(st, fn, 769)
    fr = null_frame(st, surf)
    val = boundary_integral(fr, surf, u_above, psi)
    assert abs(val) <= 1e-12


def test_boundary_integral_disjoint_supports(flat_setup):
    st, surf, u, _ = flat_setup
    psi_far = random_window_field(st, 769, seed=33, t_center=4.2, t_half=0.8)
    fr = null_frame(st, surf)
    assert abs(boundary_integral(fr, surf, u, psi_far)) <= 1e-12


@pytest.mark.parametrize("alpha", [-1.0, 2.0])
def test_boundary_integral_rescaling_invariance(flat_setup, alpha):
    st, surf, u, psi = flat_setup
    fr = null_frame(st, surf)
    base = boundary_integral(fr, surf, u, psi)
    scaled = boundary_integral(fr.rescale(alpha), surf, u, psi)
    assert scaled == pytest.approx(base, rel=1e-13)


# --- green_residual -----------------------------------------------------------------

def test_green_disjoint_supports(flat_setup):
    st, surf, u, _ = flat_setup
    psi_far = random_window_field(st, 769, seed=33, t_center=4.2, t_half=0.8)
    rep = green_residual(WaveOperatorSpec.dalembert(), st, surf, u, psi_far)
    assert abs(rep["lhs"]) <= 1e-10 and abs(rep["rhs"]) <= 1e-10


def test_green_flat_cone_accuracy_and_order():
    rels = {}
    for N, nt in ((128, 385), (256, 769), (512, 1537)):
        st, surf = minkowski_cone(N=N)
        u = random_window_field(st, nt, seed=11)
        psi = random_window_field(st, nt, seed=22)
        rep = green_residual(WaveOperatorSpec.dalembert(), st, surf, u, psi)
        rels[N] = rep["relative_residual"]
    assert rels[256] <= 1e-3
    order = np.log2(rels[128] / rels[256])
    assert order >= 2.0
    assert np.log2(rels[256] / rels[512]) >= 2.0


def test_green_variable_metric_rank_two():
    op = WaveOperatorSpec.custom(
        2,
        Z0=[["0.3*sin(x)", "0.1"], ["0", "0.2*cos(x)"]],
        Z1=None,
        C=[["1", "0.2"], ["0", "1.5"]],
        tag="rank2")
    rels = {}
    for N, nt in ((256, 769), (512, 1537)):
        st = Spacetime1D(LineTopology(6.0, 2.0), (-1.5, 6.6),
                         "1 + 0.2*sin(x)", "1", N, guard_travel_check=False)
        surf = lightlike_graph(st, (-0.8, 0.0), "future_cone")
        u = random_window_field(st, nt, seed=5, m=2)
        psi = random_window_field(st, nt, seed=6, m=2)
        rep = green_residual(op, st, surf, u, psi)
        rels[N] = rep["relative_residual"]
    assert rels[256] <= 1e-2
    assert rels[512] < rels[256]


def test_green_degenerate_surface_limit():
    # surface pushed below both supports: boundary side vanishes and the
    # bulk side becomes the global duality residual
    st = Spacetime1D(LineTopology(6.0, 2.0), (-5.2, 1.3), "1", "1", 256,
                     guard_travel_check=False)
    surf = lightlike_graph(st, (-5.0, 0.0), "future_cone")
    u = random_window_field(st, 769, seed=11)
    psi = random_window_field(st, 769, seed=22)
    rep = green_residual(WaveOperatorSpec.dalembert(), st, surf, u, psi)
    scale = max(np.max(np.abs(u.values)), np.max(np.abs(psi.values)))
    assert abs(rep["rhs"]) <= 1e-10
    assert abs(rep["lhs"]) <= 1e-5 * scale  # the global duality residual
