import numpy as np
import pytest

from vortexwave import vortex_wave as vw
from vortexwave.biot_savart import free_space_velocity, masked_point_vortex
from vortexwave.fields import Grid2D, ScalarField, lp_norm, spectral_gradient


def annulus(grid, center, r_in=1.0, r_out=2.0, A=1.0):
    r = grid.radius(center)
    out = np.zeros(grid.shape)
    inside = (r > r_in) & (r < r_out)
    u = (r[inside] - r_in) / (r_out - r_in)
    out[inside] = A * np.exp(-1.0 / (u * (1.0 - u)))
    return ScalarField(grid, out)


def stable_dt(s, cfl=0.25):
    g = s.omegaE.grid
    v = free_space_velocity(s.omegaE)
    H = masked_point_vortex(g, s.z, vw.default_r_mask(g))
    return cfl * g.h / vw.advecting_speed(s.omegaE, v.u1 + H.u1, v.u2 + H.u2)


def test_zero_vorticity_keeps_vortex_fixed():
    g = Grid2D(8.0, 64)
    s = vw.VWState(0.0, (0.3, -0.2), ScalarField.zeros(g))
    for _ in range(5):
        s = vw.vw_step(s, 0.05)
    assert np.array_equal(s.z, [0.3, -0.2])
    assert np.all(s.omegaE.values == 0)


def test_vortex_orbits_radial_vorticity():
    # The point vortex and the radial vorticity orbit their common centre of
    # vorticity at angular rate (m + 1) / (2 pi d^2), d the separation.
    g = Grid2D(6.0, 256)
    m = 50.0
    om = vw.initial_vorticity(g, 1.0, 0.6, (0.0, 0.0))
    om = om.scaled(m / om.integral())
    z0 = np.array([2.0, 0.0])
    s = vw.VWState(0.0, z0, om)
    X = z0 / (m + 1)
    R = 2.0 * m / (m + 1)
    dt = stable_dt(s)
    drift = 0.0
    for _ in range(40):
        s = vw.vw_step(s, dt)
        drift = max(drift, abs(np.hypot(*(s.z - X)) - R))
    Om = (m + 1) / (2 * np.pi * 4.0)
    angle = -np.arctan2(s.z[1] - X[1], s.z[0] - X[0])
    assert drift < 1e-5
    assert angle == pytest.approx(Om * s.t, rel=1e-4)


def test_initial_vortex_velocity_closed_form():
    g = Grid2D(6.0, 256)
    om = vw.initial_vorticity(g, 1.0, 0.6, (0.0, 0.0))
    m = om.integral()
    from vortexwave.fields import sample_vector

    v = sample_vector(free_space_velocity(om), (2.0, 0.0))
    assert v[0] == pytest.approx(0.0, abs=1e-12)
    assert v[1] == pytest.approx(-m / (2 * np.pi * 2.0), rel=1e-8)


def test_annulus_about_vortex_is_steady():
    g = Grid2D(8.0, 256)
    z0 = (0.0, 0.0)
    om = vw.band_limit(annulus(g, z0))
    s = vw.VWState(0.0, z0, om)
    dt = stable_dt(s)
    n = 20
    for _ in range(n):
        s = vw.vw_step(s, dt)
    drift = np.sqrt(np.sum((s.omegaE.values - om.values) ** 2) * g.cell_area)
    assert drift / (n * dt) < 1e-8
    assert np.abs(s.z).max() < 1e-12


def test_support_distance_examples():
    g = Grid2D(8.0, 64)
    assert vw.support_distance(ScalarField.zeros(g), (0, 0)) == np.inf
    f = np.zeros(g.shape)
    i = np.argmin(np.abs(g.axis(0) - 3.0))
    j = np.argmin(np.abs(g.axis(1)))
    f[i, j] = 1.0
    assert vw.support_distance(ScalarField(g, f), (0, 0)) == pytest.approx(3.0, abs=g.h)
    ring = ScalarField(g, ((g.radius() >= 1.0) & (g.radius() <= 2.0)).astype(float))
    assert vw.support_distance(ring, (0, 0)) == pytest.approx(1.0, abs=g.h)
    s = vw.VWState(0.0, (0.0, 0.0), ring)
    assert vw.support_distance(s) == vw.support_distance(ring, (0, 0))


def test_vortex_meets_support():
    g = Grid2D(8.0, 64)
    s = vw.VWState(0.0, (1.0, 0.0), vw.bump_vorticity(g, 1.0, 1.0, (1.5, 0.0)))
    with pytest.raises(vw.VortexMeetsSupportError):
        vw.vw_step(s, 1e-3)


@pytest.fixture(scope="module")
def default_run():
    g = Grid2D(16.0, 512)
    s0 = vw.VWState(0.0, (0.0, 0.0), vw.initial_vorticity(g))
    dt = 0.02
    return vw.vw_run(s0, 20 * dt, dt, n_snap=4)


def test_lp_conservation(default_run):
    first, last = default_run.states[0], default_run.states[-1]
    T = last.t - first.t
    for p in (1.0, 4.0 / 3.0, 4.0):
        a, b = lp_norm(first.omegaE, p), lp_norm(last.omegaE, p)
        assert abs(b - a) / a / T < 1e-6
    assert abs(last.omegaE.integral() - first.omegaE.integral()) < 1e-12


def test_norm_proxy_bounded(default_run):
    def grad_l4(f):
        gr = spectral_gradient(f)
        return lp_norm(ScalarField(f.grid, np.hypot(gr.u1, gr.u2)), 4)

    a, b = default_run.states[0].omegaE, default_run.states[-1].omegaE
    assert lp_norm(b, 4) <= 4 * lp_norm(a, 4)
    assert grad_l4(b) <= 4 * grad_l4(a)


def test_records_and_schedule(default_run):
    assert len(default_run.states) == 5
    t = default_run.times
    assert np.allclose(np.diff(t), t[1] - t[0], rtol=0, atol=1e-14)
    rec = default_run.records[-1]
    assert set(rec) >= {"t", "z1", "z2", "support_distance", "L1", "L4/3", "L4"}
    assert rec["support_distance"] > 1.0


def test_mask_independence():
    g = Grid2D(8.0, 256)
    s0 = vw.VWState(0.0, (0.0, 0.0), vw.initial_vorticity(g, 1.0, 0.8, (1.8, 0.0)))
    r = 4 * g.h
    gr = spectral_gradient(s0.omegaE)
    gmag = np.hypot(gr.u1, gr.u2)
    assert gmag[g.radius(s0.z) < r].max() < 1e-8 * gmag.max()
    dt = stable_dt(s0)
    a, b = s0, s0
    for _ in range(10):
        a = vw.vw_step(a, dt, r_mask=r)
        b = vw.vw_step(b, dt, r_mask=r / 2)
    assert np.abs(a.z - b.z).max() < 1e-10
    assert np.abs(a.omegaE.values - b.omegaE.values).max() < 1e-10 * np.abs(a.omegaE.values).max()


def test_zero_length_run():
    g = Grid2D(8.0, 64)
    s0 = vw.VWState(0.5, (0.0, 0.0), vw.initial_vorticity(g, 1.0, 1.0, (2.0, 0.0), 0.15))
    traj = vw.vw_run(s0, 0.5, 0.01)
    assert len(traj.states) == 1 and traj.states[0] is s0
    with pytest.raises(ValueError):
        vw.vw_run(s0, 0.4, 0.01)


def test_step_schedule_lands_on_snapshots():
    n, per, dt = vw.step_schedule(0.0, 1.0, 0.03, 10)
    assert n == per * 10 and dt <= 0.03 and n * dt == pytest.approx(1.0)
