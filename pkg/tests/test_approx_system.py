import numpy as np
import pytest

from vortexwave import approx_system as avw
from vortexwave import vortex_wave as vw
from vortexwave.biot_savart import free_space_velocity
from vortexwave.fields import Grid2D, ScalarField, lp_norm, spectral_gradient
from vortexwave.oseen_ops import oseen_vG

T0 = 1e-4


@pytest.fixture(scope="module")
def grid():
    return Grid2D(8.0, 256)


@pytest.fixture(scope="module")
def base(grid):
    return vw.VWState(T0, (0.0, 0.0), vw.initial_vorticity(grid, 1.0, 0.8, (2.0, 0.0)))


def advance(s, n=10, dt=0.02):
    out = [s]
    for _ in range(n):
        s = avw.avw_step(s, dt)
        out.append(s)
    return out


def test_zero_viscosity_tracks_vortex_bitwise(base):
    s = avw.avw_init(base, 0.0)
    for s in advance(s, 5):
        assert np.array_equal(s.ztilde, s.base.z)
    assert not np.array_equal(s.base.z, base.z)


def test_zero_regular_vorticity(grid):
    b = vw.VWState(T0, (0.5, 0.0), ScalarField.zeros(grid))
    s = avw.avw_init(b, 1e-3)
    for s in advance(s, 3):
        assert np.all(s.w1a.values == 0)
        assert np.array_equal(s.ztilde, [0.5, 0.0])


def test_tilde_fields_identities(base, rng):
    g = base.omegaE.grid
    w1 = ScalarField(g, vw.band_limit(ScalarField(g, rng.standard_normal(g.shape)) ).values * (g.radius((2.0, 0)) < 1))
    vE = free_space_velocity(base.omegaE)
    om, v = avw.tilde_fields(avw.ApproxVWState(base, base.z, w1, 0.0))
    assert np.array_equal(om.values, base.omegaE.values)
    assert np.array_equal(v.u1, vE.u1) and np.array_equal(v.u2, vE.u2)
    om, v = avw.tilde_fields(avw.ApproxVWState(base, base.z, ScalarField.zeros(g), 1e-3))
    assert np.array_equal(om.values, base.omegaE.values)
    assert np.array_equal(v.u1, vE.u1)
    nu = 1e-3
    o1, v1 = avw.tilde_fields(avw.ApproxVWState(base, base.z, w1, nu))
    o2, v2 = avw.tilde_fields(avw.ApproxVWState(base, base.z, w1, 2 * nu))
    vw1 = free_space_velocity(w1, check=False)
    assert np.allclose(o2.values - o1.values, nu * w1.values, rtol=0, atol=1e-15)
    assert np.allclose(v2.u1 - v1.u1, nu * vw1.u1, rtol=0, atol=1e-14)
    assert np.allclose(v2.u2 - v1.u2, nu * vw1.u2, rtol=0, atol=1e-14)


def test_oseen_coefficient_matches_profile(grid):
    nu, t = 1e-3, 0.2
    s = np.sqrt(nu * t)
    z = np.array([0.1, -0.2])
    v = avw.oseen_coefficient(grid, z, nu, t, 4 * grid.h)
    x1, x2 = grid.mesh()
    far = grid.radius(z) > 8 * grid.h
    ref = oseen_vG(np.stack([(x1[far] - z[0]) / s, (x2[far] - z[1]) / s], axis=-1))
    ref1, ref2 = ref[..., 0], ref[..., 1]
    assert np.allclose(v.u1[far], ref1 / s, rtol=1e-12, atol=1e-15)
    assert np.allclose(v.u2[far], ref2 / s, rtol=1e-12, atol=1e-15)


@pytest.fixture(scope="module")
def runs(base):
    return {nu: advance(avw.avw_init(base, nu), 10) for nu in (4e-3, 5e-4)}


def test_initial_corrector(base):
    s = avw.avw_init(base, 1e-3)
    assert np.array_equal(s.ztilde, base.z)
    assert lp_norm(s.w1a, 4) < 1e-3


def test_support_confinement(runs):
    for traj in runs.values():
        for s in traj:
            union = s.union_support
            halo = union.copy()
            for ax in (0, 1):
                for sh in (1, -1):
                    halo |= np.roll(union, sh, axis=ax)
            halo |= np.roll(np.roll(union, 1, 0), 1, 1) | np.roll(np.roll(union, -1, 0), -1, 1)
            halo |= np.roll(np.roll(union, 1, 0), -1, 1) | np.roll(np.roll(union, -1, 0), 1, 1)
            area = s.w1a.grid.cell_area
            assert avw.support_measure(s.w1a) <= halo.sum() * area


def test_oseen_coefficient_bound(runs):
    for traj in runs.values():
        for s in traj[1:]:
            assert avw.vG_bound_ratio(s) <= 1.0 + 1e-12


def test_corrector_bound_uniform_in_nu(runs):
    def size(s):
        g = spectral_gradient(s.w1a)
        return lp_norm(s.w1a, 4) + lp_norm(ScalarField(s.w1a.grid, np.hypot(g.u1, g.u2)), 4)

    a = max(size(s) for s in runs[4e-3])
    b = max(size(s) for s in runs[5e-4])
    assert max(a, b) / min(a, b) < 2.0


def test_vortex_shift_scales_with_nu(runs):
    sups = []
    for nu, traj in runs.items():
        sups.append(max(np.hypot(*(s.ztilde - s.base.z)) / (nu * s.t) for s in traj[1:]))
    assert np.all(np.isfinite(sups))
    assert max(sups) / min(sups) < 2.0


def test_records(runs):
    rec = avw.avw_record(runs[4e-3][-1])
    assert set(rec) >= {"t", "dz", "dz_over_nut", "w1a_L4", "support_measure"}
    assert rec["dz_over_nut"] > 0


def test_corrector_needs_positive_time(grid):
    b = vw.VWState(0.0, (0.0, 0.0), vw.initial_vorticity(grid, 1.0, 0.8, (2.0, 0.0)))
    with pytest.raises(ValueError):
        avw.avw_step(avw.avw_init(b, 1e-3), 0.01)


def test_run_cadence(base):
    traj = avw.avw_run(avw.avw_init(base, 1e-3), T0 + 0.1, 0.02, n_snap=2, keep_states=False)
    assert len(traj.records) == 3 and traj.states[1:] == [None, None]
    assert traj.records[-1]["t"] == pytest.approx(T0 + 0.1, abs=1e-14)
