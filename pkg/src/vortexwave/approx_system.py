"""Approximate viscous vortex-wave system: the first-order corrector ``w1a``
of the regular part and the shifted vortex ``ztilde``.

``w1a`` is transported by ``v_E`` plus the Oseen velocity of width
``sqrt(nu t)`` around ``z``, reacts to ``omega_E`` through its own velocity
and is forced by ``Lap omega_E``; ``ztilde`` moves with the velocity of
``omega_E + nu w1a``. The base vortex-wave state is advanced in the same
tableau so that at nu = 0 the two vortex paths coincide bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .biot_savart import free_space_velocity, mask_factor, masked_point_vortex
from .fields import Grid2D, ScalarField, VectorField, irfft2, lp_norm, rfft2, sample_vector, spectral_gradient, spectral_laplacian
from .transport import CFLError, NonFiniteError, advection_hat, check_cfl, lawson_rk4, support_mask
from .vortex_wave import (DEFAULT_EPS_SUPP, Trajectory, VortexMeetsSupportError, VWState, advecting_speed,
                          default_r_mask, step_schedule, support_distance)


@dataclass
class ApproxVWState:
    base: VWState
    ztilde: np.ndarray
    w1a: ScalarField
    nu: float
    union_support: np.ndarray | None = None

    def __post_init__(self):
        self.ztilde = np.asarray(self.ztilde, dtype=float).reshape(2)

    @property
    def t(self) -> float:
        return self.base.t


def oseen_coefficient(grid: Grid2D, z, nu: float, t: float, r_mask: float) -> VectorField:
    """``(1/s) v^G((x - z)/s)``, i.e. ``K(x - z)(1 - e^{-|x-z|^2/(4 nu t)})``, capped inside ``r_mask``."""
    x1, x2 = grid.mesh()
    d1, d2 = x1 - z[0], x2 - z[1]
    r2 = d1 * d1 + d2 * d2
    with np.errstate(invalid="ignore", divide="ignore"):
        if nu * t > 0:
            prof = -np.expm1(-r2 / (4.0 * nu * t))
        else:
            prof = np.ones_like(r2)
        c = np.where(r2 > 0, prof * mask_factor(np.sqrt(r2), r_mask) / (2 * np.pi * r2), 0.0)
    return VectorField(grid, c * d2, -c * d1)


def tilde_fields(s: ApproxVWState) -> tuple[ScalarField, VectorField]:
    om = s.base.omegaE.values + s.nu * s.w1a.values
    tw = ScalarField(s.base.omegaE.grid, om)
    return tw, free_space_velocity(tw)


def _source_support(omegaE: ScalarField, eps_supp: float) -> np.ndarray:
    """Cells where ``omega_E`` or its Laplacian (the corrector's source) is above threshold.

    Both vanish off the same set in exact arithmetic; on the grid the two
    relative thresholds cut a smooth tail at slightly different radii.
    """
    return support_mask(omegaE.values, eps_supp) | support_mask(spectral_laplacian(omegaE).values, eps_supp)


def avw_init(base: VWState, nu: float, eps_supp: float = DEFAULT_EPS_SUPP) -> ApproxVWState:
    """``w1a(t0) = t0 Lap omega_E(t0)``: one explicit Euler step from ``w1a(0) = 0``."""
    t0 = base.t
    lap = spectral_laplacian(base.omegaE)
    w1a = ScalarField(base.omegaE.grid, t0 * lap.values)
    union = _source_support(base.omegaE, eps_supp)
    return ApproxVWState(base, base.z.copy(), w1a, nu, union)


def _rhs(grid: Grid2D, nu: float, t_of_stage, r_mask: float):
    def rhs(hats, points):
        om = irfft2(hats[0], grid.shape)
        w1 = irfft2(hats[1], grid.shape)
        z, zt = points[0], points[1]
        t = t_of_stage(points[2][0])
        omf = ScalarField(grid, om)
        vE = free_space_velocity(omf)
        H = masked_point_vortex(grid, z, r_mask)
        dom = advection_hat(grid, om, vE.u1 + H.u1, vE.u2 + H.u2)
        w1f = ScalarField(grid, w1)
        v1 = free_space_velocity(w1f)
        vg = oseen_coefficient(grid, z, nu, t, r_mask)
        k1, k2 = grid.wavenumbers()
        dw1 = (advection_hat(grid, w1, vE.u1 + vg.u1, vE.u2 + vg.u2)
               + advection_hat(grid, om, v1.u1, v1.u2)
               - (k1 * k1 + k2 * k2) * hats[0])
        if nu == 0.0:
            vt = vE
        else:
            vt = free_space_velocity(ScalarField(grid, om + nu * w1))
        return [dom, dw1], [sample_vector(vE, z), sample_vector(vt, zt), np.ones(1)]

    return rhs


def avw_step(s: ApproxVWState, dt: float, r_mask: float | None = None, cfl: float = 0.5,
             eps_supp: float = DEFAULT_EPS_SUPP) -> ApproxVWState:
    grid = s.base.omegaE.grid
    r_mask = default_r_mask(grid) if r_mask is None else r_mask
    if not s.t > 0:
        raise ValueError("the corrector needs t > 0")
    for name, f in (("omega_E", s.base.omegaE), ("w1a", s.w1a)):
        d = support_distance(f, s.base.z, eps_supp)
        if d < 2.0 * r_mask:
            raise VortexMeetsSupportError(f"support of {name} at distance {d:.4g} from the vortex", s.t)
    vE = free_space_velocity(s.base.omegaE)
    H = masked_point_vortex(grid, s.base.z, r_mask)
    check_cfl(dt, grid.h, advecting_speed(s.base.omegaE, vE.u1 + H.u1, vE.u2 + H.u2, eps_supp), cfl, "omega_E")
    vg = oseen_coefficient(grid, s.base.z, s.nu, s.t, r_mask)
    check_cfl(dt, grid.h, advecting_speed(s.w1a, vE.u1 + vg.u1, vE.u2 + vg.u2, eps_supp), cfl, "w1a")
    rhs = _rhs(grid, s.nu, lambda t: t, r_mask)
    hats, pts = lawson_rk4(
        [rfft2(s.base.omegaE.values), rfft2(s.w1a.values)], [None, None],
        [s.base.z, s.ztilde, np.array([s.t])], rhs, dt,
    )
    om = ScalarField(grid, irfft2(hats[0], grid.shape))
    w1 = ScalarField(grid, irfft2(hats[1], grid.shape))
    union = s.union_support
    if union is not None:
        union = union | _source_support(om, eps_supp)
    return ApproxVWState(VWState(s.t + dt, pts[0], om), pts[1], w1, s.nu, union)


def support_measure(f: ScalarField, eps_supp: float = DEFAULT_EPS_SUPP) -> float:
    return float(support_mask(f.values, eps_supp).sum() * f.grid.cell_area)


def vG_bound_ratio(s: ApproxVWState, r_mask: float | None = None, eps_supp: float = DEFAULT_EPS_SUPP) -> float:
    """max over supp w1a of the Oseen coefficient, times ``2 pi d``; at most 1."""
    grid = s.w1a.grid
    r_mask = default_r_mask(grid) if r_mask is None else r_mask
    sel = support_mask(s.w1a.values, eps_supp)
    if not sel.any():
        return 0.0
    vg = oseen_coefficient(grid, s.base.z, s.nu, s.t, r_mask)
    d = support_distance(s.w1a, s.base.z, eps_supp)
    return float(np.sqrt(vg.u1[sel] ** 2 + vg.u2[sel] ** 2).max() * 2 * np.pi * d)


def avw_record(s: ApproxVWState, eps_supp: float = DEFAULT_EPS_SUPP) -> dict:
    dz = float(np.hypot(*(s.ztilde - s.base.z)))
    nt = s.nu * s.t
    g = spectral_gradient(s.w1a)
    return {
        "t": s.t,
        "z1": float(s.base.z[0]),
        "z2": float(s.base.z[1]),
        "zt1": float(s.ztilde[0]),
        "zt2": float(s.ztilde[1]),
        "dz": dz,
        "dz_over_nut": dz / nt if nt > 0 else 0.0,
        "w1a_L4": lp_norm(s.w1a, 4),
        "grad_w1a_L4": lp_norm(g, 4),
        "support_measure": support_measure(s.w1a, eps_supp),
    }


def avw_run(s0: ApproxVWState, T: float, dt: float, n_snap: int = 50, r_mask: float | None = None,
            cfl: float = 0.5, eps_supp: float = DEFAULT_EPS_SUPP, keep_states: bool = True) -> Trajectory:
    n_steps, per, dt = step_schedule(s0.t, T, dt, n_snap)
    traj = Trajectory([s0], [avw_record(s0, eps_supp)])
    s = s0
    t_start = s0.t
    for n in range(1, n_steps + 1):
        try:
            s = avw_step(s, dt, r_mask, cfl, eps_supp)
        except (CFLError, NonFiniteError) as exc:
            raise type(exc)(f"{exc} (t = {s.t:.6g})") from exc
        s.base = replace(s.base, t=t_start + n * dt)
        if n % per == 0:
            traj.states.append(s if keep_states else None)
            traj.records.append(avw_record(s, eps_supp))
    return traj
