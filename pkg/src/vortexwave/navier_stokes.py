"""Viscous two-component vorticity: a regular part on the physical grid and a
concentrated core carried in self-similar variables.

The core ``omega_B(x, t) = w2((x - c)/s) / s^2`` with ``s = sqrt(nu t)``
lives on a co-moving xi-grid, so its width never has to be resolved by the
physical grid. In ``tau = log t`` the profile obeys

    d_tau w2 = div(xi w2 / 2) + Lap w2 - div(v2 w2) / nu
               - sqrt(t / nu) div(dv_E w2),

where ``v2 = K * w2`` and ``dv_E(xi) = v_E(c + s xi) - v_E(c)``; the centre
moves with ``dc/dt = v_E(c)``. The regular part feels the core through its
multipole far field. All transport terms are fluxes, so both masses are
conserved to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .biot_savart import evaluate_local_expansion, free_space_velocity, local_expansion, multipole_velocity, plan_for
from .fields import Grid2D, ScalarField, flux_divergence_hat, irfft2, lp_norm, rfft2, sample, sample_vector
from .transport import CFLError, NonFiniteError, advection_hat, check_cfl, diffusion_factor, lawson_rk4
from .vortex_wave import DEFAULT_EPS_SUPP, Trajectory, advecting_speed, default_r_mask, step_schedule, support_distance

DEFAULT_CORE_GRID = Grid2D(32.0, 128, stagger=0.0)


class UnderResolvedError(ValueError):
    pass


class SupportOverlapError(ValueError):
    pass


@dataclass
class CoreField:
    """Self-similar profile ``w2`` of the concentrated part, centred at ``center``."""

    w2: ScalarField
    center: np.ndarray
    nu: float
    t: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.nu * self.t))

    def mass(self) -> float:
        return self.w2.integral()

    def moments(self, n: int) -> np.ndarray:
        """``int omega_B (y - c)^k dy`` for k < n (complex)."""
        g = self.w2.grid
        x1, x2 = g.mesh()
        X = self.scale * (x1 + 1j * x2)
        w = self.w2.values * g.cell_area
        out = np.empty(n, dtype=complex)
        p = np.ones_like(X)
        for k in range(n):
            out[k] = np.sum(w * p)
            p = p * X
        return out

    def l2_squared(self) -> float:
        """``||omega_B||_2^2`` (the Jacobian turns ``w2^2 dxi`` into ``/ (nu t)``)."""
        return float(np.sum(self.w2.values**2) * self.w2.grid.cell_area / (self.nu * self.t))

    def physical(self, grid: Grid2D) -> ScalarField:
        """Bicubic sample of ``omega_B`` on a physical grid (zero off the xi box)."""
        x1, x2 = grid.mesh()
        s = self.scale
        xi = np.stack([(x1 - self.center[0]) / s, (x2 - self.center[1]) / s], axis=-1)
        half = 0.5 * self.w2.grid.L
        inside = (np.abs(xi[..., 0]) < half - self.w2.grid.h) & (np.abs(xi[..., 1]) < half - self.w2.grid.h)
        out = np.zeros(grid.shape)
        if inside.any():
            out[inside] = sample(self.w2.values, self.w2.grid, xi[inside]) / s**2
        return ScalarField(grid, out)


@dataclass
class NSState:
    t: float
    nu: float
    omegaE: ScalarField
    core: CoreField

    @property
    def omegaB(self) -> ScalarField:
        return self.core.physical(self.omegaE.grid)

    @property
    def center(self) -> np.ndarray:
        return self.core.center


@dataclass
class NSParams:
    cfl: float = 0.5
    core_cfl: float = 0.5
    r_mask: float | None = None
    n_multipole: int = 6
    n_local: int = 32
    eps_supp: float = DEFAULT_EPS_SUPP
    zero_velocity: bool = False  # test hook: pure heat flow


def ns_init(omega0E: ScalarField, z0, nu: float, t0: float, xi_grid: Grid2D = DEFAULT_CORE_GRID,
            rho0: float = 0.5) -> NSState:
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    # core spans sqrt(4 nu t0) = 2 s, i.e. 2 / h_xi cells
    if 2.0 / xi_grid.h < 4.0:
        raise UnderResolvedError(f"xi grid spacing {xi_grid.h} leaves fewer than 4 cells across the core")
    near = omega0E.grid.radius(z0) < rho0
    if np.any(np.abs(omega0E.values[near]) >= 1e-12):
        raise SupportOverlapError(f"regular vorticity does not vanish within {rho0} of the vortex")
    x1, x2 = xi_grid.mesh()
    G = np.exp(-0.25 * (x1 * x1 + x2 * x2)) / (4 * np.pi)
    core = CoreField(ScalarField(xi_grid, G), z0, nu, t0)
    return NSState(t0, nu, omega0E, core)


def _local_coeffs(omegaE: ScalarField, c, params: NSParams):
    d = support_distance(omegaE, c, params.eps_supp)
    if not np.isfinite(d):
        return np.zeros(params.n_local, dtype=complex), np.inf
    return local_expansion(omegaE, c, params.n_local, d), d


def _strain_velocity(coeffs, r_ok, s, xi_grid):
    """``v_E(c + s xi) - v_E(c)`` from local coefficients; zero beyond ``0.9 r_ok``."""
    x1, x2 = xi_grid.mesh()
    X = s * (x1 + 1j * x2)
    ok = np.abs(X) < 0.9 * r_ok
    ub = np.where(ok, evaluate_local_expansion(coeffs, np.where(ok, X, 0.0)) - coeffs[0], 0.0)
    return ub.real, -ub.imag


def _core_advance(core: CoreField, t1: float, coeffs0, coeffs1, r_ok: float, params: NSParams) -> CoreField:
    """Sub-cycle the core equation in ``tau = log t`` from ``core.t`` to ``t1``."""
    g = core.w2.grid
    nu = core.nu
    t0 = core.t
    x1, x2 = g.mesh()
    plan = plan_for(g, support_margin=0.0)

    def strain_at(t):
        if params.zero_velocity:
            return 0.0, 0.0
        lam = (t - t0) / (t1 - t0)
        coeffs = (1 - lam) * coeffs0 + lam * coeffs1
        return _strain_velocity(coeffs, r_ok, np.sqrt(nu * t), g)

    def rhs(hats, points):
        tau = points[0][0]
        t = np.exp(tau)
        w = irfft2(hats[0], g.shape)
        q1 = 0.5 * x1 * w
        q2 = 0.5 * x2 * w
        if not params.zero_velocity:
            v = plan.velocity(ScalarField(g, w), check=False)
            d1, d2 = strain_at(t)
            a = np.sqrt(t / nu)
            q1 = q1 - (v.u1 / nu + a * d1) * w
            q2 = q2 - (v.u2 / nu + a * d2) * w
        return [flux_divergence_hat(g, q1, q2)], [np.ones(1)]

    # step size from the fastest transport speed on the xi grid
    speed = 0.5 * 0.5 * g.L
    if not params.zero_velocity:
        v = plan.velocity(core.w2, check=False)
        speed += float(np.sqrt(v.u1**2 + v.u2**2).max()) / nu
        d1, d2 = strain_at(t1)
        sel = core.w2.values > 1e-12 * core.w2.values.max()
        if np.any(sel):
            speed += np.sqrt(t1 / nu) * float(np.sqrt(d1[sel] ** 2 + d2[sel] ** 2).max())
    dtau_max = params.core_cfl * g.h / speed
    span = np.log(t1 / t0)
    n_sub = max(1, int(np.ceil(span / dtau_max)))
    dtau = span / n_sub
    E = diffusion_factor(g, 1.0, dtau)
    hat = rfft2(core.w2.values)
    tau = np.array([np.log(t0)])
    for _ in range(n_sub):
        (hat,), (tau,) = lawson_rk4([hat], [E], [tau], rhs, dtau)
    return CoreField(ScalarField(g, irfft2(hat, g.shape)), core.center, nu, t1)


def ns_step(s: NSState, dt: float, params: NSParams | None = None) -> NSState:
    params = params or NSParams()
    grid = s.omegaE.grid
    r_mask = default_r_mask(grid) if params.r_mask is None else params.r_mask
    moments = s.core.moments(params.n_multipole)
    c0 = s.core.center.copy()

    def rhs(hats, points):
        c = points[0]
        if params.zero_velocity:
            return [np.zeros_like(hats[0])], [np.zeros(2)]
        om = ScalarField(grid, irfft2(hats[0], grid.shape))
        vE = free_space_velocity(om)
        far = multipole_velocity(grid, c, moments, r_mask)
        dom = advection_hat(grid, om.values, vE.u1 + far.u1, vE.u2 + far.u2)
        return [dom], [sample_vector(vE, c)]

    if not params.zero_velocity:
        vE = free_space_velocity(s.omegaE)
        far = multipole_velocity(grid, c0, moments, r_mask)
        speed = advecting_speed(s.omegaE, vE.u1 + far.u1, vE.u2 + far.u2, params.eps_supp)
        check_cfl(dt, grid.h, speed, params.cfl, "regular part")
    coeffs0, d0 = _local_coeffs(s.omegaE, c0, params)
    E = diffusion_factor(grid, s.nu, dt)
    (hat,), (c1,) = lawson_rk4([rfft2(s.omegaE.values)], [E], [c0], rhs, dt)
    omegaE = ScalarField(grid, irfft2(hat, grid.shape))
    coeffs1, d1 = _local_coeffs(omegaE, c1, params)
    t1 = s.t + dt
    core = _core_advance(s.core, t1, coeffs0, coeffs1, min(d0, d1), params)
    core.center = c1
    if not (omegaE.is_finite() and core.w2.is_finite()):
        raise NonFiniteError(f"non-finite vorticity at t = {t1:.6g}")
    return NSState(t1, s.nu, omegaE, core)


def ns_record(s: NSState, dt: float = 0.0, params: NSParams | None = None) -> dict:
    params = params or NSParams()
    grid = s.omegaE.grid
    cfl = 0.0
    if dt > 0 and not params.zero_velocity:
        vE = free_space_velocity(s.omegaE)
        far = multipole_velocity(grid, s.center, s.core.moments(params.n_multipole),
                                 default_r_mask(grid) if params.r_mask is None else params.r_mask)
        cfl = dt * advecting_speed(s.omegaE, vE.u1 + far.u1, vE.u2 + far.u2, params.eps_supp) / grid.h
    return {
        "t": s.t,
        "mass_E": s.omegaE.integral(),
        "mass_B": s.core.mass(),
        # the parts have disjoint supports, so the cross term is negligible
        "enstrophy": lp_norm(s.omegaE, 2) ** 2 + s.core.l2_squared(),
        "CFL": cfl,
        "c1": float(s.center[0]),
        "c2": float(s.center[1]),
    }


@dataclass
class NSTrajectory(Trajectory):
    max_mass_drift_E: float = 0.0
    max_mass_drift_B: float = 0.0
    max_enstrophy_increase: float = 0.0
    enstrophy_monotone: bool = True
    enstrophy_tol: float = 1e-10
    step_records: list = field(default_factory=list)


def ns_run(s0: NSState, T: float, dt: float, n_snap: int = 50, params: NSParams | None = None,
           enstrophy_tol: float = 1e-10, callback=None) -> NSTrajectory:
    """Fixed-step run; snapshots land exactly on the cadence.

    ``callback(state)`` is called on every snapshot (including the first).
    """
    params = params or NSParams()
    n_steps, per, dt = step_schedule(s0.t, T, dt, n_snap)
    traj = NSTrajectory(enstrophy_tol=enstrophy_tol)
    rec = ns_record(s0, dt, params)
    traj.states.append(s0)
    traj.records.append(rec)
    if callback:
        callback(s0)
    s, prev = s0, rec
    t_start = s0.t
    for n in range(1, n_steps + 1):
        try:
            s = ns_step(s, dt, params)
        except (CFLError, NonFiniteError) as exc:
            raise type(exc)(f"{exc} (t = {s.t:.6g})") from exc
        s = replace(s, t=t_start + n * dt)
        s.core.t = s.t
        rec = ns_record(s, dt if n % per == 0 else 0.0, params)
        traj.max_mass_drift_E = max(traj.max_mass_drift_E, abs(rec["mass_E"] - prev["mass_E"]))
        traj.max_mass_drift_B = max(traj.max_mass_drift_B, abs(rec["mass_B"] - prev["mass_B"]))
        inc = (rec["enstrophy"] - prev["enstrophy"]) / prev["enstrophy"]
        traj.max_enstrophy_increase = max(traj.max_enstrophy_increase, inc)
        if inc > enstrophy_tol:
            traj.enstrophy_monotone = False
        traj.step_records.append(rec)
        prev = rec
        if n % per == 0:
            traj.states.append(s)
            traj.records.append(rec)
            if callback:
                callback(s)
    return traj
