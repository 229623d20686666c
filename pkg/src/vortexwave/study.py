"""Paired runs and the convergence study.

The inviscid vortex-wave reference is computed once; for each viscosity the
approximate system and the viscous two-component run share its clock
(``t_n = t0 + n dt``), so every metric compares states at identical times.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx_system as avw
from . import navier_stokes as ns
from . import vortex_wave as vw
from .biot_savart import free_space_velocity, masked_point_vortex
from .config import RunConfig, emit_report
from .diagnostics import (ConvergenceReport, DecayError, MetricResult, gee_monitor, l1_distance_to_oseen,
                          l2p_gradient_norm, remainder_noise_floor, remainder_w1, remainder_w2, rescale_to_xi, weighted_l2p_norm)
from .fields import Grid2D, ScalarField, lp_intersection_norm
from .oseen_ops import build_w2a, compute_moments

log = logging.getLogger(__name__)

REMAINDER_BAND = 0.85  # outer band of the xi box used for the noise floor
SERIES_COLUMNS = ["t", "err_E", "l1_oseen_over_t", "w2bar_L2p", "gee", "dz_over_nut", "w1bar_L4cap", "w2bar_grad_L2p"]


def physical_grid(cfg: RunConfig) -> Grid2D:
    return Grid2D(cfg.grid.L, cfg.grid.N)


def core_grid(cfg: RunConfig) -> Grid2D:
    return Grid2D(cfg.xi_grid.L, cfg.xi_grid.N, stagger=0.0)


def initial_state(cfg: RunConfig) -> vw.VWState:
    g = physical_grid(cfg)
    ini = cfg.initial
    om = vw.initial_vorticity(g, ini.A, ini.rho, tuple(ini.c), ini.band)
    return vw.VWState(cfg.t0, tuple(ini.z0), om)


def choose_dt(cfg: RunConfig, s0: vw.VWState) -> float:
    """One step size for every run: the CFL limit of the initial data, capped by the cadence."""
    if cfg.dt is not None:
        return cfg.dt
    g = s0.omegaE.grid
    vE = free_space_velocity(s0.omegaE)
    H = masked_point_vortex(g, s0.z, cfg.r_mask)
    speed = vw.advecting_speed(s0.omegaE, vE.u1 + H.u1, vE.u2 + H.u2, cfg.thresholds.eps_supp)
    # leave headroom for the speed-up of the flow during the run
    dt_cfl = 0.5 * cfg.cfl * g.h / speed if speed > 0 else np.inf
    return float(min(dt_cfl, (cfg.T - cfg.t0) / cfg.n_snap))


def run_vw_reference(cfg: RunConfig, dt: float | None = None) -> vw.Trajectory:
    s0 = initial_state(cfg)
    dt = choose_dt(cfg, s0) if dt is None else dt
    return vw.vw_run(s0, cfg.T, dt, cfg.n_snap, cfg.r_mask, cfg.cfl, cfg.thresholds.eps_supp)


def run_avw(cfg: RunConfig, nu: float, dt: float, keep_states: bool = True) -> vw.Trajectory:
    s0 = avw.avw_init(initial_state(cfg), nu, cfg.thresholds.eps_supp)
    return avw.avw_run(s0, cfg.T, dt, cfg.n_snap, cfg.r_mask, cfg.cfl, cfg.thresholds.eps_supp, keep_states)


def ns_params(cfg: RunConfig) -> ns.NSParams:
    return ns.NSParams(cfl=cfg.cfl, r_mask=cfg.r_mask, eps_supp=cfg.thresholds.eps_supp)


def run_ns(cfg: RunConfig, nu: float, dt: float, callback=None) -> ns.NSTrajectory:
    s0v = initial_state(cfg)
    s0 = ns.ns_init(s0v.omegaE, s0v.z, nu, cfg.t0, core_grid(cfg))
    return ns.ns_run(s0, cfg.T, dt, cfg.n_snap, ns_params(cfg), callback=callback)


@dataclass
class PairResult:
    nu: float
    series: dict = field(default_factory=dict)
    ns_traj: object = None
    avw_traj: object = None
    notes: list = field(default_factory=list)

    def sup(self, key: str) -> float:
        v = np.asarray(self.series[key], dtype=float)
        if v.size == 0 or not np.all(np.isfinite(v)):
            return float("nan")
        return float(v.max())


def run_pair(cfg: RunConfig, nu: float, ref: vw.Trajectory, dt: float) -> PairResult:
    """Approximate and viscous runs at one viscosity, diagnosed at every snapshot."""
    res = PairResult(nu)
    a_traj = run_avw(cfg, nu, dt)
    res.avw_traj = a_traj
    xi = core_grid(cfg)
    R_cut = cfg.thresholds.R_cut
    # decay is checked two units further out, clear of the tail that still carries norm
    R_chk = min(R_cut + 2.0, REMAINDER_BAND * 0.5 * xi.L)
    d_min = 2.0 * cfg.r_mask
    cols = {k: [] for k in SERIES_COLUMNS}
    idx = [0]

    def on_snapshot(s: ns.NSState):
        j = idx[0]
        idx[0] += 1
        ref_s = ref.states[j]
        a_s = a_traj.states[j]
        t = s.t
        if abs(ref_s.t - t) > 1e-12 or abs(a_s.t - t) > 1e-12:
            raise RuntimeError("runs are out of step")
        cols["t"].append(t)
        cols["err_E"].append(lp_intersection_norm(s.omegaE - ref_s.omegaE))
        cols["l1_oseen_over_t"].append(l1_distance_to_oseen(s.core, ref_s.z, nu, t) / t)
        cols["dz_over_nut"].append(a_traj.records[j]["dz_over_nut"])
        om_t, _ = avw.tilde_fields(a_s)
        w1bar, _ = remainder_w1(s.omegaE, om_t, nu)
        cols["w1bar_L4cap"].append(lp_intersection_norm(w1bar))
        m = compute_moments(om_t, a_s.ztilde, d_min)
        w2a = build_w2a(m, nu, t, xi)
        w2 = rescale_to_xi(s.core, a_s.ztilde, nu, t)
        wbar = remainder_w2(w2, w2a, nu, t)
        floor = remainder_noise_floor(w2, nu, t)
        try:
            n = weighted_l2p_norm(wbar, R_cut, 1e-10, floor, R_chk)
            gn = l2p_gradient_norm(wbar, R_cut, 1e-10, floor, R_chk)
        except DecayError as exc:
            res.notes.append(f"t={t:.6g}: {exc}")
            n = gn = float("nan")
        cols["w2bar_L2p"].append(n)
        cols["w2bar_grad_L2p"].append(gn)

    res.ns_traj = run_ns(cfg, nu, dt, on_snapshot)
    res.ns_traj.states = [res.ns_traj.states[0], res.ns_traj.states[-1]]  # free memory
    if np.all(np.isfinite(cols["w2bar_L2p"])):
        cols["gee"] = list(gee_monitor(cols["t"], cols["w2bar_L2p"], cols["w2bar_grad_L2p"]))
    else:
        cols["gee"] = [float("nan")] * len(cols["t"])
    res.series = cols
    return res


def write_csv(path, columns: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def write_records(path, records: list) -> None:
    if not records:
        return
    cols = list(records[0].keys())
    write_csv(path, cols, [[r[c] for c in cols] for r in records])


def write_series(path, series: dict) -> None:
    rows = zip(*[series[c] for c in SERIES_COLUMNS])
    write_csv(path, SERIES_COLUMNS, rows)


def _synthetic_pair(cfg: RunConfig, nu: float) -> PairResult:
    t = np.linspace(cfg.t0, cfg.T, cfg.n_snap + 1)
    c = 1.0 + 0.0 * t
    series = {
        "t": list(t),
        "err_E": list(3.0 * nu * c),
        "l1_oseen_over_t": list(2.0 * nu * c),
        "w2bar_L2p": list(0.5 * c),
        "gee": list(0.25 * c),
        "dz_over_nut": list(0.1 * c),
        "w1bar_L4cap": list(c),
        "w2bar_grad_L2p": list(0.0 * c),
    }
    return PairResult(nu, series)


def acceptance_metrics(pairs: dict, nus: list) -> list:
    ok = [nu for nu in nus if nu in pairs]

    def sups(key):
        return [pairs[nu].sup(key) for nu in ok]

    return [
        MetricResult("regular_rate", ok, sups("err_E"), "slope", 0.8),
        MetricResult("irregular_rate", ok, sups("l1_oseen_over_t"), "slope", 0.8),
        MetricResult("vortex_shift_constant", ok, sups("dz_over_nut"), "spread", 2.0),
        MetricResult("remainder_w2_bound", ok, sups("w2bar_L2p"), "spread", 2.0),
        MetricResult("gee_bound", ok, sups("gee"), "spread", 2.0),
    ]


def run_convergence_study(cfg: RunConfig, out_dir=None, figures: bool = True) -> ConvergenceReport:
    """Reference run, per-viscosity pairs, CSV series, fitted rates and a JSON report."""
    cfg.validate()
    if len(cfg.nus) < 3:
        raise ValueError("a convergence study needs at least 3 viscosities")
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ConvergenceReport()
    pairs: dict = {}
    if cfg.synthetic:
        for nu in cfg.nus:
            pairs[nu] = _synthetic_pair(cfg, nu)
    else:
        s0 = initial_state(cfg)
        dt = choose_dt(cfg, s0)
        log.info("reference vortex-wave run, dt = %.4g", dt)
        ref = run_vw_reference(cfg, dt)
        write_records(out / "vw.csv", ref.records)
        report.extra["dt"] = dt
        for nu in cfg.nus:
            log.info("nu = %g", nu)
            try:
                p = run_pair(cfg, nu, ref, dt)
            except Exception as exc:  # recorded, the study continues
                log.warning("run at nu = %g failed: %s", nu, exc)
                report.errors[nu] = f"{type(exc).__name__}: {exc}"
                continue
            pairs[nu] = p
            write_records(out / f"ns_nu{nu:g}.csv", p.ns_traj.records)
            write_records(out / f"avw_nu{nu:g}.csv", p.avw_traj.records)
            p.avw_traj = None
            if p.notes:
                report.extra.setdefault("notes", {})[f"{nu:g}"] = p.notes
            report.extra.setdefault("mass_drift", {})[f"{nu:g}"] = {
                "E": p.ns_traj.max_mass_drift_E, "B": p.ns_traj.max_mass_drift_B,
                "enstrophy_monotone": p.ns_traj.enstrophy_monotone,
            }
    for nu, p in pairs.items():
        write_series(out / f"metrics_nu{nu:g}.csv", p.series)
    for m in acceptance_metrics(pairs, cfg.nus):
        report.add(m)
    report.extra["w1bar_sup"] = {f"{nu:g}": pairs[nu].sup("w1bar_L4cap") for nu in pairs}
    emit_report(report, out / "report.json")
    if figures:
        from .plotting import render_study

        render_study(report, {nu: p.series for nu, p in pairs.items()}, out / "figures")
    return report
