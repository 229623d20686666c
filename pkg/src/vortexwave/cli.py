"""Command-line entry point: ``vortexwave <subcommand> [--config FILE] [--out DIR] [--threads N]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import approx_system as avw
from . import study
from . import vortex_wave as vw
from .config import ConfigError, RunConfig, dump_config, emit_report, load_config
from .diagnostics import ConvergenceReport, DecayError, weighted_l2p_norm
from .fields import Grid2D, ScalarField, set_workers, write_snapshot
from .oseen_ops import OseenModeProfile, elliptic_residual, fit_gaussian_decay, solve_modes

log = logging.getLogger("vortexwave")

ELLIPTIC_RTOL = 1e-6
DECAY_MIN = 0.9


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    if args.out:
        cfg.out_dir = args.out
    return cfg


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    return out


def cmd_simulate_vw(args) -> int:
    from .plotting import plot_columns, plot_field

    cfg = _load(args)
    out = _out(cfg)
    traj = study.run_vw_reference(cfg)
    study.write_records(out / "vw.csv", traj.records)
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    for k, s in enumerate(traj.states):
        write_snapshot(snap / f"vw_omegaE_{k:04d}.bin", s.omegaE, s.t, 0.0)
    plot_columns(traj.records, out / "figures" / "vw.png", keys=["z1", "z2", "support_distance", "L4"])
    g = traj.states[-1].omegaE.grid
    plot_field(traj.states[-1].omegaE.values, _extent(g), out / "figures" / "vw_omegaE_final.png", "omega_E(T)")
    print(f"vortex-wave run: {len(traj.states)} snapshots, z(T) = {traj.states[-1].z.tolist()}")
    return 0


def _extent(g: Grid2D):
    a0, a1 = g.axis(0), g.axis(1)
    return [a0[0], a0[-1], a1[0], a1[-1]]


def cmd_simulate_ns(args) -> int:
    from .plotting import plot_columns

    cfg = _load(args)
    out = _out(cfg)
    s0 = study.initial_state(cfg)
    dt = study.choose_dt(cfg, s0)
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    for nu in cfg.nus:
        count = [0]

        def save(s, nu=nu, count=count):
            write_snapshot(snap / f"ns_nu{nu:g}_omegaE_{count[0]:04d}.bin", s.omegaE, s.t, nu)
            write_snapshot(snap / f"ns_nu{nu:g}_w2_{count[0]:04d}.bin", s.core.w2, s.t, nu)
            count[0] += 1

        traj = study.run_ns(cfg, nu, dt, callback=save)
        cols = ["t", "mass_E", "mass_B", "enstrophy", "CFL"]
        study.write_csv(out / f"ns_nu{nu:g}.csv", cols, [[r[c] for c in cols] for r in traj.records])
        plot_columns(traj.records, out / "figures" / f"ns_nu{nu:g}.png", keys=["mass_E", "mass_B", "enstrophy", "CFL"])
        print(f"nu={nu:g}: max mass drift E {traj.max_mass_drift_E:.2e}, B {traj.max_mass_drift_B:.2e}, "
              f"enstrophy monotone {traj.enstrophy_monotone}")
    return 0


def cmd_simulate_avw(args) -> int:
    from .plotting import plot_columns

    cfg = _load(args)
    out = _out(cfg)
    s0 = study.initial_state(cfg)
    dt = study.choose_dt(cfg, s0)
    for nu in cfg.nus:
        traj = study.run_avw(cfg, nu, dt, keep_states=False)
        cols = ["t", "dz", "dz_over_nut", "w1a_L4", "support_measure"]
        study.write_csv(out / f"avw_nu{nu:g}.csv", cols, [[r[c] for c in cols] for r in traj.records])
        plot_columns(traj.records, out / "figures" / f"avw_nu{nu:g}.png", keys=cols[1:])
        print(f"nu={nu:g}: sup |zt - z|/(nu t) = {max(r['dz_over_nut'] for r in traj.records):.4e}")
    return 0


def read_profile_csv(path) -> list:
    """CSV with header r,a2,b2,a3,b3 -> mode profiles (all-zero modes dropped)."""
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    need = ["r", "a2", "b2", "a3", "b3"]
    if not rows or any(k not in rows[0] for k in need):
        raise ValueError(f"profile file needs columns {need}")
    data = {k: np.array([float(r[k]) for r in rows]) for k in need}
    profs = []
    for n in (2, 3):
        a, b = data[f"a{n}"], data[f"b{n}"]
        if np.any(a != 0) or np.any(b != 0):
            profs.append(OseenModeProfile(n, data["r"], a, b))
    return profs


def cmd_oseen_solve(args) -> int:
    from .plotting import plot_field

    if args.nu is None or args.rhs is None:
        print("oseen-solve needs --nu and --rhs", file=sys.stderr)
        return 2
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rhs = read_profile_csv(args.rhs)
    grid = Grid2D(cfg.xi_grid.L, max(cfg.xi_grid.N, 256), stagger=0.0)
    sol = solve_modes(args.nu, rhs)
    w = sol.on_grid(grid)
    z = ScalarField.zeros(grid)
    for p in rhs:
        z = z + p.on_grid(grid)
    res = elliptic_residual(args.nu, w, z)
    R = cfg.thresholds.R_cut
    zn = weighted_l2p_norm(z, R, decay_tol=np.inf)
    rel = weighted_l2p_norm(res, R, decay_tol=np.inf) / zn if zn > 0 else 0.0
    try:
        gamma = fit_gaussian_decay(w) if np.abs(w.values).max() > 0 else float("inf")
    except ValueError:
        gamma = float("nan")
    r = np.linspace(0.0, 16.0, 321)
    cols, table = ["r"], [r]
    for n in sorted(sol.profiles):
        W = sol.evaluate(n, r)
        cols += [f"a{n}", f"b{n}"]
        table += [W.real, -W.imag]
    study.write_csv(out / "oseen_solution.csv", cols, zip(*table))
    write_snapshot(out / "oseen_solution.bin", w, 0.0, args.nu)
    plot_field(w.values, _extent(grid), out / "figures" / "oseen_solution.png", f"nu = {args.nu:g}")
    ok = rel <= ELLIPTIC_RTOL and gamma >= DECAY_MIN
    summary = {"nu": args.nu, "relative_residual": rel, "decay_rate": gamma, "R_cut": R, "passed": bool(ok)}
    (out / "oseen_solve.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0 if ok else 1


def _print_flags(report: ConvergenceReport) -> None:
    for name, m in report.metrics.items():
        val = f"slope={m.slope:.3f}" if m.kind == "slope" and m.slope is not None else f"spread={m.spread}"
        print(f"{'PASS' if m.passed else 'FAIL'} {name}: {val}")
    for nu, msg in report.errors.items():
        print(f"ERROR nu={nu}: {msg}")


def cmd_convergence_study(args) -> int:
    cfg = _load(args)
    _out(cfg)
    report = study.run_convergence_study(cfg)
    _print_flags(report)
    return 0 if report.all_passed else 1


def cmd_fit_report(args) -> int:
    """Refit the rates from the per-viscosity metric CSVs in the output directory."""
    from .plotting import render_study

    cfg = _load(args)
    out = Path(cfg.out_dir)
    series = {}
    for nu in cfg.nus:
        p = out / f"metrics_nu{nu:g}.csv"
        if not p.exists():
            continue
        with open(p) as fh:
            rows = list(csv.DictReader(fh))
        series[nu] = {k: [float(r[k]) for r in rows] for k in study.SERIES_COLUMNS}
    if not series:
        print(f"no metric series found in {out}", file=sys.stderr)
        return 2
    pairs = {nu: study.PairResult(nu, s) for nu, s in series.items()}
    report = ConvergenceReport()
    for m in study.acceptance_metrics(pairs, cfg.nus):
        report.add(m)
    missing = [nu for nu in cfg.nus if nu not in series]
    for nu in missing:
        report.errors[nu] = "no metric series"
    emit_report(report, out / "report.json")
    render_study(report, series, out / "figures")
    _print_flags(report)
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortexwave", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    handlers = {
        "simulate-ns": cmd_simulate_ns,
        "simulate-vw": cmd_simulate_vw,
        "simulate-avw": cmd_simulate_avw,
        "oseen-solve": cmd_oseen_solve,
        "convergence-study": cmd_convergence_study,
        "fit-report": cmd_fit_report,
    }
    for name, fn in handlers.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run configuration (defaults built in)")
        sp.add_argument("--out", help="output directory (overrides out_dir)")
        sp.add_argument("--threads", type=int, default=1, help="FFT worker threads; 1 is the reference mode")
        if name == "oseen-solve":
            sp.add_argument("--nu", type=float, help="viscosity")
            sp.add_argument("--rhs", help="CSV profile file with columns r,a2,b2,a3,b3")
        sp.set_defaults(func=fn)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    set_workers(args.threads)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, DecayError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
