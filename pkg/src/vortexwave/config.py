"""Run configuration (YAML) and JSON report persistence."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Schema violation; the message names the offending field."""


@dataclass
class GridConfig:
    L: float = 16.0
    N: int = 512


@dataclass
class XiGridConfig:
    L: float = 32.0
    N: int = 128


@dataclass
class InitialConfig:
    A: float = 1.0
    rho: float = 1.0
    c: list = field(default_factory=lambda: [2.5, 0.0])
    z0: list = field(default_factory=lambda: [0.0, 0.0])
    band: float = 0.15  # spectral mollifier, fraction of the Nyquist wavenumber


@dataclass
class Thresholds:
    eps_supp: float = 1e-10
    R_cut: float = 10.0
    r_mask: float | None = None  # None: 4 h


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    nus: list = field(default_factory=lambda: [4e-3, 2e-3, 1e-3, 5e-4])
    t0: float = 1e-4
    T: float = 0.5
    cfl: float = 0.5
    dt: float | None = None  # None: from the CFL number and the cadence
    initial: InitialConfig = field(default_factory=InitialConfig)
    n_snap: int = 50
    out_dir: str = "out"
    xi_grid: XiGridConfig = field(default_factory=XiGridConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    synthetic: bool = False  # test hook: skip the solvers, errors = c nu

    def validate(self) -> "RunConfig":
        _check_grid("grid", self.grid.L, self.grid.N)
        _check_grid("xi_grid", self.xi_grid.L, self.xi_grid.N)
        if not isinstance(self.nus, list) or not self.nus:
            raise ConfigError("nus: must be a non-empty list of viscosities")
        for i, nu in enumerate(self.nus):
            if not isinstance(nu, (int, float)) or isinstance(nu, bool) or not nu > 0:
                raise ConfigError(f"nus[{i}]: viscosity must be a positive number, got {nu!r}")
        if len(set(self.nus)) != len(self.nus):
            raise ConfigError("nus: duplicate viscosities")
        _positive("t0", self.t0)
        _positive("T", self.T)
        if self.T <= self.t0:
            raise ConfigError("T: final time must exceed t0")
        _positive("cfl", self.cfl)
        if self.cfl > 1.0:
            raise ConfigError("cfl: must not exceed 1")
        if self.dt is not None:
            _positive("dt", self.dt)
        if not isinstance(self.n_snap, int) or self.n_snap < 1:
            raise ConfigError("n_snap: must be a positive integer")
        _positive("initial.A", self.initial.A)
        _positive("initial.rho", self.initial.rho)
        for name in ("c", "z0"):
            v = getattr(self.initial, name)
            if not (isinstance(v, list) and len(v) == 2):
                raise ConfigError(f"initial.{name}: must be a point [x1, x2]")
        if self.initial.band < 0:
            raise ConfigError("initial.band: must be >= 0")
        dist = ((self.initial.c[0] - self.initial.z0[0]) ** 2 + (self.initial.c[1] - self.initial.z0[1]) ** 2) ** 0.5
        if dist <= self.initial.rho:
            raise ConfigError("initial: the bump must not cover the vortex position z0")
        half = 0.5 * self.grid.L
        if max(abs(self.initial.c[0]), abs(self.initial.c[1])) + self.initial.rho > 0.75 * half:
            raise ConfigError("initial.c: bump too close to the box boundary")
        _positive("thresholds.eps_supp", self.thresholds.eps_supp)
        _positive("thresholds.R_cut", self.thresholds.R_cut)
        if self.thresholds.R_cut >= 0.5 * self.xi_grid.L:
            raise ConfigError("thresholds.R_cut: must lie inside the xi box")
        if self.thresholds.r_mask is not None:
            _positive("thresholds.r_mask", self.thresholds.r_mask)
        if not isinstance(self.out_dir, str) or not self.out_dir:
            raise ConfigError("out_dir: must be a non-empty path")
        return self

    @property
    def h(self) -> float:
        return self.grid.L / self.grid.N

    @property
    def r_mask(self) -> float:
        return 4.0 * self.h if self.thresholds.r_mask is None else self.thresholds.r_mask

    def to_dict(self) -> dict:
        return asdict(self)


def _check_grid(name, L, N):
    if not isinstance(N, int) or isinstance(N, bool) or N < 16 or N & (N - 1):
        raise ConfigError(f"{name}.N: must be a power of two >= 16, got {N!r}")
    _positive(f"{name}.L", L)


def _positive(name, v):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
        raise ConfigError(f"{name}: must be a positive number, got {v!r}")


_SECTIONS = {"grid": GridConfig, "initial": InitialConfig, "xi_grid": XiGridConfig, "thresholds": Thresholds}
_REQUIRED = ("grid", "nus", "T")


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be a mapping")
    for key in _REQUIRED:
        if key not in d:
            raise ConfigError(f"{key}: required field is missing")
    known = {f.name for f in fields(RunConfig)}
    for key in d:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    kw = {}
    for key, val in d.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            if not isinstance(val, dict):
                raise ConfigError(f"{key}: must be a mapping")
            sub = {f.name for f in fields(cls)}
            for k in val:
                if k not in sub:
                    raise ConfigError(f"{key}.{k}: unknown field")
            kw[key] = cls(**val)
        else:
            kw[key] = val
    return RunConfig(**kw).validate()


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "default.yaml"


def load_config(path) -> RunConfig:
    with open(path) as fh:
        d = yaml.safe_load(fh)
    return config_from_dict(d or {})


def dump_config(cfg: RunConfig, path=None) -> str:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def emit_report(report, path) -> None:
    d = report.to_dict() if hasattr(report, "to_dict") else report
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True))


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())
