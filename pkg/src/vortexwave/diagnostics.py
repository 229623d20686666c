"""Rescaling, remainders, weighted norms and rate fitting."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .biot_savart import free_space_velocity
from .fields import Grid2D, ScalarField, VectorField, fourier_shift, lp_norm, sample, spectral_gradient
from .navier_stokes import CoreField
from .oseen_ops import DEFAULT_R_CUT, DecayError, FOUR_PI


class ResolutionError(ValueError):
    pass


@dataclass
class RescaledField:
    w2: ScalarField
    nu: float
    t: float
    ztilde: np.ndarray

    @property
    def grid(self) -> Grid2D:
        return self.w2.grid

    def mass(self) -> float:
        return self.w2.integral()


def _gaussian(grid: Grid2D, shift=(0.0, 0.0)) -> np.ndarray:
    x1, x2 = grid.mesh()
    d1 = x1 - grid.center[0] - shift[0]
    d2 = x2 - grid.center[1] - shift[1]
    return np.exp(-0.25 * (d1 * d1 + d2 * d2)) / FOUR_PI


def rescale_to_xi(omegaB, ztilde, nu: float, t: float, xi_grid: Grid2D | None = None) -> RescaledField:
    """``w2(xi) = nu t omega_B(ztilde + xi sqrt(nu t))``.

    For a physical field this is a bicubic resample. For a core profile the
    change of centre is an exact Fourier phase shift on its own xi grid.
    """
    ztilde = np.asarray(ztilde, dtype=float).reshape(2)
    s = np.sqrt(nu * t)
    if isinstance(omegaB, CoreField):
        g = omegaB.w2.grid
        if xi_grid is not None and xi_grid != g:
            raise ValueError("core profiles are rescaled on their own xi grid")
        shift = (ztilde - omegaB.center) / s
        return RescaledField(ScalarField(g, fourier_shift(omegaB.w2.values, g, shift)), nu, t, ztilde)
    if xi_grid is None:
        raise ValueError("a xi grid is needed to rescale a physical field")
    phys = omegaB.grid
    if s < 2 * phys.h:
        raise ResolutionError(f"sqrt(nu t) = {s:.3e} is below two physical cells ({2 * phys.h:.3e})")
    x1, x2 = xi_grid.mesh()
    pts = np.stack([ztilde[0] + s * (x1 - xi_grid.center[0]), ztilde[1] + s * (x2 - xi_grid.center[1])], axis=-1)
    if not phys.contains(pts):
        raise ValueError("xi box maps outside the physical grid")
    return RescaledField(ScalarField(xi_grid, nu * t * sample(omegaB.values, phys, pts)), nu, t, ztilde)


def remainder_w2(w2: RescaledField, w2a: ScalarField, nu: float, t: float) -> ScalarField:
    """``(w2 - G - nu t w2a) / (nu t)``."""
    nt = nu * t
    if nt < 1e-14:
        raise ValueError(f"nu t = {nt:.3e} too small to divide by")
    if w2a.grid != w2.grid:
        raise ValueError("w2 and w2a live on different xi grids")
    return ScalarField(w2.grid, (w2.w2.values - _gaussian(w2.grid) - nt * w2a.values) / nt)


def remainder_noise_floor(w2: RescaledField, nu: float, t: float, factor: float = 4.0, band: float = 0.85) -> float:
    """Absolute round-off level of :func:`remainder_w2`.

    Measured as ``|w2 - G| / (nu t)`` in the outer band ``|xi| >= band L/2``
    of the xi box, where the true profile is below 1e-24, and never below
    ``64 eps max|w2| / (nu t)``.
    """
    g = w2.grid
    x1, x2 = g.mesh()
    r = np.hypot(x1 - g.center[0], x2 - g.center[1])
    outer = r >= band * 0.5 * g.L
    measured = np.abs(w2.w2.values - _gaussian(g))[outer].max() if np.any(outer) else 0.0
    base = 64.0 * np.finfo(float).eps * np.abs(w2.w2.values).max()
    return float(max(factor * measured, base) / (nu * t))


def remainder_w1(omegaE_nu: ScalarField, omegaE_tilde: ScalarField, nu: float) -> tuple[ScalarField, VectorField]:
    """``(omega_E^nu - omega~_E) / nu^{3/2}`` and its velocity."""
    if omegaE_nu.grid != omegaE_tilde.grid:
        raise ValueError("fields live on different grids")
    w = ScalarField(omegaE_nu.grid, (omegaE_nu.values - omegaE_tilde.values) / nu**1.5)
    # a difference of two runs carries round-off everywhere; the kernel is exact regardless
    return w, free_space_velocity(w, check=False)


def weighted_l2p_norm(w, R_cut: float = DEFAULT_R_CUT, decay_tol: float = 1e-10, noise_floor: float = 0.0,
                      check_radius: float | None = None) -> float:
    """``(int_{|xi| <= R_cut} |w|^2 e^{|xi|^2/4})^{1/2}``; VectorFields use |w|.

    Raises DecayError when ``|w|`` outside ``check_radius`` (default
    ``R_cut``) exceeds both ``decay_tol max|w|`` and ``noise_floor`` (the
    absolute round-off level of an extracted remainder, see
    :func:`remainder_noise_floor`). A check radius beyond ``R_cut`` lets a
    polynomial-times-Gaussian tail pass through the annulus where it is
    still above ``decay_tol`` but no longer contributes to the norm.
    """
    grid = w.grid
    a = np.abs(w.values) if isinstance(w, ScalarField) else w.magnitude()
    x1, x2 = grid.mesh()
    r2 = (x1 - grid.center[0]) ** 2 + (x2 - grid.center[1]) ** 2
    inside = r2 <= R_cut * R_cut
    m = a.max()
    if m == 0:
        return 0.0
    R_chk = R_cut if check_radius is None else check_radius
    if R_chk < R_cut:
        raise ValueError("check_radius must not be smaller than R_cut")
    outside = a[r2 > R_chk * R_chk]
    if outside.size and outside.max() > max(decay_tol * m, noise_floor):
        raise DecayError(f"|w| outside R_cut = {R_cut} is {outside.max() / m:.2e} of its max")
    return float(np.sqrt(np.sum(a[inside] ** 2 * np.exp(0.25 * r2[inside])) * grid.cell_area))


def gaussian_shift_l1(delta: float, s: float) -> float:
    """L1 distance between two unit Oseen Gaussians of scale ``s`` offset by ``delta``."""
    return float(2.0 * special.erf(abs(delta) / (4.0 * s)))


def _refined_abs_sum(d: np.ndarray, refine: int) -> float:
    """Sum of ``|d|`` after trigonometric interpolation onto a ``refine``-times finer grid.

    The absolute value has a kink on the zero set of ``d``; sampling the smooth
    difference more finely before taking it cuts that quadrature error by ``refine^2``.
    """
    if refine <= 1:
        return float(np.abs(d).sum())
    n1, n2 = d.shape
    dh = np.fft.fftshift(np.fft.fft2(d))
    p1, p2 = (refine - 1) * n1 // 2, (refine - 1) * n2 // 2
    fine = np.fft.ifft2(np.fft.ifftshift(np.pad(dh, ((p1, p1), (p2, p2))))).real * refine * refine
    return float(np.abs(fine).sum()) / (refine * refine)


def l1_distance_to_oseen(omegaB, center, nu: float, t: float, refine: int = 4) -> float:
    """``|| omega_B - e^{-|x-center|^2/(4 nu t)} / (4 pi nu t) ||_{L1}``.

    For a core field the difference is smooth and periodic on the xi box, so it
    is refined spectrally (factor ``refine``) before the absolute value is taken.
    """
    center = np.asarray(center, dtype=float).reshape(2)
    s = np.sqrt(nu * t)
    if isinstance(omegaB, CoreField):
        g = omegaB.w2.grid
        shift = (center - omegaB.center) / s
        return _refined_abs_sum(omegaB.w2.values - _gaussian(g, shift), refine) * g.cell_area
    grid = omegaB.grid
    if 2 * s < 4 * grid.h:
        raise ResolutionError(f"sqrt(4 nu t) = {2 * s:.3e} below four cells ({4 * grid.h:.3e})")
    r2 = grid.radius(center) ** 2
    gauss = np.exp(-r2 / (4 * nu * t)) / (4 * np.pi * nu * t)
    return float(np.abs(omegaB.values - gauss).sum() * grid.cell_area)


def gee_monitor(times, norms, grad_norms, t0: float | None = None) -> np.ndarray:
    """``G(t) = n(t)^2 + int_{t0}^t s^{-1} (n^2 + g^2) ds`` (trapezoid)."""
    times = np.asarray(times, dtype=float)
    n2 = np.asarray(norms, dtype=float) ** 2
    g2 = np.asarray(grad_norms, dtype=float) ** 2
    if times.size == 0:
        return np.zeros(0)
    if t0 is not None and abs(times[0] - t0) > 0:
        raise ValueError("the history must start at t0")
    f = (n2 + g2) / times
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(times))])
    return n2 + acc


def fit_rate(samples) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log error`` against ``log nu``."""
    samples = list(samples)
    if len(samples) < 3:
        raise ValueError("a rate fit needs at least 3 samples")
    nu = np.array([s[0] for s in samples], dtype=float)
    err = np.array([s[1] for s in samples], dtype=float)
    if np.any(err <= 0) or np.any(nu <= 0):
        raise ValueError("errors and viscosities must be positive")
    slope, intercept = np.polyfit(np.log(nu), np.log(err), 1)
    return float(slope), float(intercept)


def spread_ratio(values) -> float:
    """max/min of positive values (how far a 'constant' varies)."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        return np.inf
    return float(v.max() / v.min())


@dataclass
class MetricResult:
    name: str
    nus: list
    values: list
    kind: str = "slope"  # "slope": fitted rate >= threshold; "spread": max/min < threshold
    threshold: float = 0.8
    slope: float | None = None
    intercept: float | None = None
    spread: float | None = None
    passed: bool = False

    def evaluate(self) -> "MetricResult":
        pairs = [(n, v) for n, v in zip(self.nus, self.values) if v is not None and np.isfinite(v)]
        if self.kind == "slope":
            try:
                self.slope, self.intercept = fit_rate(pairs)
                self.passed = len(pairs) == len(self.nus) and self.slope >= self.threshold
            except ValueError:
                self.slope = self.intercept = None
                self.passed = False
        else:
            self.spread = spread_ratio([v for _, v in pairs]) if pairs else np.inf
            self.passed = len(pairs) == len(self.nus) and self.spread < self.threshold
        return self


@dataclass
class ConvergenceReport:
    metrics: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # nu -> message of a failed run
    extra: dict = field(default_factory=dict)

    def add(self, m: MetricResult) -> None:
        self.metrics[m.name] = m.evaluate()

    @property
    def all_passed(self) -> bool:
        return bool(self.metrics) and all(m.passed for m in self.metrics.values()) and not self.errors

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not np.isfinite(x):
                return str(x)
            return x

        out = {"metrics": {}, "errors": {str(k): v for k, v in self.errors.items()}, "extra": self.extra}
        for k, m in self.metrics.items():
            d = asdict(m)
            out["metrics"][k] = {kk: clean(vv) for kk, vv in d.items()}
        out["all_passed"] = self.all_passed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        rep = cls(errors=dict(d.get("errors", {})), extra=dict(d.get("extra", {})))
        for k, m in d.get("metrics", {}).items():
            m = dict(m)
            for key in ("spread", "slope", "intercept"):
                if isinstance(m.get(key), str):
                    m[key] = float(m[key])
            rep.metrics[k] = MetricResult(**m)
        return rep


def l2p_gradient_norm(w: ScalarField, R_cut: float = DEFAULT_R_CUT, decay_tol: float = 1e-10,
                      noise_floor: float = 0.0, check_radius: float | None = None) -> float:
    # differentiation lifts grid-scale noise by up to the Nyquist wavenumber
    return weighted_l2p_norm(spectral_gradient(w), R_cut, decay_tol, noise_floor * np.pi / w.grid.h, check_radius)


__all__ = [
    "RescaledField", "rescale_to_xi", "remainder_w2", "remainder_w1", "remainder_noise_floor", "weighted_l2p_norm",
    "l1_distance_to_oseen", "gaussian_shift_l1", "gee_monitor", "fit_rate", "spread_ratio",
    "MetricResult", "ConvergenceReport", "ResolutionError", "l2p_gradient_norm", "DecayError", "lp_norm",
]
