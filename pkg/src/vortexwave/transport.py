"""Shared time stepping for the transported vorticity fields.

Every evolved field is kept as its rfft2 spectrum; advection enters as the
dealiased divergence of a flux so the k=0 mode (the mass) is never touched.
Diffusion is handled by an integrating factor (Lawson RK4); point positions
ride along in the same tableau.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .fields import Grid2D, flux_divergence_hat, rfft2


class CFLError(RuntimeError):
    pass


class NonFiniteError(RuntimeError):
    pass


def diffusion_factor(grid: Grid2D, coeff: float, dt: float) -> np.ndarray | None:
    """``exp(-coeff |k|^2 dt / 2)``; ``None`` when there is no diffusion."""
    if coeff == 0.0:
        return None
    k1, k2 = grid.wavenumbers()
    return np.exp(-0.5 * coeff * dt * (k1 * k1 + k2 * k2))


def advection_hat(grid: Grid2D, q: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Spectrum of ``-div(u q)`` (dealiased)."""
    return -flux_divergence_hat(grid, u1 * q, u2 * q)


def _mul(E, a):
    return a if E is None else E * a


def lawson_rk4(hats: Sequence[np.ndarray], factors: Sequence[np.ndarray | None], points: Sequence[np.ndarray],
               rhs: Callable, dt: float):
    """One integrating-factor RK4 step.

    ``rhs(hats, points) -> (dhats, dpoints)``; ``factors[i]`` is the half-step
    diffusion factor of field i (or None).
    """
    hats = [np.asarray(h) for h in hats]
    points = [np.asarray(p, dtype=float) for p in points]
    h2 = 0.5 * dt

    a, pa = rhs(hats, points)
    s1 = [_mul(E, q + h2 * k) for q, k, E in zip(hats, a, factors)]
    p1 = [p + h2 * k for p, k in zip(points, pa)]
    b, pb = rhs(s1, p1)
    s2 = [_mul(E, q) + h2 * k for q, k, E in zip(hats, b, factors)]
    p2 = [p + h2 * k for p, k in zip(points, pb)]
    c, pc = rhs(s2, p2)
    s3 = [_mul(E, _mul(E, q)) + dt * _mul(E, k) for q, k, E in zip(hats, c, factors)]
    p3 = [p + dt * k for p, k in zip(points, pc)]
    d, pd = rhs(s3, p3)
    new = [
        _mul(E, _mul(E, q)) + (dt / 6.0) * (_mul(E, _mul(E, ka)) + 2.0 * _mul(E, kb + kc) + kd)
        for q, ka, kb, kc, kd, E in zip(hats, a, b, c, d, factors)
    ]
    newp = [p + (dt / 6.0) * (ka + 2.0 * kb + 2.0 * kc + kd) for p, ka, kb, kc, kd in zip(points, pa, pb, pc, pd)]
    for q in new:
        if not np.all(np.isfinite(q)):
            raise NonFiniteError("non-finite values after time step")
    for p in newp:
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("non-finite point position after time step")
    return new, newp


def spectrum(values: np.ndarray) -> np.ndarray:
    return rfft2(values)


def support_mask(values: np.ndarray, rel: float) -> np.ndarray:
    """Cells where ``|q| > rel * max|q|``."""
    a = np.abs(values)
    m = a.max()
    if m == 0:
        return np.zeros(a.shape, dtype=bool)
    return a > rel * m


def check_cfl(dt: float, h: float, speed: float, cfl: float, what: str = "") -> None:
    if speed > 0 and dt > cfl * h / speed * (1 + 1e-12):
        raise CFLError(f"time step {dt:.3e} exceeds CFL limit {cfl * h / speed:.3e}{' (' + what + ')' if what else ''}")
