"""Free-plane Biot-Savart law ``u = K * omega`` on a uniform grid.

The convolution uses a zero-padded (doubled) grid whose kernel is the
Laplace Green's function truncated at a radius covering the whole box.
The truncated kernel's Fourier transform is known in closed form, so the
real-space stencil is tabulated once from a 4x oversampled transform and
then reused; for band-limited vorticity the result is exact up to
round-off (no periodic images, no singular-cell quadrature error).

Point-vortex fields use complex notation: with ``x = x1 + i x2`` the kernel
reads ``conj(K(x)) = i / (2 pi x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .fields import Grid2D, ScalarField, VectorField, irfft2, rfft2

TWO_PI = 2.0 * np.pi


class SupportError(ValueError):
    """Vorticity reaches too close to the box boundary."""


def kernel_K(x) -> np.ndarray:
    """``K(x) = x_perp / (2 pi |x|^2)`` with ``a_perp = (a2, -a1)``."""
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    if np.any(r2 == 0):
        raise ValueError("K is singular at x = 0")
    return np.stack([x[..., 1], -x[..., 0]], axis=-1) / (TWO_PI * r2[..., None])


def mask_factor(r, r_mask: float) -> np.ndarray:
    """Smooth cutoff ``1 - exp(-(r/r_mask)^8)``; equals 1 to 1e-111 beyond 2 r_mask."""
    return -np.expm1(-((np.asarray(r) / r_mask) ** 8))


def masked_point_vortex(grid: Grid2D, z, r_mask: float, strength: float = 1.0) -> VectorField:
    """``strength * K(x - z)`` smoothly capped inside ``r_mask``."""
    x1, x2 = grid.mesh()
    d1, d2 = x1 - z[0], x2 - z[1]
    r2 = d1 * d1 + d2 * d2
    f = mask_factor(np.sqrt(r2), r_mask)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(r2 > 0, strength * f / (TWO_PI * r2), 0.0)
    return VectorField(grid, c * d2, -c * d1)


def multipole_velocity(grid: Grid2D, center, moments, r_mask: float) -> VectorField:
    """Far field of a localized vorticity from its complex moments.

    ``moments[k] = int omega(y) (y - center)^k dy`` (complex). The series
    ``conj(u) = i/(2 pi) sum_k M_k / X^(k+1)`` is capped inside ``r_mask``.
    """
    x1, x2 = grid.mesh()
    X = (x1 - center[0]) + 1j * (x2 - center[1])
    r = np.abs(X)
    f = mask_factor(r, r_mask)
    safe = np.where(r > 0, X, 1.0)
    inv = 1.0 / safe
    acc = np.zeros_like(X)
    power = inv.copy()
    for m in moments:
        acc += m * power
        power *= inv
    ubar = (1j / TWO_PI) * acc * np.where(r > 0, f, 0.0)
    return VectorField(grid, ubar.real, -ubar.imag)


def local_expansion(omega: ScalarField, center, n_terms: int, r_exclude: float) -> np.ndarray:
    """Taylor coefficients ``b_k`` of ``conj(u)(center + X) = sum_k b_k X^k``.

    Valid where ``|X|`` is below the distance from ``center`` to the support.
    Cells closer than ``r_exclude`` are skipped (they hold round-off only).
    """
    grid = omega.grid
    x1, x2 = grid.mesh()
    Y = (x1 - center[0]) + 1j * (x2 - center[1])
    sel = (np.abs(Y) >= r_exclude) & (omega.values != 0.0)
    w = omega.values[sel] * grid.cell_area
    inv = 1.0 / Y[sel]
    coeffs = np.empty(n_terms, dtype=complex)
    power = inv.copy()
    for k in range(n_terms):
        coeffs[k] = -(1j / TWO_PI) * np.sum(w * power)
        power *= inv
    return coeffs


def evaluate_local_expansion(coeffs, X) -> np.ndarray:
    """``conj(u)`` from local coefficients at complex offsets ``X`` (Horner)."""
    acc = np.zeros_like(np.asarray(X, dtype=complex))
    for b in coeffs[::-1]:
        acc = acc * X + b
    return acc


@dataclass
class FreeSpacePoissonPlan:
    """Precomputed doubled-grid stencils for ``grad_perp Laplacian^{-1}``.

    ``support_margin`` is the fraction of the box side that must stay free of
    vorticity along every edge. The truncated kernel itself is exact for any
    data inside the box; the margin guards the periodic wrap of the spectral
    transport.
    """

    grid: Grid2D
    support_margin: float = 0.0625
    support_threshold: float = 1e-10  # relative to max|omega|
    _k1_hat: np.ndarray = field(init=False, repr=False)
    _k2_hat: np.ndarray = field(init=False, repr=False)
    _psi_hat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N, h = self.grid.N, self.grid.h
        D = N * h
        M = 4 * N
        trunc = 1.5 * D
        k1 = 2 * np.pi * np.fft.fftfreq(M, d=h)[:, None]
        k2 = 2 * np.pi * np.fft.rfftfreq(M, d=h)[None, :]
        kk = np.sqrt(k1 * k1 + k2 * k2)
        with np.errstate(invalid="ignore", divide="ignore"):
            g_hat = (1.0 - special.j0(kk * trunc)) / (kk * kk) - trunc * np.log(trunc) * special.j1(kk * trunc) / kk
        g_hat[0, 0] = 0.25 * trunc**2 - 0.5 * trunc**2 * np.log(trunc)
        k1d = k1.copy()
        k1d[M // 2, 0] = 0.0
        k2d = k2.copy()
        k2d[0, -1] = 0.0
        # psi = (1/2pi) log * omega = -G_trunc * omega
        psi_hat = -g_hat
        stencils = [
            irfft2(1j * k2d * psi_hat, (M, M)),
            irfft2(-1j * k1d * psi_hat, (M, M)),
            irfft2(psi_hat + 0j, (M, M)),
        ]
        window = np.r_[0:N, M - N:M]
        hats = [rfft2(s[np.ix_(window, window)]) for s in stencils]
        self._k1_hat, self._k2_hat, self._psi_hat = hats

    def _check(self, omega: ScalarField) -> None:
        if omega.grid != self.grid:
            raise ValueError("vorticity grid does not match the plan grid")
        if not omega.is_finite():
            raise ValueError("vorticity contains non-finite values")
        n_edge = int(round(self.support_margin * self.grid.N))
        if n_edge > 0:
            v = np.abs(omega.values)
            edge_max = max(v[:n_edge].max(), v[-n_edge:].max(), v[:, :n_edge].max(), v[:, -n_edge:].max())
            if edge_max > self.support_threshold * v.max():
                raise SupportError(
                    f"vorticity {edge_max:.3e} (max {v.max():.3e}) within {self.support_margin} L of the box boundary"
                )

    def _convolve(self, values: np.ndarray, kernel_hat: np.ndarray) -> np.ndarray:
        N = self.grid.N
        padded = np.zeros((2 * N, 2 * N))
        padded[:N, :N] = values
        return irfft2(rfft2(padded) * kernel_hat, (2 * N, 2 * N))[:N, :N]

    def velocity(self, omega: ScalarField, check: bool = True) -> VectorField:
        if check:
            self._check(omega)
        N = self.grid.N
        padded = np.zeros((2 * N, 2 * N))
        padded[:N, :N] = omega.values
        wh = rfft2(padded)
        shape = (2 * N, 2 * N)
        u1 = irfft2(wh * self._k1_hat, shape)[:N, :N]
        u2 = irfft2(wh * self._k2_hat, shape)[:N, :N]
        return VectorField(self.grid, u1, u2)

    def stream_function(self, omega: ScalarField, check: bool = True) -> ScalarField:
        if check:
            self._check(omega)
        return ScalarField(self.grid, self._convolve(omega.values, self._psi_hat))


_PLAN_CACHE: dict = {}


def plan_for(grid: Grid2D, support_margin: float = 0.0625) -> FreeSpacePoissonPlan:
    """Plans depend only on (L, N); they are cached and shared."""
    # the stencil is translation invariant, so the centre does not matter
    key = (grid.L, grid.N, grid.stagger, support_margin)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = FreeSpacePoissonPlan(Grid2D(grid.L, grid.N, stagger=grid.stagger), support_margin)
        _PLAN_CACHE[key] = plan
    if plan.grid != grid:
        shifted = FreeSpacePoissonPlan.__new__(FreeSpacePoissonPlan)
        shifted.__dict__.update(plan.__dict__)
        shifted.grid = grid
        return shifted
    return plan


def free_space_velocity(omega: ScalarField, plan: FreeSpacePoissonPlan | None = None,
                        check: bool = True) -> VectorField:
    if plan is None:
        plan = plan_for(omega.grid)
    return plan.velocity(omega, check)


def direct_velocity(omega: ScalarField, points=None) -> VectorField | np.ndarray:
    """Brute-force midpoint quadrature of ``K * omega``, singular cell skipped.

    Without ``points`` it evaluates at every grid point (O(N^4), small grids
    only); otherwise returns an array of shape (n, 2).
    """
    grid = omega.grid
    x1, x2 = grid.mesh()
    ys = np.stack([x1.ravel(), x2.ravel()], axis=1)
    w = omega.values.ravel() * grid.cell_area
    nz = w != 0
    ys, w = ys[nz], w[nz]
    if points is None:
        targets = np.stack([x1.ravel(), x2.ravel()], axis=1)
    else:
        targets = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.zeros((len(targets), 2))
    for start in range(0, len(targets), 256):
        t = targets[start:start + 256]
        d1 = t[:, None, 0] - ys[None, :, 0]
        d2 = t[:, None, 1] - ys[None, :, 1]
        r2 = d1 * d1 + d2 * d2
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(r2 > 1e-30 * grid.cell_area, w[None, :] / (TWO_PI * r2), 0.0)
        out[start:start + 256, 0] = np.sum(c * d2, axis=1)
        out[start:start + 256, 1] = -np.sum(c * d1, axis=1)
    if points is None:
        return VectorField(grid, out[:, 0].reshape(grid.shape), out[:, 1].reshape(grid.shape))
    return out
