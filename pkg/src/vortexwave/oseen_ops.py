"""Lamb-Oseen vortex, the linearized operators around it, and the
vortex-wave reaction terms in the self-similar variable ``xi``.

Conventions: ``xi = r e^{i theta}``; ``a_perp = (a2, -a1)``. A mode-n field
``a(r) cos(n theta) + b(r) sin(n theta)`` is carried as the complex profile
``Z(r) = a(r) - i b(r)`` so that the field equals ``Re(Z e^{i n theta})``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import interpolate

from .biot_savart import evaluate_local_expansion, local_expansion, plan_for
from .fields import Grid2D, ScalarField, VectorField, irfft2, rfft2, sample, spectral_gradient

FOUR_PI = 4.0 * np.pi
SIXTEEN_PI2 = 16.0 * np.pi**2

DEFAULT_XI_GRID = Grid2D(32.0, 256, stagger=0.0)
# beyond ~10 the weight e^{|xi|^2/4} lifts double-precision round-off above 1e-6
DEFAULT_R_CUT = 10.0


class DecayError(ValueError):
    """A field does not decay inside the xi box (weighted norms would be meaningless)."""


class EllipticSolveError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Oseen profile
# ---------------------------------------------------------------------------

def oseen_G(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    r2 = xi[..., 0] ** 2 + xi[..., 1] ** 2
    return np.exp(-0.25 * r2) / FOUR_PI


def oseen_vG(xi) -> np.ndarray:
    """Oseen velocity, extended by 0 at the origin."""
    xi = np.asarray(xi, dtype=float)
    r2 = xi[..., 0] ** 2 + xi[..., 1] ** 2
    omega = _angular_velocity(r2)
    return np.stack([omega * xi[..., 1], -omega * xi[..., 0]], axis=-1)


def _angular_velocity(r2):
    """``(1 - e^{-r^2/4}) / (2 pi r^2)``, smooth through r = 0."""
    r2 = np.asarray(r2, dtype=float)
    small = r2 < 1e-6
    safe = np.where(small, 1.0, r2)
    out = -np.expm1(-0.25 * safe) / (2 * np.pi * safe)
    return np.where(small, (0.25 - r2 / 32.0) / (2 * np.pi), out)


def G_field(grid: Grid2D) -> ScalarField:
    x1, x2 = grid.mesh()
    c = grid.center
    return ScalarField(grid, np.exp(-0.25 * ((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2)) / FOUR_PI)


def vG_field(grid: Grid2D) -> VectorField:
    x1, x2 = grid.mesh()
    d1, d2 = x1 - grid.center[0], x2 - grid.center[1]
    om = _angular_velocity(d1 * d1 + d2 * d2)
    return VectorField(grid, om * d2, -om * d1)


# ---------------------------------------------------------------------------
# operators on the xi grid
# ---------------------------------------------------------------------------

def check_decay(w: ScalarField, rel: float = 1e-12, band: int | None = None) -> None:
    v = np.abs(w.values)
    vmax = v.max()
    if vmax == 0:
        return
    b = band or max(1, w.grid.N // 32)
    edge = max(v[:b].max(), v[-b:].max(), v[:, :b].max(), v[:, -b:].max())
    if edge > rel * vmax:
        raise DecayError(f"field does not decay inside the xi box: edge/max = {edge / vmax:.2e}")


def _xi(grid: Grid2D):
    x1, x2 = grid.mesh()
    return x1 - grid.center[0], x2 - grid.center[1]


def apply_calL(w: ScalarField, check: bool = True) -> ScalarField:
    """``Laplacian w + (1/2) xi . grad w + w``."""
    if check:
        check_decay(w)
    grid = w.grid
    k1, k2 = grid.wavenumbers()
    k1d, k2d = grid.derivative_wavenumbers()
    wh = rfft2(w.values)
    lap = irfft2(-(k1 * k1 + k2 * k2) * wh, grid.shape)
    g1 = irfft2(1j * k1d * wh, grid.shape)
    g2 = irfft2(1j * k2d * wh, grid.shape)
    x1, x2 = _xi(grid)
    drift = 0.5 * (x1 * g1 + x2 * g2)
    mask = grid.dealias_mask()
    drift = irfft2(rfft2(drift) * mask, grid.shape)
    return ScalarField(grid, lap + drift + w.values)


def apply_Lambda(w: ScalarField, check: bool = True) -> ScalarField:
    """``v^G . grad w + v . grad G`` with ``v = K * w``."""
    if check:
        check_decay(w)
    grid = w.grid
    gw = spectral_gradient(w)
    vg = vG_field(grid)
    v = plan_for(grid, support_margin=0.0).velocity(w)
    x1, x2 = _xi(grid)
    G = np.exp(-0.25 * (x1 * x1 + x2 * x2)) / FOUR_PI
    out = vg.u1 * gw.u1 + vg.u2 * gw.u2 - 0.5 * G * (x1 * v.u1 + x2 * v.u2)
    out = irfft2(rfft2(out) * grid.dealias_mask(), grid.shape)
    return ScalarField(grid, out)


def weight_p(grid: Grid2D) -> np.ndarray:
    x1, x2 = _xi(grid)
    return np.exp(0.25 * (x1 * x1 + x2 * x2))


def l2p_inner(a: ScalarField, b: ScalarField, r_cut: float = DEFAULT_R_CUT) -> float:
    """Truncated ``int a b e^{|xi|^2/4} dxi`` over ``|xi| <= r_cut``."""
    grid = a.grid
    x1, x2 = _xi(grid)
    r2 = x1 * x1 + x2 * x2
    sel = r2 <= r_cut * r_cut
    return float(np.sum(a.values[sel] * b.values[sel] * np.exp(0.25 * r2[sel])) * grid.cell_area)


# ---------------------------------------------------------------------------
# radial mode profiles and the elliptic solve
# ---------------------------------------------------------------------------

@dataclass
class OseenModeProfile:
    """``a(r) cos(n theta) + b(r) sin(n theta)`` for one angular mode.

    Either sampled (``r``, ``a``, ``b``; quintic-spline interpolated, zero
    outside the sampled range) or analytic via ``func(r) -> (a, b)``. The
    quintic keeps the third derivatives the operators see continuous; a cubic
    spline's jumps there limit residuals to ~1e-6 at typical sample spacing.
    """

    n: int
    r: np.ndarray | None = None
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    func: Callable | None = None

    def __post_init__(self):
        if self.func is None:
            if self.r is None or self.a is None or self.b is None:
                raise ValueError("profile needs samples (r, a, b) or an analytic func")
            self.r = np.asarray(self.r, dtype=float)
            self.a = np.asarray(self.a, dtype=float)
            self.b = np.asarray(self.b, dtype=float)
            if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
                raise ValueError("profile coefficients must be finite")
            if self.r.size < 2 or np.any(np.diff(self.r) <= 0):
                raise ValueError("profile radii must be increasing with at least 2 samples")
            k = min(5, self.r.size - 1)
            self._sa = interpolate.make_interp_spline(self.r, self.a, k=k)
            self._sb = interpolate.make_interp_spline(self.r, self.b, k=k)

    def coefficients(self, r) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        if self.func is not None:
            a, b = self.func(r)
            return np.broadcast_to(a, r.shape).astype(float), np.broadcast_to(b, r.shape).astype(float)
        inside = (r >= self.r[0]) & (r <= self.r[-1])
        a = np.where(inside, self._sa(np.clip(r, self.r[0], self.r[-1])), 0.0)
        b = np.where(inside, self._sb(np.clip(r, self.r[0], self.r[-1])), 0.0)
        return a, b

    def complex_profile(self, r) -> np.ndarray:
        a, b = self.coefficients(r)
        return a - 1j * b

    def on_grid(self, grid: Grid2D) -> ScalarField:
        x1, x2 = _xi(grid)
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        a, b = self.coefficients(r)
        return ScalarField(grid, a * np.cos(self.n * th) + b * np.sin(self.n * th))

    def scaled(self, c: float) -> "OseenModeProfile":
        if self.func is not None:
            f = self.func
            return OseenModeProfile(self.n, func=lambda r: tuple(c * x for x in f(r)))
        return OseenModeProfile(self.n, self.r, c * self.a, c * self.b)


def gaussian_profile(n: int, a_coef: float, b_coef: float, power: int | None = None) -> OseenModeProfile:
    """``(a_coef cos n theta + b_coef sin n theta) r^power e^{-r^2/4}``."""
    k = n if power is None else power

    def f(r):
        e = r**k * np.exp(-0.25 * r * r)
        return a_coef * e, b_coef * e

    return OseenModeProfile(n, func=f)


def _cheb(n: int):
    """Chebyshev points x_j = cos(pi j / n) and the differentiation matrix."""
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D = D - np.diag(D.sum(axis=1))
    return x, D


@dataclass
class RadialSolution:
    """Complex radial profiles ``W_n`` on the folded Chebyshev nodes."""

    nodes: np.ndarray  # all 2M Chebyshev nodes on [-R, R]
    profiles: dict  # n -> complex values at the M positive nodes
    R: float

    def evaluate(self, n: int, r) -> np.ndarray:
        W = self.profiles[n]
        s = (-1) ** n
        full = np.concatenate([W, s * W[::-1]])
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        inside = r <= self.R
        rr = r[inside]
        # closed-form Chebyshev weights; scipy would otherwise draw a random node order
        n = self.nodes.size - 1
        wi = (-1.0) ** np.arange(n + 1)
        wi[0] *= 0.5
        wi[-1] *= 0.5
        bary = interpolate.BarycentricInterpolator(self.nodes, wi=wi)
        bary.set_yi(full.real)
        re = bary(rr)
        bary.set_yi(full.imag)
        im = bary(rr)
        out[inside] = re + 1j * im
        return out

    def on_grid(self, grid: Grid2D) -> ScalarField:
        x1, x2 = _xi(grid)
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        total = np.zeros(grid.shape)
        for n in self.profiles:
            total += np.real(self.evaluate(n, r) * np.exp(1j * n * th))
        return ScalarField(grid, total)

    def __add__(self, other: "RadialSolution") -> "RadialSolution":
        prof = dict(self.profiles)
        for n, W in other.profiles.items():
            prof[n] = prof[n] + W if n in prof else W
        return RadialSolution(self.nodes, prof, self.R)


def solve_modes(nu: float, rhs: Sequence[OseenModeProfile], R_max: float = 16.0, n_cheb: int = 160) -> RadialSolution:
    """Solve ``Lambda w + nu (1 - calL) w = z`` mode by mode.

    Each mode couples the vorticity profile W and its stream function Psi
    (``Psi'' + Psi'/r - n^2 Psi/r^2 = W``). Discretized by Chebyshev
    collocation on [-R, R] folded by parity; W(R) = 0 and Psi decays like
    r^-n beyond R.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if n_cheb % 2:
        raise ValueError("n_cheb must be even (no node at r = 0)")
    x, D = _cheb(n_cheb - 1)
    x = R_max * x
    D = D / R_max
    D2 = D @ D
    M = n_cheb // 2
    r = x[:M]
    by_mode: dict[int, np.ndarray] = {}
    for prof in rhs:
        if prof.n not in (2, 3):
            raise ValueError(f"right-hand side mode {prof.n} outside {{2, 3}}")
        z = prof.complex_profile(r)
        by_mode[prof.n] = by_mode.get(prof.n, 0) + z
    out = {}
    for n, z in by_mode.items():
        s = (-1) ** n
        D1 = D[:M, :M] + s * D[:M, M:][:, ::-1]
        D2f = D2[:M, :M] + s * D2[:M, M:][:, ::-1]
        r2 = r * r
        om = _angular_velocity(r2)
        G = np.exp(-0.25 * r2) / FOUR_PI
        I = np.eye(M)
        # nu (1 - calL_n) W = -nu (W'' + (1/r + r/2) W' - n^2 W / r^2)
        diff = -nu * (D2f + np.diag(1.0 / r + 0.5 * r) @ D1 - np.diag(n * n / r2))
        A11 = diff - 1j * n * np.diag(om)
        A12 = -1j * n * np.diag(0.5 * G)
        A21 = -I.astype(complex)
        A22 = (D2f + np.diag(1.0 / r) @ D1 - np.diag(n * n / r2)).astype(complex)
        A = np.block([[A11, A12], [A21, A22]])
        b = np.concatenate([z, np.zeros(M)]).astype(complex)
        # boundary rows at r = R (node 0)
        A[0, :] = 0.0
        A[0, 0] = 1.0
        b[0] = 0.0
        A[M, :] = 0.0
        A[M, M:] = D1[0] + (n / R_max) * I[0]
        b[M] = 0.0
        try:
            sol = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise EllipticSolveError(f"radial solve failed for mode {n}: {exc}") from exc
        if not np.all(np.isfinite(sol)):
            raise EllipticSolveError(f"radial solve produced non-finite values for mode {n}")
        out[n] = sol[:M]
    return RadialSolution(x, out, R_max)


def solve_elliptic(nu: float, rhs: Sequence[OseenModeProfile], xi_grid: Grid2D = DEFAULT_XI_GRID, **kw) -> ScalarField:
    if not rhs:
        return ScalarField.zeros(xi_grid)
    return solve_modes(nu, rhs, **kw).on_grid(xi_grid)


def elliptic_residual(nu: float, w: ScalarField, z: ScalarField) -> ScalarField:
    lam = apply_Lambda(w, check=False)
    calL = apply_calL(w, check=False)
    return ScalarField(w.grid, lam.values + nu * (w.values - calL.values) - z.values)


def fit_gaussian_decay(w: ScalarField, r_min: float = 3.0, r_max: float = 10.0) -> float:
    """Exponent gamma in ``max_theta |w| ~ C r^k e^{-gamma r^2 / 4}``."""
    x1, x2 = _xi(w.grid)
    r = np.hypot(x1, x2)
    edges = np.arange(r_min, r_max + 1e-12, 0.5)
    rs, env = [], []
    a = np.abs(w.values)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        m = a[sel].max() if np.any(sel) else 0.0
        if m > 0:
            rs.append(0.5 * (lo + hi))
            env.append(m)
    rs, env = np.array(rs), np.array(env)
    if len(rs) < 4:
        raise ValueError("not enough nonzero samples to fit a decay rate")
    A = np.stack([np.ones_like(rs), np.log(rs), -0.25 * rs * rs], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(env), rcond=None)
    return float(coef[2])


# ---------------------------------------------------------------------------
# vortex-wave reaction terms
# ---------------------------------------------------------------------------

@dataclass
class MomentCoefficients:
    """``alpha_n + ... = int cos(n phi) / |d|^n omega``, ``beta_n`` with sin,
    where ``d = ztilde - y`` and ``phi = arg d``."""

    alpha2: float
    beta2: float
    alpha3: float
    beta3: float

    @classmethod
    def zero(cls) -> "MomentCoefficients":
        return cls(0.0, 0.0, 0.0, 0.0)

    def is_zero(self) -> bool:
        return self.alpha2 == self.beta2 == self.alpha3 == self.beta3 == 0.0


def compute_moments(omega: ScalarField, ztilde, d_min: float, threshold: float = 1e-10) -> MomentCoefficients:
    """Midpoint quadrature of the mode-2/3 moments of ``omega`` seen from ``ztilde``."""
    grid = omega.grid
    x1, x2 = grid.mesh()
    d = (ztilde[0] - x1) + 1j * (ztilde[1] - x2)
    vmax = np.abs(omega.values).max()
    if vmax == 0:
        return MomentCoefficients.zero()
    near = np.abs(d) < d_min
    if np.any(np.abs(omega.values[near]) > threshold * vmax):
        raise ValueError(f"vorticity support within {d_min} of the vortex; moments are singular")
    sel = (~near) & (omega.values != 0.0)
    w = omega.values[sel] * grid.cell_area
    # sum omega d^-n = sum omega |d|^-n e^{-i n phi} = alpha_n - i beta_n
    m2 = np.sum(w / d[sel] ** 2)
    m3 = np.sum(w / d[sel] ** 3)
    return MomentCoefficients(float(m2.real), float(-m2.imag), float(m3.real), float(-m3.imag))


def A0_profiles(m: MomentCoefficients, nu: float, t: float) -> list[OseenModeProfile]:
    """Mode profiles of A0, with the oriented angle ``psi = arg(ztilde - y) - arg(xi)``."""
    s = np.sqrt(nu * t)
    c = 1.0 / SIXTEEN_PI2
    return [
        gaussian_profile(2, c * m.beta2, -c * m.alpha2, power=2),
        gaussian_profile(3, -c * s * m.beta3, c * s * m.alpha3, power=3),
    ]


def build_A0(m: MomentCoefficients, nu: float, t: float, xi_grid: Grid2D = DEFAULT_XI_GRID) -> ScalarField:
    total = np.zeros(xi_grid.shape)
    for prof in A0_profiles(m, nu, t):
        total += prof.on_grid(xi_grid).values
    return ScalarField(xi_grid, total)


def build_R1(vE_tilde: VectorField | None, ztilde, nu: float, t: float, xi_grid: Grid2D = DEFAULT_XI_GRID,
             omega_tilde: ScalarField | None = None, n_terms: int = 24, r_exclude: float | None = None) -> ScalarField:
    """``(1/s) (v(ztilde + s xi) - v(ztilde)) . grad G`` with ``s = sqrt(nu t)``.

    With ``omega_tilde`` the velocity difference comes from the harmonic
    local expansion of ``K * omega_tilde`` about ``ztilde`` (exact up to
    quadrature); otherwise ``vE_tilde`` is sampled bicubically.
    """
    s = np.sqrt(nu * t)
    x1, x2 = _xi(xi_grid)
    G = np.exp(-0.25 * (x1 * x1 + x2 * x2)) / FOUR_PI
    if omega_tilde is not None:
        if r_exclude is None:
            r_exclude = 0.5 * _support_distance(omega_tilde, ztilde)
        coeffs = local_expansion(omega_tilde, ztilde, n_terms, r_exclude)
        X = s * (x1 + 1j * x2)
        ok = np.abs(X) < 0.9 * r_exclude
        dubar = np.where(ok, evaluate_local_expansion(coeffs, np.where(ok, X, 0)) - coeffs[0], 0.0)
        d1, d2 = dubar.real, -dubar.imag
    else:
        pts = np.stack([ztilde[0] + s * x1, ztilde[1] + s * x2], axis=-1)
        phys = vE_tilde.grid
        keep = np.abs(G) > 1e-300
        if not phys.contains(pts[keep]):
            raise ValueError("xi box maps outside the physical grid")
        v1 = sample(vE_tilde.u1, phys, pts)
        v2 = sample(vE_tilde.u2, phys, pts)
        z = np.array([[ztilde[0], ztilde[1]]])
        d1 = v1 - sample(vE_tilde.u1, phys, z)[0]
        d2 = v2 - sample(vE_tilde.u2, phys, z)[0]
    # grad G = -(xi/2) G
    return ScalarField(xi_grid, -(0.5 / s) * G * (d1 * x1 + d2 * x2))


def _support_distance(omega: ScalarField, point, rel: float = 1e-10) -> float:
    v = np.abs(omega.values)
    if v.max() == 0:
        return np.inf
    r = omega.grid.radius(point)
    return float(r[v > rel * v.max()].min())


def build_w2a(m: MomentCoefficients, nu: float, t: float, xi_grid: Grid2D = DEFAULT_XI_GRID, **kw) -> ScalarField:
    """Solve ``Lambda w + nu (1 - calL) w = -A0``."""
    if m.is_zero():
        return ScalarField.zeros(xi_grid)
    rhs = [p.scaled(-1.0) for p in A0_profiles(m, nu, t)]
    return solve_elliptic(nu, rhs, xi_grid, **kw)


def build_w2a_modes(m: MomentCoefficients, nu: float, t: float, **kw) -> RadialSolution | None:
    if m.is_zero():
        return None
    return solve_modes(nu, [p.scaled(-1.0) for p in A0_profiles(m, nu, t)], **kw)


# ---------------------------------------------------------------------------
# series identity
# ---------------------------------------------------------------------------

def series_inverse_square(z1: complex, z2: complex, n_terms: int) -> float:
    """Partial sum of ``1/|z1+z2|^2 - 1/|z2|^2`` in powers of ``|z1/z2|``.

    ``sin((n+1) psi) / sin(psi)`` is the Chebyshev polynomial U_n(cos psi),
    evaluated by its three-term recurrence.
    """
    z1, z2 = complex(z1), complex(z2)
    if not abs(z1) < abs(z2):
        raise ValueError("series requires |z1| < |z2|")
    if z1 == 0:
        return 0.0
    q = z1 / z2
    r = abs(q)
    c = q.real / r
    u_prev, u = 1.0, 2.0 * c
    total = 0.0
    rn = 1.0
    for n in range(1, n_terms + 1):
        rn *= -r
        total += rn * u
        u_prev, u = u, 2.0 * c * u - u_prev
    return total / abs(z2) ** 2
