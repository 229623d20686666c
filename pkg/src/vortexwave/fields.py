"""Uniform grids, real fields on them, spectral calculus and norms.

Arrays are indexed ``values[i, j]`` with ``i`` along x1 and ``j`` along x2
(``indexing='ij'``). All spectral operators treat the grid as periodic;
callers keep their data compactly supported (or Gaussian-decaying) well
inside the box so the periodic extension is harmless.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

# scipy.fft worker count; 1 is the bitwise-reproducible reference mode.
_WORKERS = 1


def set_workers(n: int) -> None:
    global _WORKERS
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _WORKERS = int(n)


def get_workers() -> int:
    return _WORKERS


def rfft2(a):
    return sfft.rfft2(a, workers=_WORKERS)


def irfft2(a, shape):
    return sfft.irfft2(a, s=shape, workers=_WORKERS)


@dataclass(frozen=True)
class Grid2D:
    """Square N x N grid of side ``L``.

    Points sit at ``center - L/2 + (i + stagger) * h``. The default
    ``stagger=0.5`` gives the cell-centred covering of ``[-L/2, L/2)^2``;
    ``stagger=0`` puts a node exactly on ``center`` (used by the
    self-similar core grids).
    """

    L: float
    N: int
    center: tuple[float, float] = (0.0, 0.0)
    stagger: float = 0.5

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"grid extent must be positive, got L={self.L}")
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    def axis(self, d: int) -> np.ndarray:
        return self.center[d] - 0.5 * self.L + (np.arange(self.N) + self.stagger) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def radius(self, point=(0.0, 0.0)) -> np.ndarray:
        x1, x2 = self.mesh()
        return np.hypot(x1 - point[0], x2 - point[1])

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers broadcastable against an rfft2 array."""
        k1 = 2 * np.pi * sfft.fftfreq(self.N, d=self.h)
        k2 = 2 * np.pi * sfft.rfftfreq(self.N, d=self.h)
        return k1[:, None], k2[None, :]

    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        # the Nyquist mode has no odd-derivative partner, zero it
        k1, k2 = self.wavenumbers()
        k1 = k1.copy()
        k2 = k2.copy()
        k1[self.N // 2, 0] = 0.0
        k2[0, -1] = 0.0
        return k1, k2

    def dealias_mask(self) -> np.ndarray:
        m1 = np.abs(sfft.fftfreq(self.N, d=1.0 / self.N))[:, None]
        m2 = sfft.rfftfreq(self.N, d=1.0 / self.N)[None, :]
        cut = self.N / 3.0
        return (m1 < cut) & (m2 < cut)

    def contains(self, points, margin: float = 0.0) -> bool:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        lo0, lo1 = self.axis(0)[0] + margin, self.axis(1)[0] + margin
        hi0, hi1 = self.axis(0)[-1] - margin, self.axis(1)[-1] - margin
        return bool(np.all((p[:, 0] >= lo0) & (p[:, 0] <= hi0) & (p[:, 1] >= lo1) & (p[:, 1] <= hi1)))


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid2D, func) -> "ScalarField":
        x1, x2 = grid.mesh()
        return cls(grid, func(x1, x2))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, c * self.values)


@dataclass
class VectorField:
    grid: Grid2D
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != self.grid.shape or self.u2.shape != self.grid.shape:
            raise ValueError("vector components must match the grid shape")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "VectorField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u1, self.u2)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2)))

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_grid(self.grid, other.grid)
        return VectorField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def scaled(self, c: float) -> "VectorField":
        return VectorField(self.grid, c * self.u1, c * self.u2)


def _same_grid(a: Grid2D, b: Grid2D) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lp_norm(f, p: float) -> float:
    """Midpoint-rule L^p norm; ``p=np.inf`` gives the max norm.

    ``f`` may be a ScalarField or a VectorField (pointwise Euclidean length).
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    grid = f.grid
    a = np.abs(f.values) if isinstance(f, ScalarField) else f.magnitude()
    if np.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum() * grid.cell_area)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * grid.cell_area))
    return float((np.sum(a**p) * grid.cell_area) ** (1.0 / p))


def lp_intersection_norm(f) -> float:
    """``||f||_4 + ||f||_{4/3}``."""
    return lp_norm(f, 4) + lp_norm(f, 4.0 / 3.0)


def spectral_energy(f: ScalarField) -> float:
    """``sum |f|^2 h^2`` evaluated on the Fourier side."""
    fh = sfft.fft2(f.values, workers=_WORKERS)
    return float(np.sum(np.abs(fh) ** 2) * f.grid.cell_area / f.values.size)


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------

def spectral_gradient(f: ScalarField) -> VectorField:
    grid = f.grid
    k1, k2 = grid.derivative_wavenumbers()
    fh = rfft2(f.values)
    return VectorField(grid, irfft2(1j * k1 * fh, grid.shape), irfft2(1j * k2 * fh, grid.shape))


def spectral_laplacian(f: ScalarField) -> ScalarField:
    grid = f.grid
    k1, k2 = grid.wavenumbers()
    fh = rfft2(f.values)
    return ScalarField(grid, irfft2(-(k1 * k1 + k2 * k2) * fh, grid.shape))


def spectral_divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    k1, k2 = grid.derivative_wavenumbers()
    out = 1j * k1 * rfft2(v.u1) + 1j * k2 * rfft2(v.u2)
    return ScalarField(grid, irfft2(out, grid.shape))


def spectral_curl(v: VectorField) -> ScalarField:
    """Vorticity ``d2 u1 - d1 u2`` (the sign convention of u = K * omega)."""
    grid = v.grid
    k1, k2 = grid.derivative_wavenumbers()
    out = 1j * k2 * rfft2(v.u1) - 1j * k1 * rfft2(v.u2)
    return ScalarField(grid, irfft2(out, grid.shape))


def dealias(f: ScalarField) -> ScalarField:
    grid = f.grid
    return ScalarField(grid, irfft2(rfft2(f.values) * grid.dealias_mask(), grid.shape))


def flux_divergence_hat(grid: Grid2D, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Spectrum of the dealiased ``div(q)``; the k=0 mode is exactly zero."""
    k1, k2 = grid.derivative_wavenumbers()
    mask = grid.dealias_mask()
    return (1j * k1 * rfft2(q1) + 1j * k2 * rfft2(q2)) * mask


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def _index_coords(grid: Grid2D, points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    i = (p[..., 0] - grid.axis(0)[0]) / grid.h
    j = (p[..., 1] - grid.axis(1)[0]) / grid.h
    return np.stack([i, j])


def sample(values: np.ndarray, grid: Grid2D, points) -> np.ndarray:
    """Bicubic (cubic B-spline) interpolation of grid data at ``points``.

    ``points`` has shape (..., 2); the result has shape ``points.shape[:-1]``.
    """
    coords = _index_coords(grid, points)
    flat = coords.reshape(2, -1)
    out = ndimage.map_coordinates(values, flat, order=3, mode="mirror", prefilter=True)
    return out.reshape(coords.shape[1:])


def sample_vector(v: VectorField, point) -> np.ndarray:
    p = np.asarray(point, dtype=float).reshape(1, 2)
    return np.array([sample(v.u1, v.grid, p)[0], sample(v.u2, v.grid, p)[0]])


def fourier_shift(values: np.ndarray, grid: Grid2D, shift) -> np.ndarray:
    """Trigonometric interpolant evaluated at ``x + shift`` on the same grid."""
    k1, k2 = grid.wavenumbers()
    fh = rfft2(values)
    # the Nyquist rows carry no well-defined phase; drop them
    keep = np.ones(fh.shape)
    keep[grid.N // 2, :] = 0.0
    keep[:, -1] = 0.0
    phase = np.exp(1j * (k1 * shift[0] + k2 * shift[1]))
    return irfft2(fh * phase * keep, grid.shape)


# ---------------------------------------------------------------------------
# snapshot files
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<Iddd")


def write_snapshot(path, f: ScalarField, t: float, nu: float) -> None:
    """Flat little-endian file: {u32 N, f64 L, f64 t, f64 nu} + N^2 f64 row-major."""
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.N, grid.L, float(t), float(nu)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


@dataclass
class Snapshot:
    field: ScalarField
    t: float
    nu: float


def read_snapshot(path, center=(0.0, 0.0), stagger: float = 0.5) -> Snapshot:
    raw = Path(path).read_bytes()
    N, L, t, nu = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != N * N:
        raise ValueError(f"snapshot body has {body.size} values, expected {N * N}")
    grid = Grid2D(L, N, center=center, stagger=stagger)
    return Snapshot(ScalarField(grid, body.reshape(N, N).astype(float)), t, nu)
