"""Periodic grids, spectral transforms, vector fields and the spatial norms.

Every integral in the package is a plain Riemann sum ``dx**2 * sum(...)`` on a
square periodic box ``[-L/2, L/2)^2``; derivatives are spectral.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid2D",
    "VecField",
    "NormReport",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "spectral_l2sq",
    "quad",
    "gradient",
    "laplacian",
    "norm_l2h",
    "norm_l4l2",
    "norm_grad_l2",
    "norm_report",
    "japanese_bracket",
    "localized_mass_fraction",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = b"RNLS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIiIdd")


@dataclass(frozen=True)
class Grid2D:
    """Square periodic box of side ``L`` with ``M`` points per side."""

    L: float
    M: int

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def area(self) -> float:
        return self.L * self.L

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates, ``-L/2 + i*dx``."""
        return (np.arange(self.M) - self.M // 2) * self.dx

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def k(self) -> np.ndarray:
        """1-D wavenumbers in FFT order, ``(2*pi/L) * {0..M/2-1, -M/2..-1}``."""
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.dx)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.k, self.k, indexing="ij"))

    @cached_property
    def k_deriv(self) -> tuple[np.ndarray, np.ndarray]:
        # Nyquist column zeroed for odd derivatives
        kd = self.k.copy()
        kd[self.M // 2] = 0.0
        return tuple(np.meshgrid(kd, kd, indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return kx * kx + ky * ky

    def quad(self, f: np.ndarray) -> float:
        return quad(f, self)


def make_grid(L: float, M: int) -> Grid2D:
    if not np.isfinite(L) or L <= 0:
        raise ValueError(f"box length must be positive, got {L}")
    if int(M) != M or M < 4 or M % 2:
        raise ValueError(f"points per side must be an even integer >= 4, got {M}")
    return Grid2D(float(L), int(M))


def _workers() -> int:
    return sfft.get_workers()


def forward_transform(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Unnormalised 2-D DFT over the last two axes."""
    f = np.asarray(f)
    if f.shape[-2:] != (grid.M, grid.M):
        raise ValueError(f"expected trailing shape {(grid.M, grid.M)}, got {f.shape}")
    return sfft.fft2(f, axes=(-2, -1), workers=_workers())


def inverse_transform(fh: np.ndarray, grid: Grid2D) -> np.ndarray:
    fh = np.asarray(fh)
    if fh.shape[-2:] != (grid.M, grid.M):
        raise ValueError(f"expected trailing shape {(grid.M, grid.M)}, got {fh.shape}")
    return sfft.ifft2(fh, axes=(-2, -1), workers=_workers())


def spectral_l2sq(fh: np.ndarray, grid: Grid2D) -> float:
    """Squared L2 norm recovered from DFT coefficients (Parseval)."""
    return float(grid.area / grid.M**4 * np.sum(np.abs(fh) ** 2))


def quad(f: np.ndarray, grid: Grid2D) -> float:
    """Riemann-sum quadrature over the box; sums over any leading axes too."""
    return float(grid.dx**2 * np.sum(f))


def gradient(f: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    fh = forward_transform(f, grid)
    kx, ky = grid.k_deriv
    return inverse_transform(1j * kx * fh, grid), inverse_transform(1j * ky * fh, grid)


def laplacian(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    return inverse_transform(-grid.k2 * forward_transform(f, grid), grid)


def japanese_bracket(j) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    return np.sqrt(1.0 + j * j)


@dataclass(frozen=True, eq=False)
class VecField:
    """``N`` complex components on a shared grid.

    Component ``i`` carries the label ``j = i + offset`` so that truncations
    ``{-J..J}`` of the infinite system get the right ``<j>`` weights.
    """

    grid: Grid2D
    data: np.ndarray
    offset: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[1:] != (self.grid.M, self.grid.M):
            raise ValueError(
                f"field data must have shape (N, {self.grid.M}, {self.grid.M}), got {data.shape}"
            )
        if data.shape[0] < 1:
            raise ValueError("a field needs at least one component")
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains NaN or Inf samples")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def n_components(self) -> int:
        return self.data.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.n_components) + self.offset

    def with_data(self, data: np.ndarray) -> "VecField":
        return VecField(self.grid, data, self.offset)

    def density(self) -> np.ndarray:
        """Pointwise ``sum_j |u_j|^2``."""
        return np.sum(self.data.real**2 + self.data.imag**2, axis=0)

    def component_masses(self) -> np.ndarray:
        return self.grid.dx**2 * np.sum(np.abs(self.data) ** 2, axis=(1, 2))

    def sup_norm(self) -> float:
        return float(np.sqrt(self.density().max()))

    def __mul__(self, c) -> "VecField":
        return self.with_data(self.data * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid2D, n: int, offset: int = 0) -> "VecField":
        return cls(grid, np.zeros((n, grid.M, grid.M), dtype=np.complex128), offset)


@dataclass(frozen=True)
class NormReport:
    l2h_0: float
    l2h_1: float
    grad_l2: float
    l4l2: float


def norm_l2h(u: VecField, s: float = 0) -> float:
    if s not in (0, 1, 2):
        raise ValueError(f"weighted norm order must be 0, 1 or 2, got {s}")
    w = japanese_bracket(u.labels) ** (2 * s)
    per = u.component_masses()
    return float(np.sqrt(np.sum(w * per)))


def norm_l4l2(u: VecField) -> float:
    return quad(u.density() ** 2, u.grid) ** 0.25


def norm_grad_l2(u: VecField) -> float:
    uh = forward_transform(u.data, u.grid)
    kx, ky = u.grid.k_deriv
    return float(np.sqrt(spectral_l2sq(np.sqrt(kx**2 + ky**2) * uh, u.grid)))


def norm_report(u: VecField) -> NormReport:
    return NormReport(norm_l2h(u, 0), norm_l2h(u, 1), norm_grad_l2(u), norm_l4l2(u))


def localized_mass_fraction(u: VecField, center=(0.0, 0.0)) -> float:
    """Fraction of total mass inside the central half ``|x_i - c_i| < L/4``."""
    X, Y = u.grid.coords
    inside = (np.abs(X - center[0]) < u.grid.L / 4) & (np.abs(Y - center[1]) < u.grid.L / 4)
    rho = u.density()
    total = np.sum(rho)
    if total == 0:
        return 1.0
    return float(np.sum(rho[inside]) / total)


def write_snapshot(path, u: VecField, t: float = 0.0) -> None:
    """Write ``u`` in the little-endian RNLS layout."""
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, u.n_components, u.offset, u.grid.M, u.grid.L, float(t)
    )
    body = np.ascontiguousarray(u.data, dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def read_snapshot(path) -> tuple[VecField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, n, offset, m, L, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 16 * n * m * m
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(n, m, m)
    return VecField(make_grid(L, m), data.astype(np.complex128), offset), t
