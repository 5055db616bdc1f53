"""Monitored functionals: conserved masses, virial chain, interaction Morawetz
action and its derivative, and the running L^4 space-time norm.

Two-point integrals ``int int f(x - y) g(x) h(y)`` are evaluated as circular
convolutions through the FFT.  Kernels are sampled on the periodic difference
grid, so the discrete sum and the transform route agree to round-off; the
direct O(M^4) sum is kept for small grids as a check.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import Grid2D, VecField, forward_transform, inverse_transform, localized_mass_fraction, norm_l2h, norm_l4l2, quad
from .nonlinearity import quartic_density
from .variational import energy

DEFAULT_PROBES = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
LOCALIZATION_TOL = 1e-6
SHELL_FRACTION = 0.1


# ---------------------------------------------------------------- weights

def _smooth_step(tau: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1."""
    tau = np.clip(tau, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(tau > 0, np.exp(-1.0 / np.where(tau > 0, tau, 1.0)), 0.0)
        f1 = np.where(tau < 1, np.exp(-1.0 / np.where(tau < 1, 1.0 - tau, 1.0)), 0.0)
    return f0 / (f0 + f1)


def periodic_offsets(grid: Grid2D, center=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """``x - center`` wrapped into ``[-L/2, L/2)`` on each axis."""
    X, Y = grid.coords
    L = grid.L
    dx = np.mod(X - center[0] + L / 2, L) - L / 2
    dy = np.mod(Y - center[1] + L / 2, L) - L / 2
    return dx, dy


def edge_window(dx: np.ndarray, dy: np.ndarray, L: float) -> np.ndarray:
    """1 inside, tapering smoothly to 0 across the outer 10% shell of the box."""
    out = np.ones_like(dx)
    for d in (dx, dy):
        s = np.abs(d) / (L / 2)
        out = out * _smooth_step((1.0 - s) / SHELL_FRACTION)
    return out


def _difference_grid(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates ``z`` of the difference grid in FFT index order (z=0 at [0, 0])."""
    z = np.fft.ifftshift(grid.x)
    return tuple(np.meshgrid(z, z, indexing="ij"))


WeightFn = Callable[[np.ndarray, np.ndarray, Grid2D], np.ndarray]


def _weight_abs(zx, zy, grid):
    eps = 2.0 * grid.dx
    return np.sqrt(zx * zx + zy * zy + eps * eps)


def _weight_quadratic(zx, zy, grid):
    return zx * zx + zy * zy


WEIGHTS: dict[str, WeightFn] = {"abs": _weight_abs, "quadratic": _weight_quadratic}


@dataclass(frozen=True)
class MorawetzKernel:
    """Weight ``a`` and the derivatives the identity needs, on the difference grid."""

    grid: Grid2D
    a: np.ndarray
    da: tuple[np.ndarray, np.ndarray]
    dda: tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    lap_a: np.ndarray
    bilap_a: np.ndarray


def morawetz_kernel(grid: Grid2D, weight_choice: Union[str, WeightFn] = "abs") -> MorawetzKernel:
    fn = WEIGHTS[weight_choice] if isinstance(weight_choice, str) else weight_choice
    zx, zy = _difference_grid(grid)
    a = fn(zx, zy, grid) * edge_window(zx, zy, grid.L)
    ah = forward_transform(a, grid)
    kx, ky = grid.k_deriv
    ks = (kx, ky)
    real = lambda fh: inverse_transform(fh, grid).real  # noqa: E731
    da = tuple(real(1j * k * ah) for k in ks)
    dda = tuple(tuple(real(-ki * kj * ah) for kj in ks) for ki in ks)
    kk = kx * kx + ky * ky
    return MorawetzKernel(grid, a, da, dda, real(-kk * ah), real(kk * kk * ah))


# ---------------------------------------------------------------- densities

def _derivs(data: np.ndarray, grid: Grid2D):
    uh = forward_transform(data, grid)
    kx, ky = grid.k_deriv
    return inverse_transform(1j * kx * uh, grid), inverse_transform(1j * ky * uh, grid)


def momentum_density(data: np.ndarray, grid: Grid2D, grads=None) -> tuple[np.ndarray, np.ndarray]:
    """``P = sum_j Im(conj(u_j) grad u_j)``."""
    gx, gy = grads if grads is not None else _derivs(data, grid)
    c = np.conj(data)
    return np.sum((c * gx).imag, axis=0), np.sum((c * gy).imag, axis=0)


def _div(px, py, grid):
    kx, ky = grid.k_deriv
    return inverse_transform(1j * kx * forward_transform(px, grid) + 1j * ky * forward_transform(py, grid), grid).real


def convolve(kernel: np.ndarray, f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``(kernel * f)(x) = sum_y kernel(x - y) f(y) dx^2`` via the FFT."""
    return grid.dx**2 * inverse_transform(forward_transform(kernel, grid) * forward_transform(f, grid), grid).real


def _pair_integral_fft(kernel, fx, gy, grid) -> float:
    return quad(fx * convolve(kernel, gy, grid), grid)


def _pair_integral_direct(kernel, fx, gy, grid) -> float:
    m = grid.M
    if m > 16:
        raise ValueError("direct double-integral oracle is limited to M <= 16")
    idx = np.arange(m)
    d = (idx[:, None] - idx[None, :]) % m
    # K[ix, jx, iy, jy] = kernel[(ix - iy) % m, (jx - jy) % m]
    K = kernel[d[:, None, :, None], d[None, :, None, :]]
    return float(grid.dx**4 * np.einsum("abcd,ab,cd->", K, fx, gy))


@dataclass(frozen=True)
class MorawetzTerms:
    hessian: float
    bilaplacian: float
    nonlinear: float
    momentum: float

    @property
    def total(self) -> float:
        return self.hessian + self.bilaplacian + self.nonlinear + self.momentum


def _morawetz_parts(u: VecField, kernel: MorawetzKernel, pair) -> tuple[float, MorawetzTerms]:
    grid, data = u.grid, u.data
    gx, gy = _derivs(data, grid)
    rho = u.density()
    px, py = momentum_density(data, grid, (gx, gy))
    action = 2.0 * (pair(kernel.da[0], px, rho, grid) + pair(kernel.da[1], py, rho, grid))
    g = (gx, gy)
    hess = 0.0
    for k in range(2):
        for l in range(2):
            t_kl = np.sum((g[k] * np.conj(g[l])).real, axis=0)
            hess += pair(kernel.dda[k][l], t_kl, rho, grid)
    bilap = -pair(kernel.bilap_a, rho, rho, grid)
    nonlin = -pair(kernel.lap_a, quartic_density(data), rho, grid)
    divp = _div(px, py, grid)
    mom = -4.0 * (pair(kernel.da[0], px, divp, grid) + pair(kernel.da[1], py, divp, grid))
    return action, MorawetzTerms(4.0 * hess, bilap, nonlin, mom)


def morawetz_action(u: VecField, weight_choice="abs", kernel: Optional[MorawetzKernel] = None) -> float:
    kernel = kernel or morawetz_kernel(u.grid, weight_choice)
    gx, gy = _derivs(u.data, u.grid)
    px, py = momentum_density(u.data, u.grid, (gx, gy))
    rho = u.density()
    return 2.0 * (
        _pair_integral_fft(kernel.da[0], px, rho, u.grid) + _pair_integral_fft(kernel.da[1], py, rho, u.grid)
    )


def morawetz_derivative(u: VecField, weight_choice="abs", kernel: Optional[MorawetzKernel] = None) -> float:
    return morawetz_terms(u, weight_choice, kernel).total


def morawetz_terms(u: VecField, weight_choice="abs", kernel: Optional[MorawetzKernel] = None) -> MorawetzTerms:
    kernel = kernel or morawetz_kernel(u.grid, weight_choice)
    return _morawetz_parts(u, kernel, _pair_integral_fft)[1]


def morawetz_direct(u: VecField, weight_choice="abs") -> tuple[float, MorawetzTerms]:
    """Same quantities as the FFT route, by explicit O(M^4) summation (M <= 16)."""
    kernel = morawetz_kernel(u.grid, weight_choice)
    return _morawetz_parts(u, kernel, _pair_integral_direct)


def morawetz_fft(u: VecField, weight_choice="abs") -> tuple[float, MorawetzTerms]:
    kernel = morawetz_kernel(u.grid, weight_choice)
    return _morawetz_parts(u, kernel, _pair_integral_fft)


# ---------------------------------------------------------------- virial

@dataclass(frozen=True)
class VirialChain:
    V: float
    V1: float
    sixteenE: float
    localized: bool


def variance_weight(grid: Grid2D, center=(0.0, 0.0)) -> np.ndarray:
    dx, dy = periodic_offsets(grid, center)
    return (dx * dx + dy * dy) * edge_window(dx, dy, grid.L)


def virial_chain(u: VecField, center=(0.0, 0.0)) -> VirialChain:
    """Variance, its first time derivative, and ``16 E``.

    The weight is ``|x - c|^2`` tapered off in the outer shell; its spectral
    gradient is used for the first derivative, which equals ``2 (x - c)``
    wherever the taper is inactive.
    """
    w = variance_weight(u.grid, center)
    wx, wy = _derivs(w[None].astype(complex), u.grid)
    px, py = momentum_density(u.data, u.grid)
    V = quad(w * u.density(), u.grid)
    V1 = 2.0 * quad(wx[0].real * px + wy[0].real * py, u.grid)
    loc = localized_mass_fraction(u, center) >= 1.0 - LOCALIZATION_TOL
    return VirialChain(V, V1, 16.0 * energy(u), bool(loc))


# ---------------------------------------------------------------- scattering norm

class ScatteringAccumulator:
    """Trapezoidal running integral of ``||u(t)||_{L^4 l^2}^4``."""

    def __init__(self):
        self.times: list[float] = []
        self.l4: list[float] = []
        self.accum: list[float] = []

    def update(self, t: float, u: VecField) -> float:
        return self.add(t, norm_l4l2(u))

    def add(self, t: float, l4: float) -> float:
        if self.times and t < self.times[-1]:
            raise ValueError(f"time went backwards: {t} < {self.times[-1]}")
        total = 0.0
        if self.times:
            total = self.accum[-1] + 0.5 * (t - self.times[-1]) * (self.l4[-1] ** 4 + l4**4)
        self.times.append(float(t))
        self.l4.append(float(l4))
        self.accum.append(total)
        return total

    @property
    def total(self) -> float:
        return self.accum[-1] if self.accum else 0.0

    def tail_fraction(self, fraction: float = 0.1) -> float:
        """Share of the integral gained over the last ``fraction`` of the window."""
        if len(self.times) < 2 or self.total == 0:
            return 0.0
        t0, t1 = self.times[0], self.times[-1]
        cut = t1 - fraction * (t1 - t0)
        before = float(np.interp(cut, self.times, self.accum))
        return (self.total - before) / self.total


def dispersion_fit(times: Sequence[float], l4: Sequence[float], window: tuple[float, float]) -> float:
    """Slope of ``log ||u||_{L^4 l^2}`` against ``log t`` over ``window``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(l4, dtype=float)
    lo, hi = window
    if lo <= 0 or hi <= lo:
        raise ValueError(f"bad fit window {window}")
    if len(t) == 0 or lo < t.min() - 1e-12 or hi > t.max() + 1e-12:
        raise ValueError(f"fit window {window} outside data range")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12) & (y > 0)
    if sel.sum() < 2:
        raise ValueError("fewer than two samples in the fit window")
    return float(np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)[0])


# ---------------------------------------------------------------- records

def mass_abc(u: VecField, a: float, b: float, c: float) -> float:
    j = u.labels.astype(float)
    return float(np.sum((a + b * j + c * j * j) * u.component_masses()))


@dataclass
class DiagnosticsRecord:
    t: float
    mass_abc: dict
    l2h_0: float
    l2h_1: float
    l2h_2: float
    energy: float
    variance: float
    virial_v1: float
    morawetz_M: float
    l4_accum: float
    sup_norm: float
    localized: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False, allow_nan=True)


def _probe_key(p) -> str:
    return ",".join(f"{v:g}" for v in p)


@dataclass
class DiagnosticsMonitor:
    """Solver monitor building one record per sample and an optional NDJSON stream."""

    probes: Sequence[tuple] = DEFAULT_PROBES
    center: tuple = (0.0, 0.0)
    weight_choice: Union[str, WeightFn] = "abs"
    stream: Optional[object] = None
    records: list = field(default_factory=list)
    accumulator: ScatteringAccumulator = field(default_factory=ScatteringAccumulator)
    _kernel: Optional[MorawetzKernel] = field(default=None, repr=False)

    def __call__(self, t: float, u: VecField) -> None:
        if self._kernel is None or self._kernel.grid != u.grid:
            self._kernel = morawetz_kernel(u.grid, self.weight_choice)
        vc = virial_chain(u, self.center)
        rec = DiagnosticsRecord(
            t=float(t),
            mass_abc={_probe_key(p): mass_abc(u, *p) for p in self.probes},
            l2h_0=norm_l2h(u, 0),
            l2h_1=norm_l2h(u, 1),
            l2h_2=norm_l2h(u, 2),
            energy=vc.sixteenE / 16.0,
            variance=vc.V,
            virial_v1=vc.V1,
            morawetz_M=morawetz_action(u, kernel=self._kernel),
            l4_accum=self.accumulator.update(t, u),
            sup_norm=u.sup_norm(),
            localized=vc.localized,
        )
        self.records.append(rec)
        if self.stream is not None:
            self.stream.write(rec.to_json() + "\n")

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def second_difference(values: Sequence[float], h: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)


def central_difference(values: Sequence[float], h: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return (v[2:] - v[:-2]) / (2.0 * h)


def relative_drift(values: Sequence[float], duration: float) -> float:
    """``max |v(t) - v(0)| / |v(0)|`` per unit time."""
    v = np.asarray(values, dtype=float)
    if v[0] == 0:
        return float(np.max(np.abs(v - v[0]))) / duration
    return float(np.max(np.abs(v - v[0])) / abs(v[0])) / duration

