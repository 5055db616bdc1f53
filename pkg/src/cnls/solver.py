"""Strang split-step time stepping with exact substeps.

Linear substep: ``u_hat <- exp(-i |k|^2 tau) u_hat``.  Nonlinear substep: since
``conj(u_j) F_j`` is real each ``|u_j|`` is frozen, so the flow is the
pointwise rotation ``u_j <- exp(i dt (2 rho - |u_j|^2)) u_j``.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .core import Grid2D, VecField, forward_transform, inverse_transform, make_grid
from .nonlinearity import dealias_mask

log = logging.getLogger(__name__)

Monitor = Callable[[float, VecField], None]

COMPLETED = "completed"
BLOWUP = "blowup_detected"
ABORTED = "aborted"


@dataclass
class SolverConfig:
    """Time-stepping parameters.

    The blowup threshold on the sup norm is ``blowup_sup_threshold`` when set,
    otherwise ``blowup_sup_factor`` times the initial sup norm.
    """

    t_end: float = 1.0
    dt_max: float = 1e-3
    cfl_constant: float = 0.1
    dt_min: float = 1e-9
    blowup_sup_factor: float = 1e3
    blowup_sup_threshold: Optional[float] = None
    dealias: bool = False
    sample_interval: float = 0.1
    adaptive: bool = True

    def __post_init__(self):
        for name in ("t_end", "dt_max", "cfl_constant", "dt_min", "blowup_sup_factor", "sample_interval"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.blowup_sup_threshold is not None and not self.blowup_sup_threshold > 0:
            raise ValueError("blowup_sup_threshold must be positive")
        if not self.dt_min < self.dt_max:
            raise ValueError(f"dt_min ({self.dt_min}) must be below dt_max ({self.dt_max})")


@dataclass
class EvolutionOutcome:
    status: str
    t_final: float
    steps: int
    final_state: VecField
    blowup_info: Optional[dict] = None
    dt_history: list = field(default_factory=list, repr=False)


def _half_propagator(grid: Grid2D, dt: float) -> np.ndarray:
    return np.exp(-0.5j * dt * grid.k2)


def linear_flow_array(data: np.ndarray, grid: Grid2D, tau: float, mask=None) -> np.ndarray:
    """Exact free evolution over time ``tau`` on a raw array."""
    h = np.exp(-1j * tau * grid.k2)
    if mask is not None:
        h = h * mask
    return inverse_transform(h * forward_transform(data, grid), grid)


def nonlinear_flow_array(data: np.ndarray, dt: float) -> np.ndarray:
    mod2 = data.real**2 + data.imag**2
    return np.exp(1j * dt * (2.0 * np.sum(mod2, axis=0) - mod2)) * data


def strang_step_array(data: np.ndarray, grid: Grid2D, dt: float, mask=None) -> np.ndarray:
    h = _half_propagator(grid, dt)
    data = inverse_transform(h * forward_transform(data, grid), grid)
    data = nonlinear_flow_array(data, dt)
    h2 = h if mask is None else h * mask
    return inverse_transform(h2 * forward_transform(data, grid), grid)


def linear_half_step(u: VecField, dt: float) -> VecField:
    return u.with_data(linear_flow_array(u.data, u.grid, 0.5 * dt))


def nonlinear_step(u: VecField, dt: float) -> VecField:
    return u.with_data(nonlinear_flow_array(u.data, dt))


def strang_step(u: VecField, dt: float, dealias: bool = False) -> VecField:
    mask = dealias_mask(u.grid) if dealias else None
    return u.with_data(strang_step_array(u.data, u.grid, dt, mask))


def stable_dt(data: np.ndarray, cfg: SolverConfig) -> float:
    """Phase-rate step ``cfl / max(2 rho)``, unclamped."""
    rate = 2.0 * float(np.max(np.sum(data.real**2 + data.imag**2, axis=0)))
    return cfg.cfl_constant / rate if rate > 0 else math.inf


def _snapshot(grid: Grid2D, data: np.ndarray, offset: int) -> VecField:
    u = VecField(grid, data.copy(), offset)
    u.data.setflags(write=False)
    return u


def evolve(u0: VecField, cfg: SolverConfig, monitors: Iterable[Monitor] = ()) -> EvolutionOutcome:
    """Integrate from ``t=0`` to ``cfg.t_end``.

    Monitors are called at ``t=0`` and at every multiple of
    ``cfg.sample_interval`` (steps are shortened to land on them exactly), with
    a read-only copy of the state.  The run stops early on a sup-norm blowup,
    on the adaptive step dropping below ``dt_min``, or on a non-finite state.
    """
    monitors = list(monitors)
    grid, offset = u0.grid, u0.offset
    mask = dealias_mask(grid) if cfg.dealias else None
    data = u0.data.copy()
    sup0 = u0.sup_norm()
    threshold = cfg.blowup_sup_threshold or cfg.blowup_sup_factor * sup0
    sup_tail: deque = deque(maxlen=64)
    sup_tail.append((0.0, sup0))
    dt_hist = []

    def notify(t, arr):
        snap = _snapshot(grid, arr, offset)
        for m in monitors:
            m(t, snap)

    notify(0.0, data)
    t, steps, k_sample = 0.0, 0, 1
    n_samples = int(math.floor(cfg.t_end / cfg.sample_interval * (1 + 1e-12)))

    def next_stop():
        if k_sample <= n_samples:
            return min(k_sample * cfg.sample_interval, cfg.t_end)
        return cfg.t_end

    def outcome(status, arr, info=None):
        return EvolutionOutcome(status, t, steps, VecField(grid, arr.copy(), offset), info, dt_hist)

    while t < cfg.t_end:
        if cfg.adaptive:
            dt_free = stable_dt(data, cfg)
            if dt_free < cfg.dt_min:
                log.info("step collapse at t=%.6g (dt=%.3e)", t, dt_free)
                return outcome(BLOWUP, data, {"t_star": t, "reason": "dt_min", "sup_history": list(sup_tail)})
            dt = min(cfg.dt_max, dt_free)
        else:
            dt = cfg.dt_max
        stop = next_stop()
        landing = stop - t <= dt * (1 + 1e-6)
        if landing:
            dt = stop - t
        new = strang_step_array(data, grid, dt, mask)
        if not np.all(np.isfinite(new)):
            log.warning("non-finite state after step %d at t=%.6g", steps + 1, t)
            return outcome(ABORTED, data, {"t_star": t, "reason": "nan", "sup_history": list(sup_tail)})
        data = new
        steps += 1
        t = stop if landing else t + dt
        dt_hist.append(dt)
        sup = float(np.sqrt(np.max(np.sum(data.real**2 + data.imag**2, axis=0))))
        sup_tail.append((t, sup))
        if landing and k_sample <= n_samples and abs(t - k_sample * cfg.sample_interval) <= 1e-9 * cfg.sample_interval:
            notify(t, data)
            k_sample += 1
        elif landing and t >= cfg.t_end:
            notify(t, data)
        if sup > threshold:
            log.info("sup norm %.4g exceeded threshold %.4g at t=%.6g", sup, threshold, t)
            return outcome(BLOWUP, data, {"t_star": t, "reason": "sup_norm", "sup_history": list(sup_tail)})
    return outcome(COMPLETED, data)


def _check_commensurate(xi, grid: Grid2D) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    m = xi * grid.L / (2.0 * np.pi)
    if not np.allclose(m, np.round(m), rtol=0, atol=1e-9):
        raise ValueError(f"boost {tuple(xi)} is not a multiple of 2*pi/L = {2 * np.pi / grid.L}")
    return xi


def translate(u: VecField, shift) -> VecField:
    """Spectral translation ``u(x - shift)``; exact for band-limited data."""
    kx, ky = u.grid.wavenumbers
    phase = np.exp(-1j * (kx * shift[0] + ky * shift[1]))
    return u.with_data(inverse_transform(phase * forward_transform(u.data, u.grid), u.grid))


def galilean_boost(u: VecField, xi, t: float = 0.0) -> VecField:
    """``u_j(x) <- exp(i x.xi - i t |xi|^2) u_j(x - 2 t xi)``."""
    xi = _check_commensurate(xi, u.grid)
    X, Y = u.grid.coords
    shifted = translate(u, 2.0 * t * xi) if t else u
    phase = np.exp(1j * (X * xi[0] + Y * xi[1] - t * float(xi @ xi)))
    return shifted.with_data(phase * shifted.data)


def rescale(u: VecField, lam: float) -> VecField:
    """``u_j <- lam * u_j(lam x)``, realised by relabelling the box ``L -> L/lam``."""
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    if lam == 1:
        return u
    return VecField(make_grid(u.grid.L / lam, u.grid.M), lam * u.data, u.offset)
