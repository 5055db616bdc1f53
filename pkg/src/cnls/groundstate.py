"""Townes profile ``Q`` (``Lap Q - Q + Q^3 = 0``) and the symmetric vector state.

Two independent routes: a Petviashvili fixed point on the periodic grid and
radial shooting on the ODE ``Q'' + Q'/r - Q + Q^3 = 0``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    Grid2D,
    VecField,
    forward_transform,
    inverse_transform,
    laplacian,
    quad,
    spectral_l2sq,
)
from .nonlinearity import apply_nonlinearity

log = logging.getLogger(__name__)

PETVIASHVILI_EXPONENT = 1.5


class GroundStateError(RuntimeError):
    """Raised when an iteration fails; carries the iterate history."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history or [])


@dataclass
class GroundState:
    """Scalar ground state plus the integrals every other module needs.

    ``residual`` is the sup norm of ``Lap Q - Q + Q^3`` for the grid method and
    the tail mismatch ``|Q| + |Q'|`` at the truncation radius for shooting.
    """

    profile: Optional[VecField]
    mass2: float
    grad2: float
    l4pow4: float
    residual: float
    method: str
    peak: float
    iterations: int = 0
    radial: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    @property
    def pohozaev_grad(self) -> float:
        return self.grad2 / self.mass2

    @property
    def pohozaev_l4(self) -> float:
        return self.l4pow4 / (2.0 * self.mass2)

    def scalars(self) -> dict:
        return {
            "method": self.method,
            "mass2": self.mass2,
            "grad2": self.grad2,
            "l4pow4": self.l4pow4,
            "residual": self.residual,
            "peak": self.peak,
            "iterations": self.iterations,
            "pohozaev_grad": self.pohozaev_grad,
            "pohozaev_l4": self.pohozaev_l4,
        }


@dataclass
class VectorGroundState:
    N: int
    components: VecField
    el_residual: np.ndarray

    @property
    def mass2(self) -> float:
        return float(np.sum(self.components.component_masses()))


def gs_residual(q: np.ndarray, grid: Grid2D) -> np.ndarray:
    return laplacian(q, grid).real - q + q**3


def _finish(q: np.ndarray, grid: Grid2D, iterations: int, history) -> GroundState:
    qh = forward_transform(q, grid)
    kx, ky = grid.k_deriv
    return GroundState(
        profile=VecField(grid, q[None].astype(np.complex128)),
        mass2=quad(q * q, grid),
        grad2=spectral_l2sq(np.sqrt(kx**2 + ky**2) * qh, grid),
        l4pow4=quad(q**4, grid),
        residual=float(np.abs(gs_residual(q, grid)).max()),
        method="petviashvili",
        peak=float(q.max()),
        iterations=iterations,
        history=list(history),
    )


def petviashvili_step(q: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, float]:
    """One stabilised update ``Q <- S^(3/2) (1 - Lap)^-1 [Q^3]``; returns (Q, S)."""
    symbol = 1.0 + grid.k2
    qh = forward_transform(q, grid)
    nh = forward_transform(q**3, grid)
    num = np.sum(symbol * np.abs(qh) ** 2)
    den = np.sum((np.conj(qh) * nh).real)
    if den <= 0 or not np.isfinite(den):
        raise GroundStateError("Petviashvili stabilising factor undefined (iterate collapsed)")
    s = float(num / den)
    q_new = inverse_transform(s**PETVIASHVILI_EXPONENT * nh / symbol, grid).real
    return q_new, s


def solve_townes_petviashvili(
    grid: Grid2D,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: Optional[np.ndarray] = None,
) -> GroundState:
    if grid.L < 20 or grid.dx > 0.25:
        warnings.warn(
            f"grid L={grid.L}, dx={grid.dx} may not resolve the Townes profile "
            "(recommended L >= 20, dx <= 0.25)",
            stacklevel=2,
        )
    X, Y = grid.coords
    q = np.exp(-(X**2 + Y**2) / 2) if seed is None else np.asarray(seed, dtype=float).copy()
    history = []
    for it in range(1, max_iter + 1):
        q_new, s = petviashvili_step(q, grid)
        diff = float(np.abs(q_new - q).max())
        history.append({"iteration": it, "factor": s, "sup_diff": diff})
        q = q_new
        if not np.isfinite(diff) or q.max() < 1e-12 or s > 1e12:
            raise GroundStateError(f"Petviashvili iterate collapsed at iteration {it}", history)
        if diff < tol:
            log.debug("Petviashvili converged in %d iterations", it)
            return _finish(q, grid, it, history)
    raise GroundStateError(
        f"Petviashvili did not converge within {max_iter} iterations "
        f"(last sup difference {history[-1]['sup_diff']:.3e})",
        history,
    )


def _radial_rhs(r, y):
    q, dq = y[0], y[1]
    two_pi_r = 2.0 * np.pi * r
    return [dq, -dq / r + q - q**3, two_pi_r * q * q, two_pi_r * dq * dq, two_pi_r * q**4]


def _hit_zero(r, y):
    return y[0]


_hit_zero.terminal = True
_hit_zero.direction = -1


def _turn_up(r, y):
    return y[1]


_turn_up.terminal = True
_turn_up.direction = 1


def _shoot(a: float, r_max: float, dr: float):
    r0 = 1e-8
    c = (a - a**3) / 2.0
    y0 = [a + c * r0 * r0 / 2.0, c * r0, 0.0, 0.0, 0.0]
    return solve_ivp(
        _radial_rhs,
        (r0, r_max),
        y0,
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
        max_step=dr,
        events=(_hit_zero, _turn_up),
        dense_output=True,
    )


def _crosses_zero(sol) -> bool:
    return sol.t_events[0].size > 0


def solve_townes_shooting(r_max: float = 20.0, dr: float = 0.01) -> GroundState:
    """Bisect on ``Q(0)`` between a zero-crossing and a turning-up trajectory."""
    if r_max < 15:
        raise ValueError(f"r_max must be >= 15, got {r_max}")
    lo, hi = 1.5, 3.0
    if _crosses_zero(_shoot(lo, r_max, dr)) or not _crosses_zero(_shoot(hi, r_max, dr)):
        raise GroundStateError(f"shooting bracket [{lo}, {hi}] does not straddle the ground state")
    history = []
    for it in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _crosses_zero(_shoot(mid, r_max, dr)):
            hi = mid
        else:
            lo = mid
        history.append({"iteration": it + 1, "lo": lo, "hi": hi})
    # the non-crossing side never changes sign, so its profile has no node
    sol = _shoot(lo, r_max, dr)
    r_cut = sol.t[-1]
    q_cut, dq_cut, mass2, grad2, l4 = sol.y[:, -1]
    r = np.linspace(sol.t[0], r_cut, 2001)
    return GroundState(
        profile=None,
        mass2=float(mass2),
        grad2=float(grad2),
        l4pow4=float(l4),
        residual=float(abs(q_cut) + abs(dq_cut)),
        method="radial_shooting",
        peak=float(lo),
        iterations=len(history),
        radial=(r, sol.sol(r)[0]),
        history=history,
    )


def count_nodes(values: np.ndarray) -> int:
    s = np.sign(values[values != 0])
    return int(np.sum(s[1:] != s[:-1]))


def build_vector_ground_state(q: GroundState, N: int) -> VectorGroundState:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if q.profile is None:
        raise ValueError("vector ground state needs a gridded profile")
    scalar = q.profile.data[0]
    comps = VecField(q.profile.grid, np.repeat(scalar[None] / np.sqrt(2 * N - 1), N, axis=0))
    lap = laplacian(comps.data, comps.grid)
    res = lap - comps.data + apply_nonlinearity(comps).data
    return VectorGroundState(N, comps, np.abs(res).max(axis=(1, 2)))
