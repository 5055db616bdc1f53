"""Weinstein functional, sharp Gagliardo-Nirenberg constants, energy, coercivity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .core import VecField, norm_grad_l2, norm_l2h
from .nonlinearity import quartic_functional

INFINITE = math.inf

NSpec = Union[int, float]


@dataclass(frozen=True)
class SharpConstants:
    """One row of the constants table; ``N`` may be ``math.inf``."""

    N: NSpec
    C_N: float
    threshold_mass: float
    q_mass2: float

    @property
    def threshold_mass2(self) -> float:
        return self.threshold_mass**2

    def as_row(self) -> dict:
        return {
            "N": "inf" if math.isinf(self.N) else int(self.N),
            "C_N": self.C_N,
            "threshold_mass": self.threshold_mass,
            "threshold_mass2": self.threshold_mass2,
            "q_mass2": self.q_mass2,
        }


def sharp_constants(N: NSpec, q_mass2: float) -> SharpConstants:
    if q_mass2 <= 0:
        raise ValueError("q_mass2 must be positive")
    if math.isinf(N):
        return SharpConstants(INFINITE, 4.0 / q_mass2, math.sqrt(q_mass2 / 2.0), q_mass2)
    if N < 1 or int(N) != N:
        raise ValueError(f"N must be a positive integer or inf, got {N}")
    N = int(N)
    c = 2.0 * (2 * N - 1) / (N * q_mass2)
    return SharpConstants(N, c, math.sqrt(N / (2 * N - 1) * q_mass2), q_mass2)


def weinstein(u: VecField) -> float:
    mass2 = norm_l2h(u, 0) ** 2
    grad2 = norm_grad_l2(u) ** 2
    if mass2 == 0 or grad2 == 0:
        raise ValueError("Weinstein functional is undefined for a zero (or constant) field")
    return quartic_functional(u) / (mass2 * grad2)


def energy(u: VecField) -> float:
    return 0.5 * norm_grad_l2(u) ** 2 - 0.25 * quartic_functional(u)


BOUNDARY_RTOL = 1e-10


@dataclass(frozen=True)
class CoercivityReport:
    mass2: float
    threshold_mass2: float
    energy: float
    lower_bound: float
    grad2: float
    rtol: float = 1e-9

    @property
    def boundary(self) -> bool:
        return abs(self.mass2 / self.threshold_mass2 - 1.0) <= BOUNDARY_RTOL

    @property
    def below_threshold(self) -> bool:
        return self.mass2 < self.threshold_mass2 and not self.boundary

    @property
    def slack(self) -> float:
        return self.energy - self.lower_bound

    @property
    def holds(self) -> bool:
        # scaled ground states saturate the bound, so allow round-off
        return self.below_threshold and self.slack >= -self.rtol * self.grad2

    @property
    def status(self) -> str:
        if self.boundary:
            return "boundary"
        if not self.below_threshold:
            return "above threshold"
        return "holds" if self.holds else "violated"


def coercivity_check(u: VecField, constants: SharpConstants, rtol: float = 1e-9) -> CoercivityReport:
    """Compare ``E(u)`` with ``(1 - mass2/threshold2) * grad2 / 2``.

    At or above the threshold mass the bound has no content; the report says so
    instead of raising.
    """
    mass2 = norm_l2h(u, 0) ** 2
    grad2 = norm_grad_l2(u) ** 2
    thr2 = constants.threshold_mass2
    return CoercivityReport(
        mass2=mass2,
        threshold_mass2=thr2,
        energy=energy(u),
        lower_bound=0.5 * (1.0 - mass2 / thr2) * grad2,
        grad2=grad2,
        rtol=rtol,
    )
