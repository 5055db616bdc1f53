"""Resonant cubic coupling of the component system.

The resonance set of ``j`` is every integer triple ``(j1, j2, j3)`` with
``j1 - j2 + j3 = j`` and ``j1**2 - j2**2 + j3**2 = j**2``.  Solving the two
constraints leaves only ``(j, k, k)`` and ``(k, k, j)``, which collapses the
sum to ``2 * (sum_k |u_k|^2) * u_j - |u_j|^2 * u_j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import VecField, quad

BRUTEFORCE_MAX_COMPONENTS = 64


@dataclass(frozen=True)
class ResonanceSet:
    j: int
    triples: tuple[tuple[int, int, int], ...]

    def __len__(self) -> int:
        return len(self.triples)


def resonance_set(j: int, index_set) -> ResonanceSet:
    """Enumerate the resonant triples of ``j`` within ``index_set``."""
    labels = sorted({int(i) for i in index_set})
    if int(j) not in labels:
        raise ValueError(f"label {j} is not in the index set {labels}")
    j = int(j)
    triples = tuple(
        (a, b, c)
        for a, b, c in product(labels, repeat=3)
        if a - b + c == j and a * a - b * b + c * c == j * j
    )
    return ResonanceSet(j, triples)


def apply_nonlinearity_bruteforce(u: VecField) -> VecField:
    """Literal triple sum over each resonance set; a test oracle, O(N^3)."""
    n = u.n_components
    if n > BRUTEFORCE_MAX_COMPONENTS:
        raise ValueError(
            f"brute-force resonance sum refused for N={n} > {BRUTEFORCE_MAX_COMPONENTS}"
        )
    labels = [int(j) for j in u.labels]
    pos = {j: i for i, j in enumerate(labels)}
    out = np.zeros_like(u.data)
    for j in labels:
        acc = np.zeros(u.data.shape[1:], dtype=np.complex128)
        for a, b, c in resonance_set(j, labels).triples:
            acc += u.data[pos[a]] * np.conj(u.data[pos[b]]) * u.data[pos[c]]
        out[pos[j]] = acc
    return u.with_data(out)


def nonlinearity_array(data: np.ndarray) -> np.ndarray:
    """Closed-form coupling on a raw ``(N, M, M)`` array."""
    mod2 = data.real**2 + data.imag**2
    return (2.0 * np.sum(mod2, axis=0) - mod2) * data


def apply_nonlinearity(u: VecField) -> VecField:
    return u.with_data(nonlinearity_array(u.data))


def quartic_density(data: np.ndarray) -> np.ndarray:
    """Pointwise ``2*(sum |u_j|^2)^2 - sum |u_j|^4``."""
    mod2 = data.real**2 + data.imag**2
    rho = np.sum(mod2, axis=0)
    return 2.0 * rho * rho - np.sum(mod2 * mod2, axis=0)


def quartic_functional(u: VecField) -> float:
    """Integral of ``sum_j conj(u_j) F_j(u)``; always real and non-negative."""
    return quad(quartic_density(u.data), u.grid)


def dealias_mask(grid) -> np.ndarray:
    """2/3-rule mask: keeps modes with ``|k_i| < M/3 * 2*pi/L`` on each axis."""
    cutoff = grid.M / 3.0 * 2.0 * np.pi / grid.L
    kx, ky = grid.wavenumbers
    return (np.abs(kx) < cutoff) & (np.abs(ky) < cutoff)
