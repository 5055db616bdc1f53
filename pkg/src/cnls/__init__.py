"""Spectral simulation and verification suite for the N-coupled focusing cubic
Schrodinger system on the plane."""

__version__ = "0.1.0"

from .core import Grid2D, VecField, make_grid, norm_grad_l2, norm_l2h, norm_l4l2  # noqa: E402
from .groundstate import build_vector_ground_state, solve_townes_petviashvili, solve_townes_shooting  # noqa: E402
from .nonlinearity import apply_nonlinearity, quartic_functional, resonance_set  # noqa: E402
from .solver import SolverConfig, evolve, strang_step  # noqa: E402
from .variational import energy, sharp_constants, weinstein  # noqa: E402

__all__ = [
    "Grid2D",
    "VecField",
    "make_grid",
    "norm_grad_l2",
    "norm_l2h",
    "norm_l4l2",
    "build_vector_ground_state",
    "solve_townes_petviashvili",
    "solve_townes_shooting",
    "apply_nonlinearity",
    "quartic_functional",
    "resonance_set",
    "SolverConfig",
    "evolve",
    "strang_step",
    "energy",
    "sharp_constants",
    "weinstein",
]
