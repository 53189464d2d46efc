"""Numerical laboratory for the evolutionary p-Laplace obstacle problem in one space dimension."""

from .grid import Cylinder, Field, SpaceTimeGrid, make_cylinder_grid, sample_function
from .kernels import BACKEND
from .obstacle import Obstacle, ObstacleSolution, solve_parabolic_obstacle
from .pde import PParams

__all__ = [
    "BACKEND",
    "Cylinder",
    "Field",
    "Obstacle",
    "ObstacleSolution",
    "PParams",
    "SpaceTimeGrid",
    "make_cylinder_grid",
    "sample_function",
    "solve_parabolic_obstacle",
]

__version__ = "0.1.0"
