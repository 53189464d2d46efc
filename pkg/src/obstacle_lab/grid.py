"""Uniform space-time grids on the cylinder (x_min, x_max) x (0, T) and fields on them.

Storage is time-major: ``values[k, i]`` is the sample at ``(x_min + i*hx, k*ht)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.ndimage import minimum_filter


@dataclass(frozen=True)
class SpaceTimeGrid:
    x_min: float
    x_max: float
    nx: int
    T: float
    nt: int

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def ht(self) -> float:
        return self.T / self.nt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt + 1, self.nx + 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.hx * np.arange(self.nx + 1)

    @property
    def t(self) -> np.ndarray:
        return self.ht * np.arange(self.nt + 1)

    def node(self, i: int, k: int) -> tuple[float, float]:
        return (self.x_min + i * self.hx, k * self.ht)

    def parabolic_boundary_mask(self) -> np.ndarray:
        """Boolean mask of the bottom slice and the two lateral walls."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = True
        mask[:, 0] = True
        mask[:, -1] = True
        return mask

    def space_weights(self) -> np.ndarray:
        """Trapezoid weights in x."""
        w = np.full(self.nx + 1, self.hx)
        w[0] = w[-1] = 0.5 * self.hx
        return w

    def zeros(self) -> Field:
        return Field(self, np.zeros(self.shape))

    def header(self) -> str:
        return (
            f"nx={self.nx} nt={self.nt} x_min={self.x_min!r} "
            f"x_max={self.x_max!r} T={self.T!r}"
        )


def make_cylinder_grid(x_min: float, x_max: float, nx: int, T: float, nt: int) -> SpaceTimeGrid:
    """Validate the inputs and build a :class:`SpaceTimeGrid`.

    Raises:
        ValueError: on non-finite bounds, ``x_max <= x_min``, ``T <= 0``,
            non-integer counts, or ``nx < 4`` / ``nt < 4``.
    """
    for name, val in (("x_min", x_min), ("x_max", x_max), ("T", T)):
        if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
            raise ValueError(f"{name} must be a finite real, got {val!r}")
    for name, val in (("nx", nx), ("nt", nt)):
        if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
            raise ValueError(f"{name} must be an integer, got {val!r}")
    if x_max <= x_min:
        raise ValueError(f"need x_max > x_min, got [{x_min}, {x_max}]")
    if T <= 0:
        raise ValueError(f"need T > 0, got {T}")
    if nx < 4:
        raise ValueError(f"need nx >= 4, got {nx}")
    if nt < 4:
        raise ValueError(f"need nt >= 4, got {nt}")
    return SpaceTimeGrid(float(x_min), float(x_max), int(nx), float(T), int(nt))


class Field:
    """Finite samples on every node of a grid.  Immutable once built."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: SpaceTimeGrid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"values have shape {arr.shape}, grid needs {grid.shape}")
        if not np.all(np.isfinite(arr)):
            k, i = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(f"non-finite value at node (k={k}, i={i})")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        return f"Field({self.grid.header()}, max={self.values.max():.6g}, min={self.values.min():.6g})"

    def with_values(self, values) -> Field:
        return Field(self.grid, values)

    def row(self, k: int) -> np.ndarray:
        return self.values[k].copy()

    def __add__(self, other: Field) -> Field:
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> Field:
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class Cylinder:
    """Closed node box ``[i_lo, i_hi] x [k_lo, k_hi]`` inside a grid.

    ``validate(grid)`` enforces compact containment,
    0 < i_lo < i_hi < nx and 0 < k_lo < k_hi < nt.  With ``open_top=True``
    the box may reach the final slice (k_hi == nt), which is not part of
    the parabolic boundary.
    """

    i_lo: int
    i_hi: int
    k_lo: int
    k_hi: int

    def validate(self, grid: SpaceTimeGrid, open_top: bool = False) -> Cylinder:
        k_top = grid.nt + 1 if open_top else grid.nt
        if not (0 < self.i_lo < self.i_hi < grid.nx):
            raise ValueError(f"need 0 < i_lo < i_hi < nx={grid.nx}, got {self.i_lo}, {self.i_hi}")
        if not (0 < self.k_lo < self.k_hi < k_top):
            raise ValueError(f"need 0 < k_lo < k_hi < {k_top}, got {self.k_lo}, {self.k_hi}")
        return self

    def mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        m = np.zeros(grid.shape, dtype=bool)
        m[self.k_lo : self.k_hi + 1, self.i_lo : self.i_hi + 1] = True
        return m


def sample_function(grid: SpaceTimeGrid, f: Callable[[float, float], float]) -> Field:
    """Evaluate ``f(x, t)`` at every node.

    ``f`` is first tried on broadcast arrays; scalar-only callables are
    evaluated node by node.
    """
    X, Tm = np.meshgrid(grid.x, grid.t)
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(f(X, Tm), dtype=float)
        if vals.shape != grid.shape:
            vals = np.broadcast_to(vals, grid.shape).astype(float)
    except (TypeError, ValueError):
        vals = np.empty(grid.shape)
        for k, t in enumerate(grid.t):
            for i, x in enumerate(grid.x):
                vals[k, i] = float(f(float(x), float(t)))
    bad = ~np.isfinite(vals)
    if bad.any():
        k, i = np.argwhere(bad)[0]
        x, t = grid.node(i, k)
        raise ValueError(f"non-finite sample {vals[k, i]} at node (k={k}, i={i}) = (x={x}, t={t})")
    return Field(grid, vals)


def regularize_essliminf(u: Field, r: int) -> Field:
    """Window minimum of radius ``r`` nodes in both x and t, clipped to the grid.

    On grid data the essential and plain infimum agree, so this is the
    discrete lower-semicontinuous regularization at scale r.
    """
    if r < 0:
        raise ValueError(f"window radius must be >= 0, got {r}")
    if r == 0:
        return u
    # 'nearest' padding only repeats values already inside the clipped window
    return Field(u.grid, minimum_filter(u.values, size=2 * r + 1, mode="nearest"))


def write_field_csv(field: Field, path) -> Path:
    path = Path(path)
    np.savetxt(path, field.values, fmt="%.17g", delimiter=",", header=field.grid.header(), comments="# ")
    return path


def read_field_csv(path) -> Field:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing grid header line")
    meta = dict(item.split("=", 1) for item in first.lstrip("# ").split())
    try:
        grid = make_cylinder_grid(
            float(meta["x_min"]), float(meta["x_max"]), int(meta["nx"]), float(meta["T"]), int(meta["nt"])
        )
    except KeyError as exc:
        raise ValueError(f"{path}: header lacks {exc}") from None
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return Field(grid, values)
