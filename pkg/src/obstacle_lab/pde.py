"""Discrete p-Laplacian, backward-Euler p-parabolic solver, Poisson modification, barrier.

Residuals are measured in u-units: at interior node i of step k+1

    R_i = u_i - uold_i - ht * (F_{i+1/2} - F_{i-1/2}) / hx,

which is ``ht`` times the pointwise equation residual.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import kernels
from .grid import Cylinder, Field, SpaceTimeGrid

SOLVERS = ("newton", "gs")
STARTS = ("previous", "zero", "upper")


class ConvergenceError(RuntimeError):
    """Inner iteration budget exhausted on some time step."""

    def __init__(self, message, residual=float("nan"), step=-1, node=-1):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.node = node


@dataclass(frozen=True)
class PParams:
    """Exponent and inner-solver controls.

    ``solver`` picks the per-step method: "newton" (Newton steps whose
    bound-constrained tridiagonal subproblem is solved exactly, with a line
    search on the step energy) or "gs" (projected nonlinear Gauss-Seidel /
    SOR only).
    """

    p: float = 3.0
    newton_tol: float = 1e-10
    max_inner_iters: int = 500
    omega: float = 1.0
    solver: str = "newton"

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 2):
            raise ValueError(f"need p >= 2, got {self.p}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.max_inner_iters < 1:
            raise ValueError(f"max_inner_iters must be >= 1, got {self.max_inner_iters}")
        if not 0 < self.omega < 2:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def to_dict(self) -> dict:
        return asdict(self)


def p_flux(du, p: float):
    """|du|^(p-2) du, with value 0 at du = 0."""
    if np.ndim(du) == 0:
        du = float(du)
        return du if p == 2 else (abs(du) ** (p - 2) * du if du != 0.0 else 0.0)
    du = np.asarray(du, dtype=float)
    return du.copy() if p == 2 else np.abs(du) ** (p - 2) * du


def p_laplacian_apply(slice_, p: float, hx: float) -> np.ndarray:
    """Conservative (F_{i+1/2} - F_{i-1/2})/hx at the interior nodes."""
    u = np.asarray(slice_, dtype=float)
    if u.size < 3:
        raise ValueError("slice needs at least 3 nodes")
    f = p_flux(np.diff(u) / hx, p)
    return (f[1:] - f[:-1]) / hx


def step_residual(u, uold, ht: float, hx: float, p: float) -> np.ndarray:
    """Backward-Euler residual of one slice (zero at both ends)."""
    out = np.zeros(len(u))
    kernels.residual(
        np.ascontiguousarray(u, dtype=float), np.ascontiguousarray(uold, dtype=float),
        1.0, ht / hx, hx, float(p), out,
    )
    return out


def solve_slice(u, uold, psi, c0, c1, hx, params: PParams, step=-1):
    """Solve min(u - psi, R(u)) = 0 on one slice in place.

    Returns the inner iteration count.  Raises ConvergenceError on budget
    exhaustion.
    """
    tol = params.newton_tol
    p = float(params.p)
    if params.solver == "newton":
        it, err = kernels.solve_step(u, uold, psi, c0, c1, hx, p, tol, params.max_inner_iters, params.omega)
        if it >= 0:
            return it
        it = -it
    else:
        r = np.zeros_like(u)
        np.maximum(u, psi, out=u)
        it = 0
        while True:
            kernels.residual(u, uold, c0, c1, hx, p, r)
            err = float(np.max(np.abs(np.minimum(u - psi, r)[1:-1]), initial=0.0))
            if err < tol:
                return it
            if it >= params.max_inner_iters:
                break
            kernels.pgs_sweep(u, uold, psi, c0, c1, hx, p, params.omega, 0.01 * tol)
            it += 1
    r = np.zeros_like(u)
    kernels.residual(u, uold, c0, c1, hx, p, r)
    phi = np.abs(np.minimum(u - psi, r))
    phi[[0, -1]] = 0.0
    node = int(np.argmax(phi))
    raise ConvergenceError(
        f"inner solver ({params.solver}) did not reach tol={tol} in {it} iterations at step {step}: "
        f"residual {phi[node]:.3e} at node {node}",
        residual=float(phi[node]),
        step=step,
        node=node,
    )


def march(grid: SpaceTimeGrid, params: PParams, initial, left, right, psi=None,
          start: str = "previous", upper: float = 0.0):
    """Backward-Euler time marching, optionally constrained from below.

    Args:
        initial: slice at k = 0.
        left, right: boundary values per time index (length nt+1).
        psi: optional (nt+1, nx+1) lower obstacle; rows are used for k >= 1.
        start: initial inner iterate per step: the previous slice,
            zero, or the constant ``upper``.

    Returns:
        (values, iterations per step) with iterations[0] = 0.
    """
    if start not in STARTS:
        raise ValueError(f"start must be one of {STARTS}, got {start!r}")
    nx1 = grid.nx + 1
    vals = np.empty(grid.shape)
    vals[0] = np.asarray(initial, dtype=float)
    iters = np.zeros(grid.nt + 1, dtype=int)
    c1 = grid.ht / grid.hx
    no_psi = np.full(nx1, -np.inf)
    for k in range(1, grid.nt + 1):
        uold = vals[k - 1]
        if start == "previous":
            u = uold.copy()
        elif start == "zero":
            u = np.zeros(nx1)
        else:
            u = np.full(nx1, float(upper))
        u[0] = left[k]
        u[-1] = right[k]
        row = no_psi if psi is None else np.ascontiguousarray(psi[k], dtype=float)
        iters[k] = solve_slice(u, uold, row, 1.0, c1, grid.hx, params, step=k)
        vals[k] = u
    return vals, iters


def _lateral_arrays(grid, lateral):
    left = np.empty(grid.nt + 1)
    right = np.empty(grid.nt + 1)
    for k, t in enumerate(grid.t):
        left[k], right[k] = lateral(float(t))
    return left, right


def solve_p_parabolic(grid: SpaceTimeGrid, params: PParams, initial,
                      lateral: Callable[[float], tuple] | None = None) -> Field:
    """Unconstrained backward-Euler p-parabolic solve.

    ``lateral(t)`` returns (left, right) boundary values; the default keeps the
    end values of ``initial``.
    """
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (grid.nx + 1,):
        raise ValueError(f"initial slice needs length {grid.nx + 1}, got {initial.shape}")
    if lateral is None:
        a, b = float(initial[0]), float(initial[-1])

        def lateral(t):
            return a, b

    left, right = _lateral_arrays(grid, lateral)
    init = initial.copy()
    init[0], init[-1] = left[0], right[0]
    vals, _ = march(grid, params, init, left, right)
    return Field(grid, vals)


def poisson_modify(u: Field, Q: Cylinder, params: PParams) -> Field:
    """Replace u inside Q by the p-parabolic function with u's data on the parabolic boundary of Q."""
    grid = u.grid
    Q.validate(grid)
    sub = SpaceTimeGrid(
        grid.x_min + Q.i_lo * grid.hx,
        grid.x_min + Q.i_hi * grid.hx,
        Q.i_hi - Q.i_lo,
        (Q.k_hi - Q.k_lo) * grid.ht,
        Q.k_hi - Q.k_lo,
    )
    block = u.values[Q.k_lo : Q.k_hi + 1, Q.i_lo : Q.i_hi + 1]
    vals, _ = march(sub, params, block[0].copy(), block[:, 0].copy(), block[:, -1].copy())
    out = u.values.copy()
    out[Q.k_lo + 1 : Q.k_hi + 1, Q.i_lo + 1 : Q.i_hi] = vals[1:, 1:-1]
    return Field(grid, out)


def exterior_center(grid: SpaceTimeGrid, i0: int, k0: int, R0: float) -> tuple[float, float]:
    """Centre of an exterior ball of radius R0 touching the parabolic boundary at node (i0, k0)."""
    x0, t0 = grid.node(i0, k0)
    dx = -1.0 if i0 == 0 else (1.0 if i0 == grid.nx else 0.0)
    dt = -1.0 if k0 == 0 else 0.0
    if dx == 0.0 and dt == 0.0:
        raise ValueError(f"node (i={i0}, k={k0}) is not on the parabolic boundary")
    norm = math.hypot(dx, dt)
    return x0 + R0 * dx / norm, t0 + R0 * dt / norm


def barrier(grid: SpaceTimeGrid, x0t0: tuple[int, int], alpha: float, R0: float) -> Field:
    """Barrier f = exp(-alpha R0^2) - exp(-alpha R^2) at a parabolic boundary node.

    ``x0t0`` is the node index pair (i0, k0).  R is the distance to the
    exterior-ball centre, so f vanishes only at the touching node.
    """
    if not (alpha > 0 and R0 > 0):
        raise ValueError(f"need alpha > 0 and R0 > 0, got {alpha}, {R0}")
    i0, k0 = x0t0
    xc, tc = exterior_center(grid, i0, k0, R0)
    X, Tm = np.meshgrid(grid.x, grid.t)
    R2 = (X - xc) ** 2 + (Tm - tc) ** 2
    # R^2 - R0^2 >= 0 with a stable difference of exponentials
    vals = math.exp(-alpha * R0**2) * -np.expm1(-alpha * (R2 - R0**2))
    vals[k0, i0] = 0.0
    return Field(grid, vals)
