"""Constrained solvers: parabolic obstacle problem (a.e. and pointwise modes) and the 1D elliptic problem.

Each time step solves the complementarity system

    min(u - psi, R(u)) = 0   at interior nodes,

where R is the backward-Euler residual in u-units (see ``pde``).  Its
solution is the smallest discrete supersolution above psi on that step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Cylinder, Field, SpaceTimeGrid, write_field_csv
from .mollifiers import exp_time_convolve, space_mollify_zero_extend
from .pde import ConvergenceError, PParams, march, solve_slice, step_residual

MODES = ("ae", "pointwise")

__all__ = [
    "MODES",
    "ConvergenceError",
    "Obstacle",
    "ObstacleSolution",
    "effective_obstacle",
    "solve_parabolic_obstacle",
    "solve_against",
    "solve_with_mollified_obstacle",
    "solve_with_space_time_mollified",
    "solve_elliptic_obstacle",
    "elliptic_stability_sweep",
    "w1p_distance",
    "save_solution",
]


@dataclass(frozen=True)
class Obstacle:
    """Obstacle field with its bound, support box and thin time slices.

    ``support`` may reach the final slice (k_hi = nt): the top of the cylinder
    is not part of the parabolic boundary, and time-independent obstacles
    must persist to T.
    """

    psi: Field
    L: float
    support: Cylinder
    thin_slices: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        grid = self.psi.grid
        object.__setattr__(self, "thin_slices", frozenset(int(k) for k in self.thin_slices))
        if not (math.isfinite(self.L) and self.L >= 0):
            raise ValueError(f"L must be a finite nonnegative real, got {self.L}")
        self.support.validate(grid, open_top=True)
        v = self.psi.values
        if v.min() < 0:
            k, i = np.unravel_index(int(np.argmin(v)), v.shape)
            raise ValueError(f"psi < 0 at node (k={k}, i={i}): {v[k, i]}")
        if v.max() > self.L:
            k, i = np.unravel_index(int(np.argmax(v)), v.shape)
            raise ValueError(f"psi > L={self.L} at node (k={k}, i={i}): {v[k, i]}")
        outside = (v != 0) & ~self.support.mask(grid)
        if outside.any():
            k, i = np.argwhere(outside)[0]
            raise ValueError(f"psi nonzero outside its support at node (k={k}, i={i})")
        bad = [k for k in self.thin_slices if not 1 <= k <= grid.nt - 1]
        if bad:
            raise ValueError(f"thin slices must lie in [1, nt-1], got {sorted(bad)}")

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.psi.grid


def effective_obstacle(ob: Obstacle, mode: str) -> Field:
    """Pointwise mode keeps psi; a.e. mode zeroes the thin slices."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "pointwise" or not ob.thin_slices:
        return ob.psi
    vals = ob.psi.values.copy()
    vals[sorted(ob.thin_slices)] = 0.0
    return Field(ob.grid, vals)


@dataclass(frozen=True)
class ObstacleSolution:
    u: Field
    psi_eff: Field
    mode: str
    params: PParams
    active_mask: np.ndarray
    comp_residual: float
    inactive_pde_residual: float
    iterations: np.ndarray
    active_counts: np.ndarray
    L: float = 0.0

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.u.grid

    def sidecar(self) -> dict:
        g = self.grid
        return {
            "mode": self.mode,
            "comp_residual": self.comp_residual,
            "iterations_per_step": [int(i) for i in self.iterations],
            "active_node_count_per_step": [int(c) for c in self.active_counts],
            "params": {
                **self.params.to_dict(),
                "nx": g.nx, "nt": g.nt, "x_min": g.x_min, "x_max": g.x_max, "T": g.T,
                "inactive_pde_residual": self.inactive_pde_residual,
            },
        }


def diagnose(u: Field, psi_eff: Field, params: PParams):
    """Complementarity diagnostics of a solved field.

    Returns (active mask, max |min(u - psi, R)|, max |R| on {u > psi + 10 tol}).
    """
    grid = u.grid
    U, P = u.values, psi_eff.values
    R = np.zeros(grid.shape)
    for k in range(1, grid.nt + 1):
        R[k] = step_residual(U[k], U[k - 1], grid.ht, grid.hx, params.p)
    interior = np.zeros(grid.shape, dtype=bool)
    interior[1:, 1:-1] = True
    gap = U - P
    active = interior & (gap <= R)
    comp = float(np.max(np.abs(np.minimum(gap, R))[interior], initial=0.0))
    free = interior & (gap > 10 * params.newton_tol)
    pde = float(np.max(np.abs(R[free]), initial=0.0))
    return active, comp, pde


def solve_against(grid: SpaceTimeGrid, params: PParams, psi_eff: Field, mode: str = "ae",
                  start: str = "previous", upper: float | None = None) -> ObstacleSolution:
    """Time-march the complementarity problem against a given effective obstacle.

    Boundary data are zero, so psi_eff must be <= 0 on the parabolic boundary.
    """
    P = psi_eff.values
    if np.any(P[grid.parabolic_boundary_mask()] > 0):
        k, i = np.argwhere((P > 0) & grid.parabolic_boundary_mask())[0]
        raise ValueError(f"obstacle positive on the parabolic boundary at node (k={k}, i={i})")
    if upper is None:
        upper = float(P.max(initial=0.0))
    zeros = np.zeros(grid.nt + 1)
    vals, iters = march(grid, params, np.zeros(grid.nx + 1), zeros, zeros, psi=P, start=start, upper=upper)
    u = Field(grid, vals)
    active, comp, pde = diagnose(u, psi_eff, params)
    return ObstacleSolution(
        u=u, psi_eff=psi_eff, mode=mode, params=params, active_mask=active,
        comp_residual=comp, inactive_pde_residual=pde, iterations=iters,
        active_counts=active.sum(axis=1), L=float(upper),
    )


def solve_parabolic_obstacle(grid: SpaceTimeGrid, params: PParams, ob: Obstacle, mode: str = "ae",
                             start: str = "previous") -> ObstacleSolution:
    """Least discrete solution above the effective obstacle.

    ``start`` sets the inner initial iterate of every step: the previous
    slice, zero, or the bound L.
    """
    if ob.grid != grid:
        raise ValueError("obstacle lives on a different grid")
    return solve_against(grid, params, effective_obstacle(ob, mode), mode=mode, start=start, upper=ob.L)


def solve_with_mollified_obstacle(grid: SpaceTimeGrid, params: PParams, ob: Obstacle, eps: float,
                                  start: str = "previous") -> ObstacleSolution:
    """a.e.-mode solve against the exponential time convolution of the a.e. obstacle."""
    psi_eps = exp_time_convolve(effective_obstacle(ob, "ae"), eps)
    return solve_against(grid, params, psi_eps, mode="ae", start=start, upper=ob.L)


def solve_with_space_time_mollified(grid: SpaceTimeGrid, params: PParams, ob: Obstacle, eps: float,
                                    sigma: float, start: str = "previous") -> ObstacleSolution:
    """As ``solve_with_mollified_obstacle`` followed by a zero-extended space mollification.

    Mass that the space kernel pushes onto the lateral walls is dropped there,
    where the boundary datum 0 already rules.
    """
    psi = space_mollify_zero_extend(exp_time_convolve(effective_obstacle(ob, "ae"), eps), sigma)
    vals = psi.values.copy()
    vals[:, [0, -1]] = 0.0
    return solve_against(grid, params, Field(grid, vals), mode="ae", start=start, upper=ob.L)


def solve_elliptic_obstacle(x_min: float, x_max: float, nx: int, params: PParams, psi_1d,
                            return_iterations: bool = False):
    """Stationary problem -Delta_p v >= 0, v >= psi, complementarity, v = 0 at both ends."""
    psi = np.asarray(psi_1d, dtype=float)
    if psi.shape != (nx + 1,):
        raise ValueError(f"psi needs length {nx + 1}, got {psi.shape}")
    if not np.all(np.isfinite(psi)):
        raise ValueError("psi must be finite")
    if psi[0] > 0 or psi[-1] > 0:
        raise ValueError("psi must be <= 0 at both ends (zero Dirichlet data)")
    hx = (x_max - x_min) / nx
    v = np.zeros(nx + 1)
    it = solve_slice(v, np.zeros(nx + 1), psi, 0.0, hx, hx, params)
    return (v, it) if return_iterations else v


def w1p_distance(a, b, hx: float, p: float) -> float:
    """Discrete W^{1,p} distance: trapezoid L^p part plus cell-gradient part."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    w = np.full(d.size, hx)
    w[0] = w[-1] = 0.5 * hx
    g = np.diff(d) / hx
    return float((np.dot(w, np.abs(d) ** p) + hx * np.sum(np.abs(g) ** p)) ** (1.0 / p))


def elliptic_stability_sweep(psi, perturbations, x_min: float = 0.0, x_max: float = 1.0,
                             params: PParams | None = None) -> list[dict]:
    """Distances in W^{1,p} between perturbed and reference elliptic solutions.

    Returns one row per perturbation with the obstacle distance and solution distance.
    """
    params = params or PParams()
    psi = np.asarray(psi, dtype=float)
    nx = psi.size - 1
    hx = (x_max - x_min) / nx
    v = solve_elliptic_obstacle(x_min, x_max, nx, params, psi)
    rows = []
    for j, pj in enumerate(perturbations):
        pj = np.asarray(pj, dtype=float)
        vj = solve_elliptic_obstacle(x_min, x_max, nx, params, pj)
        rows.append({
            "index": j,
            "obstacle_dist": w1p_distance(pj, psi, hx, params.p),
            "solution_dist": w1p_distance(vj, v, hx, params.p),
        })
    return rows


def save_solution(sol: ObstacleSolution, out_dir, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.json`` sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_field_csv(sol.u, out_dir / f"{stem}.csv")
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps(sol.sidecar(), indent=2))
    return csv_path, json_path
