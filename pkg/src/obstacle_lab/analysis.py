"""Weak-form residual checks, discrete norms, test batteries and sweep harnesses.

Quadrature conventions, matched to the backward-Euler geometry of the solver:

* gradients live on cells, g_{i+1/2} = (u_{i+1} - u_i)/hx, midpoint rule per cell;
* nodal terms use trapezoid weights in x;
* time sums are rectangle rules over k = 1..nt (slice k represents (t_{k-1}, t_k]).

With this pairing the supersolution residual equals sum_k sum_i hx*phi*R
exactly, where R is the solver's step residual, so discrete supersolutions
give nonnegative values up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

from .grid import Field, SpaceTimeGrid
from .obstacle import Obstacle, ObstacleSolution, solve_parabolic_obstacle, solve_with_mollified_obstacle
from .pde import PParams, barrier, p_flux


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """Test function with claimed sign and support flags.

    ``compact_support`` means zero on the parabolic boundary and on the final
    slice.  Claimed flags are checked against the values.
    """

    __test__ = False  # not a pytest class

    phi: Field
    nonnegative: bool = True
    compact_support: bool = True

    def __post_init__(self):
        v = self.phi.values
        if self.nonnegative and v.min() < 0:
            k, i = np.unravel_index(int(np.argmin(v)), v.shape)
            raise AdmissibilityError(f"phi < 0 at node (k={k}, i={i})")
        if self.compact_support:
            rim = self.phi.grid.parabolic_boundary_mask()
            rim[-1, :] = True
            if np.any(v[rim] != 0):
                k, i = np.argwhere((v != 0) & rim)[0]
                raise AdmissibilityError(f"phi nonzero at boundary node (k={k}, i={i})")

    @classmethod
    def from_values(cls, grid: SpaceTimeGrid, values) -> TestFunction:
        f = Field(grid, values)
        rim = grid.parabolic_boundary_mask()
        rim[-1, :] = True
        return cls(f, bool(f.values.min() >= 0), bool(np.all(f.values[rim] == 0)))

    def scaled(self, lam: float) -> TestFunction:
        return TestFunction(self.phi * lam, self.nonnegative and lam >= 0, self.compact_support)


@dataclass(frozen=True)
class ConvergenceRecord:
    eps: float
    dist_lp: float
    dist_grad_lp: float
    energy: float

    def __post_init__(self):
        for name in ("eps", "dist_lp", "dist_grad_lp", "energy"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")


class SweepError(RuntimeError):
    """A solve failed mid-sweep; ``records`` holds the rows finished so far."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def _cell_grad(vals: np.ndarray, hx: float) -> np.ndarray:
    return np.diff(vals, axis=1) / hx


def _flux_pairing(u: np.ndarray, w: np.ndarray, grid: SpaceTimeGrid, p: float) -> float:
    """sum_{k>=1} ht sum_cells hx F(grad u) grad w."""
    gu = _cell_grad(u[1:], grid.hx)
    gw = _cell_grad(w[1:], grid.hx)
    return float(grid.ht * grid.hx * np.sum(p_flux(gu, p) * gw))


# ---------------------------------------------------------------- residuals


def supersolution_parts(u: Field, params: PParams, phi: TestFunction) -> tuple[float, float]:
    """The flux pairing and the time pairing whose difference is the supersolution residual."""
    if not (phi.nonnegative and phi.compact_support):
        raise AdmissibilityError("supersolution test needs a nonnegative compactly supported phi")
    grid = u.grid
    if phi.phi.grid != grid:
        raise ValueError("u and phi live on different grids")
    U, P = u.values, phi.phi.values
    w = grid.space_weights()
    flux_term = _flux_pairing(U, P, grid, params.p)
    time_term = float(np.sum(w * U[:-1] * np.diff(P, axis=0)))
    return flux_term, time_term


def supersolution_residual(u: Field, params: PParams, phi: TestFunction) -> float:
    """Quadrature of  int int  |Du|^(p-2) Du . Dphi - u dphi/dt  for phi >= 0 compactly supported."""
    flux_term, time_term = supersolution_parts(u, params, phi)
    return flux_term - time_term


def _check_variational_phi(phi: Field, psi_eff: Field) -> None:
    grid = phi.grid
    v = phi.values
    below = v < psi_eff.values
    if below.any():
        k, i = np.argwhere(below)[0]
        raise AdmissibilityError(f"phi < psi at node (k={k}, i={i}): {v[k, i]} < {psi_eff.values[k, i]}")
    rim = grid.parabolic_boundary_mask()
    if np.any(v[rim] != 0):
        k, i = np.argwhere((v != 0) & rim)[0]
        raise AdmissibilityError(f"phi nonzero on the parabolic boundary at node (k={k}, i={i})")


def _phi_field(phi) -> Field:
    return phi.phi if isinstance(phi, TestFunction) else phi


def variational_residual(v: Field, params: PParams, phi, psi_eff: Field) -> float:
    """LHS - RHS of the variational inequality.

    int int |Dv|^(p-2) Dv . D(phi - v) + (phi - v) dphi/dt   -   1/2 int |phi(T) - v(T)|^2
    """
    phi = _phi_field(phi)
    _check_variational_phi(phi, psi_eff)
    grid = v.grid
    V, P = v.values, phi.values
    w = grid.space_weights()
    d = P - V
    flux_term = _flux_pairing(V, d, grid, params.p)
    time_term = float(np.sum(w * d[1:] * np.diff(P, axis=0)))
    final = 0.5 * float(np.sum(w * d[-1] ** 2))
    return flux_term + time_term - final


def variational_residual_ibp(v: Field, params: PParams, phi, psi_eff: Field) -> float:
    """Integrated-by-parts form: the time term uses dv/dt and the final-time term drops.

    int int |Dv|^(p-2) Dv . D(phi - v) + (phi - v) dv/dt
    """
    phi = _phi_field(phi)
    _check_variational_phi(phi, psi_eff)
    grid = v.grid
    V, P = v.values, phi.values
    w = grid.space_weights()
    d = P - V
    flux_term = _flux_pairing(V, d, grid, params.p)
    time_term = float(np.sum(w * d[1:] * np.diff(V, axis=0)))
    return flux_term + time_term


# ------------------------------------------------------------------- norms


def lp_norm(u: Field, p: float) -> float:
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    g = u.grid
    return float((g.ht * np.sum(g.space_weights() * np.abs(u.values[1:]) ** p)) ** (1.0 / p))


def energy(u: Field, p: float) -> float:
    """int int |Du|^p over the cylinder."""
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    g = u.grid
    return float(g.ht * g.hx * np.sum(np.abs(_cell_grad(u.values[1:], g.hx)) ** p))


def grad_lp_norm(u: Field, p: float) -> float:
    return energy(u, p) ** (1.0 / p)


def time_derivative_l1(u: Field) -> float:
    """int int |du/dt| with backward differences."""
    g = u.grid
    return float(np.sum(g.space_weights() * np.abs(np.diff(u.values, axis=0))))


# ---------------------------------------------------------------- batteries


def smooth_bump(s, center: float, radius: float):
    """C-infinity bump exp(1 - 1/(1 - r^2)) with peak 1, zero for |s - center| >= radius."""
    r = (np.asarray(s, dtype=float) - center) / radius
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _tent(s, center, radius):
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(s, dtype=float) - center) / radius)


def test_battery(grid: SpaceTimeGrid, seed: int = 0) -> list[TestFunction]:
    """Twelve nonnegative compactly supported test functions.

    Eight tensor products of smooth space and time bumps, then four seeded
    piecewise-linear tensor tents.  Supports stay two nodes clear of the rim.
    """
    L = grid.x_max - grid.x_min
    x = (grid.x - grid.x_min) / L
    t = grid.t / grid.T
    space = [(0.5, 0.4), (0.3, 0.2), (0.7, 0.2), (0.5, 0.15)]
    time = [(0.5, 0.4), (0.3, 0.25)]
    funcs = []
    for xc, xr in space:
        for tc, tr in time:
            funcs.append(np.outer(smooth_bump(t, tc, tr), smooth_bump(x, xc, xr)))
    rng = np.random.default_rng(seed)
    for _ in range(4):
        xc, tc = rng.uniform(0.25, 0.75, size=2)
        xr, tr = rng.uniform(0.1, 0.2, size=2)
        amp = rng.uniform(0.5, 2.0)
        funcs.append(amp * np.outer(_tent(t, tc, tr), _tent(x, xc, xr)))
    out = []
    for vals in funcs:
        vals = _clear_rim(vals, grid, top=True)
        out.append(TestFunction(Field(grid, vals), True, True))
    return out


test_battery.__test__ = False  # type: ignore[attr-defined]


def _clear_rim(vals, grid, top):
    vals = np.array(vals, dtype=float)
    vals[0] = 0.0
    vals[:, 0] = 0.0
    vals[:, -1] = 0.0
    if top:
        vals[-1] = 0.0
    return vals


def admissible_battery(psi_eff: Field, seed: int = 0, base: Field | None = None) -> list[Field]:
    """Test functions phi >= psi_eff, zero on the parabolic boundary, free at T.

    Each is a window-max dilation of ``base`` (default psi_eff) plus a
    nonnegative battery bump, so it is the sample of a continuous function
    lying above psi at every point.
    """
    grid = psi_eff.grid
    base_vals = np.maximum((base or psi_eff).values, psi_eff.values)
    out = []
    for j, tf in enumerate(test_battery(grid, seed)):
        r = 1 + j % 3
        dil = maximum_filter(base_vals, size=2 * r + 1, mode="constant", cval=0.0)
        amp = 0.1 * (1 + j % 4)
        # lift the final slice too: phi is not required to vanish at T
        lift = tf.phi.values.copy()
        lift[-1] = lift[-2]
        vals = _clear_rim(np.maximum(dil, psi_eff.values) + amp * lift, grid, top=False)
        out.append(Field(grid, vals))
    return out


def battery_min(values) -> float:
    values = list(values)
    return float(min(values)) if values else 0.0


# ------------------------------------------------------------------- sweeps


def convergence_sweep(grid: SpaceTimeGrid, params: PParams, ob: Obstacle, eps_list,
                      return_solutions: bool = False):
    """Distances between mollified-obstacle solves and the direct a.e. solve.

    Returns a list of ConvergenceRecord (and the solves when asked).
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps_list must be positive and strictly decreasing, got {eps_list}")
    ref = solve_parabolic_obstacle(grid, params, ob, mode="ae")
    records: list[ConvergenceRecord] = []
    solves: list[ObstacleSolution] = [ref]
    p = params.p
    for eps in eps_list:
        try:
            sol = solve_with_mollified_obstacle(grid, params, ob, eps)
        except Exception as exc:
            raise SweepError(f"solve failed at eps={eps}: {exc}", records) from exc
        diff = sol.u - ref.u
        records.append(ConvergenceRecord(eps, lp_norm(diff, p), grad_lp_norm(diff, p), energy(sol.u, p)))
        solves.append(sol)
    return (records, solves) if return_solutions else records


def monotone_with_slack(values, slack: float = 0.10) -> bool:
    """Each entry is at most (1 + slack) times its predecessor."""
    return all(b <= (1.0 + slack) * a for a, b in zip(values, values[1:]))


def write_sweep_csv(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eps", "dist_lp", "dist_grad_lp", "energy"])
        for r in records:
            wr.writerow([repr(r.eps), repr(r.dist_lp), repr(r.dist_grad_lp), repr(r.energy)])
    return path


def energy_bound_check(u: ObstacleSolution, ob_smooth: Field, params: PParams, C: float | None = None) -> dict:
    """Compare int int |Du|^p with int int |Dpsi|^p + int int |dpsi/dt|.

    ``ratio`` is the empirical constant; with ``C`` given, ``bounded`` reports
    whether lhs <= C * rhs.
    """
    p = params.p
    lhs = energy(u.u, p)
    grad_part = energy(ob_smooth, p)
    time_part = time_derivative_l1(ob_smooth)
    rhs = grad_part + time_part
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    report = {"lhs": lhs, "rhs": rhs, "grad_part": grad_part, "time_part": time_part, "ratio": ratio}
    if C is not None:
        report["C"] = C
        report["bounded"] = bool(lhs <= C * rhs)
    return report


def barrier_alpha_scan(grid: SpaceTimeGrid, params: PParams, node: tuple[int, int], R0: float,
                       alphas=None, tol: float = 1e-10, seed: int = 0) -> dict:
    """Smallest alpha whose barrier passes the supersolution battery.

    Each residual is divided by |flux pairing| + |time pairing| before the
    comparison with -tol, since the barrier shrinks like exp(-alpha R0^2)
    and an absolute threshold would pass any alpha large enough.
    """
    if alphas is None:
        alphas = [2.0**j for j in range(11)]
    battery = test_battery(grid, seed)
    table = []
    found = None
    for a in alphas:
        f = barrier(grid, node, a, R0)
        worst = math.inf
        for tf in battery:
            fl, tm = supersolution_parts(f, params, tf)
            scale = abs(fl) + abs(tm)
            worst = min(worst, (fl - tm) / scale if scale > 0 else 0.0)
        ok = worst >= -tol
        table.append({"alpha": float(a), "min_relative_residual": worst, "supersolution": bool(ok)})
        if ok and found is None:
            found = float(a)
    return {"node": [int(n) for n in node], "R0": R0, "alpha": found, "table": table}
