"""Named experiments.  Each one builds its data, runs the solves, records checks and writes artifacts."""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis as an
from .exact import barenblatt, concave_envelope
from .grid import Cylinder, Field, SpaceTimeGrid, make_cylinder_grid, sample_function, write_field_csv
from .mollifiers import (
    exp_time_convolve,
    friedrichs_weights,
    space_mollify_zero_extend,
)
from .obstacle import (
    Obstacle,
    ObstacleSolution,
    effective_obstacle,
    save_solution,
    solve_against,
    solve_elliptic_obstacle,
    solve_parabolic_obstacle,
    solve_with_mollified_obstacle,
    solve_with_space_time_mollified,
    elliptic_stability_sweep,
)
from .pde import PParams, solve_p_parabolic

SCENARIOS = {
    "continuous-obstacle": "least solution of a continuous obstacle: complementarity, supersolution and variational checks",
    "supersolution-obstacle": "a supersolution obstacle is its own solution; mollified solves converge to it",
    "ordered-obstacles": "ordered obstacles give ordered solutions",
    "counterexample": "thin-slice obstacle: pointwise solution nonzero, a.e. solution zero, both pass continuous tests",
    "mollify-convergence": "exponential convolution identity, contraction, and convergence of mollified-obstacle solves",
    "space-time-mollify": "time and space mollified obstacles for a characteristic function",
    "elliptic-envelope": "elliptic obstacle solution equals the concave envelope for every p",
    "elliptic-stability": "elliptic solutions depend continuously on the obstacle in W^{1,p}",
    "barenblatt": "unconstrained p-parabolic solver against the Barenblatt source solution",
    "lsc-from-below": "increasing smooth obstacles give increasing solutions converging to the a.e. solution",
    "usc-pointwise": "decreasing smooth obstacles give decreasing solutions converging to the pointwise solution",
}

# frozen desk-scale thresholds
SUPERSOLUTION_TOL = 1e-10
VARIATIONAL_TOL = 1e-8
MOLLIFIER_IDENTITY_FACTOR = 5.0
MOLLIFIER_IDENTITY_EPS = 0.5
SWEEP_SLACK = 0.10
HAT_FINAL_RATIO = 0.02
COUNTEREXAMPLE_POINTWISE_MIN = 0.1
COUNTEREXAMPLE_AE_MAX = 1e-9
ENVELOPE_TOL = 1e-6
STABILITY_FINAL = 1e-3
BARENBLATT_SECONDS = 30.0
BARENBLATT_FACTOR = 1.7
LIMIT_FRACTION = 0.02
ENERGY_RATIO_BAND = 0.5
BARENBLATT_C = 0.1
BARENBLATT_T0 = 0.1
BARENBLATT_SPAN = 0.25


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str
    x_min: float = 0.0
    x_max: float = 1.0
    nx: int = 128
    nt: int = 256
    T: float = 1.0
    p: float = 3.0
    eps_list: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    sigma: float | None = None
    h_cut: float | None = None
    out: str = "out"
    seed: int = 0
    newton_tol: float = 1e-10
    max_inner_iters: int = 500
    omega: float = 1.0
    solver: str = "newton"

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "scenario" not in data:
            raise ConfigError("config needs a 'scenario' entry")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; valid: {', '.join(SCENARIOS)}")
        try:
            self.grid()
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        eps = [float(e) for e in self.eps_list]
        if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"eps_list must be positive and strictly decreasing, got {self.eps_list}")
        self.eps_list = eps

    def grid(self) -> SpaceTimeGrid:
        return make_cylinder_grid(self.x_min, self.x_max, self.nx, self.T, self.nt)

    def params(self) -> PParams:
        return PParams(self.p, self.newton_tol, self.max_inner_iters, self.omega, self.solver)

    def to_dict(self) -> dict:
        return asdict(self)


class Report:
    """Checks, metrics, solves and artifacts collected while a scenario runs."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.checks: list[dict] = []
        self.metrics: dict = {}
        self.solves: list[tuple[str, ObstacleSolution, bool]] = []
        self.artifacts: list[str] = []

    def check(self, name: str, passed, **detail) -> bool:
        passed = bool(passed)
        self.checks.append({"name": name, "pass": passed, **_jsonable(detail)})
        return passed

    def metric(self, **kw) -> None:
        self.metrics.update(_jsonable(kw))

    def add_solve(self, label: str, sol: ObstacleSolution, recheck: bool = True) -> ObstacleSolution:
        self.solves.append((label, sol, recheck))
        return sol

    def save(self, sol: ObstacleSolution, stem: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for path in save_solution(sol, self.out, stem):
            self.artifacts.append(path.name)

    def save_field(self, f: Field, stem: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(write_field_csv(f, self.out / f"{stem}.csv").name)

    def save_sweep(self, records, stem: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(an.write_sweep_csv(records, self.out / f"{stem}.csv").name)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def failed(self) -> list[str]:
        return [c["name"] for c in self.checks if not c["pass"]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ------------------------------------------------------------------ builders


def support_of(vals: np.ndarray) -> Cylinder:
    """Bounding node box of the nonzero entries (a minimal box when all are zero)."""
    nt, nx = vals.shape[0] - 1, vals.shape[1] - 1
    nz = np.argwhere(vals != 0)
    if nz.size == 0:
        return Cylinder(1, nx - 1, 1, nt)
    k_lo, i_lo = nz.min(axis=0)
    k_hi, i_hi = nz.max(axis=0)
    i_hi = max(i_hi, i_lo + 1)
    k_hi = max(k_hi, k_lo + 1)
    if i_hi >= nx:
        i_lo, i_hi = i_lo - 1, nx - 1
    if k_hi > nt:
        k_lo, k_hi = k_lo - 1, nt
    return Cylinder(int(i_lo), int(i_hi), int(k_lo), int(k_hi))


def make_obstacle(grid: SpaceTimeGrid, vals, L: float, thin=()) -> Obstacle:
    vals = np.array(vals, dtype=float)
    vals[0] = 0.0
    vals[:, [0, -1]] = 0.0
    return Obstacle(Field(grid, vals), L, support_of(vals), frozenset(thin))


def _unit(grid):
    X, Tm = np.meshgrid(grid.x, grid.t)
    return (X - grid.x_min) / (grid.x_max - grid.x_min), Tm / grid.T


def hat_obstacle(grid: SpaceTimeGrid, slope: float = 1.0) -> Obstacle:
    """Time-independent concave hat over the whole interval, switched on for t > 0."""
    X, _ = np.meshgrid(grid.x, grid.t)
    vals = slope * np.minimum(X - grid.x_min, grid.x_max - X)
    return make_obstacle(grid, vals, float(vals.max()))


def continuous_obstacle(grid: SpaceTimeGrid, amp: float = 0.5) -> Obstacle:
    xs, ts = _unit(grid)
    vals = amp * an.smooth_bump(xs, 0.5, 0.35) * np.sin(np.pi * ts) ** 2
    return make_obstacle(grid, vals, amp)


def oscillating_obstacle(grid: SpaceTimeGrid, amp: float = 0.5) -> Obstacle:
    xs, ts = _unit(grid)
    vals = amp * an.smooth_bump(xs, 0.5, 0.35) * np.sin(2 * np.pi * ts) ** 2
    return make_obstacle(grid, vals, amp)


def thin_slice_obstacle(grid: SpaceTimeGrid) -> Obstacle:
    """1 on the interior of the slice t = T/2, zero elsewhere."""
    if grid.nt % 2:
        raise ValueError("the thin-slice obstacle needs an even nt")
    k = grid.nt // 2
    vals = np.zeros(grid.shape)
    vals[k, 1:-1] = 1.0
    return make_obstacle(grid, vals, 1.0, thin=(k,))


def random_pl_obstacle(grid: SpaceTimeGrid, rng: np.random.Generator, L: float = 0.5, terms: int = 3) -> np.ndarray:
    """Sum of space-time tents inside the cylinder, clipped at L."""
    xs, ts = _unit(grid)
    vals = np.zeros(grid.shape)
    for _ in range(terms):
        xc = rng.uniform(0.25, 0.75)
        xr = rng.uniform(0.08, 0.2)
        tc = rng.uniform(0.25, 0.85)
        tr = rng.uniform(0.08, 0.2)
        a = rng.uniform(0.1, 0.6)
        vals += a * np.maximum(0, 1 - np.abs(xs - xc) / xr) * np.maximum(0, 1 - np.abs(ts - tc) / tr)
    return np.minimum(vals, L)


def mollifier_fields(grid: SpaceTimeGrid) -> dict:
    fs = {
        "sin_x_times_t": lambda x, t: np.sin(np.pi * x) * t,
        "constant": lambda x, t: np.ones_like(x),
        "bump_squared": lambda x, t: np.sin(np.pi * x) ** 2 * np.sin(np.pi * t) ** 2,
        "oscillating": lambda x, t: np.sin(np.pi * x) * np.sin(2 * np.pi * t) ** 2,
        "parabola_growing": lambda x, t: x * (1 - x) * (1 + t),
    }
    L = grid.x_max - grid.x_min
    return {
        n: sample_function(grid, lambda x, t, f=f: f((x - grid.x_min) / L, t / grid.T)) for n, f in fs.items()
    }


# ------------------------------------------------------------- shared checks


def check_solve_family(rep: Report) -> None:
    """Complementarity on every solve; zero-start vs L-start on every rechecked solve."""
    tol = rep.cfg.newton_tol
    worst_comp = 0.0
    worst_pde = 0.0
    worst_init = 0.0
    for label, sol, recheck in rep.solves:
        worst_comp = max(worst_comp, sol.comp_residual)
        worst_pde = max(worst_pde, sol.inactive_pde_residual)
        if recheck:
            a = solve_against(sol.grid, sol.params, sol.psi_eff, sol.mode, start="zero", upper=sol.L)
            b = solve_against(sol.grid, sol.params, sol.psi_eff, sol.mode, start="upper", upper=sol.L)
            d = float(np.max(np.abs(a.u.values - b.u.values)))
            worst_init = max(worst_init, d, float(np.max(np.abs(a.u.values - sol.u.values))))
    if rep.solves:
        rep.check("complementarity", worst_comp <= tol, worst=worst_comp, tol=tol, solves=len(rep.solves))
        rep.check("pde_residual_off_contact", worst_pde <= tol, worst=worst_pde, tol=tol)
        if any(r for _, _, r in rep.solves):
            rep.check("initialization_independence", worst_init <= 10 * tol, worst=worst_init, tol=10 * tol)
    rep.metric(comp_residual_max=worst_comp, pde_residual_off_contact_max=worst_pde, init_diff_max=worst_init)


def supersolution_battery(rep: Report, u: Field, label: str) -> float:
    params = rep.cfg.params()
    worst = an.battery_min(an.supersolution_residual(u, params, tf) for tf in an.test_battery(u.grid, rep.cfg.seed))
    rep.check(f"{label}_supersolution_battery", worst >= -SUPERSOLUTION_TOL, worst=worst, tol=SUPERSOLUTION_TOL)
    return worst


def variational_battery(rep: Report, v: Field, psi_eff: Field, label: str, base: Field | None = None,
                        tol: float = VARIATIONAL_TOL) -> float:
    params = rep.cfg.params()
    phis = an.admissible_battery(psi_eff, rep.cfg.seed, base=base)
    worst = an.battery_min(an.variational_residual(v, params, phi, psi_eff) for phi in phis)
    rep.check(f"{label}_variational_battery", worst >= -tol, worst=worst, tol=tol, size=len(phis))
    return worst


# ----------------------------------------------------------------- scenarios


def run_continuous_obstacle(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    ob = continuous_obstacle(grid)
    sol = rep.add_solve("direct", solve_parabolic_obstacle(grid, params, ob, mode="ae"))
    rep.save(sol, "solution")
    u = sol.u.values
    rep.check("above_obstacle", np.all(u >= ob.psi.values), min_gap=float(np.min(u - ob.psi.values)))
    rep.check("bounds", (u.min() >= 0) and (u.max() <= ob.L), min=float(u.min()), max=float(u.max()), L=ob.L)
    supersolution_battery(rep, sol.u, "solution")
    variational_battery(rep, sol.u, sol.psi_eff, "solution")
    variational_battery(rep, sol.u, sol.psi_eff, "solution_near", base=sol.u)
    phis = an.admissible_battery(sol.psi_eff, cfg.seed, base=sol.u)
    gaps = [
        an.variational_residual(sol.u, params, f, sol.psi_eff) - an.variational_residual_ibp(sol.u, params, f, sol.psi_eff)
        for f in phis
    ]
    rep.check("ibp_form_not_larger", min(gaps) >= -VARIATIONAL_TOL, min_gap=min(gaps))
    rep.metric(active_nodes=int(sol.active_mask.sum()), max_u=float(u.max()),
               iterations_max=int(sol.iterations.max()))
    scans = [
        an.barrier_alpha_scan(make_cylinder_grid(0, 1, 64, 1.0, 64), params, node, 0.5)
        for node in [(32, 0), (0, 32), (64, 32), (0, 0)]
    ]
    rep.metric(barrier_alpha={str(s["node"]): s["alpha"] for s in scans})
    rep.check("barrier_alpha_found", all(s["alpha"] is not None for s in scans))


def run_supersolution_obstacle(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    ob = hat_obstacle(grid)
    direct = rep.add_solve("direct", solve_parabolic_obstacle(grid, params, ob, mode="ae"))
    rep.save(direct, "solution")
    fixed = float(np.max(np.abs(direct.u.values - ob.psi.values)))
    rep.check("fixed_point", fixed <= 10 * cfg.newton_tol, max_diff=fixed, tol=10 * cfg.newton_tol)
    t0 = time.perf_counter()
    records, solves = an.convergence_sweep(grid, params, ob, cfg.eps_list, return_solutions=True)
    elapsed = time.perf_counter() - t0
    for e, s in zip(cfg.eps_list, solves[1:]):
        rep.add_solve(f"eps={e}", s)
    rep.save_sweep(records, "sweep")
    dist = [r.dist_lp for r in records]
    wnorm = an.lp_norm(ob.psi, cfg.p)
    rep.metric(dist_lp=dist, w_lp=wnorm, final_ratio=dist[-1] / wnorm, sweep_seconds=elapsed)
    rep.check("sweep_monotone", an.monotone_with_slack(dist, SWEEP_SLACK), dist_lp=dist)
    rep.check("sweep_final_threshold", dist[-1] <= HAT_FINAL_RATIO * wnorm,
              final=dist[-1], threshold=HAT_FINAL_RATIO * wnorm)


def run_ordered_obstacles(rep: Report, pairs: int = 20) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    rng = np.random.default_rng(cfg.seed)
    worst = -math.inf
    for j in range(pairs):
        psi1 = random_pl_obstacle(grid, rng)
        psi2 = np.minimum(psi1 + random_pl_obstacle(grid, rng, terms=2), 0.5)
        s1 = solve_parabolic_obstacle(grid, params, make_obstacle(grid, psi1, 0.5))
        s2 = solve_parabolic_obstacle(grid, params, make_obstacle(grid, psi2, 0.5))
        rep.add_solve(f"pair{j}a", s1, recheck=j == 0)
        rep.add_solve(f"pair{j}b", s2, recheck=j == 0)
        worst = max(worst, float(np.max(s1.u.values - s2.u.values)))
        if j == 0:
            rep.save(s1, "pair0_lower")
            rep.save(s2, "pair0_upper")
    rep.metric(pairs=pairs, max_violation=worst)
    rep.check("ordering", worst <= 10 * cfg.newton_tol, max_u1_minus_u2=worst, tol=10 * cfg.newton_tol)


def run_counterexample(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    ob = thin_slice_obstacle(grid)
    k = grid.nt // 2
    pw = rep.add_solve("pointwise", solve_parabolic_obstacle(grid, params, ob, mode="pointwise"))
    ae = rep.add_solve("ae", solve_parabolic_obstacle(grid, params, ob, mode="ae"))
    mol = rep.add_solve("mollified", solve_with_mollified_obstacle(grid, params, ob, cfg.eps_list[-1]))
    rep.save(pw, "pointwise")
    rep.save(ae, "ae")
    after = float(np.max(np.abs(pw.u.values[k + 1])))
    ae_max = float(np.max(np.abs(ae.u.values)))
    mol_max = float(np.max(np.abs(mol.u.values)))
    rep.metric(pointwise_max_after_half=after, ae_max=ae_max, mollified_max=mol_max)
    rep.check("pointwise_nonzero_after_half", after >= COUNTEREXAMPLE_POINTWISE_MIN, value=after)
    rep.check("ae_identically_zero", ae_max <= COUNTEREXAMPLE_AE_MAX, value=ae_max)
    rep.check("mollified_identically_zero", mol_max <= COUNTEREXAMPLE_AE_MAX, value=mol_max)
    # after the slice the pointwise solution is the unconstrained restart from it
    sub = make_cylinder_grid(grid.x_min, grid.x_max, grid.nx, grid.T - k * grid.ht, grid.nt - k)
    h = solve_p_parabolic(sub, params, pw.u.values[k], lambda t: (0.0, 0.0))
    restart = float(np.max(np.abs(h.values - pw.u.values[k:])))
    rep.check("pointwise_is_restart", restart <= 10 * cfg.newton_tol, max_diff=restart)
    psi_pw = effective_obstacle(ob, "pointwise")
    w_pw = variational_battery(rep, pw.u, psi_pw, "pointwise_candidate")
    w_zero = variational_battery(rep, ae.u, psi_pw, "zero_candidate")
    rep.metric(pointwise_battery_min=w_pw, zero_battery_min=w_zero)


def run_mollify_convergence(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    fields_ = mollifier_fields(grid)
    eps = MOLLIFIER_IDENTITY_EPS
    t0 = time.perf_counter()
    ratios = {}
    for name, u in fields_.items():
        ue = exp_time_convolve(u, eps)
        d = np.diff(ue.values, axis=0) / grid.ht
        rhs = (u.values - ue.values)[:-1] / eps
        ratios[name] = float(np.max(np.abs(d - rhs)) / (grid.ht * np.max(np.abs(u.values))))
    elapsed = time.perf_counter() - t0
    rep.metric(identity_ratio=ratios, identity_eps=eps, identity_seconds=elapsed)
    rep.check("convolution_identity", max(ratios.values()) <= MOLLIFIER_IDENTITY_FACTOR,
              worst=max(ratios.values()), factor=MOLLIFIER_IDENTITY_FACTOR)
    contraction = True
    for u in fields_.values():
        for e in cfg.eps_list:
            ue = exp_time_convolve(u, e)
            for q in (2.0, 3.0, 4.0):
                contraction &= an.lp_norm(ue, q) <= an.lp_norm(u, q)
    rep.check("contraction", contraction)
    conv = {}
    for name, u in fields_.items():
        conv[name] = [an.lp_norm(exp_time_convolve(u, e) - u, cfg.p) for e in cfg.eps_list]
    rep.metric(convolution_distance=conv)
    rep.check("convolution_converges", all(all(b < a for a, b in zip(v, v[1:])) for v in conv.values()))
    w = friedrichs_weights(4 * grid.ht, grid.ht)
    rep.check("friedrichs_weights_sum", abs(math.fsum(w) - 1.0) <= 1e-15, sum_minus_one=math.fsum(w) - 1.0)

    ob = continuous_obstacle(grid)
    records, solves = an.convergence_sweep(grid, params, ob, cfg.eps_list, return_solutions=True)
    rep.add_solve("direct", solves[0])
    for e, s in zip(cfg.eps_list, solves[1:]):
        rep.add_solve(f"eps={e}", s, recheck=False)
    rep.save_sweep(records, "sweep")
    dist = [r.dist_lp for r in records]
    rep.metric(dist_lp=dist, dist_grad_lp=[r.dist_grad_lp for r in records])
    rep.check("sweep_monotone", an.monotone_with_slack(dist, SWEEP_SLACK), dist_lp=dist)
    for e, s in zip(cfg.eps_list, solves[1:]):
        supersolution_battery(rep, s.u, f"eps{e}_solution")

    ratios_e = {}
    for name, maker in (("hat", hat_obstacle), ("oscillating", oscillating_obstacle)):
        rs = []
        for nx in (32, 64, 128):
            g = make_cylinder_grid(cfg.x_min, cfg.x_max, nx, cfg.T, 2 * nx)
            o = maker(g)
            smooth = exp_time_convolve(o.psi, 0.1)
            s = solve_against(g, params, smooth)
            rep.add_solve(f"energy_{name}_{nx}", s, recheck=False)
            rs.append(an.energy_bound_check(s, smooth, params)["ratio"])
        ratios_e[name] = rs
        spread = max(rs) / min(rs) - 1.0 if min(rs) > 0 else math.inf
        rep.check(f"energy_ratio_stable_{name}", spread <= ENERGY_RATIO_BAND, ratios=rs, spread=spread)
    rep.metric(energy_ratio=ratios_e)


def run_space_time_mollify(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    xs, ts = _unit(grid)
    box = (xs >= 0.3) & (xs <= 0.7) & (ts >= 0.3) & (ts <= 0.6)
    ob = make_obstacle(grid, box.astype(float), 1.0)
    sigmas = [cfg.sigma * e / cfg.eps_list[0] for e in cfg.eps_list] if cfg.sigma else list(cfg.eps_list)
    sols = []
    for e, s in zip(cfg.eps_list, sigmas):
        sol = rep.add_solve(f"eps={e}", solve_with_space_time_mollified(grid, params, ob, e, s), recheck=len(sols) == 0)
        sols.append(sol)
        u = sol.u.values
        rep.check(f"above_mollified_eps{e}", np.all(u >= sol.psi_eff.values))
        rep.check(f"bounded_eps{e}", u.min() >= 0 and u.max() <= 1.0, max=float(u.max()))
    rep.save(sols[-1], "solution")
    steps = [an.lp_norm(b.u - a.u, cfg.p) for a, b in zip(sols, sols[1:])]
    rep.metric(successive_lp=steps, sigmas=sigmas)
    rep.check("cauchy_trend", all(b < a for a, b in zip(steps, steps[1:])), successive_lp=steps)


def _random_elliptic_obstacle(x, rng):
    m = int(rng.integers(4, 9))
    xs = np.sort(rng.uniform(0.05, 0.95, m))
    ys = rng.uniform(-0.3, 1.0, m)
    return np.interp((x - x[0]) / (x[-1] - x[0]), np.r_[0.0, xs, 1.0], np.r_[-0.1, ys, -0.1])


def run_elliptic_envelope(rep: Report, count: int = 10, nx: int = 256) -> None:
    cfg = rep.cfg
    x = np.linspace(cfg.x_min, cfg.x_max, nx + 1)
    worst = 0.0
    per_p = {}
    obstacles = [_random_elliptic_obstacle(x, np.random.default_rng(cfg.seed + s)) for s in range(count)]
    hat = np.minimum(x - cfg.x_min, cfg.x_max - x) * 0.8 - 0.05 * (cfg.x_max - cfg.x_min)
    for p in (2.0, 3.0, 4.0):
        params = PParams(p, cfg.newton_tol, cfg.max_inner_iters, cfg.omega, cfg.solver)
        errs = []
        for psi in obstacles + [hat]:
            v = solve_elliptic_obstacle(cfg.x_min, cfg.x_max, nx, params, psi)
            errs.append(float(np.max(np.abs(v - concave_envelope(x, psi)))))
        per_p[str(p)] = max(errs)
        worst = max(worst, max(errs))
    rep.metric(max_envelope_error=per_p, nx=nx, obstacles=count)
    rep.check("envelope", worst <= ENVELOPE_TOL, worst=worst, tol=ENVELOPE_TOL)
    rep.out.mkdir(parents=True, exist_ok=True)
    v = solve_elliptic_obstacle(cfg.x_min, cfg.x_max, nx, cfg.params(), obstacles[0])
    np.savetxt(rep.out / "elliptic_solution.csv", np.column_stack([x, obstacles[0], v]), fmt="%.17g",
               delimiter=",", header="x,psi,v", comments="")
    rep.artifacts.append("elliptic_solution.csv")


def stability_obstacle(x):
    s = (x - x[0]) / (x[-1] - x[0])
    return 0.5 * an.smooth_bump(s, 0.3, 0.15) + 0.4 * an.smooth_bump(s, 0.7, 0.15)


def stability_bump(x, psi):
    """Smooth bump on the higher peak, amplitude 1% of max psi, same width as the peak."""
    s = (x - x[0]) / (x[-1] - x[0])
    return 0.01 * float(np.max(psi)) * an.smooth_bump(s, 0.3, 0.15)


def run_elliptic_stability(rep: Report, nx: int = 256) -> None:
    cfg = rep.cfg
    params = cfg.params()
    x = np.linspace(cfg.x_min, cfg.x_max, nx + 1)
    psi = stability_obstacle(x)
    bump = stability_bump(x, psi)
    js = [1, 2, 4, 8, 16]
    rows = elliptic_stability_sweep(psi, [psi + bump / j for j in js], cfg.x_min, cfg.x_max, params)
    dist = [r["solution_dist"] for r in rows]
    rep.metric(j=js, solution_dist=dist, obstacle_dist=[r["obstacle_dist"] for r in rows])
    rep.check("stability_monotone", all(b < a for a, b in zip(dist, dist[1:])), solution_dist=dist)
    rep.check("stability_final", dist[-1] <= STABILITY_FINAL, final=dist[-1], tol=STABILITY_FINAL)
    same = elliptic_stability_sweep(psi, [psi, psi], cfg.x_min, cfg.x_max, params)
    rep.check("identical_obstacles_zero", all(r["solution_dist"] == 0.0 for r in same))
    alt = [psi + ((-1) ** j) * bump / (j + 1) for j in range(1, 9)]
    alt_rows = elliptic_stability_sweep(psi, alt, cfg.x_min, cfg.x_max, params)
    alt_dist = [r["solution_dist"] for r in alt_rows]
    rep.metric(alternating_dist=alt_dist)
    rep.check("alternating_to_zero", alt_dist[-1] <= 0.25 * alt_dist[0], alternating_dist=alt_dist)


def barenblatt_error(nx: int, nt: int, p: float = 3.0, params: PParams | None = None,
                     return_field: bool = False):
    """L-infinity error at t0 + span of the backward-Euler solve started from the exact profile."""
    params = params or PParams(p)
    grid = make_cylinder_grid(-1.0, 1.0, nx, BARENBLATT_SPAN, nt)
    u0 = barenblatt(grid.x, BARENBLATT_T0, p, BARENBLATT_C)
    u = solve_p_parabolic(grid, params, u0, lambda t: (0.0, 0.0))
    exact = barenblatt(grid.x, BARENBLATT_T0 + BARENBLATT_SPAN, p, BARENBLATT_C)
    err = float(np.max(np.abs(u.values[-1] - exact)))
    return (err, u) if return_field else err


def run_barenblatt(rep: Report) -> None:
    cfg = rep.cfg
    params = PParams(cfg.p, cfg.newton_tol, cfg.max_inner_iters, cfg.omega, cfg.solver)
    t0 = time.perf_counter()
    coarse = barenblatt_error(64, 128, cfg.p, params)
    fine, u = barenblatt_error(128, 256, cfg.p, params, return_field=True)
    elapsed = time.perf_counter() - t0
    rep.save_field(u, "barenblatt_fine")
    rep.metric(err_coarse=coarse, err_fine=fine, ratio=coarse / fine, solve_seconds=elapsed,
               C=BARENBLATT_C, t0=BARENBLATT_T0, span=BARENBLATT_SPAN)
    rep.check("refinement_ratio", coarse / fine >= BARENBLATT_FACTOR, ratio=coarse / fine)
    rep.check("runtime", elapsed < BARENBLATT_SECONDS, seconds=elapsed, limit=BARENBLATT_SECONDS)


def smoothstep(y):
    y = np.clip(y, 0.0, 1.0)
    return y * y * (3.0 - 2.0 * y)


def lsc_sequence(grid: SpaceTimeGrid, L: float = 0.5):
    """Open-box characteristic times L and an increasing smooth sequence below it.

    Scales run down until the sequence agrees with the target on the grid.
    """
    xs, ts = _unit(grid)
    a, b, c, d = 0.3, 0.7, 0.2, 0.6
    target = L * ((xs > a) & (xs < b) & (ts > c) & (ts < d))
    seq = []
    n = 4.0
    while True:
        psi = L * smoothstep(n * (xs - a)) * smoothstep(n * (b - xs)) * smoothstep(n * (ts - c)) * smoothstep(n * (d - ts))
        seq.append(psi)
        if np.array_equal(psi, target) or len(seq) > 16:
            break
        n *= 2
    return target, seq


def usc_sequence(grid: SpaceTimeGrid):
    """Thin-slice obstacle and a decreasing sequence of time tents of half-width delta above it."""
    ob = thin_slice_obstacle(grid)
    _, ts = _unit(grid)
    prof = np.zeros(grid.nx + 1)
    prof[1:-1] = 1.0
    seq = []
    delta = 0.25
    while True:
        tent = np.maximum(0.0, 1.0 - np.abs(ts - 0.5) / delta)
        psi = tent * prof
        seq.append(psi)
        if np.array_equal(psi, ob.psi.values) or len(seq) > 16:
            break
        delta /= 2
    return ob, seq


def _limit_sequence(rep: Report, direct: ObstacleSolution, seq, L: float, increasing: bool, label: str):
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    sols = []
    for j, psi in enumerate(seq):
        s = solve_parabolic_obstacle(grid, params, make_obstacle(grid, psi, L))
        rep.add_solve(f"{label}{j}", s, recheck=False)
        sols.append(s)
    tol = 10 * cfg.newton_tol
    sign = 1.0 if increasing else -1.0
    mono = max(float(np.max(sign * (a.u.values - b.u.values))) for a, b in zip(sols, sols[1:]))
    dist = [an.lp_norm(s.u - direct.u, cfg.p) for s in sols]
    rep.metric(sequence_length=len(seq), dist_lp=dist, monotonicity_violation=mono)
    rep.check("solutions_monotone", mono <= tol, violation=mono, tol=tol)
    rep.check("distances_non_increasing", all(b <= a + tol for a, b in zip(dist, dist[1:])), dist_lp=dist)
    rep.check("limit", dist[-1] <= LIMIT_FRACTION * L, final=dist[-1], threshold=LIMIT_FRACTION * L)
    sweep = [an.ConvergenceRecord(float(j), d, an.grad_lp_norm(s.u - direct.u, cfg.p), an.energy(s.u, cfg.p))
             for j, (d, s) in enumerate(zip(dist, sols))]
    rep.save_sweep(sweep, "sequence")


def run_lsc_from_below(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    L = 0.5
    target, seq = lsc_sequence(grid, L)
    direct = rep.add_solve("direct", solve_parabolic_obstacle(grid, params, make_obstacle(grid, target, L)))
    rep.save(direct, "direct")
    _limit_sequence(rep, direct, seq, L, increasing=True, label="lsc")


def run_usc_pointwise(rep: Report) -> None:
    cfg = rep.cfg
    grid, params = cfg.grid(), cfg.params()
    ob, seq = usc_sequence(grid)
    direct = rep.add_solve("pointwise", solve_parabolic_obstacle(grid, params, ob, mode="pointwise"))
    rep.save(direct, "pointwise")
    _limit_sequence(rep, direct, seq, ob.L, increasing=False, label="usc")
    ae_max = float(np.max(np.abs(solve_parabolic_obstacle(grid, params, ob, mode="ae").u.values)))
    rep.metric(ae_max=ae_max)
    rep.check("limit_is_not_ae_solution", ae_max <= COUNTEREXAMPLE_AE_MAX
              and float(np.max(direct.u.values)) >= COUNTEREXAMPLE_POINTWISE_MIN)


RUNNERS = {
    "continuous-obstacle": run_continuous_obstacle,
    "supersolution-obstacle": run_supersolution_obstacle,
    "ordered-obstacles": run_ordered_obstacles,
    "counterexample": run_counterexample,
    "mollify-convergence": run_mollify_convergence,
    "space-time-mollify": run_space_time_mollify,
    "elliptic-envelope": run_elliptic_envelope,
    "elliptic-stability": run_elliptic_stability,
    "barenblatt": run_barenblatt,
    "lsc-from-below": run_lsc_from_below,
    "usc-pointwise": run_usc_pointwise,
}


def run_scenario(cfg: ScenarioConfig) -> tuple[bool, dict]:
    """Run one scenario and write ``summary.json``.  Returns (pass, summary)."""
    cfg.validate()
    rep = Report(cfg)
    rep.out.mkdir(parents=True, exist_ok=True)
    error = None
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            RUNNERS[cfg.scenario](rep)
            check_solve_family(rep)
    except Exception as exc:  # summary is written on any failure
        error = f"{type(exc).__name__}: {exc}"
        rep.check("completed", False, error=error)
    rep.metric(seconds=time.perf_counter() - t0)
    summary = {
        "scenario": cfg.scenario,
        "pass": rep.passed,
        "metrics": rep.metrics,
        "checks": rep.checks,
        "failed": rep.failed(),
        "artifacts": sorted(set(rep.artifacts)),
        "config": _jsonable(cfg.to_dict()),
    }
    if error:
        summary["error"] = error
    (rep.out / "summary.json").write_text(json.dumps(summary, indent=2))
    return rep.passed, summary
