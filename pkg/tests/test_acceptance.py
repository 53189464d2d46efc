"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints one line ``[criterion N] PASS|FAIL <name>: <details>``.
"""

import time

import numpy as np
import pytest

from obstacle_lab import analysis as an
from obstacle_lab.exact import concave_envelope
from obstacle_lab.mollifiers import exp_time_convolve
from obstacle_lab.obstacle import (
    effective_obstacle,
    elliptic_stability_sweep,
    solve_elliptic_obstacle,
    solve_parabolic_obstacle,
    solve_with_mollified_obstacle,
)
from obstacle_lab.pde import PParams, solve_slice
from obstacle_lab.scenarios import (
    BARENBLATT_FACTOR,
    COUNTEREXAMPLE_AE_MAX,
    COUNTEREXAMPLE_POINTWISE_MIN,
    ENVELOPE_TOL,
    HAT_FINAL_RATIO,
    LIMIT_FRACTION,
    MOLLIFIER_IDENTITY_EPS,
    MOLLIFIER_IDENTITY_FACTOR,
    SCENARIOS,
    STABILITY_FINAL,
    SWEEP_SLACK,
    VARIATIONAL_TOL,
    ScenarioConfig,
    _random_elliptic_obstacle,
    barenblatt_error,
    hat_obstacle,
    lsc_sequence,
    make_obstacle,
    mollifier_fields,
    random_pl_obstacle,
    run_scenario,
    stability_bump,
    stability_obstacle,
    thin_slice_obstacle,
    usc_sequence,
)

DEFAULT = ScenarioConfig("continuous-obstacle")
TOL = DEFAULT.newton_tol


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"criterion {number} ({name}) failed: {detail}"

    return _report


@pytest.fixture(scope="module")
def grid():
    return DEFAULT.grid()


@pytest.fixture(scope="module")
def params():
    return DEFAULT.params()


@pytest.fixture(scope="module")
def all_scenarios(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenarios")
    return {name: run_scenario(ScenarioConfig(name, out=str(root / name)))[1] for name in SCENARIOS}


def test_c01_mollifier_identity(report, grid):
    fields = list(mollifier_fields(grid).values())
    eps = MOLLIFIER_IDENTITY_EPS
    t0 = time.perf_counter()
    worst = 0.0
    for u in fields:
        ue = exp_time_convolve(u, eps).values
        lhs = np.diff(ue, axis=0) / grid.ht
        rhs = (u.values - ue)[:-1] / eps
        worst = max(worst, np.max(np.abs(lhs - rhs)) / (grid.ht * np.max(np.abs(u.values))))
    elapsed = time.perf_counter() - t0
    ok = len(fields) == 5 and worst <= MOLLIFIER_IDENTITY_FACTOR and elapsed < 1.0
    report(1, "mollifier identity", ok,
           f"max ratio {worst:.3f} (limit {MOLLIFIER_IDENTITY_FACTOR}), eps={eps}, {elapsed:.3f} s (limit 1 s)")


def test_c02_contraction(report, grid):
    bad = []
    for name, u in mollifier_fields(grid).items():
        for eps in DEFAULT.eps_list:
            ue = exp_time_convolve(u, eps)
            for p in (2.0, 3.0, 4.0):
                if not an.lp_norm(ue, p) <= an.lp_norm(u, p):
                    bad.append((name, eps, p))
    report(2, "L^p contraction", not bad, f"{len(bad)} violations over 5 fields x 4 eps x 3 p")


def test_c03_barenblatt(report):
    t0 = time.perf_counter()
    coarse = barenblatt_error(64, 128)
    fine = barenblatt_error(128, 256)
    elapsed = time.perf_counter() - t0
    ratio = coarse / fine
    ok = ratio >= BARENBLATT_FACTOR and elapsed < 30.0
    report(3, "Barenblatt refinement", ok,
           f"err {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3f} (need >= {BARENBLATT_FACTOR}), {elapsed:.2f} s")


def test_c04_least_equals_variational(report, grid, params):
    ob = hat_obstacle(grid)
    t0 = time.perf_counter()
    records = an.convergence_sweep(grid, params, ob, DEFAULT.eps_list)
    elapsed = time.perf_counter() - t0
    dist = [r.dist_lp for r in records]
    wnorm = an.lp_norm(ob.psi, params.p)
    mono = an.monotone_with_slack(dist, SWEEP_SLACK)
    final_ok = dist[-1] <= HAT_FINAL_RATIO * wnorm
    ok = mono and final_ok and elapsed < 120.0
    report(4, "hat eps-sweep", ok,
           f"dist_lp/||w|| = {[round(d / wnorm, 4) for d in dist]}, monotone={mono}, "
           f"final {dist[-1] / wnorm:.4f} (limit {HAT_FINAL_RATIO}), {elapsed:.2f} s")


def test_c05_supersolution_fixed_point(report, grid, params):
    ob = hat_obstacle(grid)
    sol = solve_parabolic_obstacle(grid, params, ob, mode="ae")
    diff = float(np.max(np.abs(sol.u.values - ob.psi.values)))
    report(5, "supersolution fixed point", diff <= 10 * TOL, f"max|u - psi| = {diff:.3e} (limit {10 * TOL:.0e})")


def test_c06_ordering(report, grid, params):
    rng = np.random.default_rng(DEFAULT.seed)
    worst = -np.inf
    for _ in range(20):
        p1 = random_pl_obstacle(grid, rng)
        p2 = np.minimum(p1 + random_pl_obstacle(grid, rng, terms=2), 0.5)
        assert np.all(p1 <= p2)
        u1 = solve_parabolic_obstacle(grid, params, make_obstacle(grid, p1, 0.5)).u.values
        u2 = solve_parabolic_obstacle(grid, params, make_obstacle(grid, p2, 0.5)).u.values
        worst = max(worst, float(np.max(u1 - u2)))
    report(6, "ordering", worst <= 10 * TOL, f"20 pairs, max(u1 - u2) = {worst:.3e} (limit {10 * TOL:.0e})")


def test_c07_complementarity(report, all_scenarios):
    comp = max(s["metrics"]["comp_residual_max"] for s in all_scenarios.values())
    pde = max(s["metrics"]["pde_residual_off_contact_max"] for s in all_scenarios.values())
    errors = [n for n, s in all_scenarios.items() if "error" in s]
    ok = comp <= TOL and pde <= TOL and not errors
    report(7, "complementarity", ok,
           f"max comp_residual {comp:.2e}, max PDE residual off contact {pde:.2e} (limit {TOL:.0e}); "
           f"{len(all_scenarios)} scenarios, errors: {errors}")


def test_c08_counterexample(report, grid, params):
    ob = thin_slice_obstacle(grid)
    k = grid.nt // 2
    pw = solve_parabolic_obstacle(grid, params, ob, mode="pointwise")
    ae = solve_parabolic_obstacle(grid, params, ob, mode="ae")
    mol = solve_with_mollified_obstacle(grid, params, ob, DEFAULT.eps_list[-1])
    after = float(np.max(np.abs(pw.u.values[k + 1])))
    ae_max = max(float(np.max(np.abs(ae.u.values))), float(np.max(np.abs(mol.u.values))))
    psi = effective_obstacle(ob, "pointwise")
    phis = an.admissible_battery(psi, DEFAULT.seed)
    w_pw = an.battery_min(an.variational_residual(pw.u, params, f, psi) for f in phis)
    w_zero = an.battery_min(an.variational_residual(ae.u, params, f, psi) for f in phis)
    ok = (after > COUNTEREXAMPLE_POINTWISE_MIN and ae_max <= COUNTEREXAMPLE_AE_MAX
          and w_pw >= -VARIATIONAL_TOL and w_zero >= -VARIATIONAL_TOL)
    report(8, "thin-slice counterexample", ok,
           f"pointwise max at k={k + 1}: {after:.4f} (> {COUNTEREXAMPLE_POINTWISE_MIN}), ae/mollified max {ae_max:.1e}, "
           f"battery min {w_pw:.3e} / {w_zero:.3e} (>= -{VARIATIONAL_TOL:.0e})")


def test_c09_elliptic_envelope(report):
    nx = 256
    x = np.linspace(0.0, 1.0, nx + 1)
    worst = 0.0
    for seed in range(10):
        psi = _random_elliptic_obstacle(x, np.random.default_rng(seed))
        env = concave_envelope(x, psi)
        for p in (2.0, 3.0, 4.0):
            v = solve_elliptic_obstacle(0.0, 1.0, nx, PParams(p=p), psi)
            worst = max(worst, float(np.max(np.abs(v - env))))
    report(9, "elliptic envelope", worst <= ENVELOPE_TOL, f"max|v - envelope| = {worst:.2e} (limit {ENVELOPE_TOL:.0e})")


def test_c10_elliptic_stability(report):
    x = np.linspace(0.0, 1.0, 257)
    psi = stability_obstacle(x)
    bump = stability_bump(x, psi)
    rows = elliptic_stability_sweep(psi, [psi + bump / j for j in (1, 2, 4, 8, 16)])
    dist = [r["solution_dist"] for r in rows]
    mono = all(b < a for a, b in zip(dist, dist[1:]))
    ok = mono and dist[-1] <= STABILITY_FINAL
    report(10, "elliptic stability", ok,
           f"W^1,p distances {[f'{d:.2e}' for d in dist]}, monotone={mono} (final limit {STABILITY_FINAL:.0e})")


def test_c11_initialization_independence(report, all_scenarios):
    worst = max(s["metrics"]["init_diff_max"] for s in all_scenarios.values())
    # the elliptic solver is not covered by the scenario recheck: compare starts here
    x = np.linspace(0.0, 1.0, 257)
    psi = stability_obstacle(x)
    params = PParams()
    a = np.zeros(257)
    b = np.full(257, float(psi.max()))
    b[[0, -1]] = 0.0
    for u in (a, b):
        solve_slice(u, np.zeros(257), psi, 0.0, x[1], x[1], params)
    worst = max(worst, float(np.max(np.abs(a - b))))
    report(11, "initialization independence", worst <= 10 * TOL,
           f"max |u_zero - u_L| = {worst:.2e} over {len(all_scenarios)} scenarios + elliptic (limit {10 * TOL:.0e})")


def _sequence_check(grid, params, direct, seq, L, increasing):
    sols = [solve_parabolic_obstacle(grid, params, make_obstacle(grid, s, L)).u for s in seq]
    sign = 1.0 if increasing else -1.0
    mono = max(float(np.max(sign * (a.values - b.values))) for a, b in zip(sols, sols[1:]))
    dist = [an.lp_norm(s - direct.u, params.p) for s in sols]
    return mono, dist


def test_c12_semicontinuous_limits(report, grid, params):
    L = 0.5
    target, seq = lsc_sequence(grid, L)
    direct = solve_parabolic_obstacle(grid, params, make_obstacle(grid, target, L), mode="ae")
    mono_l, dist_l = _sequence_check(grid, params, direct, seq, L, True)
    ob, useq = usc_sequence(grid)
    pw = solve_parabolic_obstacle(grid, params, ob, mode="pointwise")
    mono_u, dist_u = _sequence_check(grid, params, pw, useq, ob.L, False)
    ok = (mono_l <= 10 * TOL and mono_u <= 10 * TOL
          and dist_l[-1] <= LIMIT_FRACTION * L and dist_u[-1] <= LIMIT_FRACTION * ob.L)
    # the sequences end where they coincide with the target on the grid; the
    # distance one term earlier is reported as well
    report(12, "lsc/usc limits", ok,
           f"lsc: {len(seq)} terms, monotone defect {mono_l:.1e}, dist {dist_l[-2]:.2e} -> {dist_l[-1]:.2e} "
           f"(limit {LIMIT_FRACTION * L}); usc: {len(useq)} terms, monotone defect {mono_u:.1e}, "
           f"dist {dist_u[-2]:.2e} -> {dist_u[-1]:.2e} (limit {LIMIT_FRACTION * ob.L})")
