import csv

import numpy as np
import pytest
from scipy.integrate import quad

from obstacle_lab import analysis as an
from obstacle_lab.grid import Field, make_cylinder_grid, sample_function
from obstacle_lab.obstacle import solve_parabolic_obstacle
from obstacle_lab.pde import PParams, step_residual
from obstacle_lab.scenarios import continuous_obstacle, hat_obstacle


def test_battery_shape_and_determinism(small_grid):
    a = an.test_battery(small_grid, seed=3)
    b = an.test_battery(small_grid, seed=3)
    c = an.test_battery(small_grid, seed=4)
    assert len(a) == 12
    assert all(np.array_equal(x.phi.values, y.phi.values) for x, y in zip(a, b))
    assert not np.array_equal(a[-1].phi.values, c[-1].phi.values)
    for tf in a:
        assert tf.nonnegative and tf.compact_support


def test_residual_is_weighted_step_residual(small_grid, rng, params):
    g = small_grid
    u = Field(g, rng.normal(size=g.shape))
    R = np.zeros(g.shape)
    for k in range(1, g.nt + 1):
        R[k] = step_residual(u.values[k], u.values[k - 1], g.ht, g.hx, params.p)
    for tf in an.test_battery(g):
        s = an.supersolution_residual(u, params, tf)
        ref = g.hx * np.sum(tf.phi.values * R)
        assert np.isclose(s, ref, rtol=1e-10, atol=1e-12)


def _continuous_hat_value(phi_x, phi_t):
    # u = min(x, 1-x) is time independent: -u'' = 2 delta_{1/2}
    return 2.0 * phi_x(0.5) * quad(phi_t, 0, 1)[0]


def test_hat_supersolution_matches_dense_quadrature():
    params = PParams()
    phi_x = lambda s: an.smooth_bump(np.array([s]), 0.5, 0.3)[0]  # noqa: E731
    phi_t = lambda s: an.smooth_bump(np.array([s]), 0.5, 0.4)[0]  # noqa: E731
    exact = _continuous_hat_value(phi_x, phi_t)
    errs = []
    for nx, nt in ((32, 64), (64, 128)):
        g = make_cylinder_grid(0.0, 1.0, nx, 1.0, nt)
        u = hat_obstacle(g).psi
        tf = an.TestFunction(Field(g, np.outer(an.smooth_bump(g.t, 0.5, 0.4), an.smooth_bump(g.x, 0.5, 0.3))))
        s = an.supersolution_residual(u, params, tf)
        assert s >= -1e-8
        errs.append(abs(s - exact))
    assert errs[1] < errs[0] and errs[1] < 0.05 * exact


def test_hat_supersolution_battery_nonnegative():
    g = make_cylinder_grid(0.0, 1.0, 64, 1.0, 128)
    u = hat_obstacle(g).psi
    assert min(an.supersolution_residual(u, PParams(), tf) for tf in an.test_battery(g)) >= -1e-8


def test_admissibility(small_grid):
    vals = np.zeros(small_grid.shape)
    vals[5, 5] = -1.0
    with pytest.raises(an.AdmissibilityError):
        an.TestFunction(Field(small_grid, vals))
    vals[5, 5] = 1.0
    vals[0, 3] = 1.0
    with pytest.raises(an.AdmissibilityError):
        an.TestFunction(Field(small_grid, vals))
    tf = an.TestFunction.from_values(small_grid, vals)
    assert tf.nonnegative and not tf.compact_support
    with pytest.raises(an.AdmissibilityError):
        an.supersolution_residual(small_grid.zeros(), PParams(), tf)
    neg = an.test_battery(small_grid)[0].scaled(-1.0)
    assert not neg.nonnegative
    with pytest.raises(an.AdmissibilityError):
        an.supersolution_residual(small_grid.zeros(), PParams(), neg)


def test_variational_checks(small_grid, params):
    ob = continuous_obstacle(small_grid)
    sol = solve_parabolic_obstacle(small_grid, params, ob)
    phis = an.admissible_battery(sol.psi_eff)
    for phi in phis:
        assert np.all(phi.values >= ob.psi.values)
        assert not phi.values[small_grid.parabolic_boundary_mask()].any()
        assert an.variational_residual(sol.u, params, phi, sol.psi_eff) >= -1e-8
    low = ob.psi * 0.5
    with pytest.raises(an.AdmissibilityError, match="phi < psi"):
        an.variational_residual(sol.u, params, low, sol.psi_eff)


def test_variational_residual_zero_at_phi_equal_v(small_grid, params):
    sol = solve_parabolic_obstacle(small_grid, params, continuous_obstacle(small_grid))
    assert an.variational_residual(sol.u, params, sol.u, sol.psi_eff) == 0.0
    assert an.variational_residual_ibp(sol.u, params, sol.u, sol.psi_eff) == 0.0


def test_norms(small_grid):
    one = sample_function(small_grid, lambda x, t: 1.0)
    assert np.isclose(an.lp_norm(one, 3.0), 1.0)
    xt = sample_function(small_grid, lambda x, t: x * t)
    # rectangle rule over k = 1..nt of t^p
    expected = small_grid.ht * np.sum(small_grid.t[1:] ** 3)
    assert np.isclose(an.energy(xt, 3.0), expected)
    assert np.isclose(an.grad_lp_norm(xt, 3.0), expected ** (1 / 3))
    assert np.isclose(an.time_derivative_l1(sample_function(small_grid, lambda x, t: t)), 1.0)
    with pytest.raises(ValueError):
        an.lp_norm(one, 0.5)


def test_monotone_with_slack():
    assert an.monotone_with_slack([1.0, 1.05, 0.5])
    assert not an.monotone_with_slack([1.0, 1.2])
    assert an.monotone_with_slack([])


def test_convergence_records(tmp_path):
    with pytest.raises(ValueError):
        an.ConvergenceRecord(0.1, -1.0, 0.0, 0.0)
    recs = [an.ConvergenceRecord(0.2, 0.1, 0.2, 0.3), an.ConvergenceRecord(0.1, 0.05, 0.1, 0.3)]
    path = an.write_sweep_csv(recs, tmp_path / "s.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["eps", "dist_lp", "dist_grad_lp", "energy"]
    assert float(rows[2][1]) == 0.05


def test_convergence_sweep(small_grid, params):
    ob = continuous_obstacle(small_grid)
    with pytest.raises(ValueError):
        an.convergence_sweep(small_grid, params, ob, [0.1, 0.2])
    recs = an.convergence_sweep(small_grid, params, ob, [0.4, 0.2, 0.1])
    d = [r.dist_lp for r in recs]
    assert d[0] > d[1] > d[2] > 0


def test_energy_bound_check(small_grid, params):
    ob = continuous_obstacle(small_grid)
    sol = solve_parabolic_obstacle(small_grid, params, ob)
    rep = an.energy_bound_check(sol, ob.psi, params, C=100.0)
    assert rep["bounded"] and rep["lhs"] > 0
    assert np.isclose(rep["rhs"], rep["grad_part"] + rep["time_part"])


def test_barrier_scan_finds_alpha(params):
    g = make_cylinder_grid(0.0, 1.0, 32, 1.0, 32)
    scan = an.barrier_alpha_scan(g, params, (16, 0), 0.5, alphas=[1.0, 2.0, 4.0])
    assert scan["alpha"] is not None
    assert len(scan["table"]) == 3
