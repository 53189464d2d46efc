"""Compiled and pure-Python kernels: correctness against scipy oracles and agreement."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from obstacle_lab import _kernels_py, kernels

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="extension not built")


def _problem(seed, n=None, elliptic=False):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(5, 60))
    psi = np.maximum(rng.normal(0, 0.3, n), 0.0)
    psi[[0, -1]] = 0.0
    uold = np.abs(rng.normal(0, 0.2, n))
    uold[[0, -1]] = 0.0
    hx = 1.0 / (n - 1)
    c0, c1 = (0.0, hx) if elliptic else (1.0, rng.uniform(0.1, 5.0))
    p = float(rng.choice([2.0, 3.0, 4.5]))
    return uold, psi, c0, c1, hx, p


def _energy(v, uold, c0, c1, hx, p):
    u = np.r_[0.0, v, 0.0]
    return 0.5 * c0 * np.sum((v - uold[1:-1]) ** 2) + c1 * hx / p * np.sum(np.abs(np.diff(u) / hx) ** p)


def test_backend_names():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.get_backend("python") is _kernels_py
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("seed", range(6))
def test_qp_box_matches_lbfgsb(seed):
    rng = np.random.default_rng(seed)
    m = 25
    dfc = rng.uniform(0.0, 3.0, m + 1)
    c0 = 0.5
    g = rng.normal(size=m)
    lower = -rng.uniform(0, 0.5, m)
    d, sweeps = _kernels_py.qp_box(dfc, c0, g, lower, np.zeros(m, bool), np.zeros((3, m)))
    H = np.diag(c0 + dfc[1:] + dfc[:-1]) - np.diag(dfc[1:-1], 1) - np.diag(dfc[1:-1], -1)
    ref = minimize(lambda z: g @ z + 0.5 * z @ H @ z, np.zeros(m), jac=lambda z: g + H @ z,
                   bounds=[(lo, None) for lo in lower], method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    assert sweeps < 50
    assert np.all(d >= lower)
    assert np.allclose(d, ref.x, atol=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_solve_step_minimizes_energy(backend, seed):
    uold, psi, c0, c1, hx, p = _problem(seed, n=20)
    u = uold.copy()
    it, err = backend.solve_step(u, uold, psi, c0, c1, hx, p, 1e-12, 500, 1.0)
    assert it >= 0 and err < 1e-12
    ref = minimize(_energy, np.maximum(uold, psi)[1:-1], args=(uold, c0, c1, hx, p), method="L-BFGS-B",
                   bounds=[(lo, None) for lo in psi[1:-1]], options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 20000})
    assert _energy(u[1:-1], uold, c0, c1, hx, p) <= ref.fun + 1e-10
    assert np.allclose(u[1:-1], ref.x, atol=1e-4)


@pytest.mark.parametrize("start", ["zero", "upper", "previous"])
def test_solve_step_independent_of_start(backend, start):
    uold, psi, c0, c1, hx, p = _problem(3, n=41)
    ref = uold.copy()
    backend.solve_step(ref, uold, psi, c0, c1, hx, p, 1e-10, 500, 1.0)
    u = {"zero": np.zeros_like(uold), "upper": np.full_like(uold, 2.0), "previous": uold.copy()}[start]
    u[[0, -1]] = 0.0
    it, _ = backend.solve_step(u, uold, psi, c0, c1, hx, p, 1e-10, 500, 1.0)
    assert it >= 0
    assert np.max(np.abs(u - ref)) < 1e-12


def test_elliptic_step(backend):
    uold, psi, c0, c1, hx, p = _problem(11, n=65, elliptic=True)
    u = np.zeros_like(psi)
    it, err = backend.solve_step(u, uold, psi, c0, c1, hx, p, 1e-10, 500, 1.0)
    assert it >= 0 and err < 1e-10


def test_pgs_sweep_reduces_to_projection(backend):
    # with a huge obstacle every node is pushed onto it
    n = 12
    u = np.zeros(n)
    psi = np.full(n, 5.0)
    psi[[0, -1]] = 0.0
    change = backend.pgs_sweep(u, np.zeros(n), psi, 1.0, 1.0, 0.1, 3.0, 1.0, 1e-12)
    assert change == 5.0
    assert np.array_equal(u[1:-1], psi[1:-1])


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), elliptic=st.booleans())
def test_backends_agree(seed, elliptic):
    compiled = kernels.get_backend("compiled")
    uold, psi, c0, c1, hx, p = _problem(seed, elliptic=elliptic)
    a, b = uold.copy(), uold.copy()
    ia, _ = _kernels_py.solve_step(a, uold, psi, c0, c1, hx, p, 1e-10, 500, 1.0)
    ib, _ = compiled.solve_step(b, uold, psi, c0, c1, hx, p, 1e-10, 500, 1.0)
    assert ia >= 0 and ib >= 0
    assert np.max(np.abs(a - b)) < 1e-11
    ra, rb = np.zeros_like(a), np.zeros_like(a)
    _kernels_py.residual(a, uold, c0, c1, hx, p, ra)
    compiled.residual(a, uold, c0, c1, hx, p, rb)
    assert np.max(np.abs(ra - rb)) <= 1e-13 * max(1.0, np.max(np.abs(ra)))
    ga, gb = uold.copy(), uold.copy()
    _kernels_py.pgs_sweep(ga, uold, psi, c0, c1, hx, p, 1.3, 1e-12)
    compiled.pgs_sweep(gb, uold, psi, c0, c1, hx, p, 1.3, 1e-12)
    assert np.allclose(ga, gb, atol=1e-11)


@needs_compiled
def test_energy_change_agrees():
    compiled = kernels.get_backend("compiled")
    rng = np.random.default_rng(0)
    u, v, w = rng.normal(size=(3, 30))
    for p in (2.0, 3.0, 3.7):
        a = _kernels_py.energy_change(u, v, w, 1.0, 0.4, 0.1, p)
        b = compiled.energy_change(u, v, w, 1.0, 0.4, 0.1, p)
        assert np.isclose(a, b, rtol=1e-12)
