"""Pure-Python/numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` function by function.  Used when the compiled
extension is unavailable or when ``OBSTACLE_LAB_BACKEND=python``.

All kernels act on one space slice ``u`` of length n (boundary nodes 0 and
n-1 are Dirichlet data and never modified).  The discrete equation at an
interior node is

    R_i(u) = c0*(u_i - uold_i) - c1*(F(g_{i+1/2}) - F(g_{i-1/2}))

with face gradients g_{i+1/2} = (u_{i+1} - u_i)/hx and F(g) = |g|^(p-2) g.
Backward Euler uses c0 = 1, c1 = ht/hx; the stationary problem c0 = 0, c1 = hx.
"""

import numpy as np
from scipy.linalg import solve_banded

DERIV_FLOOR = 1e-12
MAX_HALVINGS = 40
FALLBACK_SWEEPS = 20
MAX_QP_SWEEPS = 50
POLISH_STEPS = 3
POLISH_FACTOR = 1e-4


def flux(g, p):
    g = np.asarray(g, dtype=float)
    if p == 2.0:
        return g.copy()
    return np.abs(g) ** (p - 2.0) * g


def dflux(g, p):
    g = np.asarray(g, dtype=float)
    if p == 2.0:
        return np.ones_like(g)
    return (p - 1.0) * np.abs(g) ** (p - 2.0)


def residual(u, uold, c0, c1, hx, p, out):
    f = flux(np.diff(u) / hx, p)
    out[0] = 0.0
    out[-1] = 0.0
    out[1:-1] = c0 * (u[1:-1] - uold[1:-1]) - c1 * (f[1:] - f[:-1])


def _merit(u, uold, psi, c0, c1, hx, p, r):
    residual(u, uold, c0, c1, hx, p, r)
    phi = np.minimum(u[1:-1] - psi[1:-1], r[1:-1])
    return phi, float(np.dot(phi, phi))


def _scalar_solve(left, right, uold_i, u_i, c0, c1, hx, p, tol):
    """Root of the (increasing) nodal residual in the free node value."""
    lo = min(left, right)
    hi = max(left, right)
    if c0 > 0.0:
        lo = min(lo, uold_i)
        hi = max(hi, uold_i)
    if hi <= lo:
        return lo
    v = min(max(u_i, lo), hi)
    for _ in range(100):
        gp = (right - v) / hx
        gm = (v - left) / hx
        fp = gp if p == 2.0 else abs(gp) ** (p - 2.0) * gp
        fm = gm if p == 2.0 else abs(gm) ** (p - 2.0) * gm
        r = c0 * (v - uold_i) - c1 * (fp - fm)
        if abs(r) <= tol:
            return v
        if r > 0.0:
            hi = v
        else:
            lo = v
        if p == 2.0:
            d = c0 + 2.0 * c1 / hx
        else:
            d = c0 + c1 / hx * (p - 1.0) * (abs(gp) ** (p - 2.0) + abs(gm) ** (p - 2.0))
        step_ok = False
        if d >= 1e-14:
            w = v - r / d
            if lo < w < hi:
                v = w
                step_ok = True
        if not step_ok:
            v = 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(1.0, abs(hi), abs(lo)):
            return v
    return v


def pgs_sweep(u, uold, psi, c0, c1, hx, p, omega, tol):
    """One in-place projected nonlinear Gauss-Seidel (SOR) sweep.

    Returns the largest absolute nodal update.
    """
    n = u.shape[0]
    biggest = 0.0
    for i in range(1, n - 1):
        target = _scalar_solve(u[i - 1], u[i + 1], uold[i], u[i], c0, c1, hx, p, tol)
        new = u[i] + omega * (target - u[i])
        if new < psi[i]:
            new = psi[i]
        change = abs(new - u[i])
        if change > biggest:
            biggest = change
        u[i] = new
    return biggest


def energy_change(u, unew, uold, c0, c1, hx, p):
    """E(unew) - E(u), summed term by term to limit cancellation.

    E(u) = sum_i c0/2 (u_i - uold_i)^2 + c1*hx/p * sum_faces |g|^p has gradient R.
    """
    a = u[1:-1] - uold[1:-1]
    b = unew[1:-1] - uold[1:-1]
    d_mass = 0.5 * c0 * np.sum((b - a) * (b + a))
    g = np.abs(np.diff(u) / hx)
    gn = np.abs(np.diff(unew) / hx)
    d_grad = c1 * hx / p * np.sum(gn**p - g**p)
    return float(d_mass + d_grad)


def qp_box(dfc, c0, g, lower, active, ab, max_sweeps=MAX_QP_SWEEPS):
    """Primal-dual active set for min g.d + d'Hd/2 subject to d >= lower.

    H is the tridiagonal M-matrix with diagonal c0 + dfc[i] + dfc[i+1] and
    off-diagonals -dfc.  For M-matrices the active-set iteration stops after
    finitely many changes.  Returns (d, number of linear solves).
    """
    m = g.size
    diag = c0 + dfc[1:] + dfc[:-1]
    off = -dfc[1:-1]
    act = active.copy()
    d = np.zeros(m)
    for k in range(1, max_sweeps + 1):
        dg = diag.copy()
        up = off.copy()
        lo = off.copy()
        rhs = -g.copy()
        dg[act] = 1.0
        rhs[act] = lower[act]
        up[act[:-1]] = 0.0
        lo[act[1:]] = 0.0
        ab[0, 1:] = up
        ab[1, :] = dg
        ab[2, :-1] = lo
        d = solve_banded((1, 1), ab, rhs, check_finite=False)
        d[act] = lower[act]  # pivoting may perturb the identity rows
        mult = diag * d + g
        mult[:-1] += off * d[1:]
        mult[1:] += off * d[:-1]
        new = np.where(act, mult > 0.0, d < lower)
        if np.array_equal(new, act):
            return d, k
        act = new
    return np.maximum(d, lower), max_sweeps


def solve_step(u, uold, psi, c0, c1, hx, p, tol, max_iter, omega):
    """Sequential QP for min(u - psi, R(u)) = 0 on one slice, in place.

    The system is the optimality condition of minimizing the convex energy
    E (see ``energy_change``) over u >= psi.  Each iteration minimizes the
    local quadratic model of E over the box exactly (``qp_box``), which
    gives a feasible descent direction, then backtracks until E drops
    (Armijo) or, once E changes sink below rounding, until the merit
    sum(min(u - psi, R)^2) drops.  A few projected Gauss-Seidel sweeps
    are the last resort.  Once below ``tol`` up to POLISH_STEPS extra
    iterations push the residual toward rounding level, so that solves from
    different starts agree to well under ``tol``.  Returns (iterations, max|min(u - psi, R)|);
    iterations is negative when the budget ran out.
    """
    n = u.shape[0]
    m = n - 2
    r = np.zeros(n)
    ab = np.zeros((3, m))
    floor = DERIV_FLOOR if c0 == 0.0 else 0.0
    np.maximum(u[1:-1], psi[1:-1], out=u[1:-1])
    phi, m2 = _merit(u, uold, psi, c0, c1, hx, p, r)
    it = 0
    polish = 0
    err_prev = np.inf
    base = u.copy()
    while True:
        err = float(np.max(np.abs(phi))) if m else 0.0
        if polish and err >= err_prev:
            # polishing stalled at rounding level: keep the better iterate
            u[:] = base
            _merit(u, uold, psi, c0, c1, hx, p, r)
            return it - 1, err_prev
        if err < tol:
            if polish >= POLISH_STEPS or err < POLISH_FACTOR * tol:
                return it, err
            polish += 1
            err_prev = err
        elif it >= max_iter:
            return -it, err
        it += 1
        ri = r[1:-1].copy()
        gap = u[1:-1] - psi[1:-1]
        dfc = np.maximum(dflux(np.diff(u) / hx, p), floor) * (c1 / hx)
        delta, _ = qp_box(dfc, c0, ri, -gap, gap <= ri, ab)
        predicted = float(np.dot(ri, delta))
        base[:] = u
        lam = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            u[1:-1] = np.maximum(base[1:-1] + lam * delta, psi[1:-1])
            dE = energy_change(base, u, uold, c0, c1, hx, p)
            if dE <= 1e-4 * lam * predicted:
                accepted = True
                break
            phi, m2_t = _merit(u, uold, psi, c0, c1, hx, p, r)
            if m2_t <= (1.0 - 1e-4 * lam) * m2:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            u[:] = base
            for _ in range(FALLBACK_SWEEPS):
                pgs_sweep(u, uold, psi, c0, c1, hx, p, omega, 0.01 * tol)
        phi, m2 = _merit(u, uold, psi, c0, c1, hx, p, r)
