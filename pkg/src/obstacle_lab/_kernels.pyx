# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Same contracts as ``_kernels_py``."""

from libc.math cimport fabs, pow
from libc.stdlib cimport malloc, free

cdef double DERIV_FLOOR = 1e-12
cdef double POLISH_FACTOR = 1e-4
cdef enum:
    MAX_HALVINGS = 40
    FALLBACK_SWEEPS = 20
    MAX_QP_SWEEPS = 50
    POLISH_STEPS = 3


cdef inline double _flux(double g, double p) nogil:
    if p == 2.0:
        return g
    if g == 0.0:
        return 0.0
    if p == 3.0:
        return fabs(g) * g
    return pow(fabs(g), p - 2.0) * g


cdef inline double _dflux(double g, double p) nogil:
    if p == 2.0:
        return 1.0
    if g == 0.0:
        return 0.0
    if p == 3.0:
        return 2.0 * fabs(g)
    return (p - 1.0) * pow(fabs(g), p - 2.0)


cdef void _residual(const double[::1] u, const double[::1] uold, double c0, double c1,
                    double hx, double p, double* out) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double fm, fp
    out[0] = 0.0
    out[n - 1] = 0.0
    fm = _flux((u[1] - u[0]) / hx, p)
    for i in range(1, n - 1):
        fp = _flux((u[i + 1] - u[i]) / hx, p)
        out[i] = c0 * (u[i] - uold[i]) - c1 * (fp - fm)
        fm = fp


def residual(const double[::1] u, const double[::1] uold, double c0, double c1,
             double hx, double p, double[::1] out):
    _residual(u, uold, c0, c1, hx, p, &out[0])


cdef double _merit(const double[::1] u, const double[::1] uold, const double[::1] psi,
                   double c0, double c1, double hx, double p, double* r,
                   double* phi, double* err) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double m2 = 0.0, e = 0.0, v, gap
    _residual(u, uold, c0, c1, hx, p, r)
    for i in range(1, n - 1):
        gap = u[i] - psi[i]
        v = gap if gap < r[i] else r[i]
        phi[i] = v
        m2 += v * v
        if fabs(v) > e:
            e = fabs(v)
    err[0] = e
    return m2


cdef double _scalar_solve(double left, double right, double uold_i, double u_i,
                          double c0, double c1, double hx, double p, double tol) noexcept nogil:
    cdef double lo = left if left < right else right
    cdef double hi = right if left < right else left
    cdef double v, gp, gm, r, d, w, scale
    cdef int k, step_ok
    if c0 > 0.0:
        if uold_i < lo:
            lo = uold_i
        if uold_i > hi:
            hi = uold_i
    if hi <= lo:
        return lo
    v = u_i
    if v < lo:
        v = lo
    if v > hi:
        v = hi
    for k in range(100):
        gp = (right - v) / hx
        gm = (v - left) / hx
        r = c0 * (v - uold_i) - c1 * (_flux(gp, p) - _flux(gm, p))
        if fabs(r) <= tol:
            return v
        if r > 0.0:
            hi = v
        else:
            lo = v
        d = c0 + c1 / hx * (_dflux(gp, p) + _dflux(gm, p))
        step_ok = 0
        if d >= 1e-14:
            w = v - r / d
            if lo < w < hi:
                v = w
                step_ok = 1
        if not step_ok:
            v = 0.5 * (lo + hi)
        scale = 1.0
        if fabs(hi) > scale:
            scale = fabs(hi)
        if fabs(lo) > scale:
            scale = fabs(lo)
        if hi - lo <= 1e-16 * scale:
            return v
    return v


cdef double _pgs_sweep(double[::1] u, const double[::1] uold, const double[::1] psi,
                       double c0, double c1, double hx, double p, double omega,
                       double tol) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double target, new, change, biggest = 0.0
    for i in range(1, n - 1):
        target = _scalar_solve(u[i - 1], u[i + 1], uold[i], u[i], c0, c1, hx, p, tol)
        new = u[i] + omega * (target - u[i])
        if new < psi[i]:
            new = psi[i]
        change = fabs(new - u[i])
        if change > biggest:
            biggest = change
        u[i] = new
    return biggest


def pgs_sweep(double[::1] u, const double[::1] uold, const double[::1] psi,
              double c0, double c1, double hx, double p, double omega, double tol):
    return _pgs_sweep(u, uold, psi, c0, c1, hx, p, omega, tol)


cdef double _energy_change(const double[::1] base, const double[::1] u, const double[::1] uold,
                           double c0, double c1, double hx, double p) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double a, b, g, gn, d_mass = 0.0, d_grad = 0.0
    for i in range(1, n - 1):
        a = base[i] - uold[i]
        b = u[i] - uold[i]
        d_mass += (b - a) * (b + a)
    for i in range(n - 1):
        g = fabs((base[i + 1] - base[i]) / hx)
        gn = fabs((u[i + 1] - u[i]) / hx)
        if p == 2.0:
            d_grad += gn * gn - g * g
        elif p == 3.0:
            d_grad += gn * gn * gn - g * g * g
        else:
            d_grad += pow(gn, p) - pow(g, p)
    return 0.5 * c0 * d_mass + c1 * hx / p * d_grad


def energy_change(const double[::1] base, const double[::1] u, const double[::1] uold,
                  double c0, double c1, double hx, double p):
    return _energy_change(base, u, uold, c0, c1, hx, p)


cdef int _qp_box(Py_ssize_t n, const double* dfc, double c0, const double* g,
                 const double* lower, char* act, char* nxt, double* di, double* lo,
                 double* up, double* rhs, double* d, int max_sweeps) noexcept nogil:
    """Primal-dual active set on rows 1..n-2; see ``_kernels_py.qp_box``."""
    cdef Py_ssize_t i
    cdef double w, mult
    cdef int k, changed
    for k in range(1, max_sweeps + 1):
        for i in range(1, n - 1):
            if act[i]:
                di[i] = 1.0
                lo[i] = 0.0
                up[i] = 0.0
                rhs[i] = lower[i]
            else:
                di[i] = c0 + dfc[i] + dfc[i - 1]
                lo[i] = -dfc[i - 1] if (i > 1 and not act[i - 1]) else 0.0
                up[i] = -dfc[i] if (i < n - 2 and not act[i + 1]) else 0.0
                rhs[i] = -g[i]
                # known active neighbours move to their bound
                if i > 1 and act[i - 1]:
                    rhs[i] += dfc[i - 1] * lower[i - 1]
                if i < n - 2 and act[i + 1]:
                    rhs[i] += dfc[i] * lower[i + 1]
        for i in range(2, n - 1):
            w = lo[i] / di[i - 1]
            di[i] = di[i] - w * up[i - 1]
            rhs[i] = rhs[i] - w * rhs[i - 1]
        d[n - 2] = rhs[n - 2] / di[n - 2]
        i = n - 3
        while i >= 1:
            d[i] = (rhs[i] - up[i] * d[i + 1]) / di[i]
            i -= 1
        changed = 0
        for i in range(1, n - 1):
            if act[i]:
                mult = (c0 + dfc[i] + dfc[i - 1]) * d[i] + g[i]
                if i > 1:
                    mult -= dfc[i - 1] * d[i - 1]
                if i < n - 2:
                    mult -= dfc[i] * d[i + 1]
                nxt[i] = mult > 0.0
            else:
                nxt[i] = d[i] < lower[i]
            if nxt[i] != act[i]:
                changed = 1
        if not changed:
            return k
        for i in range(1, n - 1):
            act[i] = nxt[i]
    for i in range(1, n - 1):
        if d[i] < lower[i]:
            d[i] = lower[i]
    return max_sweeps


def solve_step(double[::1] u, const double[::1] uold, const double[::1] psi,
               double c0, double c1, double hx, double p, double tol,
               int max_iter, double omega):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, h
    cdef double* r = <double*> malloc(n * sizeof(double))
    cdef double* phi = <double*> malloc(n * sizeof(double))
    cdef double* lo = <double*> malloc(n * sizeof(double))
    cdef double* di = <double*> malloc(n * sizeof(double))
    cdef double* up = <double*> malloc(n * sizeof(double))
    cdef double* rhs = <double*> malloc(n * sizeof(double))
    cdef double* delta = <double*> malloc(n * sizeof(double))
    cdef double* ri = <double*> malloc(n * sizeof(double))
    cdef double* dfc = <double*> malloc(n * sizeof(double))
    cdef double* lower = <double*> malloc(n * sizeof(double))
    cdef char* act = <char*> malloc(n * sizeof(char))
    cdef char* nxt = <char*> malloc(n * sizeof(char))
    cdef double[::1] base = u.copy()
    cdef double floor = DERIV_FLOOR if c0 == 0.0 else 0.0
    cdef double m2, m2_t, err, err_t, lam, w, predicted, dE, v
    cdef int it = 0, polish = 0, accepted, s, result
    cdef double err_prev = 0.0
    if (r == NULL or phi == NULL or lo == NULL or di == NULL or up == NULL or rhs == NULL
            or delta == NULL or ri == NULL or dfc == NULL or lower == NULL
            or act == NULL or nxt == NULL):
        free(r); free(phi); free(lo); free(di); free(up); free(rhs)
        free(delta); free(ri); free(dfc); free(lower); free(act); free(nxt)
        raise MemoryError()
    with nogil:
        for i in range(1, n - 1):
            if u[i] < psi[i]:
                u[i] = psi[i]
        m2 = _merit(u, uold, psi, c0, c1, hx, p, r, phi, &err)
        while True:
            if polish > 0 and err >= err_prev:
                for i in range(n):
                    u[i] = base[i]
                _merit(u, uold, psi, c0, c1, hx, p, r, phi, &err)
                err = err_prev
                result = it - 1
                break
            if n <= 2 or err < tol:
                if n <= 2 or polish >= POLISH_STEPS or err < POLISH_FACTOR * tol:
                    result = it
                    break
                polish += 1
                err_prev = err
            elif it >= max_iter:
                result = -it
                break
            it += 1
            for i in range(1, n - 1):
                ri[i] = r[i]
                lower[i] = psi[i] - u[i]
                act[i] = -lower[i] <= r[i]
            for i in range(n - 1):
                w = _dflux((u[i + 1] - u[i]) / hx, p)
                if w < floor:
                    w = floor
                dfc[i] = w * (c1 / hx)
            _qp_box(n, dfc, c0, ri, lower, act, nxt, di, lo, up, rhs, delta, MAX_QP_SWEEPS)
            predicted = 0.0
            for i in range(1, n - 1):
                predicted += ri[i] * delta[i]
            for i in range(n):
                base[i] = u[i]
            lam = 1.0
            accepted = 0
            for h in range(MAX_HALVINGS):
                for i in range(1, n - 1):
                    v = base[i] + lam * delta[i]
                    if v < psi[i]:
                        v = psi[i]
                    u[i] = v
                dE = _energy_change(base, u, uold, c0, c1, hx, p)
                if dE <= 1e-4 * lam * predicted:
                    accepted = 1
                    break
                m2_t = _merit(u, uold, psi, c0, c1, hx, p, r, phi, &err_t)
                if m2_t <= (1.0 - 1e-4 * lam) * m2:
                    accepted = 1
                    break
                lam *= 0.5
            if not accepted:
                for i in range(n):
                    u[i] = base[i]
                for s in range(FALLBACK_SWEEPS):
                    _pgs_sweep(u, uold, psi, c0, c1, hx, p, omega, 0.01 * tol)
            m2 = _merit(u, uold, psi, c0, c1, hx, p, r, phi, &err)
    free(r); free(phi); free(lo); free(di); free(up); free(rhs)
    free(delta); free(ri); free(dfc); free(lower); free(act); free(nxt)
    return result, err
