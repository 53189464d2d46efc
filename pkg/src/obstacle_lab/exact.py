"""Closed-form reference solutions used as independent oracles."""

from __future__ import annotations

import numpy as np


def barenblatt(x, t, p: float, C: float, n: int = 1):
    """Barenblatt source solution of u_t = div(|Du|^(p-2) Du) in R^n, p > 2.

    B(x, t) = t^(-k) * (C - q |x|^(p/(p-1)) t^(-k p/(p-1)))_+^((p-1)/(p-2))
    with k = 1/(n(p-2) + p) and q = (p-2)/p * k^(1/(p-1)).
    """
    if p <= 2:
        raise ValueError("Barenblatt profile needs p > 2")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    k = 1.0 / (n * (p - 2.0) + p)
    q = (p - 2.0) / p * k ** (1.0 / (p - 1.0))
    a = p / (p - 1.0)
    core = C - q * np.abs(x) ** a * t ** (-k * a)
    return t ** (-k) * np.maximum(core, 0.0) ** ((p - 1.0) / (p - 2.0))


def barenblatt_radius(t, p: float, C: float, n: int = 1):
    """Support radius of the Barenblatt profile at time t."""
    k = 1.0 / (n * (p - 2.0) + p)
    q = (p - 2.0) / p * k ** (1.0 / (p - 1.0))
    return (C / q) ** ((p - 1.0) / p) * np.asarray(t, dtype=float) ** k


def concave_envelope(x, psi) -> np.ndarray:
    """Least concave majorant of max(psi, 0) with zero end values.

    Upper hull by Andrew's monotone chain, then linear interpolation back to
    the nodes.  In one space dimension this is the elliptic obstacle solution
    for every p, since p-harmonic functions are affine.
    """
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(psi, dtype=float), 0.0)
    y[0] = y[-1] = 0.0
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])
