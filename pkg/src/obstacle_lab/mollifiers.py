"""Smoothing devices in time and space.

* exponential time convolution  u_eps(t) = (1/eps) int_0^t exp((s - t)/eps) u(s) ds
* Friedrichs mollifier          zeta_sigma(s) ~ exp(-sigma^2 / (sigma^2 - s^2)),  |s| < sigma
* piecewise linear time cutoff  chi^h
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .grid import Field, SpaceTimeGrid


@dataclass(frozen=True)
class MollifierParams:
    eps: float
    sigma: float
    h_cut: float

    def __post_init__(self):
        for name in ("eps", "sigma", "h_cut"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite real, got {val!r}")

    def validate(self, grid: SpaceTimeGrid) -> MollifierParams:
        if not self.sigma < grid.T / 2:
            raise ValueError(f"need sigma < T/2, got sigma={self.sigma}, T={grid.T}")
        if not 4 * self.h_cut < grid.T:
            raise ValueError(f"need 4*h_cut < T, got h_cut={self.h_cut}, T={grid.T}")
        return self


def exp_time_convolve(u: Field, eps: float) -> Field:
    """Exponential convolution in time, left-endpoint rule per interval.

    The kernel integral over each interval is taken exactly, so the update is

        out[k+1] = a*out[k] + (1 - a)*u[k],   a = exp(-ht/eps),   out[0] = 0.

    The weights sum to 1 - exp(-t_k/eps) < 1, which makes the L^p
    contraction and order preservation exact.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"eps must be positive, got {eps!r}")
    grid = u.grid
    if eps < 2 * grid.ht:
        warnings.warn(
            f"eps={eps} < 2*ht={2 * grid.ht}: kernel is under-resolved in time",
            RuntimeWarning,
            stacklevel=2,
        )
    a = math.exp(-grid.ht / eps)
    b = -math.expm1(-grid.ht / eps)
    vals = u.values
    out = np.zeros_like(vals)
    for k in range(grid.nt):
        out[k + 1] = a * out[k] + b * vals[k]
    return Field(grid, out)


def friedrichs_weights(sigma: float, h: float) -> np.ndarray:
    """Symmetric discrete Friedrichs kernel on the nodes j*h with |j*h| < sigma.

    Renormalized to sum to 1.  A radius below one step collapses to [1.0].
    """
    if not (sigma > 0 and h > 0):
        raise ValueError(f"need sigma > 0 and h > 0, got {sigma}, {h}")
    m = int(math.ceil(sigma / h)) - 1
    while m >= 0 and m * h >= sigma:
        m -= 1
    m = max(m, 0)
    s = h * np.arange(-m, m + 1)
    with np.errstate(divide="ignore", over="ignore"):
        w = np.exp(-(sigma**2) / (sigma**2 - s**2))
    total = math.fsum(w)
    w = w / total
    # absorb the last rounding unit into the centre weight
    w[m] += 1.0 - math.fsum(w)
    return w


def time_band(grid: SpaceTimeGrid, sigma: float) -> np.ndarray:
    """Time indices with sigma <= t_k <= T - sigma."""
    t = grid.t
    tol = 1e-12 * grid.T
    return np.flatnonzero((t >= sigma - tol) & (t <= grid.T - sigma + tol))


def friedrichs_time_mollify(u: Field, sigma: float, ks=None) -> Field:
    """Friedrichs mollification in time.

    Only rows in the band sigma <= t_k <= T - sigma are evaluated; the other
    rows of the result are zero.  ``ks`` restricts evaluation further and
    raises ``ValueError`` if any requested index leaves the band.
    """
    grid = u.grid
    w = friedrichs_weights(sigma, grid.ht)
    m = (len(w) - 1) // 2
    band = time_band(grid, sigma)
    if ks is None:
        ks = band
    else:
        ks = np.atleast_1d(np.asarray(ks, dtype=int))
        outside = np.setdiff1d(ks, band)
        if outside.size:
            raise ValueError(
                f"time index {int(outside[0])} (t={outside[0] * grid.ht}) lies outside "
                f"the valid band [{sigma}, {grid.T - sigma}]"
            )
    out = np.zeros(grid.shape)
    vals = u.values
    for k in ks:
        lo, hi = k - m, k + m + 1
        if lo < 0 or hi > grid.nt + 1:
            raise ValueError(f"kernel at k={k} reaches outside the time grid")
        # kernel is even, so the correlation equals the convolution
        out[k] = w @ vals[lo:hi]
    return Field(grid, out)


def space_mollify_zero_extend(u: Field, sigma: float) -> Field:
    """Per-slice Friedrichs convolution in x with zero extension outside the domain."""
    w = friedrichs_weights(sigma, u.grid.hx)
    out = convolve1d(u.values, w, axis=1, mode="constant", cval=0.0)
    return Field(u.grid, out)


def chi_profile(t, h: float, T: float):
    """Piecewise linear cutoff: 0 near both ends, 1 on [2h, T - 2h]."""
    t = np.asarray(t, dtype=float)
    up = np.clip((t - h) / h, 0.0, 1.0)
    down = np.clip((T - h - t) / h, 0.0, 1.0)
    return np.minimum(up, down)


def cutoff_chi(grid: SpaceTimeGrid, h_cut: float) -> np.ndarray:
    """Cutoff profile chi^h sampled at the time nodes."""
    if not (h_cut > 0 and 4 * h_cut < grid.T):
        raise ValueError(f"need 0 < 4*h_cut < T, got h_cut={h_cut}, T={grid.T}")
    return chi_profile(grid.t, h_cut, grid.T)
