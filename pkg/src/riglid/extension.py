"""Reflection extension of strip fields with derivative matching.

A field on S_0 = R x (-1, 0) is extended across an interface by the
weighted-reflection rule

    Pu(X, z) = sum_i c_i u(X, a - alpha_i (z - a))        (z beyond a)

with distinct rates alpha_i in (0, 1).  Matching the z-derivatives up to
order k-1 at the interface forces the moment equations
sum_i c_i (-alpha_i)^j = 1 for j = 0..k-1, a Vandermonde system for the c_i.
Larger strips S_j = R x (-(j+1), j) are reached by iterating the
single-interface construction outward, one unit band at a time.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ConfigError
from .dn import StripField


def default_alphas(k):
    """Equispaced reflection rates (i+1)/(k+1): distinct, inside (0,1)."""
    return np.arange(1, k + 1) / (k + 1.0)


def vandermonde_coeffs(k, alphas=None):
    """Solve the k x k moment system sum_i c_i (-alpha_i)^j = 1."""
    if k < 1:
        raise ConfigError(f"matching order k must be >= 1, got {k}")
    alphas = default_alphas(k) if alphas is None else np.asarray(alphas, dtype=float)
    if len(alphas) != k:
        raise ConfigError(f"need {k} reflection rates, got {len(alphas)}")
    if np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ConfigError("reflection rates must lie strictly inside (0, 1)")
    if len(np.unique(alphas)) != k:
        raise ConfigError("reflection rates must be pairwise distinct")
    vand = np.vander(-alphas, k, increasing=True).T
    coeffs = np.linalg.solve(vand, np.ones(k))
    return coeffs


@dataclass(frozen=True)
class ExtensionPlan:
    """Matching order, reflection rates, their solved weights, target strip."""

    k: int
    j_target: int
    alphas: np.ndarray = field(default=None)
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.j_target < 1:
            raise ConfigError("target strip index must be >= 1")
        alphas = default_alphas(self.k) if self.alphas is None else np.asarray(
            self.alphas, dtype=float)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "coeffs", vandermonde_coeffs(self.k, alphas))

    def moment_residual(self):
        """max_j |sum_i c_i (-alpha_i)^j - 1| over j < k."""
        worst = 0.0
        for j in range(self.k):
            worst = max(worst, abs(np.sum(self.coeffs * (-self.alphas) ** j) - 1.0))
        return worst


class _BandSampler:
    """Samples the filled part of the extension, exactly on aligned nodes.

    When a reflection source lands on an existing level (which happens
    whenever n_z is divisible by the alpha denominators) the stored value is
    gathered directly; only genuinely off-grid sources go through the
    spline.  This keeps the matched derivative traces at roundoff instead of
    at the spline's solve accuracy.
    """

    def __init__(self, z_filled, values, spline_order):
        self.z0 = z_filled[0]
        self.dz = z_filled[1] - z_filled[0]
        self.values = values
        self.spline = make_interp_spline(z_filled, values, k=spline_order,
                                         axis=0)

    def __call__(self, pts):
        idx = (pts - self.z0) / self.dz
        nearest = np.rint(idx)
        aligned = np.abs(idx - nearest) < 1e-9 * (1.0 + np.abs(idx))
        if np.all(aligned):
            return self.values[nearest.astype(int)]
        out = self.spline(pts)
        if np.any(aligned):
            rows = np.nonzero(aligned)[0]
            out[rows] = self.values[nearest[rows].astype(int)]
        return out


def _kahan_combination(coeffs, alphas, sampler, anchor, z_new):
    """Compensated sum of c_i * u(anchor - alpha_i (z - anchor)).

    The c_i alternate and grow quickly with k, so a naive float64 sum loses
    several digits to cancellation; Kahan accumulation keeps the band values
    correctly rounded, which the derivative-trace checks rely on.
    """
    acc = None
    comp = None
    for ci, ai in zip(coeffs, alphas):
        term = ci * sampler(anchor - ai * (z_new - anchor))
        if acc is None:
            acc = term
            comp = np.zeros_like(term)
            continue
        y = term - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc


def extend_strip(u, plan, spline_order=5):
    """Extend a StripField from S_0 to S_{j_target}, band by band.

    The restriction to S_0 is the input bitwise.  Off-grid source values are
    taken from a spline over the already-filled levels (exact for
    polynomials up to the spline order, so the matching conditions are exact
    for polynomial data of degree < k <= spline_order).
    """
    grid = u.grid
    z0 = u.z
    n_z = len(z0) - 1
    if abs(z0[0] + 1.0) > 1e-12 or abs(z0[-1]) > 1e-12:
        raise ConfigError("extension input must live on S_0 = (-1, 0)")
    dz = 1.0 / n_z
    j = plan.j_target
    total = (2 * j + 1) * n_z + 1
    z_full = -(j + 1.0) + dz * np.arange(total)
    vals = np.empty((total, grid.n))
    lo = j * n_z           # index of z = -1
    hi = lo + n_z          # index of z = 0
    vals[lo:hi + 1] = u.values
    filled_lo, filled_hi = lo, hi

    c, al = plan.coeffs, plan.alphas
    for band in range(j):
        # upward across the interface at z = band
        a = float(band)
        sampler = _BandSampler(z_full[filled_lo:filled_hi + 1],
                               vals[filled_lo:filled_hi + 1], spline_order)
        new_hi = filled_hi + n_z
        z_new = z_full[filled_hi + 1:new_hi + 1]
        vals[filled_hi + 1:new_hi + 1] = _kahan_combination(c, al, sampler, a, z_new)
        filled_hi = new_hi

        # downward across the interface at z = -(band + 1)
        b = -(band + 1.0)
        sampler = _BandSampler(z_full[filled_lo:filled_hi + 1],
                               vals[filled_lo:filled_hi + 1], spline_order)
        new_lo = filled_lo - n_z
        z_new = z_full[new_lo:filled_lo]
        vals[new_lo:filled_lo] = _kahan_combination(c, al, sampler, b, z_new)
        filled_lo = new_lo

    return StripField(grid=grid, z=z_full, values=vals)


def norm_ratio_bound(plan):
    """Computable stand-in for the extension's operator-norm constant."""
    return float(np.sum(np.abs(plan.coeffs)) * (
        1.0 + np.max(plan.alphas) ** -0.5) * (plan.j_target + 1))


def trace_jump(ext, j, interface=0.0, degree=10, window=0.9):
    """One-sided d_z^j mismatch across an interface of an extended field.

    Derivatives are read from least-squares polynomial fits on each side;
    the averaging keeps the float64 rounding of the band values (which is
    amplified by the large alternating extension weights) from polluting the
    estimate the way pointwise difference stencils would.
    """
    from math import factorial

    def side(mask):
        zs = (ext.z[mask] - interface) / window
        vand = np.vander(zs, degree + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(vand, ext.values[mask], rcond=None)
        return coef[j] * factorial(j) / window ** j

    tol = 1e-12
    below = side((ext.z <= interface + tol) & (ext.z >= interface - window - tol))
    above = side((ext.z >= interface - tol) & (ext.z <= interface + window + tol))
    return float(np.max(np.abs(below - above)))
