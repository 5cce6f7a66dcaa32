"""Periodic grid, spectral transforms, Fourier multipliers and norms.

All operators act on real fields sampled on a uniform periodic grid of
length L.  The forward transform carries the 1/n factor, so Parseval reads

    sum_x |u(x_i)|^2 * dx  =  L * sum_k |u_hat(k)|^2

and the discrete L2 norm below is an exact quadrature of the continuous one
for band-limited fields.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConfigError, PreconditionError, ShapeError


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless parameter triple plus admissibility thresholds.

    epsilon : nonlinearity ratio (surface amplitude over depth), in (0, 1]
    mu      : shallowness ratio (depth^2 over horizontal scale^2), in (0, 1]
    gamma   : transversality, fixed to 1 in one horizontal dimension
    h_min   : minimal admissible water height, > 0
    a0      : Rayleigh-Taylor floor, > 0
    """

    epsilon: float
    mu: float
    gamma: float = 1.0
    h_min: float = 0.05
    a0: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigError(f"mu must be in (0, 1], got {self.mu}")
        if self.gamma != 1.0:
            raise ConfigError("only gamma = 1 is supported in one dimension")
        if self.h_min <= 0.0:
            raise ConfigError(f"h_min must be > 0, got {self.h_min}")
        if self.a0 <= 0.0:
            raise ConfigError(f"a0 must be > 0, got {self.a0}")


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid on [-L/2, L/2) with its wavenumber set."""

    L: float
    n: int
    x: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)

    @property
    def dx(self):
        return self.L / self.n


def make_grid(L, n):
    """Build a periodic grid with n collocation points on a cell of length L.

    n must be a power of two (>= 8) so the FFT sizes stay friendly and the
    2/3-rule dealias cut lands on whole modes.
    """
    if L <= 0:
        raise ConfigError(f"domain length must be positive, got {L}")
    if n < 8 or (n & (n - 1)) != 0:
        raise ConfigError(f"n must be a power of two >= 8, got {n}")
    x = -L / 2 + (L / n) * np.arange(n)
    xi = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    return SpectralGrid(L=float(L), n=int(n), x=x, xi=xi)


def forward(u, grid):
    """Forward transform with 1/n normalization (coefficients of e^{i xi x})."""
    if u.shape[-1] != grid.n:
        raise ShapeError(f"field length {u.shape[-1]} != grid.n {grid.n}")
    return np.fft.fft(u, axis=-1) / grid.n


def inverse(u_hat, grid):
    """Inverse of :func:`forward`; returns the real part for Hermitian input."""
    if u_hat.shape[-1] != grid.n:
        raise ShapeError(f"spectrum length {u_hat.shape[-1]} != grid.n {grid.n}")
    return np.real(np.fft.ifft(u_hat * grid.n, axis=-1))


def dx(u, grid, order=1):
    """Spectral x-derivative of a real field (Nyquist zeroed for odd orders)."""
    u_hat = forward(u, grid)
    sym = (1j * grid.xi) ** order
    if order % 2 == 1:
        sym = sym.copy()
        sym[grid.n // 2] = 0.0
    return inverse(sym * u_hat, grid)


def dealias(u, grid):
    """2/3-rule low-pass: zero the top third of the spectrum."""
    u_hat = forward(u, grid)
    cut = grid.n // 3
    mask = np.abs(np.fft.fftfreq(grid.n, d=1.0 / grid.n)) <= cut
    return inverse(u_hat * mask, grid)


@dataclass
class SurfaceState:
    """The unknown pair (zeta, psi) sampled on a periodic grid.

    zeta is the free-surface elevation, psi the velocity potential at the
    surface (defined up to an additive constant).  Both are real fields of
    length grid.n.
    """

    grid: SpectralGrid
    zeta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.zeta.shape != (self.grid.n,) or self.psi.shape != (self.grid.n,):
            raise ShapeError("zeta and psi must be real arrays of length grid.n")

    def copy(self):
        return SurfaceState(self.grid, self.zeta.copy(), self.psi.copy())

    def min_height(self, epsilon):
        return float(np.min(1.0 + epsilon * self.zeta))

    def check_height(self, params):
        h = self.min_height(params.epsilon)
        if h < params.h_min:
            raise AdmissibilityError(
                f"water height {h:.6g} below h_min {params.h_min:.6g}"
            )


# ---------------------------------------------------------------------------
# multiplier symbols
# ---------------------------------------------------------------------------

def omega_scalar(xi, mu):
    """Dispersion relation sqrt(|xi| tanh(sqrt(mu)|xi|) / sqrt(mu)).

    Continuous, vanishes at xi = 0, strictly increasing in |xi|; tends to
    |xi| as mu -> 0.
    """
    if mu <= 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    a = np.abs(xi)
    return np.sqrt(a * np.tanh(np.sqrt(mu) * a) / np.sqrt(mu))


def g0_scalar(xi, mu):
    """Symbol of the flat-strip Dirichlet-Neumann operator."""
    a = np.abs(xi)
    return np.sqrt(mu) * a * np.tanh(np.sqrt(mu) * a)


def frac_p_scalar(xi, mu):
    """Symbol of the order-1/2 operator |xi| / (1 + sqrt(mu)|xi|)^(1/2)."""
    a = np.abs(xi)
    return a / np.sqrt(1.0 + np.sqrt(mu) * a)


def lambda_s_scalar(xi, s):
    """Bessel-potential symbol (1 + xi^2)^(s/2)."""
    return (1.0 + xi ** 2) ** (s / 2.0)


@dataclass(frozen=True)
class MultiplierSymbol:
    """A diagonal Fourier multiplier, one of the built-in kinds or a table.

    kind : 'lambda_s' | 'frac_p' | 'omega' | 'g0' | 'abs_d' | 'custom'
    s    : Sobolev index, used by 'lambda_s' only (any real, negatives allowed)
    table: per-wavenumber symbol values in FFT order, used by 'custom' only
    """

    kind: str
    s: float = 0.0
    table: np.ndarray | None = field(default=None, repr=False)

    def values(self, grid, params):
        xi = grid.xi
        if self.kind == "lambda_s":
            return lambda_s_scalar(xi, self.s)
        if self.kind == "frac_p":
            return frac_p_scalar(xi, params.mu)
        if self.kind == "omega":
            return omega_scalar(xi, params.mu)
        if self.kind == "g0":
            return g0_scalar(xi, params.mu)
        if self.kind == "abs_d":
            return np.abs(xi)
        if self.kind == "custom":
            if self.table is None or len(self.table) != grid.n:
                raise ShapeError("custom symbol table must have grid.n entries")
            return np.asarray(self.table, dtype=float)
        raise ConfigError(f"unknown multiplier kind {self.kind!r}")


def apply_multiplier(u, symbol, grid, params):
    """Apply a diagonal Fourier multiplier to a real grid field."""
    vals = symbol.values(grid, params) if isinstance(symbol, MultiplierSymbol) else np.asarray(symbol)
    if vals.shape[-1] != grid.n:
        raise ShapeError(f"symbol length {vals.shape[-1]} != grid.n {grid.n}")
    return inverse(vals * forward(u, grid), grid)


def apply_frac_p(u, grid, params):
    return apply_multiplier(u, MultiplierSymbol("frac_p"), grid, params)


def apply_g0(u, grid, params):
    return apply_multiplier(u, MultiplierSymbol("g0"), grid, params)


def apply_omega(u, grid, params):
    return apply_multiplier(u, MultiplierSymbol("omega"), grid, params)


# ---------------------------------------------------------------------------
# norms and inner products
# ---------------------------------------------------------------------------

def l2_inner(u, v, grid):
    """Discrete L2 scalar product (trapezoid quadrature, exact on the torus)."""
    return float(np.sum(u * v) * grid.dx)


def l2_norm(u, grid):
    return float(np.sqrt(np.sum(u ** 2) * grid.dx))


def hs_norm(u, grid, s):
    """Sobolev H^s norm via the Lambda^s multiplier; equals l2_norm at s = 0."""
    u_hat = forward(u, grid)
    w = (1.0 + grid.xi ** 2) ** s
    return float(np.sqrt(grid.L * np.sum(w * np.abs(u_hat) ** 2)))


def localization_fraction(u, grid):
    """Fraction of the field's L2 mass outside the central half of the cell."""
    outside = np.abs(grid.x) > grid.L / 4
    total = np.sum(u ** 2)
    if total == 0.0:
        return 0.0
    return float(np.sum(u[outside] ** 2) / total)


def weighted_norm(u, grid, tol=1e-8):
    """The weight-x seminorm |x d_x u|_2 for fields concentrated mid-cell.

    The field must carry at most `tol` of its mass outside the central half
    of the cell, otherwise the periodic x-weight is meaningless.
    """
    frac = localization_fraction(u, grid)
    if frac > tol:
        raise PreconditionError(
            f"field not localized: mass fraction {frac:.3e} outside the "
            f"central half of the cell exceeds {tol:.1e}"
        )
    return l2_norm(grid.x * dx(u, grid), grid)
