"""Free boundary of the installation problem.

The installation threshold ``F`` (price above which installing is optimal,
as a function of installed power) is found in shifted coordinates
Ftilde(y) = F(y) + beta*y.  The anchor xtilde = Ftilde(y_bar) is the unique
root of

    H(x) = psi'(x) (c - Rtilde(x, y_bar)) + psi(x)/(rho + kappa),

with Rtilde(x, y) = (mu*kappa + rho*x - beta*(rho + 2 kappa)*y)/(rho (rho+kappa)).
From the anchor, Ftilde solves the first-order ODE

    Ftilde'(y) = beta * N(y, Ftilde(y)) / D(y, Ftilde(y)),

    N(y, z) = Q0(z) [ (rho+2 kappa)/rho * psi'(z)
                      + (rho+kappa)(c - Rtilde(z, y)) psi''(z) + psi'(z) ],
    D(y, z) = psi(z) [ (rho+kappa)(c - Rtilde(z, y)) Q1(z) + Q0'(z) ],

integrated backward from y_bar to 0 with fixed-step classical RK4 (fixed
steps keep regression baselines bit-stable).  Along the exact solution
Ftilde' >= beta and D > 0, so both are monitored per step.  F is recovered
as F(y) = Ftilde(y) - beta*y; its inverse is interpolated from the swapped
grid, monotone piecewise-cubic throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError, SolverError
from .fundamental import FundamentalSolution
from .model import ModelParams

_SINGULAR_RATIO = 1e-12   # |D| below this times |N| counts as hitting D = 0
_MAX_EXPANSIONS = 50


class Regime(enum.Enum):
    """Position of the line of means mu - beta*y relative to the install region."""

    NO_INTERSECTION = "NoIntersection"
    INTERSECTS_BOUNDARY = "IntersectsBoundary"
    INTERSECTS_UPPER_BOUND = "IntersectsUpperBound"


class Region(enum.Enum):
    """State-space classification: wait, lump to the boundary, lump to capacity."""

    W = "W"
    I1 = "I1"
    I2 = "I2"


def r_tilde(params: ModelParams, x: float, y: float) -> float:
    """Capacity partial of the no-installation payoff in shifted coordinates."""
    return ((params.mu * params.kappa + params.rho * x
             - params.beta * (params.rho + 2.0 * params.kappa) * y)
            / (params.rho * (params.rho + params.kappa)))


def h_func(params: ModelParams, fs: FundamentalSolution, x: float) -> float:
    """Anchor function H; its unique root is Ftilde(y_bar)."""
    return (fs.psi_deriv(1, x) * (params.c - r_tilde(params, x, params.y_bar))
            + fs.psi(x) / (params.rho + params.kappa))


def _h_scaled(params: ModelParams, fs: FundamentalSolution, x: float) -> float:
    # H / psi': same root and sign pattern (psi' > 0), but bounded for large
    # |x| where the literal H overflows; used for bracketing and root finding.
    return (params.c - r_tilde(params, x, params.y_bar)
            + fs.psi_over_dpsi(x) / (params.rho + params.kappa))


def solve_x_tilde(params: ModelParams, fs: FundamentalSolution,
                  xtol: float = 1e-13) -> float:
    """Unique root of H, located by geometric bracket expansion + Brent."""
    half_width = 5.0 * params.sigma / math.sqrt(2.0 * params.kappa)
    f = lambda x: _h_scaled(params, fs, x)
    lo, hi = params.mu - half_width, params.mu + half_width
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(_MAX_EXPANSIONS):
        if f_lo * f_hi < 0.0 or f_lo == 0.0 or f_hi == 0.0:
            break
        half_width *= 2.0
        lo, hi = params.mu - half_width, params.mu + half_width
        f_lo, f_hi = f(lo), f(hi)
    else:
        raise SolverError(
            f"no sign change of H after {_MAX_EXPANSIONS} bracket expansions: "
            f"H/psi'({lo}) = {f_lo:.6e}, H/psi'({hi}) = {f_hi:.6e}")
    return float(brentq(f, lo, hi, xtol=xtol, rtol=4.0 * np.finfo(float).eps))


def _n_d(params: ModelParams, fs: FundamentalSolution, y: float, z: float):
    p = fs.psi_derivs(z, 3)
    q0 = p[0] * p[2] - p[1] * p[1]
    q1 = p[1] * p[3] - p[2] * p[2]
    q0_prime = p[0] * p[3] - p[1] * p[2]
    crt = (params.rho + params.kappa) * (params.c - r_tilde(params, z, y))
    n_val = q0 * ((params.rho + 2.0 * params.kappa) / params.rho * p[1]
                  + crt * p[2] + p[1])
    d_val = p[0] * (crt * q1 + q0_prime)
    return n_val, d_val


def ode_rhs(params: ModelParams, fs: FundamentalSolution, y: float, z: float) -> float:
    """Right-hand side beta*N/D of the boundary ODE in shifted coordinates."""
    n_val, d_val = _n_d(params, fs, y, z)
    if abs(d_val) < _SINGULAR_RATIO * abs(n_val):
        raise IntegrationError(
            f"boundary ODE singular: D({y}, {z}) = {d_val:.3e} with N = {n_val:.3e}")
    return params.beta * n_val / d_val


@dataclass(frozen=True)
class FreeBoundary:
    """Grid representation of the installation threshold on [0, y_bar].

    ``ys`` ascend from 0 to y_bar; ``f_tilde`` is the shifted boundary,
    ``f_grid`` the boundary itself.  Queries interpolate monotone cubics.
    Immutable once built; safe for concurrent reads.
    """

    params: ModelParams
    ys: np.ndarray
    f_tilde: np.ndarray
    x_tilde: float
    x0: float
    x_bar: float
    f_grid: np.ndarray = field(repr=False)
    _f_itp: PchipInterpolator = field(repr=False)
    _finv_itp: PchipInterpolator = field(repr=False)

    def f(self, y: float) -> float:
        """Boundary price F(y); installing is optimal once x >= F(y)."""
        self._check_y(y)
        return float(self._f_itp(min(max(y, 0.0), self.params.y_bar)))

    def f_tilde_at(self, y: float) -> float:
        """Shifted boundary Ftilde(y) = F(y) + beta*y."""
        return self.f(y) + self.params.beta * y

    def f_values(self, y_arr) -> np.ndarray:
        """Vectorized boundary evaluation (clipped to the capacity range)."""
        return np.asarray(self._f_itp(np.clip(y_arr, 0.0, self.params.y_bar)))

    def f_inverse(self, x: float) -> float:
        """Capacity level at which price x sits exactly on the boundary."""
        eps = 1e-9 * (1.0 + abs(self.x_bar))
        if not self.x0 - eps <= x <= self.x_bar + eps:
            raise DomainError(
                f"f_inverse({x}) outside boundary range [{self.x0}, {self.x_bar}]")
        return float(self._finv_itp(min(max(x, self.x0), self.x_bar)))

    def f_bar_inverse(self, x) -> float | np.ndarray:
        """Inverse clamped to [0, y_bar]: 0 below x0, y_bar above x_bar."""
        clamped = np.clip(x, self.x0, self.x_bar)
        out = np.clip(self._finv_itp(clamped), 0.0, self.params.y_bar)
        return float(out) if np.isscalar(x) else out

    def region(self, x: float, y: float) -> Region:
        """Three-way state classification; at y = y_bar only waiting applies."""
        self._check_y(y)
        if y >= self.params.y_bar * (1.0 - 1e-15):
            return Region.W
        if x >= self.x_bar:
            return Region.I2
        if x >= self.f(y):
            return Region.I1
        return Region.W

    def _check_y(self, y: float) -> None:
        if not 0.0 <= y <= self.params.y_bar * (1.0 + 1e-12):
            raise DomainError(f"capacity y={y} outside [0, {self.params.y_bar}]")

    def grid_rows(self):
        """Rows (y, Ftilde(y), F(y)) for CSV export."""
        return [(y, ft, fv) for y, ft, fv in zip(self.ys, self.f_tilde, self.f_grid)]


def integrate_boundary(params: ModelParams, fs: FundamentalSolution,
                       n_steps: int = 2000) -> FreeBoundary:
    """Solve the boundary ODE backward from (y_bar, xtilde) with RK4.

    Each accepted step checks the difference quotient against Ftilde' >= beta
    and D > 0 at the new point; a violation indicates a tolerance or
    special-function failure (the exact solution satisfies both) and raises
    :class:`IntegrationError` naming the offending y.
    """
    if n_steps < 100:
        raise DomainError(f"n_steps={n_steps} too coarse; need >= 100")
    x_tilde = solve_x_tilde(params, fs)
    h = params.y_bar / n_steps
    ys = np.linspace(0.0, params.y_bar, n_steps + 1)
    zs = np.empty(n_steps + 1)
    zs[-1] = x_tilde
    rhs = lambda yy, zz: ode_rhs(params, fs, yy, zz)
    z = x_tilde
    for i in range(n_steps, 0, -1):
        y = ys[i]
        k1 = rhs(y, z)
        k2 = rhs(y - 0.5 * h, z - 0.5 * h * k1)
        k3 = rhs(y - 0.5 * h, z - 0.5 * h * k2)
        k4 = rhs(y - h, z - h * k3)
        z_new = z - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        slope = (z - z_new) / h
        if slope < params.beta * (1.0 - 1e-9):
            raise IntegrationError(
                f"Ftilde' = {slope:.6e} fell below beta = {params.beta} at y = {ys[i-1]:.6g}")
        _, d_val = _n_d(params, fs, ys[i - 1], z_new)
        if d_val <= 0.0:
            raise IntegrationError(f"D <= 0 ({d_val:.3e}) at y = {ys[i-1]:.6g}")
        z = z_new
        zs[i - 1] = z
    f_grid = zs - params.beta * ys
    f_itp = PchipInterpolator(ys, f_grid, extrapolate=False)
    finv_itp = PchipInterpolator(f_grid, ys, extrapolate=False)
    return FreeBoundary(
        params=params, ys=ys, f_tilde=zs, x_tilde=x_tilde,
        x0=float(f_grid[0]), x_bar=float(f_grid[-1]), f_grid=f_grid,
        _f_itp=f_itp, _finv_itp=finv_itp)


def y_star(params: ModelParams, fs: FundamentalSolution) -> float:
    """Critical capacity bound: line of means through the install-region corner."""
    return (((params.mu - params.rho * params.c) * (params.rho + params.kappa)
             - params.rho * fs.psi_over_dpsi(params.mu))
            / (params.beta * (params.rho + 2.0 * params.kappa)))


def classify_regime(params: ModelParams, fb: FreeBoundary,
                    fs: FundamentalSolution) -> Regime:
    """Match the line of means against the installation region (ties -> case 2)."""
    if fb.x0 > params.mu:
        return Regime.NO_INTERSECTION
    if params.y_bar >= y_star(params, fs):
        return Regime.INTERSECTS_BOUNDARY
    return Regime.INTERSECTS_UPPER_BOUND


def export_grid_csv(fb: FreeBoundary, path) -> None:
    """Write the grid as CSV with header y,F_tilde,F at 12 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("y,F_tilde,F\n")
        for y, ft, fv in fb.grid_rows():
            fh.write(f"{y:.12g},{ft:.12g},{fv:.12g}\n")
