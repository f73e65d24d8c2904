"""Fundamental solutions of the mean-reverting generator equation.

The homogeneous equation  (1/2) sigma^2 u'' + kappa (mu - x) u' - rho u = 0
has a strictly increasing positive solution ``psi`` and a strictly decreasing
positive one ``phi``.  Both are built from the cylinder function of negative
order,

    D_a(x) = e^{-x^2/4} / Gamma(-a) * int_0^inf t^{-a-1} e^{-t^2/2 - x t} dt,

as  psi(x) = e^{kappa (x-mu)^2 / (2 sigma^2)} D_{-rho/kappa}(-(x-mu) sqrt(2 kappa)/sigma)
(and phi with the mirrored argument).  Writing s0 = rho/kappa and
z = (mu - x) sqrt(2 kappa)/sigma, the Gaussian prefactor cancels exactly
against the e^{-z^2/4} inside D, leaving

    psi(x)     = I_{s0}(z) / Gamma(s0),
    psi^(k)(x) = (sqrt(2 kappa)/sigma)^k I_{s0+k}(z) / Gamma(s0),

with I_s(z) = int_0^inf t^{s-1} e^{-t^2/2 - z t} dt.  The bare integral is
evaluated by deterministic tanh-sinh quadrature with level doubling,
accumulated in log space so that neither the t^{s-1} endpoint singularity
(s < 1) nor the interior peak e^{z^2/2} (z << 0) can overflow.

Every derivative of psi is again positive, increasing and convex, and the
determinant combinations

    Q_k = psi^(k) psi^(k+2) - (psi^(k+1))^2 > 0

are strictly positive with strictly increasing ratio
Psi_k = (psi^(k+1))^2 / (psi^(k) psi^(k+2)).
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .errors import DomainError, NumericalError
from .model import ModelParams

_LOG2 = math.log(2.0)
_UMAX = 6.2          # tanh-sinh transform truncation; covers s >= 0.05
_MAX_LEVEL = 9       # level m has step 0.5 / 2^m
_TAIL_PAD = 13.0     # upper cutoff T = max(0, -z) + pad; tail < 1e-16 relative


def _logcosh(a):
    a = np.abs(a)
    return a + np.log1p(np.exp(-2.0 * a)) - _LOG2


def _build_tables(max_level=_MAX_LEVEL):
    """Per-level tanh-sinh nodes on (0, 1); level m > 0 holds only new nodes.

    The map x(u) = 1/(1 + e^{-pi sinh u}) is evaluated through log x directly:
    the naive 0.5 (1 + tanh(...)) form loses the left tail to cancellation,
    which is fatal for integrands with an x^{s-1}, s < 1, singularity.
    """
    tables = []
    for m in range(max_level + 1):
        h = 0.5 / 2**m
        js = np.arange(-int(_UMAX / h), int(_UMAX / h) + 1)
        if m > 0:
            js = js[js % 2 != 0]
        u = js * h
        v = 0.5 * math.pi * np.sinh(u)
        with np.errstate(over="ignore"):
            logx = np.where(
                v > 0,
                -np.log1p(np.exp(-2.0 * np.abs(v))),
                -2.0 * np.abs(v) - np.log1p(np.exp(-2.0 * np.abs(v))),
            )
        logw = math.log(0.25 * math.pi) + _logcosh(u) - 2.0 * _logcosh(v)
        keep = np.isfinite(logw) & (logx < 0.0)
        tables.append((logx[keep], logw[keep], h))
    return tables


_TABLES = _build_tables()


def log_weighted_integral(s: float, z: float, rel_tol: float = 1e-12,
                          tail_pad: float = _TAIL_PAD,
                          max_level: int = _MAX_LEVEL):
    """log of I_s(z) = int_0^inf t^{s-1} e^{-t^2/2 - z t} dt, s > 0.

    Doubles the tanh-sinh level until two successive estimates agree to
    ``rel_tol`` (difference of logs).  Returns (log_value, achieved, level).
    Raises :class:`NumericalError` if the doubling budget is exhausted.
    """
    if s <= 0.0:
        raise DomainError(f"integral order s={s} must be positive")
    if s < 0.05:
        # below this the t^{s-1} mass hiding beyond the smallest float64
        # node (log t ~ -774) exceeds the target tolerance
        raise NumericalError(
            f"order s={s} too singular for the node range", achieved=math.exp(-700.0 * s))
    t_max = max(0.0, -z) + tail_pad
    log_t_max = math.log(t_max)
    run_max = -math.inf
    run_sum = 0.0
    prev = None
    est = math.nan
    achieved = math.inf
    for m, (logx, logw, h) in enumerate(_TABLES[:max_level + 1]):
        logt = log_t_max + logx
        t = np.exp(logt)
        expo = logw + (s - 1.0) * logt - 0.5 * t * t - z * t
        emax = float(np.max(expo))
        if emax > run_max:
            run_sum = run_sum * math.exp(run_max - emax) if run_sum > 0.0 else 0.0
            run_max = emax
        run_sum += float(np.sum(np.exp(expo - run_max)))
        est = math.log(h) + log_t_max + run_max + math.log(run_sum)
        if prev is not None:
            achieved = abs(est - prev)
            if achieved <= rel_tol:
                return est, achieved, m
        prev = est
    raise NumericalError(
        f"quadrature for I_s(z) with s={s}, z={z} did not converge "
        f"within {max_level} level doublings", achieved=achieved)


def cylinder_d(alpha: float, x: float, rel_tol: float = 1e-12) -> float:
    """Cylinder function D_alpha(x), alpha < 0, by deterministic quadrature."""
    if alpha >= 0.0:
        raise DomainError(f"cylinder_d requires alpha < 0, got {alpha}")
    log_i, _, _ = log_weighted_integral(-alpha, x, rel_tol)
    return math.exp(-0.25 * x * x + log_i - math.lgamma(-alpha))


class FundamentalSolution:
    """Evaluator for psi, phi, their derivatives of any order, and Q_k.

    Immutable after construction; evaluations are memoized per instance
    through a bounded, internally synchronized LRU cache, so concurrent
    reads are safe.
    """

    def __init__(self, params: ModelParams, rel_tol: float = 1e-12,
                 tail_pad: float = _TAIL_PAD, max_level: int = _MAX_LEVEL,
                 cache_size: int = 8192):
        self.params = params
        self.rel_tol = rel_tol
        self.tail_pad = tail_pad
        self.max_level = max_level
        self._s0 = params.rho / params.kappa
        self._scale = math.sqrt(2.0 * params.kappa) / params.sigma
        self._log_scale = math.log(self._scale)
        self._lgamma_s0 = math.lgamma(self._s0)
        self._log_i = functools.lru_cache(maxsize=cache_size)(self._log_i_uncached)

    # -- raw integrals ------------------------------------------------------

    def _log_i_uncached(self, s: float, z: float) -> float:
        value, _, _ = log_weighted_integral(s, z, self.rel_tol, self.tail_pad,
                                            self.max_level)
        return value

    def _z(self, x: float) -> float:
        return (self.params.mu - x) * self._scale

    def log_psi_deriv(self, k: int, x: float) -> float:
        """log psi^(k)(x) from the differentiated integral representation."""
        return k * self._log_scale + self._log_i(self._s0 + k, self._z(x)) - self._lgamma_s0

    # -- fundamental solutions ---------------------------------------------

    def psi(self, x: float) -> float:
        """Strictly increasing positive solution of the generator equation."""
        return math.exp(self.log_psi_deriv(0, x))

    def phi(self, x: float) -> float:
        """Strictly decreasing positive solution of the generator equation."""
        return math.exp(self._log_i(self._s0, -self._z(x)) - self._lgamma_s0)

    def phi_deriv(self, k: int, x: float) -> float:
        """k-th derivative of phi; alternates sign, |phi^(k)| > 0."""
        if k < 0:
            raise DomainError(f"derivative order k={k} must be >= 0")
        mag = math.exp(k * self._log_scale
                       + self._log_i(self._s0 + k, -self._z(x)) - self._lgamma_s0)
        return mag if k % 2 == 0 else -mag

    def psi_deriv_direct(self, k: int, x: float) -> float:
        """psi^(k) straight from quadrature; independent of the recurrence."""
        if k < 0:
            raise DomainError(f"derivative order k={k} must be >= 0")
        return math.exp(self.log_psi_deriv(k, x))

    def psi_derivs(self, x: float, k_max: int) -> np.ndarray:
        """psi^(0..k_max)(x): quadrature seeds k = 0, 1, then the two-term
        recurrence psi^(k+2) = -(2 kappa/sigma^2)(mu - x) psi^(k+1)
        + (2 (rho + k kappa)/sigma^2) psi^(k) from the generator equation."""
        p = self.params
        out = np.empty(k_max + 1)
        out[0] = self.psi(x)
        if k_max >= 1:
            out[1] = math.exp(self.log_psi_deriv(1, x))
        two_over_s2 = 2.0 / p.sigma**2
        for k in range(k_max - 1):
            out[k + 2] = (-two_over_s2 * p.kappa * (p.mu - x) * out[k + 1]
                          + two_over_s2 * (p.rho + k * p.kappa) * out[k])
            if not out[k + 2] > 0.0:
                raise NumericalError(
                    f"derivative recurrence lost positivity at k={k + 2}, x={x}")
        return out

    def psi_deriv(self, k: int, x: float) -> float:
        """k-th derivative of psi (k = 0 is psi itself); strictly positive."""
        if k < 0:
            raise DomainError(f"derivative order k={k} must be >= 0")
        if k <= 1:
            return math.exp(self.log_psi_deriv(k, x))
        return float(self.psi_derivs(x, k)[k])

    def psi_over_dpsi(self, x: float) -> float:
        """psi(x)/psi'(x), formed in log space; bounded for any x."""
        return math.exp(self.log_psi_deriv(0, x) - self.log_psi_deriv(1, x))

    # -- determinant combinations -------------------------------------------

    def q(self, k: int, x: float) -> float:
        """Q_k(x) = psi^(k) psi^(k+2) - (psi^(k+1))^2 > 0."""
        if k < 0:
            raise DomainError(f"order k={k} must be >= 0")
        d = self.psi_derivs(x, k + 2)
        return float(d[k] * d[k + 2] - d[k + 1] ** 2)

    def q_prime(self, k: int, x: float) -> float:
        """Q_k'(x) = psi^(k) psi^(k+3) - psi^(k+1) psi^(k+2)."""
        if k < 0:
            raise DomainError(f"order k={k} must be >= 0")
        d = self.psi_derivs(x, k + 3)
        return float(d[k] * d[k + 3] - d[k + 1] * d[k + 2])

    def ratio(self, k: int, x: float) -> float:
        """Psi_k(x) = (psi^(k+1))^2 / (psi^(k) psi^(k+2)); strictly increasing."""
        d = self.psi_derivs(x, k + 2)
        return float(d[k + 1] ** 2 / (d[k] * d[k + 2]))
