"""ESO parameters for log-exponential-loss under tau-nice sampling, and iteration bounds.

The curvature ``beta`` is::

    beta = sum_{k=1}^{K} min(1, (m*n/tau) * sum_{l=k}^{K} c_l p_l),   K = min(omega, tau)

with p_l the overlap law of a tau-subset with an omega-element row support
and c_l = max(l/omega, (tau-l)/(n-omega)) (c_l = l/omega when omega == n).
The m*n/tau factor is kept as printed in the source formula; it reproduces
the published values beta ~ 15.1 (w8a) and beta ~ 3.2 (URL reputation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import MarginMatrix, coordinate_lipschitz


def _check_ranges(n, omega, tau):
    if not (isinstance(n, (int, np.integer)) and isinstance(omega, (int, np.integer)) and isinstance(tau, (int, np.integer))):
        raise TypeError("n, omega and tau must be integers")
    if not 1 <= omega <= n:
        raise ValueError(f"need 1 <= omega <= n, got omega={omega}, n={n}")
    if not 1 <= tau <= n:
        raise ValueError(f"need 1 <= tau <= n, got tau={tau}, n={n}")


def _balanced_product(factors: list[float]) -> float:
    # take the smallest factor while the running product is >= 1, the largest otherwise
    if any(f == 0.0 for f in factors):
        return 0.0
    factors = sorted(factors)
    lo, hi = 0, len(factors) - 1
    prod = 1.0
    while lo <= hi:
        if prod >= 1.0:
            prod *= factors[lo]
            lo += 1
        else:
            prod *= factors[hi]
            hi -= 1
    return prod


def _pmf_factors(n: int, omega: int, tau: int, l: int) -> list[float]:
    f = [(n - omega - k) / (n - k) for k in range(tau - l)]
    f += [(omega - k) / (n - tau + l - k) for k in range(l)]
    f += [(tau - k) / (l - k) for k in range(l)]
    return f


def overlap_pmf(n: int, omega: int, tau: int) -> np.ndarray:
    """p[l] = P(|S & R| = l) for S a uniform tau-subset of n and |R| = omega.

    Each p[l] is a product of tau + l integer ratios, none larger than
    tau - l + 1, multiplied in an order that keeps partial products near 1.
    """
    _check_ranges(n, omega, tau)
    K = min(omega, tau)
    return np.array([_balanced_product(_pmf_factors(n, omega, tau, l)) for l in range(K + 1)])


def overlap_coefficients(n: int, omega: int, tau: int) -> np.ndarray:
    _check_ranges(n, omega, tau)
    l = np.arange(min(omega, tau) + 1, dtype=np.float64)
    if omega == n:
        return l / omega
    return np.maximum(l / omega, (tau - l) / (n - omega))


def compute_beta(m: int, n: int, omega: int, tau: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    p = overlap_pmf(n, omega, tau)
    c = overlap_coefficients(n, omega, tau)
    # suffix sums, accumulated from the largest l down
    tail = np.cumsum((c * p)[::-1])[::-1]
    scale = m * n / tau
    return float(sum(min(1.0, scale * tail[k]) for k in range(1, len(p))))


def speedup_factor(tau: int, beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return tau / beta


@dataclass(frozen=True, eq=False)
class EsoParams:
    m: int
    n: int
    omega: int
    tau: int
    beta: float
    L: np.ndarray

    def __post_init__(self):
        if not 1.0 <= self.beta:
            raise ValueError(f"beta={self.beta} < 1")
        if self.L.shape != (self.n,):
            raise ValueError("L must have one entry per coordinate")

    @classmethod
    def for_matrix(cls, A: MarginMatrix, tau: int, beta: float | None = None) -> "EsoParams":
        """ESO parameters of ``A`` for tau-nice sampling over its active columns.

        Empty columns are outside the sampling domain, so beta is evaluated
        with n = number of active columns.
        """
        n_active = int(A.active_coordinates().size)
        if n_active == 0:
            raise ValueError("matrix has no nonzero column")
        if not 1 <= tau <= n_active:
            raise ValueError(f"tau={tau} outside [1, {n_active}]")
        if beta is None:
            beta = compute_beta(A.m, n_active, A.omega, tau)
        return cls(m=A.m, n=A.n, omega=A.omega, tau=tau, beta=beta, L=coordinate_lipschitz(A))

    @property
    def speedup(self) -> float:
        return speedup_factor(self.tau, self.beta)

    def with_beta(self, beta: float) -> "EsoParams":
        return EsoParams(self.m, self.n, self.omega, self.tau, beta, self.L)


@dataclass(frozen=True)
class ConvergenceConstants:
    """Problem constants of the convergence theory, supplied by the caller.

    None of these is computed here: the hard-core partition they depend on is
    not cheaply available for a general matrix.
    """

    gamma_tilde: float
    f0: float
    c_tilde: float = 1.0
    w_tilde: float = 0.0
    f_bar: float = 0.0

    def __post_init__(self):
        vals = (self.gamma_tilde, self.f0, self.c_tilde, self.w_tilde, self.f_bar)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("convergence constants must be finite")
        if self.gamma_tilde <= 0 or self.c_tilde <= 0 or self.f0 <= 0:
            raise ValueError("gamma_tilde, c_tilde and f0 must be positive")
        if self.w_tilde < 0 or self.f_bar < 0:
            raise ValueError("w_tilde and f_bar must be nonnegative")
        if self.f_bar > self.f0:
            raise ValueError("f_bar cannot exceed f0")


def _check_common(eps, rho, beta, n, tau):
    if eps <= 0 or rho <= 0:
        raise ValueError("eps and rho must be positive")
    if beta <= 0 or n < 1 or tau < 1:
        raise ValueError("beta, n, tau must be positive")


def general_bound_rhs(cc: ConvergenceConstants, eps, rho, beta, n, tau) -> float:
    """Right-hand side of the O(1/eps) bound (mixed regime)."""
    _check_common(eps, rho, beta, n, tau)
    if cc.f_bar <= 0:
        raise ValueError("the general bound needs f_bar > 0")
    if not eps < 2 * cc.f_bar:
        raise ValueError(f"need 0 < eps < 2*f_bar = {2 * cc.f_bar}")
    lead = (4 * beta * n / tau) * (1 + 2 * cc.w_tilde / cc.c_tilde) ** 2 / cc.gamma_tilde**2
    lead *= cc.f0**2 / cc.f_bar
    return lead * (1.0 / eps) * (1.0 + math.log(1.0 / rho)) + 2.0


def weak_bound_rhs(cc: ConvergenceConstants, eps, rho, beta, n, tau) -> float:
    """Right-hand side of the O(log 1/eps) bound for weakly learnable data."""
    _check_common(eps, rho, beta, n, tau)
    return (beta / tau) * (2 * n / cc.gamma_tilde**2) * math.log(cc.f0 / (eps * rho))


def attainable_bound_rhs(cc: ConvergenceConstants, eps, rho, beta, n, tau) -> float:
    """Right-hand side of the O(log 1/eps) bound when the minimum is attained."""
    _check_common(eps, rho, beta, n, tau)
    if not eps < 2 * cc.f_bar:
        raise ValueError(f"need 0 < eps < 2*f_bar = {2 * cc.f_bar}")
    gap = cc.f0 - cc.f_bar
    if gap <= 0:
        raise ValueError("f0 must exceed f_bar")
    return (beta / tau) * (4 * n / (cc.c_tilde * cc.gamma_tilde**2)) * math.log(2 * gap / (eps * rho))


def _ceil_nonneg(x: float) -> int:
    return max(0, math.ceil(x))


def iteration_bound_general(cc, eps, rho, beta, n, tau) -> int:
    return _ceil_nonneg(general_bound_rhs(cc, eps, rho, beta, n, tau))


def iteration_bound_weak(cc, eps, rho, beta, n, tau) -> int:
    return _ceil_nonneg(weak_bound_rhs(cc, eps, rho, beta, n, tau))


def iteration_bound_attainable(cc, eps, rho, beta, n, tau) -> int:
    return _ceil_nonneg(attainable_bound_rhs(cc, eps, rho, beta, n, tau))
