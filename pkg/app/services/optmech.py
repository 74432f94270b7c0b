"""
Optimal mechanism objects.

This module computes the reserve threshold r*_n, the optimal reserve
distribution Phi*_n of the second-price auction, the isorevenue worst-case
marginal F*_n, the minimax regret value and its large-n limits.

Phi*_n is evaluated through L_n(w) = sum_{j>=0} w^j / (n + j) with w = 1 - r/v,
since Phi*_n(v) = w * L_n(w). Three regimes are used:

- w <= SERIES_SWITCH_W: short series.
- moderate growth of w^-(n-1): closed form, whose cancellation is bounded.
- otherwise: the same positive series summed in blocks until the tail is negligible.
"""

import math
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import get_settings
from ..core.errors import DomainError, ToleranceNotMet
from ..core.logging import logger
from ..models.distribution import DensityPiece, Marginal
from ..models.reports import OptimalSolution
from ..models.reserve import ReserveDistribution
from ..utils.numkit import (Interval, exp_integral_e1_scaled, exp_integral_e1_scaled_gap,
                            integrate, solve_monotone_root)

SERIES_BLOCK = 256
SERIES_MAX_TERMS = 2_000_000


def reserve_equation_residual(n: int, r: float) -> float:
    """
    Left-hand side of the reserve threshold equation.

    (1-r)^(n-1) + log r + sum_{k=1}^{n-1} (1-r)^k / k. It is negative below r*_n
    and positive above it on (0, 1/n).

    Args:
        n (int): Number of buyers.
        r (float): Candidate threshold in (0, 1).

    Returns:
        float: The residual.

    Raises:
        DomainError: If n < 1 or r is outside (0, 1).
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    k = np.arange(1, n, dtype=float)
    log_keep = math.log1p(-r)
    tail = float(np.sum(np.exp(k * log_keep) / k)) if n > 1 else 0.0
    return math.exp((n - 1) * log_keep) + math.log(r) + tail


@lru_cache(maxsize=None)
def solve_reserve(n: int) -> float:
    """
    Solve the reserve threshold equation for r*_n in (0, 1/n).

    Results are memoized per n; lru_cache is safe under concurrent callers.

    Args:
        n (int): Number of buyers.

    Returns:
        float: r*_n with residual at most 1e-10.

    Raises:
        DomainError: If n < 1.
        ToleranceNotMet: If the residual check fails.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    settings = get_settings()
    hi = 1.0 / n if n > 1 else 1.0 - 1e-9
    try:
        r = solve_monotone_root(lambda x: reserve_equation_residual(n, x), 1e-15, hi,
                                tol=settings.ROOT_TOL / n)
    except Exception as e:
        logger.error(f"Failed to solve the reserve equation for n={n}: {str(e)}")
        raise
    residual = reserve_equation_residual(n, r)
    if abs(residual) > 1e-10:
        raise ToleranceNotMet(f"reserve residual {residual} too large for n={n}",
                              detail={"n": n, "r": r, "residual": residual})
    logger.debug(f"r*_{n} = {r:.15g} (residual {residual:.3g})")
    return r


def _positive_series(w: np.ndarray, n: int, derivative: bool = False) -> np.ndarray:
    """
    sum_{j>=0} c_j w^j / (n + j) with c_j = 1, or c_j = j + 1 when derivative is set.

    Summed in blocks until the last term of every row is below 1e-17 of its sum.
    """
    out = np.zeros_like(w)
    if not w.size:
        return out
    offsets = np.arange(SERIES_BLOCK, dtype=float)
    lead = np.ones_like(w)
    start = 0
    while start < SERIES_MAX_TERMS:
        j = start + offsets
        powers = lead[:, None] * w[:, None] ** offsets[None, :]
        coef = (j + 1.0) if derivative else np.ones_like(j)
        terms = powers * (coef / (n + j))[None, :]
        out += terms.sum(axis=1)
        lead = lead * w ** SERIES_BLOCK
        start += SERIES_BLOCK
        last = terms[:, -1]
        # the derivative terms grow until j ~ w/(1-w), so also require being past the peak
        past_peak = (start * (1.0 - w) > 1.0) | (w == 0.0)
        if np.all((last <= 1e-17 * out) & past_peak):
            return out
    raise ToleranceNotMet(f"series for n={n} did not converge in {SERIES_MAX_TERMS} terms")


def _closed_form_tail(v: np.ndarray, w: np.ndarray, n: int, r: float) -> np.ndarray:
    # L_n(w) = w^-n [log(v/r) - sum_{k<n} w^k / k]
    k = np.arange(1, n, dtype=float)
    partial = (w[:, None] ** k[None, :] / k[None, :]).sum(axis=1) if n > 1 else np.zeros_like(w)
    return (np.log(v) - math.log(r) - partial) / w ** n


def _tail_sum(v: np.ndarray, n: int, r: float) -> np.ndarray:
    """L_n(w) for v in (r, 1], choosing the regime per point."""
    settings = get_settings()
    w = 1.0 - r / v
    out = np.empty_like(w)
    short = w <= settings.SERIES_SWITCH_W
    with np.errstate(divide="ignore", over="ignore"):
        growth = np.where(short, np.inf, w ** (-(n - 1.0)))
    closed = ~short & (growth <= settings.CLOSED_FORM_MAX_GROWTH)
    long_ = ~short & ~closed
    if np.any(short):
        out[short] = _positive_series(w[short], n)
    if np.any(closed):
        out[closed] = _closed_form_tail(v[closed], w[closed], n, r)
    if np.any(long_):
        out[long_] = _positive_series(w[long_], n)
    return out


class OptimalReserve(ReserveDistribution):
    """
    The optimal reserve distribution Phi*_n on [r*_n, 1].

    Attributes:
        n (int): Number of buyers.
        r (float): Lower support edge; r*_n unless forced for testing.
    """

    def __init__(self, n: int, r: Optional[float] = None):
        if n < 1:
            raise DomainError(f"n must be positive, got {n}")
        self.n = int(n)
        self.r = solve_reserve(self.n) if r is None else float(r)
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"reserve threshold must lie in (0, 1), got {self.r}")
        self.support_lo = self.r
        self.support_hi = 1.0

    def cdf(self, v):
        x = np.asarray(v, dtype=float)
        flat = np.atleast_1d(x).astype(float)
        out = np.zeros_like(flat)
        out[flat >= 1.0] = 1.0
        inside = (flat > self.r) & (flat < 1.0)
        if np.any(inside):
            vi = flat[inside]
            out[inside] = (1.0 - self.r / vi) * _tail_sum(vi, self.n, self.r)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def density(self, v):
        x = np.asarray(v, dtype=float)
        flat = np.atleast_1d(x).astype(float)
        out = np.zeros_like(flat)
        inside = (flat > self.r) & (flat < 1.0)
        if np.any(inside):
            vi = flat[inside]
            w = 1.0 - self.r / vi
            short = w <= get_settings().SERIES_SWITCH_W
            dens = np.empty_like(vi)
            if np.any(short):
                dens[short] = self.r / vi[short] ** 2 * _positive_series(w[short], self.n, derivative=True)
            if np.any(~short):
                vl = vi[~short]
                dens[~short] = 1.0 / vl - (self.n - 1) * self.r / vl ** 2 * _tail_sum(vl, self.n, self.r)
            out[inside] = np.maximum(dens, 0.0)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def integral_cdf(self, a: float, b: float) -> float:
        if self.n == 1 and b > a:
            # Phi*_1 = log(v/r) has antiderivative v log(v/r) - v + r on [r, 1]
            def antiderivative(x: float) -> float:
                if x <= self.r:
                    return 0.0
                if x >= 1.0:
                    return -math.log(self.r) - 1.0 + self.r + (x - 1.0)
                return x * math.log(x / self.r) - x + self.r

            return antiderivative(b) - antiderivative(a)
        return super().integral_cdf(a, b)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "optimal", "n": self.n, "r": self.r}


def phi_star_cdf(n: int, v, r: Optional[float] = None):
    """
    CDF of the optimal reserve distribution for n buyers.

    Zero up to r*_n and one from v = 1; clamped outside [0, 1].
    """
    return OptimalReserve(n, r).cdf(v)


def phi_star_density(n: int, v, r: Optional[float] = None):
    """
    Density of Phi*_n on the open support (r*_n, 1).

    Raises:
        DomainError: If any v lies outside (r*_n, 1).
    """
    reserve = OptimalReserve(n, r)
    x = np.asarray(v, dtype=float)
    if np.any((x <= reserve.r) | (x >= 1.0)):
        raise DomainError(f"density of Phi*_{n} is defined on ({reserve.r}, 1)")
    return reserve.density(v)


def phi_star_quantile(n: int, u, r: Optional[float] = None):
    """Inverse of phi_star_cdf on [r*_n, 1]."""
    return OptimalReserve(n, r).quantile(u)


def isorevenue_marginal(r: float) -> Marginal:
    """
    Isorevenue marginal: F(v) = 1 - r/v on [r, 1) with an atom of mass r at 1.

    Every posted price p in [r, 1) earns p (1 - F(p)) = r.

    Args:
        r (float): Revenue level in (0, 1).

    Returns:
        Marginal: The isorevenue distribution.

    Raises:
        DomainError: If r is outside (0, 1).
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"isorevenue level must lie in (0, 1), got {r}")
    return Marginal(
        pieces=[DensityPiece(lo=r, hi=1.0, kind="inverse_square", weight=r)],
        atoms=[(1.0, r)],
    )


def worst_case_marginal(n: int) -> Marginal:
    """F*_n, the isorevenue marginal at r*_n."""
    return isorevenue_marginal(solve_reserve(n))


@lru_cache(maxsize=None)
def minimax_regret(n: int) -> float:
    """
    Minimax regret (1 - r)^(n-1) - integral_r^1 (1 - r/v)^(n-1) dv at r = r*_n.

    Args:
        n (int): Number of buyers.

    Returns:
        float: The minimax regret.
    """
    r = solve_reserve(n)
    if n == 1:
        return r
    integral, _ = integrate(lambda v: (1.0 - r / v) ** (n - 1), Interval(lo=r, hi=1.0))
    value = (1.0 - r) ** (n - 1) - integral
    logger.debug(f"minimax regret for n={n}: {value:.12g}")
    return value


def minimax_regret_series(n: int) -> float:
    """
    Minimax regret by binomial expansion of (1 - r/v)^(n-1).

    Exact in exact arithmetic; the alternating sum limits it to n <= 12 in floating point.

    Raises:
        DomainError: If n > 12.
    """
    if not 1 <= n <= 12:
        raise DomainError(f"binomial expansion is only evaluated for 1 <= n <= 12, got {n}")
    r = solve_reserve(n)
    m = n - 1
    total = 0.0
    for k in range(m + 1):
        if k == 0:
            piece = 1.0 - r
        elif k == 1:
            piece = -math.log(r)
        else:
            piece = (r ** (1 - k) - 1.0) / (k - 1)
        total += math.comb(m, k) * (-r) ** k * piece
    return (1.0 - r) ** m - total


def optimal_solution(n: int) -> OptimalSolution:
    r = solve_reserve(n)
    return OptimalSolution(n=n, r_star=r, regret=minimax_regret(n),
                           residual=reserve_equation_residual(n, r))


@lru_cache(maxsize=1)
def asymptotic_constants() -> Tuple[float, float]:
    """
    Large-n limits: c with e^-c = E1(c), and the limiting regret e^-c - integral_0^1 e^(-c/v) dv.

    Returns:
        Tuple[float, float]: (c, limit_regret).
    """
    c = solve_monotone_root(lambda x: exp_integral_e1_scaled(x) - 1.0, 0.01, 5.0)

    def decay(v: np.ndarray) -> np.ndarray:
        safe = np.maximum(v, 1e-300)
        return np.where(v > 0, np.exp(-c / safe), 0.0)

    integral, _ = integrate(decay, Interval(lo=0.0, hi=1.0))
    limit = math.exp(-c) - integral
    logger.debug(f"asymptotic constants: c={c:.12g}, limit={limit:.12g}")
    return c, limit


class LimitReserve(ReserveDistribution):
    """
    Limit of Phi*_n as n grows: Phi(v) = e^(c/v) E1(c/v) on (0, 1].

    Attributes:
        c (float): Limit of n r*_n.
    """

    def __init__(self, c: Optional[float] = None):
        self.c = asymptotic_constants()[0] if c is None else float(c)
        self.support_lo = 0.0
        self.support_hi = 1.0

    def cdf(self, v):
        x = np.asarray(v, dtype=float)
        flat = np.atleast_1d(x).astype(float)
        out = np.zeros_like(flat)
        out[flat >= 1.0] = 1.0
        inside = (flat > 0.0) & (flat < 1.0)
        if np.any(inside):
            out[inside] = exp_integral_e1_scaled(self.c / np.maximum(flat[inside], 1e-290))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def density(self, v):
        x = np.asarray(v, dtype=float)
        flat = np.atleast_1d(x).astype(float)
        out = np.zeros_like(flat)
        inside = (flat > 0.0) & (flat < 1.0)
        if np.any(inside):
            vi = np.maximum(flat[inside], 1e-290)
            z = self.c / vi
            # d/dv g(c/v) = (c/v^2) (1/z - g(z)); written as z^2 gap / c to stay finite at v -> 0
            out[inside] = z * z * exp_integral_e1_scaled_gap(z) / self.c
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "limit", "c": self.c}


def phi_infinity_cdf(v):
    """
    Limiting optimal reserve CDF e^(c/v) E1(c/v).

    Raises:
        DomainError: If any v is outside (0, 1].
    """
    x = np.asarray(v, dtype=float)
    if np.any((x <= 0.0) | (x > 1.0)):
        raise DomainError("phi_infinity_cdf is defined on (0, 1]")
    c = asymptotic_constants()[0]
    out = exp_integral_e1_scaled(c / x)
    return out


def competition_gains(ns: Sequence[int]) -> List[Dict[str, Any]]:
    """
    Minimax regret per buyer count with the relative drop from the previous count.

    Args:
        ns (Sequence[int]): Buyer counts.

    Returns:
        List[Dict[str, Any]]: Rows with n, regret and relative_decrease (None on the first row).
    """
    rows = []
    previous = None
    for n in sorted(set(ns)):
        value = minimax_regret(n)
        drop = None if previous is None else (previous - value) / previous
        rows.append({"n": n, "regret": value, "relative_decrease": drop})
        previous = value
    return rows


def revenue_curve_is_concave(marginal: Marginal, points: int = 1001, tol: float = 1e-9) -> bool:
    """
    Regularity test: q * F^-1(1 - q) is concave on a uniform quantile grid.

    Args:
        marginal (Marginal): The value distribution.
        points (int): Grid points in (0, 1).
        tol (float): Allowed positive second difference.

    Returns:
        bool: True when no second difference exceeds tol.
    """
    q = np.linspace(0.0, 1.0, points + 2)[1:-1]
    revenue = q * np.asarray(marginal.quantile(1.0 - q), dtype=float)
    second = revenue[:-2] - 2.0 * revenue[1:-1] + revenue[2:]
    return bool(np.all(second <= tol))
