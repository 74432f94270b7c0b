"""
Scalar numerics shared by the services.

Bracketed root finding, adaptive Gauss-Legendre quadrature over split intervals,
vectorized CDF inversion and the exponential integral E1. Everything here is a
pure function of its arguments; the only module state is the cached rule nodes.
"""

import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.config import get_settings
from ..core.errors import DomainError, NoSignChange, NonFinite, ToleranceNotMet
from ..core.logging import logger

ScalarFn = Callable[[float], float]
VectorFn = Callable[[np.ndarray], np.ndarray]

EULER_GAMMA = 0.57721566490153286061


class Interval(BaseModel):
    """
    Closed integration interval with interior split points.

    Attributes:
        lo (float): Left end.
        hi (float): Right end.
        split_points (Tuple[float, ...]): Strictly increasing atom or kink locations inside [lo, hi].
    """
    model_config = ConfigDict(frozen=True)

    lo: float = Field(ge=0.0, le=1.0)
    hi: float = Field(ge=0.0, le=1.0)
    split_points: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_order(self) -> "Interval":
        if self.lo > self.hi:
            raise ValueError(f"lo={self.lo} exceeds hi={self.hi}")
        previous = -math.inf
        for point in self.split_points:
            if not self.lo <= point <= self.hi:
                raise ValueError(f"split point {point} outside [{self.lo}, {self.hi}]")
            if point <= previous:
                raise ValueError("split points must be strictly increasing")
            previous = point
        return self

    @classmethod
    def spanning(cls, lo: float, hi: float, points: Sequence[float] = ()) -> "Interval":
        """Build an interval keeping only the points strictly inside (lo, hi), sorted and deduplicated."""
        inside = sorted({float(p) for p in points if lo < p < hi})
        return cls(lo=lo, hi=hi, split_points=tuple(inside))

    def segments(self) -> List[Tuple[float, float]]:
        edges = [self.lo, *self.split_points, self.hi]
        return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _finite(value: float, where: str, x: float) -> float:
    if not math.isfinite(value):
        raise NonFinite(f"{where} evaluated to {value} at x={x}", detail={"x": x})
    return value


def solve_monotone_root(f: ScalarFn, lo: float, hi: float, tol: Optional[float] = None,
                        max_iter: int = 400) -> float:
    """
    Find the root of a continuous monotone function on a bracket.

    Bisection is the backbone. A secant step is taken on alternate iterations and only
    when it lands strictly inside the current bracket, so convergence is never slower
    than half the bisection rate and the result is a deterministic function of inputs.

    Args:
        f (ScalarFn): Function with f(lo)*f(hi) <= 0.
        lo (float): Left end of the bracket.
        hi (float): Right end of the bracket.
        tol (Optional[float]): Stop when |f(x)| <= tol or the bracket width <= tol.
        max_iter (int): Iteration budget.

    Returns:
        float: The root estimate.

    Raises:
        NoSignChange: If f(lo) and f(hi) share a strict sign.
        NonFinite: If f returns NaN or infinity.
        ToleranceNotMet: If the iteration budget runs out.
    """
    if tol is None:
        tol = get_settings().ROOT_TOL
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")

    a, b = float(lo), float(hi)
    fa = _finite(float(f(a)), "root function", a)
    fb = _finite(float(f(b)), "root function", b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise NoSignChange(
            f"no sign change on [{a}, {b}]: f(lo)={fa}, f(hi)={fb}",
            detail={"lo": a, "hi": b, "f_lo": fa, "f_hi": fb},
        )

    for iteration in range(max_iter):
        if b - a <= tol:
            break
        x = 0.5 * (a + b)
        if iteration % 2 == 0 and fb != fa:
            secant = b - fb * (b - a) / (fb - fa)
            if a < secant < b:
                x = secant
        if x <= a or x >= b:
            # bracket cannot shrink further in floating point
            break
        fx = _finite(float(f(x)), "root function", x)
        if abs(fx) <= tol or fx == 0.0:
            return x
        if (fx < 0) == (fa < 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
    else:
        raise ToleranceNotMet(f"root not bracketed within tol={tol} after {max_iter} iterations",
                              detail={"lo": a, "hi": b})

    return a if abs(fa) <= abs(fb) else b


@lru_cache(maxsize=8)
def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def panel_integrals(f: VectorFn, edges: np.ndarray, order: int = 10) -> np.ndarray:
    """
    Fixed-order Gauss-Legendre integral of f on every panel [edges[i], edges[i+1]].

    Args:
        f (VectorFn): Vectorized integrand.
        edges (np.ndarray): Nondecreasing panel edges.
        order (int): Number of Gauss nodes per panel.

    Returns:
        np.ndarray: One integral per panel.
    """
    edges = np.asarray(edges, dtype=float)
    return _gauss_panels(f, edges[:-1], edges[1:], order)


def _gauss_panels(f: VectorFn, a: np.ndarray, b: np.ndarray, order: int = 10) -> np.ndarray:
    nodes, weights = _legendre_rule(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(values)):
        bad = x[~np.isfinite(values)][0]
        raise NonFinite(f"integrand non-finite at x={bad}", detail={"x": float(bad)})
    return half * (values @ weights)


def integrate(f: VectorFn, iv: Interval, abs_tol: Optional[float] = None,
              max_panels: Optional[int] = None) -> Tuple[float, float]:
    """
    Adaptive panel quadrature on each split segment of an interval.

    Each panel is compared against its two halves with a 10-point Gauss-Legendre rule.
    Panels are refined breadth first and all panels of one round are evaluated in a
    single vectorized call. A panel is accepted once its error is below its share of
    abs_tol, proportional to its length. Atoms are the caller's business: declare
    their locations as split points and add their mass separately.

    Args:
        f (VectorFn): Vectorized integrand, bounded on each segment.
        iv (Interval): Domain and split points.
        abs_tol (Optional[float]): Absolute error target.
        max_panels (Optional[int]): Budget on evaluated panels.

    Returns:
        Tuple[float, float]: The integral and its error estimate.

    Raises:
        ToleranceNotMet: If the panel budget is exhausted or the estimate exceeds abs_tol.
        NonFinite: On NaN or infinite integrand values.
    """
    settings = get_settings()
    abs_tol = settings.QUAD_ABS_TOL if abs_tol is None else abs_tol
    max_panels = settings.QUAD_MAX_PANELS if max_panels is None else max_panels

    segments = iv.segments()
    if not segments:
        return 0.0, 0.0
    length = iv.hi - iv.lo
    min_width = 1e-13 * length

    a = np.array([s[0] for s in segments])
    b = np.array([s[1] for s in segments])
    coarse = _gauss_panels(f, a, b)
    evaluated = len(a)

    total = 0.0
    err = 0.0
    while len(a):
        m = 0.5 * (a + b)
        count = len(a)
        halves = _gauss_panels(f, np.concatenate([a, m]), np.concatenate([m, b]))
        left = halves[:count]
        right = halves[count:]
        fine = left + right
        local = np.abs(fine - coarse)
        budget = abs_tol * (b - a) / length
        done = (local <= budget) | ((b - a) <= min_width)
        total += float(np.sum(fine[done]))
        err += float(np.sum(local[done]))
        evaluated += 2 * len(a)
        keep = ~done
        if not np.any(keep):
            break
        if evaluated > max_panels:
            logger.error(f"Quadrature budget of {max_panels} panels exhausted on [{iv.lo}, {iv.hi}]")
            raise ToleranceNotMet(
                f"quadrature did not reach abs_tol={abs_tol} within {max_panels} panels",
                detail={"lo": iv.lo, "hi": iv.hi, "partial": total},
            )
        a, m, b = a[keep], m[keep], b[keep]
        left, right = left[keep], right[keep]
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        coarse = np.concatenate([left, right])

    if err > abs_tol:
        raise ToleranceNotMet(f"quadrature error estimate {err} exceeds abs_tol={abs_tol}",
                              detail={"lo": iv.lo, "hi": iv.hi, "value": total})
    return total, err


def _e1_series(x: np.ndarray) -> np.ndarray:
    # -gamma - ln x - sum (-x)^k / (k k!), accurate for 0 < x <= 1
    term = np.ones_like(x)
    acc = np.zeros_like(x)
    for k in range(1, 40):
        term = term * (-x) / k
        acc += term / k
    return -EULER_GAMMA - np.log(x) - acc


def _e1_continued_fraction_scaled(x: np.ndarray) -> np.ndarray:
    # modified Lentz on the even form of the continued fraction; returns e^x E1(x)
    tiny = 1e-300
    b = x + 1.0
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 1000):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h


def _check_positive(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("exponential integral requires x > 0")
    return arr


def exp_integral_e1(x):
    """
    Exponential integral E1(x) = integral of e^(-x t)/t over [1, inf).

    Args:
        x: Positive scalar or array.

    Returns:
        Same shape as x.

    Raises:
        DomainError: If any x <= 0.
    """
    arr = _check_positive(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat <= 1.0
    if np.any(small):
        out[small] = _e1_series(flat[small])
    if np.any(~small):
        large = flat[~small]
        out[~small] = _e1_continued_fraction_scaled(large) * np.exp(-large)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(arr.shape)


def exp_integral_e1_scaled(x):
    """e^x * E1(x) without overflow for large x."""
    arr = _check_positive(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat <= 1.0
    if np.any(small):
        out[small] = _e1_series(flat[small]) * np.exp(flat[small])
    if np.any(~small):
        out[~small] = _e1_continued_fraction_scaled(flat[~small])
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(arr.shape)


def exp_integral_e1_scaled_gap(x):
    """
    1/x - e^x E1(x), which is positive and of order 1/x^2.

    Large arguments use the asymptotic series so the difference keeps full precision.
    """
    arr = _check_positive(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    big = flat > 1e3
    if np.any(big):
        z = flat[big]
        acc = np.zeros_like(z)
        sign = 1.0
        fact = 1.0
        for k in range(1, 8):
            fact *= k
            acc += sign * fact / z ** (k + 1)
            sign = -sign
        out[big] = acc
    if np.any(~big):
        z = flat[~big]
        out[~big] = 1.0 / z - exp_integral_e1_scaled(z)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(arr.shape)


def invert_cdf(cdf: VectorFn, density: Optional[VectorFn], u, lo: float, hi: float,
               table_size: int = 2049, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """
    Vectorized quantile of a continuous CDF on [lo, hi].

    A tabulated CDF gives each target a bracket; safeguarded Newton steps then refine it,
    falling back to bisection whenever a step leaves the bracket or the density vanishes.

    Args:
        cdf (VectorFn): Continuous nondecreasing CDF with cdf(lo)=0 and cdf(hi)=1.
        density (Optional[VectorFn]): Derivative of cdf, or None for pure bisection.
        u: Target probabilities in [0, 1].
        lo (float): Lower support edge.
        hi (float): Upper support edge.
        table_size (int): Points of the bracketing table.
        tol (float): Accepted |cdf(x) - u|.
        max_iter (int): Iteration budget per target.

    Returns:
        np.ndarray: Quantiles, same shape as u.
    """
    u = np.asarray(u, dtype=float)
    flat = np.clip(u.ravel(), 0.0, 1.0)
    grid = np.linspace(lo, hi, table_size)
    table = np.maximum.accumulate(np.asarray(cdf(grid), dtype=float))
    idx = np.clip(np.searchsorted(table, flat, side="left"), 1, table_size - 1)
    a = grid[idx - 1].copy()
    b = grid[idx].copy()
    x = 0.5 * (a + b)
    out = np.empty_like(flat)
    out[flat <= 0.0] = lo
    out[flat >= 1.0] = hi
    active = np.flatnonzero((flat > 0.0) & (flat < 1.0))

    for _ in range(max_iter):
        if not len(active):
            break
        xa = x[active]
        gap = np.asarray(cdf(xa), dtype=float) - flat[active]
        done = (np.abs(gap) <= tol) | (b[active] - a[active] <= 4 * np.finfo(float).eps * max(abs(hi), 1.0))
        out[active[done]] = xa[done]
        below = gap < 0
        a[active[below]] = xa[below]
        b[active[~below]] = xa[~below]
        proposal = 0.5 * (a[active] + b[active])
        if density is not None:
            slope = np.asarray(density(xa), dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = xa - gap / slope
            ok = (slope > 0) & (newton > a[active]) & (newton < b[active])
            proposal = np.where(ok, newton, proposal)
        x[active] = proposal
        active = active[~done]
    else:
        out[active] = x[active]

    return out.reshape(u.shape)


def golden_section_max(f: ScalarFn, lo: float, hi: float, tol: float = 1e-12,
                       max_iter: int = 500) -> Tuple[float, float]:
    """
    Golden-section search for the maximum of a unimodal function.

    Args:
        f (ScalarFn): Unimodal objective on [lo, hi].
        lo (float): Left end.
        hi (float): Right end.
        tol (float): Final bracket width.
        max_iter (int): Iteration budget.

    Returns:
        Tuple[float, float]: The best point found and its value, endpoints included.
    """
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    candidates = [(c, fc), (d, fd), (float(lo), f(lo)), (float(hi), f(hi))]
    return max(candidates, key=lambda item: item[1])
