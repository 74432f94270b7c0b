"""
Reserve price distributions.

A ReserveDistribution is the seller's randomization over reserve prices. The base
class provides quantiles, sampling and the integrals used by the regret formulas;
subclasses supply the CDF and, for continuous laws, the density. The optimal
reserves live in app.services.optmech and plug into the same interface.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..core.errors import DomainError
from ..utils.numkit import Interval, integrate, invert_cdf


class ReserveDistribution(ABC):
    """
    Base class for reserve price distributions on [support_lo, support_hi].

    Attributes:
        support_lo (float): Smallest reserve that can be drawn.
        support_hi (float): Largest reserve that can be drawn.
    """

    support_lo: float = 0.0
    support_hi: float = 1.0
    is_continuous: bool = True

    @abstractmethod
    def cdf(self, v):
        """Right-continuous CDF, vectorized."""
        raise NotImplementedError()

    def density(self, v):
        """Density of a continuous law, zero outside the support."""
        raise DomainError(f"{type(self).__name__} has no density")

    def atoms(self) -> List[Tuple[float, float]]:
        return []

    def breakpoints(self) -> List[float]:
        """Kinks and support edges the quadrature must split at."""
        return [self.support_lo, self.support_hi]

    def describe(self) -> Dict[str, Any]:
        return {"kind": type(self).__name__, "support": [self.support_lo, self.support_hi]}

    def quantile(self, u):
        q = np.asarray(u, dtype=float)
        out = invert_cdf(self.cdf, self.density, q, self.support_lo, self.support_hi)
        return float(out) if out.ndim == 0 else out

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.quantile(rng.random(count)), dtype=float)

    def integral_cdf(self, a: float, b: float) -> float:
        """Integral of the CDF over [a, b]."""
        if b <= a:
            return 0.0
        lo = max(a, self.support_lo)
        value = max(0.0, b - max(a, self.support_hi))
        hi = min(b, self.support_hi)
        if hi > lo:
            iv = Interval.spanning(lo, hi, self.breakpoints())
            part, _ = integrate(lambda x: np.asarray(self.cdf(x), dtype=float), iv)
            value += part
        return value

    def first_moment(self, a: float, b: float) -> float:
        """Integral of p dPhi(p) over (a, b], by parts."""
        if b <= a:
            return 0.0
        return b * float(self.cdf(b)) - a * float(self.cdf(a)) - self.integral_cdf(a, b)


class UniformReserve(ReserveDistribution):
    """Reserve drawn uniformly from [lo, hi]."""

    def __init__(self, lo: float, hi: float):
        if not 0.0 <= lo < hi <= 1.0:
            raise DomainError(f"uniform reserve needs 0 <= lo < hi <= 1, got [{lo}, {hi}]")
        self.support_lo = float(lo)
        self.support_hi = float(hi)

    def cdf(self, v):
        x = np.asarray(v, dtype=float)
        out = np.clip((x - self.support_lo) / (self.support_hi - self.support_lo), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, v):
        x = np.asarray(v, dtype=float)
        inside = (x >= self.support_lo) & (x < self.support_hi)
        out = np.where(inside, 1.0 / (self.support_hi - self.support_lo), 0.0)
        return float(out) if out.ndim == 0 else out

    def integral_cdf(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        lo, hi = self.support_lo, self.support_hi

        def antiderivative(x: float) -> float:
            if x <= lo:
                return 0.0
            if x >= hi:
                return 0.5 * (hi - lo) + (x - hi)
            return 0.5 * (x - lo) ** 2 / (hi - lo)

        return antiderivative(b) - antiderivative(a)

    def quantile(self, u):
        q = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        out = self.support_lo + q * (self.support_hi - self.support_lo)
        return float(out) if out.ndim == 0 else out

    def describe(self) -> Dict[str, Any]:
        return {"kind": "uniform", "lo": self.support_lo, "hi": self.support_hi}


class PiecewiseLinearReserve(ReserveDistribution):
    """
    Continuous reserve CDF interpolating (knots[i], values[i]).

    values start at 0, end at 1 and are nondecreasing; the density is piecewise constant.
    """

    def __init__(self, knots: Sequence[float], values: Sequence[float]):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.shape != values.shape or len(knots) < 2:
            raise DomainError("knots and values must have equal length >= 2")
        if np.any(np.diff(knots) <= 0) or knots[0] < 0 or knots[-1] > 1:
            raise DomainError("knots must be strictly increasing inside [0, 1]")
        if values[0] != 0.0 or values[-1] != 1.0 or np.any(np.diff(values) < 0):
            raise DomainError("values must rise from 0 to 1")
        self.knots = knots
        self.values = values
        self.slopes = np.diff(values) / np.diff(knots)
        self.support_lo = float(knots[0])
        self.support_hi = float(knots[-1])

    def cdf(self, v):
        x = np.asarray(v, dtype=float)
        out = np.interp(x, self.knots, self.values, left=0.0, right=1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, v):
        x = np.asarray(v, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.slopes) - 1)
        inside = (x >= self.support_lo) & (x < self.support_hi)
        out = np.where(inside, self.slopes[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def breakpoints(self) -> List[float]:
        return [float(k) for k in self.knots]

    def quantile(self, u):
        q = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        # flat stretches of the CDF map to their left end
        values, first = np.unique(self.values, return_index=True)
        out = np.interp(q, values, self.knots[first])
        return float(out) if out.ndim == 0 else out

    def describe(self) -> Dict[str, Any]:
        return {"kind": "piecewise_linear", "knots": self.knots.tolist(), "values": self.values.tolist()}


class DiscreteReserve(ReserveDistribution):
    """
    Reserve law with finitely many atoms.

    Built from explicit (location, mass) pairs, or from a fixed sample of draws with
    equal masses so that a randomized mechanism can be evaluated exactly against
    common random numbers.
    """

    is_continuous = False

    def __init__(self, locations: Sequence[float], masses: Sequence[float]):
        locations = np.asarray(locations, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if locations.shape != masses.shape or not len(locations):
            raise DomainError("locations and masses must be non-empty and of equal length")
        if np.any(masses <= 0) or abs(masses.sum() - 1.0) > 1e-9:
            raise DomainError("masses must be positive and sum to 1")
        if np.any((locations < 0) | (locations > 1)):
            raise DomainError("reserve atoms must lie in [0, 1]")
        order = np.argsort(locations, kind="stable")
        self.locations = locations[order]
        self.masses = masses[order]
        self.cum_mass = np.concatenate([[0.0], np.cumsum(self.masses)])
        self.cum_moment = np.concatenate([[0.0], np.cumsum(self.masses * self.locations)])
        self.support_lo = float(self.locations[0])
        self.support_hi = float(self.locations[-1])

    @classmethod
    def point_mass(cls, reserve: float) -> "DiscreteReserve":
        return cls([reserve], [1.0])

    @classmethod
    def empirical(cls, draws: np.ndarray) -> "DiscreteReserve":
        draws = np.asarray(draws, dtype=float)
        return cls(draws, np.full(len(draws), 1.0 / len(draws)))

    def cdf(self, v):
        x = np.asarray(v, dtype=float)
        out = np.minimum(self.cum_mass[np.searchsorted(self.locations, x, side="right")], 1.0)
        return float(out) if out.ndim == 0 else out

    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def breakpoints(self) -> List[float]:
        return sorted(set(self.locations.tolist()))

    def integral_cdf(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        # each atom at x contributes mass * length of [max(a, x), b]
        overlap = np.clip(b - np.maximum(a, self.locations), 0.0, None)
        return float(np.sum(self.masses * overlap))

    def first_moment(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        i = np.searchsorted(self.locations, a, side="right")
        j = np.searchsorted(self.locations, b, side="right")
        return float(self.cum_moment[j] - self.cum_moment[i])

    def first_moment_batch(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        i = np.searchsorted(self.locations, a, side="right")
        j = np.searchsorted(self.locations, b, side="right")
        return np.where(j > i, self.cum_moment[j] - self.cum_moment[i], 0.0)

    def quantile(self, u):
        q = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.cum_mass[1:], q, side="left"), 0, len(self.locations) - 1)
        out = self.locations[idx]
        return float(out) if out.ndim == 0 else out

    def describe(self) -> Dict[str, Any]:
        if len(self.locations) == 1:
            return {"kind": "point_mass", "reserve": self.support_lo}
        return {"kind": "discrete", "atoms": len(self.locations)}
