"""
Valuation distribution models.

This module defines the one-dimensional Marginal used for every value
distribution, the joint distribution variants over n buyers, and the binary
exchangeable law used by the order-statistic root check. All models are immutable and
serialize to JSON; discrete pmfs keep exact rational entries.
"""

import itertools
import math
from fractions import Fraction
from typing import Annotated, Any, List, Literal, Tuple, Union

import numpy as np
from pydantic import (BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer,
                      PrivateAttr, WithJsonSchema, model_validator)

MASS_TOL = 1e-12
MAX_DISCRETE_CELLS = 4096


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("booleans are not probabilities")
    if isinstance(value, (int, float)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"cannot read {value!r} as a rational number")


ExactProb = Annotated[
    Fraction,
    BeforeValidator(_to_fraction),
    PlainSerializer(lambda f: f"{f.numerator}/{f.denominator}", return_type=str),
    WithJsonSchema({"type": "string", "pattern": r"^-?\d+(/\d+)?$"}),
]


class DensityPiece(BaseModel):
    """
    Absolutely continuous part of a Marginal on [lo, hi).

    Attributes:
        lo (float): Left end of the piece.
        hi (float): Right end of the piece.
        kind (str): "constant" for density weight, "inverse_square" for density weight/v^2.
        weight (float): Scale of the density.
    """
    model_config = ConfigDict(frozen=True)

    lo: float = Field(ge=0.0, le=1.0)
    hi: float = Field(ge=0.0, le=1.0)
    kind: Literal["constant", "inverse_square"] = "constant"
    weight: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _check(self) -> "DensityPiece":
        if self.hi <= self.lo:
            raise ValueError(f"piece [{self.lo}, {self.hi}) is empty")
        if self.kind == "inverse_square" and self.lo <= 0:
            raise ValueError("inverse_square pieces need lo > 0")
        return self

    @property
    def mass(self) -> float:
        if self.kind == "constant":
            return self.weight * (self.hi - self.lo)
        return self.weight * (1.0 / self.lo - 1.0 / self.hi)

    def mass_below(self, v: np.ndarray) -> np.ndarray:
        x = np.clip(v, self.lo, self.hi)
        if self.kind == "constant":
            return self.weight * (x - self.lo)
        return self.weight * (1.0 / self.lo - 1.0 / x)

    def density(self, v: np.ndarray) -> np.ndarray:
        inside = (v >= self.lo) & (v < self.hi)
        if self.kind == "constant":
            return np.where(inside, self.weight, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(inside, self.weight / np.where(inside, v, 1.0) ** 2, 0.0)

    def invert(self, t: np.ndarray) -> np.ndarray:
        """Point of the piece with mass_below equal to t."""
        if self.kind == "constant":
            return self.lo + t / self.weight if self.weight > 0 else np.full_like(t, self.lo)
        return 1.0 / (1.0 / self.lo - t / self.weight)


class Marginal(BaseModel):
    """
    One-dimensional value distribution on [0, 1].

    A Marginal is a sum of non-overlapping density pieces and explicit atoms.
    CDF evaluation is right-continuous; cdf_left gives F(v-).

    Attributes:
        pieces (List[DensityPiece]): Continuous part, sorted and non-overlapping.
        atoms (List[Tuple[float, float]]): (location, mass) pairs with positive mass.
    """
    model_config = ConfigDict(frozen=True)

    pieces: List[DensityPiece] = Field(default_factory=list)
    atoms: List[Tuple[float, float]] = Field(default_factory=list)

    _atom_locs: np.ndarray = PrivateAttr()
    _atom_cum: np.ndarray = PrivateAttr()
    _blocks: list = PrivateAttr()
    _block_ends: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check(self) -> "Marginal":
        previous_hi = -1.0
        for piece in sorted(self.pieces, key=lambda p: p.lo):
            if piece.lo < previous_hi - MASS_TOL:
                raise ValueError("density pieces overlap")
            previous_hi = piece.hi
        locations = [loc for loc, _ in self.atoms]
        if len(set(locations)) != len(locations):
            raise ValueError("atom locations must be distinct")
        for loc, mass in self.atoms:
            if not 0.0 <= loc <= 1.0:
                raise ValueError(f"atom at {loc} outside [0, 1]")
            if mass <= 0:
                raise ValueError(f"atom at {loc} has non-positive mass {mass}")
        total = sum(p.mass for p in self.pieces) + sum(m for _, m in self.atoms)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total} differs from 1")
        return self

    def model_post_init(self, __context: Any) -> None:
        atoms = sorted(self.atoms)
        self._atom_locs = np.array([loc for loc, _ in atoms], dtype=float)
        self._atom_cum = np.concatenate([[0.0], np.cumsum([m for _, m in atoms])])
        # quantile blocks ordered by location; an atom sorts before a piece starting at it
        blocks = [(loc, 0, ("atom", loc, mass)) for loc, mass in atoms]
        blocks += [(p.lo, 1, ("piece", p)) for p in self.pieces if p.mass > 0]
        blocks.sort(key=lambda item: (item[0], item[1]))
        self._blocks = [item[2] for item in blocks]
        masses = [b[2] if b[0] == "atom" else b[1].mass for b in self._blocks]
        self._block_ends = np.cumsum(masses) if masses else np.zeros(0)

    @classmethod
    def point_mass(cls, location: float) -> "Marginal":
        return cls(atoms=[(float(location), 1.0)])

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "Marginal":
        return cls(pieces=[DensityPiece(lo=lo, hi=hi, weight=1.0 / (hi - lo))])

    @classmethod
    def two_point(cls, low: float, low_mass: float, high: float = 1.0) -> "Marginal":
        if low_mass >= 1.0:
            return cls.point_mass(low)
        return cls(atoms=[(float(low), float(low_mass)), (float(high), 1.0 - float(low_mass))])

    def _continuous_below(self, v: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(v)
        for piece in self.pieces:
            acc = acc + piece.mass_below(v)
        return acc

    def cdf(self, v):
        """Right-continuous CDF F(v)."""
        x = np.asarray(v, dtype=float)
        idx = np.searchsorted(self._atom_locs, x, side="right")
        out = np.minimum(self._continuous_below(x) + self._atom_cum[idx], 1.0)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, v):
        """Left limit F(v-)."""
        x = np.asarray(v, dtype=float)
        idx = np.searchsorted(self._atom_locs, x, side="left")
        out = np.minimum(self._continuous_below(x) + self._atom_cum[idx], 1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, v):
        """Density of the continuous part; atoms excluded."""
        x = np.asarray(v, dtype=float)
        acc = np.zeros_like(x)
        for piece in self.pieces:
            acc = acc + piece.density(x)
        return float(acc) if acc.ndim == 0 else acc

    def quantile(self, u):
        """Generalized inverse inf{v : F(v) >= u}; atoms are returned exactly."""
        q = np.asarray(u, dtype=float)
        flat = np.clip(q.ravel(), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self._block_ends, flat, side="left"), 0, len(self._blocks) - 1)
        starts = np.concatenate([[0.0], self._block_ends[:-1]])
        out = np.empty_like(flat)
        for k, block in enumerate(self._blocks):
            hit = idx == k
            if not np.any(hit):
                continue
            if block[0] == "atom":
                out[hit] = block[1]
            else:
                piece = block[1]
                t = np.clip(flat[hit] - starts[k], 0.0, piece.mass)
                out[hit] = piece.invert(t)
        out = out.reshape(q.shape)
        return float(out) if out.ndim == 0 else out

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        return self.quantile(rng.random(shape))

    def breakpoints(self) -> List[float]:
        points = {loc for loc, _ in self.atoms}
        for piece in self.pieces:
            points.update((piece.lo, piece.hi))
        return sorted(points)

    @property
    def atom_at_one(self) -> float:
        return sum(m for loc, m in self.atoms if loc == 1.0)

    def mean(self) -> float:
        total = sum(loc * m for loc, m in self.atoms)
        for piece in self.pieces:
            if piece.kind == "constant":
                total += piece.weight * (piece.hi ** 2 - piece.lo ** 2) / 2.0
            else:
                total += piece.weight * math.log(piece.hi / piece.lo)
        return total


class _JointBase(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, description="Number of buyers")


class IIDJoint(_JointBase):
    """
    All buyers draw independently from one marginal.

    Attributes:
        marginal (Marginal): Common value distribution.
    """
    variant: Literal["iid"] = "iid"
    marginal: Marginal

    def breakpoints(self) -> List[float]:
        return self.marginal.breakpoints()


class MixtureJoint(_JointBase):
    """
    Mixture of iid laws: draw a component, then all buyers iid from it.

    Attributes:
        weights (List[float]): Component probabilities.
        components (List[Marginal]): Component marginals.
    """
    variant: Literal["mixture"] = "mixture"
    weights: List[float]
    components: List[Marginal]

    @model_validator(mode="after")
    def _check(self) -> "MixtureJoint":
        if len(self.weights) != len(self.components) or not self.weights:
            raise ValueError("weights and components must be non-empty and of equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("mixture weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > MASS_TOL:
            raise ValueError(f"mixture weights sum to {sum(self.weights)}")
        return self

    def breakpoints(self) -> List[float]:
        points = set()
        for component in self.components:
            points.update(component.breakpoints())
        return sorted(points)


class DiscreteExchangeable(_JointBase):
    """
    Finite exchangeable law on support^n with exact rational cell probabilities.

    Attributes:
        support (List[float]): Strictly increasing value grid.
        pmf (List[ExactProb]): Row-major cell probabilities, len(support)**n entries.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    variant: Literal["discrete"] = "discrete"
    support: List[float]
    pmf: List[ExactProb]

    _tensor: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check(self) -> "DiscreteExchangeable":
        m = len(self.support)
        if m < 1 or any(b <= a for a, b in zip(self.support[:-1], self.support[1:])):
            raise ValueError("support must be non-empty and strictly increasing")
        cells = m ** self.n
        if cells > MAX_DISCRETE_CELLS:
            raise ValueError(f"{cells} cells exceed the limit of {MAX_DISCRETE_CELLS}")
        if len(self.pmf) != cells:
            raise ValueError(f"pmf has {len(self.pmf)} entries, expected {cells}")
        if any(p < 0 for p in self.pmf):
            raise ValueError("pmf entries must be nonnegative")
        if abs(float(sum(self.pmf)) - 1.0) > MASS_TOL:
            raise ValueError(f"pmf sums to {float(sum(self.pmf))}")
        shape = (m,) * self.n
        for index in itertools.product(range(m), repeat=self.n):
            canonical = tuple(sorted(index))
            if self.pmf[np.ravel_multi_index(index, shape)] != self.pmf[np.ravel_multi_index(canonical, shape)]:
                raise ValueError(f"pmf is not symmetric at cell {index}")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._tensor = np.array([float(p) for p in self.pmf]).reshape((len(self.support),) * self.n)

    @classmethod
    def from_matrix(cls, support: List[float], matrix) -> "DiscreteExchangeable":
        """Two-buyer law from a square matrix of probabilities."""
        flat = [entry for row in matrix for entry in row]
        return cls(n=2, support=list(support), pmf=flat)

    @property
    def tensor(self) -> np.ndarray:
        return self._tensor

    def exact_tensor(self) -> np.ndarray:
        return np.array(self.pmf, dtype=object).reshape((len(self.support),) * self.n)

    def breakpoints(self) -> List[float]:
        return list(self.support)


class SpikeMixture(_JointBase):
    """
    A uniformly chosen buyer draws from the marginal; all others value zero.

    Attributes:
        marginal (Marginal): Value distribution of the chosen buyer.
    """
    variant: Literal["spike"] = "spike"
    marginal: Marginal

    def breakpoints(self) -> List[float]:
        return sorted(set(self.marginal.breakpoints()) | {0.0})


JointSpec = Annotated[
    Union[IIDJoint, MixtureJoint, DiscreteExchangeable, SpikeMixture],
    Field(discriminator="variant"),
]


class JointDocument(BaseModel):
    """
    Wrapper used to read or write a joint specification as a JSON document.

    Attributes:
        joint (JointSpec): The joint distribution.
    """
    joint: JointSpec


class BinaryExchangeable(BaseModel):
    """
    Exchangeable law of the indicators Y_i = 1(v_i > p) at one threshold p.

    Attributes:
        n (int): Number of buyers.
        u (List[float]): u[k] is the probability of any fixed pattern with k ones.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    u: List[float]

    @model_validator(mode="after")
    def _check(self) -> "BinaryExchangeable":
        if len(self.u) != self.n + 1:
            raise ValueError(f"u needs {self.n + 1} entries, got {len(self.u)}")
        if any(x < 0 for x in self.u):
            raise ValueError("u entries must be nonnegative")
        total = sum(math.comb(self.n, k) * x for k, x in enumerate(self.u))
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"pattern probabilities sum to {total}")
        return self

    def max_cdf(self, k: int) -> float:
        """P(max of k fixed coordinates <= p): all k indicators are zero."""
        if not 0 <= k <= self.n:
            raise ValueError(f"k={k} outside [0, {self.n}]")
        return sum(math.comb(self.n - k, j) * self.u[j] for j in range(self.n - k + 1))

    def satisfies_chain(self, rel_tol: float = 0.0) -> bool:
        """u_k u_1 <= u_{k+1} u_0 for 0 <= k <= n-1."""
        u = self.u
        return all(u[k] * u[1] <= u[k + 1] * u[0] * (1.0 + rel_tol) for k in range(self.n))
