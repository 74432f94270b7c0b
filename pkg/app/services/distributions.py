"""
Joint valuation distribution services.

Order-statistic CDFs for every joint variant, the affiliation and
mixture-of-iid tests on finite exchangeable laws, seeded samplers and the random
probe generators used by the saddle verification.
"""

import itertools
import math
from fractions import Fraction
from functools import reduce
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..core.config import get_settings
from ..core.errors import DomainError, SamplingBudgetExhausted
from ..core.logging import logger
from ..models.distribution import (BinaryExchangeable, DensityPiece, DiscreteExchangeable,
                                   IIDJoint, Marginal, MixtureJoint, SpikeMixture)

Seed = Union[int, np.random.Generator, np.random.SeedSequence, None]
Witness = Tuple[Tuple[float, ...], Tuple[float, ...]]

AFFILIATION_REL_TOL = 1e-12
EXACT_LIMIT = 2 ** 31


def as_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _discrete_max_cdf(joint: DiscreteExchangeable, k: int, p: np.ndarray, left: bool) -> np.ndarray:
    tensor = joint.tensor
    if k < joint.n:
        tensor = tensor.sum(axis=tuple(range(k, joint.n)))
    cumulative = tensor
    for axis in range(k):
        cumulative = np.cumsum(cumulative, axis=axis)
    counts = np.searchsorted(joint.support, p, side="left" if left else "right")
    diagonal = cumulative[(np.maximum(counts - 1, 0),) * k]
    return np.where(counts > 0, diagonal, 0.0)


def first_order_stat_cdf(joint, k: int, p, left: bool = False):
    """
    CDF of the maximum of k fixed coordinates, P(max(v_1..v_k) <= p).

    Args:
        joint: Any JointSpec variant.
        k (int): Number of coordinates, 1 <= k <= n.
        p: Threshold, scalar or array.
        left (bool): Return the left limit P(max < p) instead.

    Returns:
        Same shape as p.

    Raises:
        DomainError: If k is out of range.
    """
    if not 1 <= k <= joint.n:
        raise DomainError(f"k={k} outside [1, {joint.n}]")
    x = np.asarray(p, dtype=float)

    if isinstance(joint, IIDJoint):
        base = joint.marginal.cdf_left(x) if left else joint.marginal.cdf(x)
        out = np.asarray(base) ** k
    elif isinstance(joint, MixtureJoint):
        out = np.zeros_like(x)
        for weight, component in zip(joint.weights, joint.components):
            base = component.cdf_left(x) if left else component.cdf(x)
            out = out + weight * np.asarray(base) ** k
    elif isinstance(joint, DiscreteExchangeable):
        out = _discrete_max_cdf(joint, k, np.atleast_1d(x), left).reshape(x.shape)
    elif isinstance(joint, SpikeMixture):
        n = joint.n
        if left:
            base = np.asarray(joint.marginal.cdf_left(x))
            out = np.where(x > 0.0, (n - k) / n + k / n * base, 0.0)
        else:
            base = np.asarray(joint.marginal.cdf(x))
            out = np.where(x >= 0.0, (n - k) / n + k / n * base, 0.0)
    else:
        raise DomainError(f"unsupported joint variant {type(joint).__name__}")
    return float(out) if np.ndim(out) == 0 else out


def second_order_stat_cdf(joint, p, left: bool = False):
    """
    CDF of the second-highest value via n F_{n-1}^(1) - (n-1) F_n^(1).

    Raises:
        DomainError: If n < 2.
    """
    n = joint.n
    if n < 2:
        raise DomainError("the second order statistic needs n >= 2")
    top_minus_one = np.asarray(first_order_stat_cdf(joint, n - 1, p, left))
    top = np.asarray(first_order_stat_cdf(joint, n, p, left))
    out = np.clip(n * top_minus_one - (n - 1) * top, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def order_stat_cdfs(joint, p, left: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """(F^(1), F^(2)) at p, with v^(2) = 0 for a single buyer."""
    x = np.asarray(p, dtype=float)
    first = np.asarray(first_order_stat_cdf(joint, joint.n, x, left), dtype=float)
    if joint.n == 1:
        second = (x > 0.0).astype(float) if left else (x >= 0.0).astype(float)
    else:
        second = np.asarray(second_order_stat_cdf(joint, x, left), dtype=float)
    return first, second


def _integer_pmf(joint: DiscreteExchangeable) -> Optional[np.ndarray]:
    common = reduce(math.lcm, (p.denominator for p in joint.pmf), 1)
    if common > EXACT_LIMIT:
        return None
    scaled = [p.numerator * (common // p.denominator) for p in joint.pmf]
    if max(scaled) > EXACT_LIMIT:
        return None
    return np.array(scaled, dtype=np.int64)


def check_affiliation(joint: DiscreteExchangeable) -> Tuple[bool, Optional[Witness]]:
    """
    Test f(a) f(b) <= f(a meet b) f(a join b) over all pairs of support points.

    Rational pmfs with a small common denominator are compared in exact integer
    arithmetic; otherwise a relative tolerance of 1e-12 is applied.

    Args:
        joint (DiscreteExchangeable): Finite exchangeable law.

    Returns:
        Tuple[bool, Optional[Witness]]: Whether the law is affiliated, and the first
        violating pair (a, b) in lexicographic order as value vectors.
    """
    m, n = len(joint.support), joint.n
    shape = (m,) * n
    cells = m ** n
    index = np.indices(shape).reshape(n, cells).T
    exact = _integer_pmf(joint)
    values = exact if exact is not None else joint.tensor.ravel()
    chunk = max(1, 2 ** 20 // (cells * n))

    for start in range(0, cells, chunk):
        rows = index[start:start + chunk]
        meet = np.minimum(rows[:, None, :], index[None, :, :])
        join = np.maximum(rows[:, None, :], index[None, :, :])
        meet_flat = np.ravel_multi_index(tuple(np.moveaxis(meet, -1, 0)), shape)
        join_flat = np.ravel_multi_index(tuple(np.moveaxis(join, -1, 0)), shape)
        lhs = values[start:start + chunk, None] * values[None, :]
        rhs = values[meet_flat] * values[join_flat]
        if exact is not None:
            violated = lhs > rhs
        else:
            violated = lhs > rhs * (1.0 + AFFILIATION_REL_TOL)
        if np.any(violated):
            a_local, b = np.argwhere(violated)[0]
            a = start + a_local
            witness = (tuple(float(joint.support[i]) for i in index[a]),
                       tuple(float(joint.support[i]) for i in index[b]))
            logger.debug(f"affiliation violated at {witness}")
            return False, witness
    return True, None


def check_mixture_necessary(joint: DiscreteExchangeable) -> bool:
    """
    Necessary condition for a two-buyer law to be a mixture of iid laws.

    A mixture has p_jj = E[G_j^2] >= (E[G_j])^2 = (sum_i p_ij)^2 for every value j.

    Raises:
        DomainError: If the law is not over two buyers.
    """
    if joint.n != 2:
        raise DomainError("the mixture test applies to two-buyer laws")
    matrix = joint.exact_tensor()
    for j in range(len(joint.support)):
        column = sum(matrix[:, j], Fraction(0))
        if matrix[j, j] < column * column:
            logger.debug(f"mixture condition fails at value {joint.support[j]}")
            return False
    return True


def sample_binary_exchangeable_affiliated(n: int, seed: Seed = None,
                                          budget: Optional[int] = None) -> BinaryExchangeable:
    """
    Random binary exchangeable law satisfying u_k u_1 <= u_{k+1} u_0.

    Candidates are log-normal vectors normalized so that sum_k C(n,k) u_k = 1;
    the first one meeting the chain is returned.

    Args:
        n (int): Number of buyers, at least 2.
        seed (Seed): Seed or generator.
        budget (Optional[int]): Maximum candidates drawn.

    Returns:
        BinaryExchangeable: The accepted law.

    Raises:
        SamplingBudgetExhausted: If no candidate is accepted within the budget.
    """
    if n < 2:
        raise DomainError("binary exchangeable sampling needs n >= 2")
    budget = get_settings().REJECTION_BUDGET if budget is None else budget
    rng = as_generator(seed)
    weights = np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)
    drawn = 0
    while drawn < budget:
        batch = min(1024, budget - drawn)
        u = np.exp(rng.normal(0.0, 1.5, size=(batch, n + 1)))
        u /= (u @ weights)[:, None]
        chain = np.all(u[:, :-1] * u[:, 1:2] <= u[:, 1:] * u[:, 0:1], axis=1)
        drawn += batch
        if np.any(chain):
            row = u[np.argmax(chain)]
            # renormalize in Python floats so the model's sum check sees exact pattern totals
            total = sum(math.comb(n, k) * float(x) for k, x in enumerate(row))
            return BinaryExchangeable(n=n, u=[float(x) / total for x in row])
    logger.error(f"No affiliated binary law accepted in {budget} draws for n={n}")
    raise SamplingBudgetExhausted(f"rejection sampling exhausted {budget} draws",
                                  detail={"n": n, "budget": budget})


def order_stat_root_gap(law: BinaryExchangeable) -> float:
    """F_n^(1)^(1/n) - F_{n-1}^(1)^(1/(n-1)); nonnegative for affiliated laws."""
    n = law.n
    return law.max_cdf(n) ** (1.0 / n) - law.max_cdf(n - 1) ** (1.0 / (n - 1))


def sample_joint(joint, count: int, seed: Seed = None) -> np.ndarray:
    """
    Draw valuation vectors from a joint distribution.

    Args:
        joint: Any JointSpec variant.
        count (int): Number of vectors.
        seed (Seed): Seed or generator.

    Returns:
        np.ndarray: Array of shape (count, n).
    """
    if count < 1:
        raise DomainError("count must be positive")
    rng = as_generator(seed)
    n = joint.n
    if isinstance(joint, IIDJoint):
        return np.asarray(joint.marginal.sample((count, n), rng), dtype=float)
    if isinstance(joint, MixtureJoint):
        which = rng.choice(len(joint.weights), size=count, p=np.asarray(joint.weights))
        out = np.empty((count, n))
        uniforms = rng.random((count, n))
        for j, component in enumerate(joint.components):
            rows = which == j
            if np.any(rows):
                out[rows] = component.quantile(uniforms[rows])
        return out
    if isinstance(joint, DiscreteExchangeable):
        probs = joint.tensor.ravel()
        cells = rng.choice(probs.size, size=count, p=probs / probs.sum())
        index = np.stack(np.unravel_index(cells, joint.tensor.shape), axis=1)
        return np.asarray(joint.support, dtype=float)[index]
    if isinstance(joint, SpikeMixture):
        buyer = rng.integers(n, size=count)
        value = np.asarray(joint.marginal.sample(count, rng), dtype=float)
        out = np.zeros((count, n))
        out[np.arange(count), buyer] = value
        return out
    raise DomainError(f"unsupported joint variant {type(joint).__name__}")


def random_marginal(rng: np.random.Generator, smooth: bool = False, floor: float = 0.0) -> Marginal:
    """
    Random probe marginal.

    The default mixes up to four constant-density pieces with up to three atoms anywhere
    in [0, 1]. The smooth variant has contiguous pieces covering [floor, 1), one atom at 1
    and possibly atoms below floor, which keeps F differentiable on (floor, 1).
    """
    if smooth:
        cuts = np.sort(rng.uniform(floor, 1.0, size=rng.integers(0, 4)))
        edges = np.unique(np.concatenate([[floor], cuts, [1.0]]))
        below = rng.uniform(0.0, floor, size=rng.integers(0, 3)) if floor > 0 else np.zeros(0)
        atom_locs = np.concatenate([np.unique(below), [1.0]])
    else:
        edges = np.unique(np.sort(rng.uniform(0.0, 1.0, size=rng.integers(2, 6))))
        atom_locs = np.unique(rng.uniform(0.0, 1.0, size=rng.integers(0, 4)))
        if rng.random() < 0.5:
            atom_locs = np.unique(np.concatenate([atom_locs, [1.0]]))
    spans = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b - a > 1e-9]
    mass = rng.dirichlet(np.ones(len(spans) + len(atom_locs)))
    pieces = [DensityPiece(lo=float(a), hi=float(b), weight=float(m) / (b - a))
              for (a, b), m in zip(spans, mass[:len(spans)])]
    atoms = [(float(loc), float(m)) for loc, m in zip(atom_locs, mass[len(spans):])]
    if not pieces and not atoms:
        return Marginal.point_mass(1.0)
    return Marginal(pieces=pieces, atoms=atoms)


def random_mixture(rng: np.random.Generator, n: int, components: Optional[int] = None) -> MixtureJoint:
    k = int(components or rng.integers(2, 4))
    weights = rng.dirichlet(np.ones(k))
    weights = [float(w) for w in weights[:-1]] + [1.0 - float(np.sum(weights[:-1]))]
    return MixtureJoint(n=n, weights=weights, components=[random_marginal(rng) for _ in range(k)])


def random_affiliated_discrete(rng: np.random.Generator, n: int,
                               support_size: Optional[int] = None) -> DiscreteExchangeable:
    """
    Random symmetric log-supermodular law on a random support in [0, 1].

    log f(x) = sum_i a(x_i) + beta sum_{i<j} x_i x_j + gamma min_i x_i with beta, gamma >= 0.
    The modular part is arbitrary; the two interaction terms are supermodular, so the law
    is affiliated. Cells are filled per sorted index so permuted cells are bit-identical.
    """
    limit = 2
    while (limit + 1) ** n <= 256 and limit < 8:
        limit += 1
    m = int(support_size or rng.integers(2, limit + 1))
    support = np.unique(np.round(rng.uniform(0.0, 1.0, size=m), 12))
    while len(support) < m:
        support = np.unique(np.concatenate([support, np.round(rng.uniform(0.0, 1.0, size=1), 12)]))
    a = rng.normal(0.0, 1.0, size=m)
    beta = float(rng.exponential(2.0))
    gamma = float(rng.exponential(2.0))

    cache: Dict[Tuple[int, ...], float] = {}
    for index in itertools.combinations_with_replacement(range(m), n):
        x = support[list(index)]
        pairwise = (x.sum() ** 2 - (x ** 2).sum()) / 2.0
        cache[index] = math.exp(float(a[list(index)].sum()) + beta * pairwise + gamma * float(x.min()))
    total = sum(math.factorial(n) / math.prod(math.factorial(index.count(i)) for i in set(index)) * value
                for index, value in cache.items())
    pmf = [cache[tuple(sorted(index))] / total for index in itertools.product(range(m), repeat=n)]
    return DiscreteExchangeable(n=n, support=[float(s) for s in support], pmf=pmf)
