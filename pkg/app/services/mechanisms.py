"""
Auction mechanisms and their evaluation.

A Mechanism maps bid profiles to expected allocations and payments and can also
realize outcomes with explicit randomness. The second-price auction takes either a
fixed reserve or a ReserveDistribution; the first-price auction exists as a
negative control for the DSIC check. Simulation splits the draws into fixed
chunks with independent seeded streams and merges their moments in chunk order,
so results do not depend on the number of workers.
"""

import itertools
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.config import get_settings
from ..core.errors import DomainError
from ..core.logging import logger
from ..models.reports import AuctionOutcome, DSICViolation
from ..models.reserve import DiscreteReserve, ReserveDistribution
from .distributions import Seed, as_generator, sample_joint

Reserve = Union[float, ReserveDistribution]


def _validate_bids(bids) -> np.ndarray:
    arr = np.asarray(bids, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] < 1:
        raise DomainError("bids must be a non-empty vector")
    if np.any((arr < 0.0) | (arr > 1.0)) or not np.all(np.isfinite(arr)):
        raise DomainError("bids must lie in [0, 1]")
    return arr


def order_statistics(bids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Winner index (lowest index among ties), highest and second-highest bid.

    The second-highest bid of a single buyer is 0.
    """
    winner = np.argmax(bids, axis=-1)
    top = np.take_along_axis(bids, winner[..., None], axis=-1)[..., 0]
    if bids.shape[-1] == 1:
        second = np.zeros_like(top)
    else:
        second = np.sort(bids, axis=-1)[..., -2]
    return winner, top, second


class Mechanism(ABC):
    """
    Single-item auction mechanism.

    allocate and pay return expected allocation probabilities and expected payments
    per buyer for bid profiles of shape (..., n); realize draws the mechanism's own
    randomness and returns revenue per profile.
    """

    @abstractmethod
    def allocate(self, bids) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def pay(self, bids) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def realize(self, bids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Revenue of each profile in a (count, n) batch under one draw of randomness each."""
        raise NotImplementedError()

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


def _one_hot(winner: np.ndarray, n: int, scale: np.ndarray) -> np.ndarray:
    out = np.zeros(winner.shape + (n,))
    np.put_along_axis(out, winner[..., None], scale[..., None], axis=-1)
    return out


class SecondPriceAuction(Mechanism):
    """
    Second-price auction with a fixed or random reserve.

    The highest bidder wins if the highest bid is at least the reserve and pays the
    larger of the second-highest bid and the reserve.

    Attributes:
        reserve (Reserve): Fixed reserve price or reserve distribution.
    """

    def __init__(self, reserve: Reserve = 0.0):
        if isinstance(reserve, ReserveDistribution):
            self.reserve = reserve
        else:
            reserve = float(reserve)
            if not 0.0 <= reserve <= 1.0:
                raise DomainError(f"reserve must lie in [0, 1], got {reserve}")
            self.reserve = reserve

    @property
    def randomized(self) -> bool:
        return isinstance(self.reserve, ReserveDistribution)

    def _sale_probability(self, top: np.ndarray) -> np.ndarray:
        if self.randomized:
            return np.asarray(self.reserve.cdf(top), dtype=float)
        return (top >= self.reserve).astype(float)

    def allocate(self, bids) -> np.ndarray:
        arr = _validate_bids(bids)
        winner, top, _ = order_statistics(arr)
        return _one_hot(winner, arr.shape[-1], self._sale_probability(top))

    def pay(self, bids) -> np.ndarray:
        arr = _validate_bids(bids)
        winner, top, second = order_statistics(arr)
        if not self.randomized:
            amount = np.where(top >= self.reserve, np.maximum(second, self.reserve), 0.0)
        elif isinstance(self.reserve, DiscreteReserve):
            phi = self.reserve
            amount = second * phi.cdf(second) + phi.first_moment_batch(second, top)
        else:
            pairs = np.stack([second.ravel(), top.ravel()], axis=1)
            unique, inverse = np.unique(pairs, axis=0, return_inverse=True)
            values = np.array([spa_random_expected_payment_from_stats(lo, hi, self.reserve)
                               for lo, hi in unique])
            amount = values[np.ravel(inverse)].reshape(top.shape)
        return _one_hot(winner, arr.shape[-1], np.asarray(amount, dtype=float))

    def realize(self, bids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        _, top, second = order_statistics(bids)
        if self.randomized:
            draws = self.reserve.sample(len(top), rng)
        else:
            draws = np.full(len(top), self.reserve)
        return np.where(top >= draws, np.maximum(second, draws), 0.0)

    def describe(self) -> dict:
        if self.randomized:
            return {"kind": "spa", "reserve": self.reserve.describe()}
        return {"kind": "spa", "reserve": self.reserve}


class FirstPriceAuction(Mechanism):
    """First-price auction: the highest bidder pays its own bid. Not truthful."""

    def __init__(self, reserve: float = 0.0):
        self.reserve = float(reserve)

    def allocate(self, bids) -> np.ndarray:
        arr = _validate_bids(bids)
        winner, top, _ = order_statistics(arr)
        return _one_hot(winner, arr.shape[-1], (top >= self.reserve).astype(float))

    def pay(self, bids) -> np.ndarray:
        arr = _validate_bids(bids)
        winner, top, _ = order_statistics(arr)
        return _one_hot(winner, arr.shape[-1], np.where(top >= self.reserve, top, 0.0))

    def realize(self, bids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        _, top, _ = order_statistics(bids)
        return np.where(top >= self.reserve, top, 0.0)


def spa_outcome(bids, reserve: float) -> AuctionOutcome:
    """
    Outcome of a second-price auction with a fixed reserve.

    Args:
        bids: Valuation vector in [0, 1]^n.
        reserve (float): Reserve price in [0, 1].

    Returns:
        AuctionOutcome: Lowest-index highest bidder wins at max(second bid, reserve) if the
        highest bid clears the reserve; otherwise no sale.
    """
    arr = _validate_bids(bids)
    if arr.ndim != 1:
        raise DomainError("spa_outcome takes a single bid vector")
    if not 0.0 <= reserve <= 1.0:
        raise DomainError(f"reserve must lie in [0, 1], got {reserve}")
    winner, top, second = order_statistics(arr)
    if top < reserve:
        return AuctionOutcome(winner=None, payment=0.0, reserve_draw=reserve)
    return AuctionOutcome(winner=int(winner), payment=float(max(second, reserve)), reserve_draw=reserve)


def spa_random_expected_payment_from_stats(second: float, top: float, phi: ReserveDistribution) -> float:
    """v2 Phi(v2) + integral of p dPhi(p) over (v2, v1]."""
    if top < phi.support_lo:
        return 0.0
    return float(second * phi.cdf(second) + phi.first_moment(second, top))


def spa_random_expected_payment(bids, phi: ReserveDistribution) -> float:
    """
    Expected payment of SPA(Phi) at a bid vector, averaging over the reserve draw.

    Args:
        bids: Valuation vector in [0, 1]^n.
        phi (ReserveDistribution): Reserve distribution.

    Returns:
        float: E_p[max(v2, p) 1(v1 >= p)].
    """
    arr = _validate_bids(bids)
    _, top, second = order_statistics(arr)
    return spa_random_expected_payment_from_stats(float(second), float(top), phi)


def pointwise_regret(phi: Reserve, bids) -> float:
    """
    Regret of SPA(Phi) at a fixed valuation vector.

    v1 - v1 Phi(v1) + integral_{v2}^{v1} Phi(p) dp, which equals v1 minus the expected payment.
    """
    arr = _validate_bids(bids)
    if not isinstance(phi, ReserveDistribution):
        phi = DiscreteReserve.point_mass(float(phi))
    _, top, second = order_statistics(arr)
    top, second = float(top), float(second)
    return top - top * float(phi.cdf(top)) + phi.integral_cdf(second, top)


def crn_mechanism(phi: ReserveDistribution, draws: Optional[int] = None, seed: Seed = None) -> SecondPriceAuction:
    """SPA against a fixed sample of reserve draws, so truth and misreport share randomness."""
    draws = get_settings().CRN_DRAWS if draws is None else draws
    sample = phi.sample(draws, as_generator(seed))
    return SecondPriceAuction(DiscreteReserve.empirical(sample))


def check_dsic(mech: Mechanism, n: int, grid: Sequence[float], tol: Optional[float] = None) -> List[DSICViolation]:
    """
    Exhaustive truthfulness check on a value grid.

    For every buyer, true value, misreport and opponent profile on the grid, the utility
    of reporting truthfully must be at least that of misreporting, up to tol.

    Args:
        mech (Mechanism): Mechanism with expected allocations and payments.
        n (int): Number of buyers.
        grid (Sequence[float]): Values and reports to test.
        tol (Optional[float]): Utility tolerance.

    Returns:
        List[DSICViolation]: Every profitable misreport found.
    """
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    tol = get_settings().DSIC_TOL if tol is None else tol
    values = np.asarray(sorted(set(float(g) for g in grid)))
    size = len(values)
    opponents = np.array(list(itertools.product(values, repeat=n - 1)), dtype=float).reshape(size ** (n - 1), n - 1)
    violations: List[DSICViolation] = []

    for buyer in range(n):
        # bids[b, o] puts report values[b] at position buyer among opponents[o]
        reports = np.repeat(values[:, None], len(opponents), axis=1)
        bids = np.empty((size, len(opponents), n))
        bids[..., buyer] = reports
        others = [j for j in range(n) if j != buyer]
        for column, j in enumerate(others):
            bids[..., j] = opponents[None, :, column]
        alloc = mech.allocate(bids)[..., buyer]
        payment = mech.pay(bids)[..., buyer]

        # utility[v, b, o] = alloc[b, o] * values[v] - payment[b, o]
        utility = alloc[None, :, :] * values[:, None, None] - payment[None, :, :]
        truthful = utility[np.arange(size), np.arange(size), :]
        gain = utility - truthful[:, None, :]
        for v, b, o in np.argwhere(gain > tol):
            violations.append(DSICViolation(
                buyer=buyer, value=float(values[v]), misreport=float(values[b]),
                opponents=[float(x) for x in opponents[o]], gain=float(gain[v, b, o]),
            ))

    logger.info(f"DSIC check of {mech.describe().get('kind')} with n={n}: {len(violations)} violations")
    return violations


def _merge_moments(parts: List[Tuple[int, float, float]]) -> Tuple[int, float, float]:
    count, mean, m2 = 0, 0.0, 0.0
    for k, mk, m2k in parts:
        if k == 0:
            continue
        total = count + k
        delta = mk - mean
        mean += delta * k / total
        m2 += m2k + delta * delta * count * k / total
        count = total
    return count, mean, m2


def _simulate(statistic: Callable[[np.ndarray, np.random.Generator], np.ndarray], joint, count: int,
              seed: Seed, workers: Optional[int]) -> Tuple[float, float]:
    settings = get_settings()
    workers = settings.MC_WORKERS if workers is None else workers
    chunk = settings.MC_CHUNK
    sizes = [min(chunk, count - start) for start in range(0, count, chunk)]
    master = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(
        settings.DEFAULT_SEED if seed is None else seed)
    streams = master.spawn(len(sizes))

    def run_chunk(index: int) -> Tuple[int, float, float]:
        rng = np.random.default_rng(streams[index])
        bids = sample_joint(joint, sizes[index], rng)
        values = statistic(bids, rng)
        mean = float(values.mean())
        return len(values), mean, float(np.sum((values - mean) ** 2))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(run_chunk, range(len(sizes))))
    total, mean, m2 = _merge_moments(parts)
    stderr = math.sqrt(m2 / (total - 1) / total) if total > 1 else float("nan")
    return mean, stderr


def simulate_revenue(mech: Mechanism, joint, count: int, seed: Seed = None,
                     workers: Optional[int] = None) -> Tuple[float, float]:
    """
    Monte Carlo revenue of a mechanism under a joint distribution.

    Args:
        mech (Mechanism): The mechanism.
        joint: Any JointSpec variant.
        count (int): Number of draws, at least 1000.
        seed (Seed): Master seed.
        workers (Optional[int]): Threads; the result does not depend on it.

    Returns:
        Tuple[float, float]: Mean revenue and its standard error.
    """
    if count < 1000:
        raise DomainError("simulation needs at least 1000 draws")
    try:
        return _simulate(lambda bids, rng: mech.realize(bids, rng), joint, count, seed, workers)
    except Exception as e:
        logger.error(f"Revenue simulation failed: {str(e)}")
        raise


def simulate_regret(mech: Mechanism, joint, count: int, seed: Seed = None,
                    workers: Optional[int] = None) -> Tuple[float, float]:
    """Monte Carlo regret, paired per draw as max(v) minus realized revenue."""
    if count < 1000:
        raise DomainError("simulation needs at least 1000 draws")
    try:
        return _simulate(lambda bids, rng: bids.max(axis=1) - mech.realize(bids, rng),
                         joint, count, seed, workers)
    except Exception as e:
        logger.error(f"Regret simulation failed: {str(e)}")
        raise
