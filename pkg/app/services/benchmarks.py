"""
Worst-case regret of the second-price auction with a deterministic reserve.
"""

import math
from typing import Optional, Tuple

from ..core.config import get_settings
from ..core.errors import CheckFailed, DomainError
from ..core.logging import logger
from ..models.distribution import IIDJoint, Marginal
from ..utils.numkit import golden_section_max


def spa_fixed_reserve_worstcase(n: int, r: float) -> float:
    """
    Worst-case regret of SPA(r) over iid value distributions.

    Args:
        n (int): Number of buyers.
        r (float): Reserve price in [0, 1].

    Returns:
        float: max(1 - r, r) for one buyer; for n >= 2,
        (1-r)^n (n-1)^(n-1) / ((1-r) n - r)^(n-1) when r <= 1/2 and r otherwise.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"reserve must lie in [0, 1], got {r}")
    if n == 1:
        return max(1.0 - r, r)
    if r > 0.5:
        return r
    return (1.0 - r) ** n * (n - 1) ** (n - 1) / ((1.0 - r) * n - r) ** (n - 1)


def optimal_deterministic_reserve(n: int) -> Tuple[float, float]:
    """
    Best deterministic reserve 1/(n+1) and its worst-case regret (n/(n+1))^n.

    The closed form is confirmed by a golden-section minimization of the worst case.

    Raises:
        CheckFailed: If the search lands more than 1e-6 away.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    r = 1.0 / (n + 1)
    value = (n / (n + 1.0)) ** n
    upper = 1.0 if n == 1 else 0.5
    found, best = golden_section_max(lambda x: -spa_fixed_reserve_worstcase(n, x), 0.0, upper, tol=1e-10)
    if abs(found - r) > 1e-6 or abs(-best - value) > 1e-6:
        logger.error(f"Deterministic reserve search disagrees for n={n}: {found} vs {r}")
        raise CheckFailed("grid minimization disagrees with 1/(n+1)",
                          detail={"n": n, "closed_form": r, "search": found, "search_value": -best})
    return r, value


def twopoint_constant(n: int, r: float) -> float:
    """Mass c* = (1-r)(n-1)/((1-r) n - r) placed just below the reserve."""
    return (1.0 - r) * (n - 1) / ((1.0 - r) * n - r)


def spa_worstcase_twopoint(n: int, r: float, epsilon: Optional[float] = None) -> IIDJoint:
    """
    Two-point iid family driving SPA(r) to its worst-case regret as epsilon shrinks.

    Mass c* sits at r - epsilon (clamped at 0) and 1 - c* at 1.

    Args:
        n (int): Number of buyers, at least 2.
        r (float): Reserve price in [0, 1/2].
        epsilon (Optional[float]): Offset below the reserve.

    Returns:
        IIDJoint: The two-point joint.

    Raises:
        DomainError: If n < 2 or r > 1/2.
    """
    epsilon = get_settings().EPSILON_TWO_POINT if epsilon is None else epsilon
    if n < 2:
        raise DomainError("the two-point family needs n >= 2")
    if not 0.0 <= r <= 0.5:
        raise DomainError(f"the two-point family needs r in [0, 1/2], got {r}")
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    c = twopoint_constant(n, r)
    low = max(r - epsilon, 0.0)
    return IIDJoint(n=n, marginal=Marginal.two_point(low, c, 1.0))


def twopoint_regret(n: int, r: float, epsilon: Optional[float] = None) -> float:
    """Closed-form regret of SPA(r) on the two-point family: (r-e) c^n + (1-r) n c^(n-1) (1-c)."""
    epsilon = get_settings().EPSILON_TWO_POINT if epsilon is None else epsilon
    c = twopoint_constant(n, r)
    low = max(r - epsilon, 0.0)
    return low * c ** n + (1.0 - r) * n * c ** (n - 1) * (1.0 - c)


def limit_benchmark() -> float:
    """Common limit 1/e of both deterministic-reserve columns as n grows."""
    return math.exp(-1.0)
