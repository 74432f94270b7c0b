"""
Regret functionals and Nature's best responses.

Three analytic representations of the regret of SPA(Phi) are provided:

- regret_bigF works from the order-statistic CDFs of any exchangeable joint.
- regret_iid specializes it to n iid buyers with F1 = F^n and F2 - F1 = n F^(n-1) (1 - F).
- regret_linear_phi is linear in Phi and needs F absolutely continuous on [r, 1)
  with its only atom above r at 1.

Reserve laws without a density are purely atomic here; regret is linear in the
reserve law, so they are evaluated as mass-weighted sums of fixed-reserve regrets.
Point-mass marginals have an exact closed form, and regret_monte_carlo gives the
simulated counterpart used to cross-check the quadrature.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.isotonic import isotonic_regression

from ..core.config import get_settings
from ..core.errors import CheckFailed, DomainError
from ..core.logging import logger
from ..models.distribution import IIDJoint, Marginal
from ..models.reports import GridBestResponse, RegretReport
from ..models.reserve import ReserveDistribution
from ..utils.numkit import Interval, golden_section_max, integrate, panel_integrals
from .distributions import Seed, first_order_stat_cdf, order_stat_cdfs
from .mechanisms import SecondPriceAuction, simulate_regret
from .optmech import solve_reserve

ARGMAX_TIE = 1e-12


def _quad(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
          points: Sequence[float]) -> Tuple[float, float]:
    if hi <= lo:
        return 0.0, 0.0
    return integrate(f, Interval.spanning(lo, hi, points))


def _report(value: float, method: str, benchmark: float, err: float, **parts: float) -> RegretReport:
    terms = {"benchmark": benchmark, "revenue": benchmark - value}
    terms.update(parts)
    return RegretReport(value=value, method=method, terms=terms, err_est=err)


def _benchmark(first: Callable[[np.ndarray], np.ndarray], points: Sequence[float]) -> Tuple[float, float]:
    """E[max v] = integral over [0, 1] of 1 - F1."""
    return _quad(lambda v: 1.0 - first(v), 0.0, 1.0, points)


def _atomic_regret(phi: ReserveDistribution, joint) -> RegretReport:
    atoms = phi.atoms()
    if not atoms:
        raise DomainError(f"{type(phi).__name__} has neither a density nor atoms")
    value = err = benchmark = 0.0
    for location, mass in atoms:
        part = regret_fixed_reserve(location, joint)
        value += mass * part.value
        err += mass * part.err_est
        benchmark = part.terms["benchmark"]
    return _report(value, "fixed_reserve", benchmark, err, atoms=float(len(atoms)))


def regret_fixed_reserve(r: float, joint) -> RegretReport:
    """
    Regret of the second-price auction with deterministic reserve r.

    r F1(r-) - integral_0^r F1 + integral_r^1 (F2 - F1).

    Args:
        r (float): Reserve price in [0, 1].
        joint: Any JointSpec variant.

    Returns:
        RegretReport: Method "fixed_reserve".

    Raises:
        DomainError: If r is outside [0, 1].
    """
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"reserve must lie in [0, 1], got {r}")
    try:
        points = joint.breakpoints() + [r]

        def first(v: np.ndarray) -> np.ndarray:
            return np.asarray(first_order_stat_cdf(joint, joint.n, v), dtype=float)

        def spread(v: np.ndarray) -> np.ndarray:
            f1, f2 = order_stat_cdfs(joint, v)
            return f2 - f1

        unsold = r * float(first_order_stat_cdf(joint, joint.n, r, left=True))
        below, e1 = _quad(first, 0.0, r, points)
        above, e2 = _quad(spread, r, 1.0, points)
        benchmark, _ = _benchmark(first, points)
    except Exception as e:
        logger.error(f"Fixed-reserve regret failed at r={r}: {str(e)}")
        raise
    value = unsold - below + above
    return _report(value, "fixed_reserve", benchmark, e1 + e2, boundary=unsold - below, interior=above)


def regret_bigF(phi: ReserveDistribution, joint) -> RegretReport:
    """
    Regret of SPA(Phi) against an exchangeable joint from its order-statistic CDFs.

    r - integral_0^r F1 + integral_r^1 [(1 - v phi - Phi)(1 - F1) + Phi (F2 - F1)], with r the
    lower support edge of Phi.

    Args:
        phi (ReserveDistribution): Reserve law with a density, or a purely atomic one.
        joint: Any JointSpec variant.

    Returns:
        RegretReport: Method "regret_bigF", or "fixed_reserve" for atomic reserves.
    """
    if not phi.is_continuous:
        return _atomic_regret(phi, joint)
    try:
        r = phi.support_lo
        points = joint.breakpoints() + phi.breakpoints()

        def first(v: np.ndarray) -> np.ndarray:
            return np.asarray(first_order_stat_cdf(joint, joint.n, v), dtype=float)

        def interior(v: np.ndarray) -> np.ndarray:
            f1, f2 = order_stat_cdfs(joint, v)
            cdf = np.asarray(phi.cdf(v), dtype=float)
            dens = np.asarray(phi.density(v), dtype=float)
            return (1.0 - v * dens - cdf) * (1.0 - f1) + cdf * (f2 - f1)

        below, e1 = _quad(first, 0.0, r, points)
        inner, e2 = _quad(interior, r, 1.0, points)
        benchmark, _ = _benchmark(first, points)
    except Exception as e:
        logger.error(f"Regret evaluation failed for {phi.describe()}: {str(e)}")
        raise
    value = r - below + inner
    return _report(value, "regret_bigF", benchmark, e1 + e2, boundary=r - below, interior=inner)


def _point_mass_regret(phi: ReserveDistribution, x: float, n: int) -> RegretReport:
    """
    Exact regret when every buyer values x.

    The sale happens when the reserve is at most x. With one buyer the price is the
    reserve, otherwise it is x.
    """
    sold = float(phi.cdf(x))
    value = x * (1.0 - sold)
    if n == 1:
        value += phi.integral_cdf(0.0, x)
    return _report(value, "closed_form", x, 0.0, sale_probability=sold)


def regret_iid(phi: ReserveDistribution, marginal: Marginal, n: int) -> RegretReport:
    """
    Regret of SPA(Phi) against n iid buyers with marginal F.

    Args:
        phi (ReserveDistribution): Reserve law with a density, or a purely atomic one.
        marginal (Marginal): Common value distribution.
        n (int): Number of buyers.

    Returns:
        RegretReport: Method "regret_F", "fixed_reserve" for atomic reserves, or
        "closed_form" when F is a single point mass.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not phi.is_continuous:
        return _atomic_regret(phi, IIDJoint(n=n, marginal=marginal))
    if not marginal.pieces and len(marginal.atoms) == 1:
        return _point_mass_regret(phi, marginal.atoms[0][0], n)
    try:
        r = phi.support_lo
        points = marginal.breakpoints() + phi.breakpoints()

        def first(v: np.ndarray) -> np.ndarray:
            return np.asarray(marginal.cdf(v), dtype=float) ** n

        def interior(v: np.ndarray) -> np.ndarray:
            f = np.asarray(marginal.cdf(v), dtype=float)
            cdf = np.asarray(phi.cdf(v), dtype=float)
            dens = np.asarray(phi.density(v), dtype=float)
            return (1.0 - v * dens - cdf) * (1.0 - f ** n) + cdf * n * f ** (n - 1) * (1.0 - f)

        below, e1 = _quad(first, 0.0, r, points)
        inner, e2 = _quad(interior, r, 1.0, points)
        benchmark, _ = _benchmark(first, points)
    except Exception as e:
        logger.error(f"iid regret evaluation failed for {phi.describe()}: {str(e)}")
        raise
    value = r - below + inner
    return _report(value, "regret_F", benchmark, e1 + e2, boundary=r - below, interior=inner)


def regret_linear_phi(phi: ReserveDistribution, marginal: Marginal, n: int) -> RegretReport:
    """
    Regret of SPA(Phi) in the form that is linear in Phi.

    1 - (1 - (1 - f1)^n) Phi(1) - integral_0^r F^n
      + integral_r^1 [-F^n + n F^(n-1) (1 - F - v F') Phi]

    where f1 is the atom of F at 1. For the isorevenue marginal the coefficient of Phi
    vanishes identically.

    Args:
        phi (ReserveDistribution): Continuous reserve law with lower edge r.
        marginal (Marginal): F, absolutely continuous on [r, 1) except for an atom at 1.
        n (int): Number of buyers.

    Returns:
        RegretReport: Method "regret_phi".

    Raises:
        DomainError: If Phi has no density or F has an atom in [r, 1).
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not phi.is_continuous:
        raise DomainError("the linear representation needs a reserve law with a density")
    r = phi.support_lo
    inside = [loc for loc, _ in marginal.atoms if r <= loc < 1.0]
    if inside:
        raise DomainError(f"marginal has atoms at {inside} inside [{r}, 1)",
                          detail={"atoms": inside, "r": r})
    try:
        f1 = marginal.atom_at_one
        points = marginal.breakpoints() + phi.breakpoints()

        def first(v: np.ndarray) -> np.ndarray:
            return np.asarray(marginal.cdf(v), dtype=float) ** n

        def interior(v: np.ndarray) -> np.ndarray:
            f = np.asarray(marginal.cdf(v), dtype=float)
            slope = np.asarray(marginal.density(v), dtype=float)
            cdf = np.asarray(phi.cdf(v), dtype=float)
            return -f ** n + n * f ** (n - 1) * (1.0 - f - v * slope) * cdf

        head = 1.0 - (1.0 - (1.0 - f1) ** n) * float(phi.cdf(1.0))
        below, e1 = _quad(first, 0.0, r, points)
        inner, e2 = _quad(interior, r, 1.0, points)
        benchmark, _ = _benchmark(first, points)
    except Exception as e:
        logger.error(f"Linear regret evaluation failed for {phi.describe()}: {str(e)}")
        raise
    value = head - below + inner
    return _report(value, "regret_phi", benchmark, e1 + e2, boundary=head - below, interior=inner)


def regret_monte_carlo(phi: ReserveDistribution, joint, count: int, seed: Seed = None) -> RegretReport:
    """
    Simulated regret of SPA(Phi), with the standard error as err_est.

    The benchmark term is computed by quadrature so the revenue term stays comparable
    with the analytic reports.
    """
    mean, stderr = simulate_regret(SecondPriceAuction(phi), joint, count, seed=seed)
    points = joint.breakpoints()
    benchmark, _ = _benchmark(lambda v: np.asarray(first_order_stat_cdf(joint, joint.n, v), dtype=float), points)
    return _report(mean, "monte_carlo", benchmark, stderr, draws=float(count))


def _pointwise_objective(n: int, r: float, v: float) -> Callable[[float], float]:
    scale = (n - 1) * v / (v - r)
    offset = (n * r - v) / (v - r)
    return lambda z: offset + n * z ** (n - 1) - scale * z ** n


def nature_pointwise_best_response(n: int, v: float) -> float:
    """
    Nature's pointwise maximizer at value v against the optimal reserve.

    The objective (n r - v)/(v - r) + n z^(n-1) - ((n-1) v/(v - r)) z^n is maximized over
    z in [0, 1] at z = 1 - r/v, the worst-case CDF. A golden-section search confirms it
    for n >= 2; for one buyer the objective is flat and the same point is returned.

    Args:
        n (int): Number of buyers.
        v (float): Value strictly between r*_n and 1.

    Returns:
        float: The maximizing CDF level.

    Raises:
        DomainError: If v is not inside (r*_n, 1).
        CheckFailed: If the search finds a better or distant maximizer.
    """
    r = solve_reserve(n)
    if not r < v < 1.0:
        raise DomainError(f"v must lie in ({r}, 1), got {v}")
    z = 1.0 - r / v
    if n == 1:
        return z
    objective = _pointwise_objective(n, r, v)
    found, best = golden_section_max(objective, 0.0, 1.0)
    if best > objective(z) + 1e-12 or abs(found - z) > 1e-6:
        logger.error(f"Pointwise best response mismatch at n={n}, v={v}: {found} vs {z}")
        raise CheckFailed("golden-section search disagrees with the stationary point",
                          detail={"n": n, "v": v, "closed_form": z, "search": found})
    return z


def _cell_objective(a: np.ndarray, b: np.ndarray, z: np.ndarray, n: int) -> np.ndarray:
    return a * (1.0 - z ** n) + n * b * (z ** (n - 1) - z ** n)


def _cell_argmax(a: np.ndarray, b: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best level per cell among {0, 1, stationary point}; also the spread of near-ties."""
    denom = a + n * b
    with np.errstate(divide="ignore", invalid="ignore"):
        stationary = np.where(denom > 0, b * (n - 1) / denom, 0.0)
    candidates = np.stack([np.zeros_like(a), np.ones_like(a), np.clip(stationary, 0.0, 1.0)], axis=1)
    values = _cell_objective(a[:, None], b[:, None], candidates, n)
    best = np.argmax(values, axis=1)
    rows = np.arange(len(a))
    top = values[rows, best]
    ties = values >= top[:, None] - ARGMAX_TIE
    spread = np.where(ties, candidates, np.nan)
    diameter = np.nanmax(spread, axis=1) - np.nanmin(spread, axis=1)
    return candidates[rows, best], top, diameter


def _step_marginal(edges: np.ndarray, levels: np.ndarray) -> Marginal:
    increments = np.diff(np.concatenate([[0.0], levels]))
    atoms: List[Tuple[float, float]] = [(float(a), float(m)) for a, m in zip(edges[:-1], increments) if m > 0]
    top = 1.0 - float(np.sum([m for _, m in atoms]))
    if top > 0:
        atoms.append((1.0, top))
    elif atoms:
        # keep the total at exactly one when the last level reaches 1
        location, mass = atoms[-1]
        atoms[-1] = (location, mass + top)
    return Marginal(atoms=atoms)


def nature_grid_best_response(phi: ReserveDistribution, n: int, grid_size: Optional[int] = None) -> GridBestResponse:
    """
    Nature's best step-CDF response to SPA(Phi) among iid marginals.

    On each cell [a, b) of a grid over [r, 1] a constant level z contributes
    A (1 - z^n) + n B (z^(n-1) - z^n) with A = (b - a) - [v Phi] and B = integral of Phi.
    Each cell is maximized separately, then the levels are made nondecreasing by
    isotonic projection, re-optimizing pooled blocks with summed coefficients until
    the blocks are monotone. Cells below r take level 0.

    Args:
        phi (ReserveDistribution): Continuous reserve law.
        n (int): Number of buyers.
        grid_size (Optional[int]): Uniform cells on [0, 1]; support edges are added as knots.

    Returns:
        GridBestResponse: The step marginal, its regret and the per-cell levels.

    Raises:
        DomainError: If grid_size < 64 or Phi has no density.
    """
    grid_size = get_settings().GRID_SIZE if grid_size is None else grid_size
    if grid_size < 64:
        raise DomainError(f"grid_size must be at least 64, got {grid_size}")
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if not phi.is_continuous:
        raise DomainError("the grid best response needs a reserve law with a density")

    r = phi.support_lo
    knots = [p for p in phi.breakpoints() if 0.0 < p < 1.0]
    edges = np.unique(np.concatenate([np.linspace(0.0, 1.0, grid_size + 1), knots]))
    active = edges[:-1] >= r
    a_edges = edges[np.concatenate([active, [True]])]

    try:
        cdf_edges = np.asarray(phi.cdf(a_edges), dtype=float)
        moment = a_edges * cdf_edges
        coef_b = panel_integrals(lambda x: np.asarray(phi.cdf(x), dtype=float), a_edges)
    except Exception as e:
        logger.error(f"Grid coefficients failed for {phi.describe()}: {str(e)}")
        raise
    coef_a = np.diff(a_edges) - np.diff(moment)

    levels, _, diameter = _cell_argmax(coef_a, coef_b, n)
    width = np.diff(a_edges)
    blocks = [[j] for j in range(len(levels))]
    while True:
        values = np.array([levels[blk[0]] for blk in blocks])
        if np.all(np.diff(values) >= 0):
            break
        weights = np.array([width[blk].sum() for blk in blocks])
        pooled = isotonic_regression(values, sample_weight=weights, increasing=True)
        merged: List[List[int]] = [list(blocks[0])]
        for k in range(1, len(blocks)):
            if pooled[k] == pooled[k - 1]:
                merged[-1].extend(blocks[k])
            else:
                merged.append(list(blocks[k]))
        blocks = merged
        sums_a = np.array([coef_a[blk].sum() for blk in blocks])
        sums_b = np.array([coef_b[blk].sum() for blk in blocks])
        block_levels, _, block_diameter = _cell_argmax(sums_a, sums_b, n)
        for blk, level, spread in zip(blocks, block_levels, block_diameter):
            levels[blk] = level
            diameter[blk] = spread
        logger.debug(f"isotonic pass pooled the grid into {len(blocks)} blocks")

    value = r + float(np.sum(_cell_objective(coef_a, coef_b, levels, n)))
    all_levels = np.concatenate([np.zeros(int(np.sum(~active))), levels])
    marginal = _step_marginal(edges, all_levels)
    logger.info(f"Grid best response for n={n} on {len(edges) - 1} cells: regret {value:.10g}")
    return GridBestResponse(
        marginal=marginal,
        value=value,
        edges=edges.tolist(),
        levels=all_levels.tolist(),
        argmax_diameter=float(np.max(diameter)) if len(diameter) else 0.0,
    )
