"""
Command runner shared by the command line and the HTTP API.

Each command builds a list of flat result rows from the services. run() validates
nothing beyond CommandConfig itself; checks that fail raise a RegretLensError which
the callers turn into an error record.
"""

import math
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.config import get_settings
from ..core.errors import CheckFailed
from ..core.logging import logger
from ..models.command import CommandConfig, CommandDocument
from ..models.distribution import DiscreteExchangeable, IIDJoint, SpikeMixture
from .benchmarks import limit_benchmark, optimal_deterministic_reserve, spa_fixed_reserve_worstcase
from .distributions import (check_affiliation, check_mixture_necessary, order_stat_root_gap,
                            sample_binary_exchangeable_affiliated)
from .optmech import (OptimalReserve, asymptotic_constants, competition_gains, minimax_regret,
                      reserve_equation_residual, solve_reserve, worst_case_marginal)
from .regret import regret_bigF, regret_monte_carlo
from .saddle import general_class_check, verify_saddle

Row = Dict[str, Any]
INFINITY = "inf"

DEFAULT_N: Dict[str, List[int]] = {
    "reserve": [1, 2, 3, 4, 5, 10],
    "phi": [1, 2, 5],
    "table1": [1, 2, 3, 4, 5, 10],
    "table2": [1, 2, 3, 4, 5, 10, 25],
    "figure2": [1, 2, 5, 10],
    "verify-saddle": [1, 2, 3, 5],
    "simulate": [1, 2, 5],
    "asymptotics": [1000],
    "affiliation": [2, 3, 4, 5, 6],
    "general-class": [2, 3, 5],
    "competition": list(range(1, 11)),
}

MIXTURE_EXAMPLE = [["5/16", "7/64", "5/64"], ["7/64", "17/128", "9/128"], ["5/64", "9/128", "5/128"]]
AFFILIATED_EXAMPLE = [["112/503", "64/503", "32/503"], ["64/503", "38/503", "64/503"], ["32/503", "64/503", "33/503"]]


def four_digits(value: float) -> str:
    """Value rounded to the four decimals tables are quoted in."""
    return f"{value:.4f}"


def _table1(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    rows = []
    for n in ns:
        r = solve_reserve(n)
        value = minimax_regret(n)
        rows.append({"n": n, "r_star": r, "n_r_star": n * r, "regret": value, "regret_4dp": four_digits(value)})
    if config.n is None:
        c, limit = asymptotic_constants()
        rows.append({"n": INFINITY, "r_star": 0.0, "n_r_star": c, "regret": limit, "regret_4dp": four_digits(limit)})
    return rows


def _table2(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    rows = []
    for n in ns:
        opt = minimax_regret(n)
        zero = spa_fixed_reserve_worstcase(n, 0.0)
        _, best = optimal_deterministic_reserve(n)
        rows.append({"n": n, "opt": opt, "spa0": zero, "spa_rstar": best,
                     "opt_4dp": four_digits(opt), "spa0_4dp": four_digits(zero), "spa_rstar_4dp": four_digits(best)})
    if config.n is None:
        _, limit = asymptotic_constants()
        tail = limit_benchmark()
        rows.append({"n": INFINITY, "opt": limit, "spa0": tail, "spa_rstar": tail,
                     "opt_4dp": four_digits(limit), "spa0_4dp": four_digits(tail), "spa_rstar_4dp": four_digits(tail)})
    return rows


def _reserve(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    rows = []
    for n in ns:
        r = solve_reserve(n)
        rows.append({"n": n, "r_star": r, "residual": reserve_equation_residual(n, r), "n_r_star": n * r})
    return rows


def _phi(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    points = config.grid or get_settings().FIGURE_POINTS
    rows = []
    for n in ns:
        reserve = OptimalReserve(n)
        v = np.linspace(reserve.r, 1.0, points)
        cdf = np.asarray(reserve.cdf(v), dtype=float)
        density = np.asarray(reserve.density(v), dtype=float)
        rows.extend({"n": n, "v": float(x), "phi": float(p), "density": float(d)} for x, p, d in zip(v, cdf, density))
    return rows


def _figure2(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    points = config.grid or get_settings().FIGURE_POINTS
    v = np.linspace(0.0, 1.0, points)
    rows = []
    for n in ns:
        cdf = np.asarray(OptimalReserve(n).cdf(v), dtype=float)
        worst = np.asarray(worst_case_marginal(n).cdf(v), dtype=float)
        rows.extend({"n": n, "v": float(x), "phi": float(p), "worst_case_cdf": float(f)}
                    for x, p, f in zip(v, cdf, worst))
    return rows


def _verify_saddle(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    rows = []
    for n in ns:
        report = verify_saddle(n, seed=np.random.SeedSequence([config.seed, n]), grid_size=config.grid)
        row = report.model_dump(mode="json")
        if config.out_format == "csv":
            row = {key: row[key] for key in ("n", "optimal_value", "nature_gap", "seller_gap",
                                             "deterministic_reserve_margin", "passed")}
            row["probes"] = sum(report.probes.values())
        rows.append(row)
    return rows


def _simulate(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    count = config.samples or get_settings().MC_DRAWS
    rows = []
    for n in ns:
        joint = IIDJoint(n=n, marginal=worst_case_marginal(n))
        report = regret_monte_carlo(OptimalReserve(n), joint, count, seed=np.random.SeedSequence([config.seed, n]))
        mean, stderr = report.value, report.err_est
        analytic = minimax_regret(n)
        z = (mean - analytic) / stderr if stderr > 0 else 0.0
        rows.append({"n": n, "draws": count, "analytic": analytic, "simulated": mean, "stderr": stderr, "z_score": z})
        if abs(z) > 4.0:
            raise CheckFailed(f"simulated regret is {z:.2f} standard errors from the analytic value",
                              detail=rows[-1])
    return rows


def _asymptotics(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    c, limit = asymptotic_constants()
    rows = [{"quantity": "c", "n": INFINITY, "value": c},
            {"quantity": "limit_regret", "n": INFINITY, "value": limit}]
    for n in ns:
        rows.append({"quantity": "n_r_star", "n": n, "value": n * solve_reserve(n)})
        rows.append({"quantity": "regret", "n": n, "value": minimax_regret(n)})
    return rows


def _witness_text(witness) -> Optional[str]:
    if witness is None:
        return None
    a, b = witness
    return f"{list(a)} vs {list(b)}"


def _affiliation(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    rows = []
    for name, matrix in (("mixture_example", MIXTURE_EXAMPLE), ("affiliated_example", AFFILIATED_EXAMPLE)):
        joint = DiscreteExchangeable.from_matrix([1.0, 2.0, 3.0], matrix)
        ok, witness = check_affiliation(joint)
        rows.append({"example": name, "affiliated": ok, "mixture_necessary": check_mixture_necessary(joint),
                     "witness": _witness_text(witness), "draws": None, "min_root_gap": None})

    draws = config.samples or 1000
    seeds = np.random.SeedSequence(config.seed).spawn(len(ns))
    for n, stream in zip(ns, seeds):
        if n < 2:
            continue
        rng = np.random.default_rng(stream)
        gaps = [order_stat_root_gap(sample_binary_exchangeable_affiliated(n, rng)) for _ in range(draws)]
        smallest = min(gaps)
        rows.append({"example": f"binary_affiliated_n{n}", "affiliated": True, "mixture_necessary": None,
                     "witness": None, "draws": draws, "min_root_gap": smallest})
        if smallest < -1e-12:
            raise CheckFailed(f"order-statistic root inequality fails for n={n}", detail=rows[-1])
    return rows


def _general_class(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    count = config.samples or 10_000
    bound = math.exp(-1.0)
    phi = OptimalReserve(1)
    seeds = np.random.SeedSequence(config.seed).spawn(len(ns))
    rows = []
    for n, stream in zip(ns, seeds):
        rng = np.random.default_rng(stream)
        vectors = rng.random((count, n))
        values = np.array([general_class_check(v) for v in vectors])
        top = np.sort(vectors, axis=1)[:, ::-1]
        second = top[:, 1] if n > 1 else np.zeros(count)
        boundary = (top[:, 0] >= bound) & (second <= bound)
        spike = regret_bigF(phi, SpikeMixture(n=n, marginal=worst_case_marginal(1))).value
        rows.append({"n": n, "vectors": count, "max_regret": float(values.max()),
                     "boundary_vectors": int(boundary.sum()), "spike_regret": spike})
        if abs(spike - bound) > 1e-8:
            raise CheckFailed(f"spike regret {spike} differs from 1/e for n={n}", detail=rows[-1])
    return rows


def _competition(config: CommandConfig, ns: Sequence[int]) -> List[Row]:
    return competition_gains(ns)


COMMANDS: Dict[str, Callable[[CommandConfig, Sequence[int]], List[Row]]] = {
    "reserve": _reserve,
    "phi": _phi,
    "table1": _table1,
    "table2": _table2,
    "figure2": _figure2,
    "verify-saddle": _verify_saddle,
    "simulate": _simulate,
    "asymptotics": _asymptotics,
    "affiliation": _affiliation,
    "general-class": _general_class,
    "competition": _competition,
}


def run(config: CommandConfig) -> CommandDocument:
    """
    Run one command.

    Args:
        config (CommandConfig): The command and its parameters.

    Returns:
        CommandDocument: The effective configuration and the result rows.

    Raises:
        RegretLensError: When a computation or an asserted check fails.
    """
    ns = config.n or DEFAULT_N[config.command]
    logger.info(f"Running {config.command} for n={ns}")
    try:
        rows = COMMANDS[config.command](config, ns)
    except Exception as e:
        logger.error(f"Command {config.command} failed: {str(e)}")
        raise
    effective = config.model_dump(mode="json", exclude={"out_path", "out_format"})
    effective["n"] = list(ns)
    return CommandDocument(command=config.command, config=effective, results=rows)
