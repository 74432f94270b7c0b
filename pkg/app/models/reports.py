"""
Result models returned by the services.

These models carry computed values together with the information needed to audit
them: decomposition terms, error estimates, probe counts and the worst probes.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from .distribution import Marginal

RegretMethod = Literal["regret_bigF", "regret_F", "regret_phi", "fixed_reserve", "monte_carlo", "closed_form"]


class RegretReport(BaseModel):
    """
    Regret of a mechanism against a distribution.

    Attributes:
        value (float): Benchmark E[max v] minus expected revenue.
        method (RegretMethod): Representation used to compute the value.
        terms (Dict[str, float]): Named decomposition, e.g. benchmark and revenue.
        err_est (float): Absolute error estimate (standard error for Monte Carlo).
    """
    value: float
    method: RegretMethod
    terms: Dict[str, float] = Field(default_factory=dict)
    err_est: float = 0.0


class OptimalSolution(BaseModel):
    """
    The optimal reserve threshold and minimax regret for n buyers.

    Attributes:
        n (int): Number of buyers.
        r_star (float): Lower edge of the optimal reserve distribution.
        regret (float): Minimax regret value.
        residual (float): Reserve equation residual at r_star.
    """
    n: int = Field(ge=1)
    r_star: float = Field(gt=0.0, lt=1.0)
    regret: float = Field(ge=0.0)
    residual: float = 0.0


class AuctionOutcome(BaseModel):
    """
    Realized outcome of one auction.

    Attributes:
        winner (Optional[int]): Index of the winning buyer, None when unsold.
        payment (float): Payment of the winner.
        reserve_draw (Optional[float]): Reserve used in this auction.
    """
    winner: Optional[int] = None
    payment: float = Field(default=0.0, ge=0.0)
    reserve_draw: Optional[float] = None


class DSICViolation(BaseModel):
    """
    A profitable misreport found by the DSIC check.

    Attributes:
        buyer (int): Index of the deviating buyer.
        value (float): True value of the buyer.
        misreport (float): Profitable report.
        opponents (List[float]): Bids of the other buyers in index order.
        gain (float): Utility gained by misreporting.
    """
    buyer: int
    value: float
    misreport: float
    opponents: List[float]
    gain: float


class GridBestResponse(BaseModel):
    """
    Nature's best step-CDF response on a grid.

    Attributes:
        marginal (Marginal): The maximizing step CDF.
        value (float): Regret achieved by that CDF.
        edges (List[float]): Cell edges of the grid.
        levels (List[float]): CDF value on each cell.
        argmax_diameter (float): Widest set of near-optimal levels over cells.
    """
    marginal: Marginal
    value: float
    edges: List[float]
    levels: List[float]
    argmax_diameter: float = 0.0


class SaddleReport(BaseModel):
    """
    Outcome of the numerical saddle point verification.

    Attributes:
        n (int): Number of buyers.
        optimal_value (float): Minimax regret.
        nature_gap (float): Largest probed regret of the optimal mechanism minus optimal_value.
        seller_gap (float): Smallest probed regret against the worst case minus optimal_value.
        probes (Dict[str, int]): Number of probes per family.
        worst_nature_probe (Dict[str, Any]): The probe attaining nature_gap.
        worst_seller_probe (Dict[str, Any]): The probe attaining seller_gap.
        deterministic_reserve_margin (float): Regret of SPA(r*) against the worst case minus optimal_value.
        tolerance (float): Nature-side tolerance.
        seller_tolerance (float): Seller-side tolerance.
        passed (bool): Whether both gaps are within tolerance.
    """
    n: int
    optimal_value: float
    nature_gap: float
    seller_gap: float
    probes: Dict[str, int] = Field(default_factory=dict)
    worst_nature_probe: Dict[str, Any] = Field(default_factory=dict)
    worst_seller_probe: Dict[str, Any] = Field(default_factory=dict)
    deterministic_reserve_margin: float = 0.0
    tolerance: float
    seller_tolerance: float
    passed: bool = True
