from typing import get_args

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import DomainError
from app.models.distribution import IIDJoint, Marginal, SpikeMixture
from app.models.reports import RegretMethod, RegretReport
from app.models.reserve import DiscreteReserve, PiecewiseLinearReserve, UniformReserve
from app.services.benchmarks import spa_worstcase_twopoint, twopoint_regret
from app.services.distributions import check_affiliation, random_affiliated_discrete, random_marginal
from app.services.optmech import OptimalReserve, minimax_regret, solve_reserve, worst_case_marginal
from app.services.regret import (nature_grid_best_response, nature_pointwise_best_response, regret_bigF,
                                 regret_fixed_reserve, regret_iid, regret_linear_phi, regret_monte_carlo)
from tests.conftest import INV_E, TABLE1


def _random_smooth_reserve(rng) -> PiecewiseLinearReserve:
    lo = float(rng.uniform(0.05, 0.6))
    knots = np.unique(np.concatenate([[lo], rng.uniform(lo, 1.0, size=3), [1.0]]))
    values = np.concatenate([[0.0], np.cumsum(rng.dirichlet(np.ones(len(knots) - 1)))])
    values[-1] = 1.0
    return PiecewiseLinearReserve(knots, np.minimum(values, 1.0))


@pytest.mark.unit
class TestOptimalPair:
    def test_single_buyer(self):
        report = regret_bigF(OptimalReserve(1), IIDJoint(n=1, marginal=worst_case_marginal(1)))
        assert report.value == pytest.approx(INV_E, abs=1e-8)
        assert report.method == "regret_bigF"

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 10])
    def test_table_values(self, n):
        joint = IIDJoint(n=n, marginal=worst_case_marginal(n))
        value = regret_bigF(OptimalReserve(n), joint).value
        assert value == pytest.approx(TABLE1[n], abs=5e-5)
        assert value == pytest.approx(minimax_regret(n), abs=1e-8)

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_representations_agree_at_optimum(self, n):
        phi, marginal = OptimalReserve(n), worst_case_marginal(n)
        by_f = regret_iid(phi, marginal, n)
        by_phi = regret_linear_phi(phi, marginal, n)
        assert by_f.method == "regret_F" and by_phi.method == "regret_phi"
        assert by_f.value == pytest.approx(minimax_regret(n), abs=1e-8)
        assert by_phi.value == pytest.approx(minimax_regret(n), abs=1e-8)

    def test_report_terms(self):
        report = regret_iid(OptimalReserve(2), worst_case_marginal(2), 2)
        assert report.terms["benchmark"] - report.terms["revenue"] == pytest.approx(report.value, abs=1e-14)
        assert report.err_est <= 1e-9

    def test_isorevenue_makes_seller_indifferent(self):
        # against F*_n every reserve law supported above r*_n has the same regret
        n = 2
        phi = UniformReserve(0.5, 1.0)
        assert regret_linear_phi(phi, worst_case_marginal(n), n).value == pytest.approx(minimax_regret(n), abs=1e-8)
        assert regret_iid(phi, worst_case_marginal(n), n).value == pytest.approx(minimax_regret(n), abs=1e-8)


@pytest.mark.unit
class TestRepresentations:
    @pytest.mark.parametrize("pairs", [15, pytest.param(200, marks=pytest.mark.slow)])
    def test_three_forms_agree(self, rng, pairs):
        for _ in range(pairs):
            phi = _random_smooth_reserve(rng)
            n = int(rng.integers(1, 6))
            marginal = random_marginal(rng, smooth=True, floor=phi.support_lo)
            big = regret_bigF(phi, IIDJoint(n=n, marginal=marginal)).value
            iid = regret_iid(phi, marginal, n).value
            linear = regret_linear_phi(phi, marginal, n).value
            assert iid == pytest.approx(big, abs=1e-8)
            assert linear == pytest.approx(big, abs=1e-8)

    def test_point_mass_at_zero(self):
        assert regret_iid(OptimalReserve(3), Marginal.point_mass(0.0), 3).value == pytest.approx(0.0, abs=1e-10)

    def test_point_mass_at_one(self):
        assert regret_iid(OptimalReserve(1), Marginal.point_mass(1.0), 1).value == pytest.approx(INV_E, abs=1e-8)
        assert regret_iid(OptimalReserve(3), Marginal.point_mass(1.0), 3).value == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("x", [0.3, 0.5, 0.9])
    def test_point_mass_closed_form(self, n, x):
        for phi in (OptimalReserve(n), UniformReserve(0.2, 0.8)):
            exact = regret_iid(phi, Marginal.point_mass(x), n)
            assert exact.method == "closed_form"
            assert exact.err_est == 0.0
            quadrature = regret_bigF(phi, IIDJoint(n=n, marginal=Marginal.point_mass(x)))
            assert exact.value == pytest.approx(quadrature.value, abs=1e-8)

    def test_monte_carlo_report(self):
        joint = IIDJoint(n=2, marginal=worst_case_marginal(2))
        report = regret_monte_carlo(OptimalReserve(2), joint, 200_000, seed=3)
        assert report.method == "monte_carlo"
        assert report.terms["draws"] == 200_000
        assert abs(report.value - minimax_regret(2)) <= 4 * report.err_est
        analytic = regret_bigF(OptimalReserve(2), joint)
        assert report.terms["benchmark"] == pytest.approx(analytic.terms["benchmark"], abs=1e-8)

    def test_linear_form_rejects_interior_atoms(self):
        marginal = Marginal.two_point(0.7, 0.5)
        with pytest.raises(DomainError):
            regret_linear_phi(OptimalReserve(2), marginal, 2)

    def test_linear_form_rejects_atomic_reserve(self):
        with pytest.raises(DomainError):
            regret_linear_phi(DiscreteReserve.point_mass(0.3), worst_case_marginal(2), 2)

    def test_spike_is_no_worse(self):
        for n in (1, 2, 3, 5):
            value = regret_bigF(OptimalReserve(n), SpikeMixture(n=n, marginal=worst_case_marginal(n))).value
            assert value <= minimax_regret(n) + 1e-8

    def test_single_buyer_spike_is_iid(self):
        spike = regret_bigF(OptimalReserve(1), SpikeMixture(n=1, marginal=worst_case_marginal(1))).value
        assert spike == pytest.approx(INV_E, abs=1e-8)

    @pytest.mark.parametrize("joints", [20, pytest.param(200, marks=pytest.mark.slow)])
    def test_affiliated_joints_are_no_worse(self, rng, joints):
        for _ in range(joints):
            n = int(rng.integers(2, 5))
            joint = random_affiliated_discrete(rng, n)
            assert check_affiliation(joint)[0]
            value = regret_bigF(OptimalReserve(n), joint).value
            assert value <= minimax_regret(n) + 1e-6


@pytest.mark.unit
class TestFixedReserve:
    def test_zero_reserve_uniform(self):
        # E[max] - E[second] for two uniform buyers
        value = regret_fixed_reserve(0.0, IIDJoint(n=2, marginal=Marginal.uniform())).value
        assert value == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_method_tags(self):
        assert set(get_args(RegretMethod)) == {"regret_bigF", "regret_F", "regret_phi", "fixed_reserve",
                                               "monte_carlo", "closed_form"}
        with pytest.raises(ValidationError):
            RegretReport(value=0.1, method="simulation", terms={}, err_est=0.0)

    def test_point_mass_reserve_dispatch(self):
        joint = IIDJoint(n=3, marginal=Marginal.uniform(0.1, 0.9))
        direct = regret_fixed_reserve(0.4, joint)
        via_law = regret_bigF(DiscreteReserve.point_mass(0.4), joint)
        assert via_law.method == "fixed_reserve"
        assert via_law.value == pytest.approx(direct.value, abs=1e-12)

    def test_atomic_law_is_weighted(self):
        joint = IIDJoint(n=2, marginal=worst_case_marginal(2))
        law = DiscreteReserve([0.2, 0.5], [0.25, 0.75])
        expected = 0.25 * regret_fixed_reserve(0.2, joint).value + 0.75 * regret_fixed_reserve(0.5, joint).value
        assert regret_iid(law, worst_case_marginal(2), 2).value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_two_point_worst_case(self, n):
        r = 1.0 / (n + 1)
        joint = spa_worstcase_twopoint(n, r)
        value = regret_fixed_reserve(r, joint).value
        assert value == pytest.approx(twopoint_regret(n, r), abs=1e-9)
        assert value == pytest.approx((n / (n + 1)) ** n, abs=2e-3)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_two_point_zero_reserve(self, n):
        joint = spa_worstcase_twopoint(n, 0.0, epsilon=0.0)
        assert regret_fixed_reserve(0.0, joint).value == pytest.approx(((n - 1) / n) ** (n - 1), abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_deterministic_threshold_does_worse(self, n):
        joint = IIDJoint(n=n, marginal=worst_case_marginal(n))
        assert regret_fixed_reserve(solve_reserve(n), joint).value >= minimax_regret(n) - 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            regret_fixed_reserve(1.5, IIDJoint(n=2, marginal=Marginal.uniform()))


@pytest.mark.unit
class TestPointwiseBestResponse:
    @pytest.mark.parametrize("n", [1, 2, 3, 6])
    def test_worst_case_level(self, n):
        r = solve_reserve(n)
        for v in np.linspace(r + 0.05, 0.99, 15):
            assert nature_pointwise_best_response(n, float(v)) == pytest.approx(1.0 - r / v, abs=1e-12)

    def test_half_at_twice_threshold(self):
        assert nature_pointwise_best_response(2, 2 * solve_reserve(2)) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("v", [0.0, 1.0, 0.1])
    def test_domain(self, v):
        with pytest.raises(DomainError):
            nature_pointwise_best_response(2, v)


@pytest.mark.unit
class TestGridBestResponse:
    def test_recovers_worst_case(self):
        n = 2
        best = nature_grid_best_response(OptimalReserve(n), n, grid_size=256)
        assert best.value == pytest.approx(minimax_regret(n), abs=1e-3)
        assert best.value <= minimax_regret(n) + 1e-3
        edges = np.asarray(best.edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        levels = np.asarray(best.levels)
        np.testing.assert_allclose(levels, worst_case_marginal(n).cdf(mid), atol=5.0 / 256)

    def test_value_matches_regret_of_step_marginal(self):
        n = 3
        phi = OptimalReserve(n)
        best = nature_grid_best_response(phi, n, grid_size=128)
        assert regret_iid(phi, best.marginal, n).value == pytest.approx(best.value, abs=1e-8)

    def test_single_buyer(self):
        best = nature_grid_best_response(OptimalReserve(1), 1, grid_size=128)
        assert best.value == pytest.approx(INV_E, abs=1e-3)

    def test_levels_nondecreasing(self):
        best = nature_grid_best_response(UniformReserve(0.2, 1.0), 3, grid_size=128)
        levels = np.asarray(best.levels)
        assert np.all(np.diff(levels) >= 0.0)
        assert np.all(levels[np.asarray(best.edges[:-1]) < 0.2] == 0.0)
        assert best.marginal.cdf(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_beats_worst_case_against_suboptimal_reserve(self):
        phi = UniformReserve(0.2, 1.0)
        best = nature_grid_best_response(phi, 2, grid_size=256)
        assert best.value >= regret_iid(phi, worst_case_marginal(2), 2).value - 1e-3
        assert best.value > minimax_regret(2)

    def test_domain(self):
        with pytest.raises(DomainError):
            nature_grid_best_response(OptimalReserve(2), 2, grid_size=32)
        with pytest.raises(DomainError):
            nature_grid_best_response(DiscreteReserve.point_mass(0.3), 2, grid_size=128)
