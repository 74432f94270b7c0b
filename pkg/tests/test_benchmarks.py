import math

import pytest

from app.core.errors import DomainError
from app.services.benchmarks import (limit_benchmark, optimal_deterministic_reserve, spa_fixed_reserve_worstcase,
                                     spa_worstcase_twopoint, twopoint_constant, twopoint_regret)
from app.services.optmech import minimax_regret

# n: (opt, spa with zero reserve, spa with the best deterministic reserve)
TABLE2 = {
    1: (0.3679, 1.0, 0.5),
    2: (0.3238, 0.5, 0.4444),
    3: (0.3093, 0.4444, 0.4219),
    4: (0.3021, 0.4219, 0.4096),
    5: (0.2979, 0.4096, 0.4019),
    10: (0.2896, 0.3874, 0.3855),
    25: (0.2847, 0.3754, 0.3751),
}


@pytest.mark.unit
class TestDeterministicReserve:
    @pytest.mark.parametrize("n,row", sorted(TABLE2.items()))
    def test_table_values(self, n, row):
        opt, zero, best = row
        assert minimax_regret(n) == pytest.approx(opt, abs=5e-5)
        assert spa_fixed_reserve_worstcase(n, 0.0) == pytest.approx(zero, abs=5e-5)
        assert optimal_deterministic_reserve(n)[1] == pytest.approx(best, abs=5e-5)

    def test_examples(self):
        assert spa_fixed_reserve_worstcase(2, 0.0) == pytest.approx(0.5)
        assert spa_fixed_reserve_worstcase(1, 0.3) == pytest.approx(0.7)
        assert spa_fixed_reserve_worstcase(3, 0.8) == pytest.approx(0.8)

    @pytest.mark.parametrize("n", [1, 2, 10])
    def test_best_reserve(self, n):
        r, value = optimal_deterministic_reserve(n)
        assert r == pytest.approx(1.0 / (n + 1))
        assert value == pytest.approx((n / (n + 1)) ** n)

    @pytest.mark.parametrize("n", range(1, 26))
    def test_extra_buyer_replaces_best_reserve(self, n):
        assert spa_fixed_reserve_worstcase(n, 1.0 / (n + 1)) == pytest.approx(
            spa_fixed_reserve_worstcase(n + 1, 0.0), abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 25])
    def test_random_reserve_beats_deterministic(self, n):
        assert minimax_regret(n) < optimal_deterministic_reserve(n)[1]

    def test_limit(self):
        assert limit_benchmark() == pytest.approx(math.exp(-1.0))
        assert spa_fixed_reserve_worstcase(2000, 0.0) == pytest.approx(limit_benchmark(), abs=1e-3)

    @pytest.mark.parametrize("args", [(0, 0.1), (2, -0.1), (2, 1.5)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            spa_fixed_reserve_worstcase(*args)


@pytest.mark.unit
class TestTwoPoint:
    def test_constant(self):
        assert twopoint_constant(2, 1.0 / 3.0) == pytest.approx(2.0 / 3.0)

    def test_family(self):
        joint = spa_worstcase_twopoint(2, 1.0 / 3.0, epsilon=0.01)
        atoms = dict(joint.marginal.atoms)
        assert atoms[1.0 / 3.0 - 0.01] == pytest.approx(2.0 / 3.0)
        assert atoms[1.0] == pytest.approx(1.0 / 3.0)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_approaches_worst_case(self, n):
        for r in (0.0, 0.1, 0.25, 0.5):
            assert twopoint_regret(n, r, epsilon=0.0) == pytest.approx(spa_fixed_reserve_worstcase(n, r), abs=1e-12)
            assert twopoint_regret(n, r) == pytest.approx(spa_fixed_reserve_worstcase(n, r), abs=2e-3)

    def test_low_atom_clamped(self):
        joint = spa_worstcase_twopoint(3, 0.0)
        assert min(loc for loc, _ in joint.marginal.atoms) == 0.0

    @pytest.mark.parametrize("args", [(1, 0.2, 0.0), (2, 0.6, 0.0), (2, 0.2, -1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            spa_worstcase_twopoint(*args)
