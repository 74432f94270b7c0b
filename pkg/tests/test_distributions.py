import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from app.core.errors import DomainError, SamplingBudgetExhausted
from app.models.distribution import (BinaryExchangeable, DiscreteExchangeable, IIDJoint, JointDocument,
                                     Marginal, MixtureJoint, SpikeMixture)
from app.services.distributions import (check_affiliation, check_mixture_necessary, first_order_stat_cdf,
                                        order_stat_cdfs, order_stat_root_gap, random_affiliated_discrete,
                                        random_marginal, random_mixture, sample_binary_exchangeable_affiliated,
                                        sample_joint, second_order_stat_cdf)
from app.services.optmech import isorevenue_marginal, worst_case_marginal


def _brute_force_second(joint: DiscreteExchangeable, p: float) -> float:
    m = len(joint.support)
    total = 0.0
    for index in itertools.product(range(m), repeat=joint.n):
        values = sorted((joint.support[i] for i in index), reverse=True)
        if values[1] <= p:
            total += joint.tensor[index]
    return total


def _product_law(weights) -> DiscreteExchangeable:
    probs = [Fraction(w) for w in weights]
    matrix = [[a * b for b in probs] for a in probs]
    return DiscreteExchangeable.from_matrix([1.0, 2.0, 3.0], matrix)


@pytest.mark.unit
class TestOrderStatistics:
    def test_uniform_first(self):
        joint = IIDJoint(n=2, marginal=Marginal.uniform())
        assert first_order_stat_cdf(joint, 2, 0.5) == pytest.approx(0.25)

    def test_isorevenue_first(self):
        joint = IIDJoint(n=1, marginal=isorevenue_marginal(0.5))
        assert first_order_stat_cdf(joint, 1, 0.75) == pytest.approx(1.0 / 3.0)

    def test_discrete_first(self, mixture_example):
        assert first_order_stat_cdf(mixture_example, 2, 1.0) == pytest.approx(5.0 / 16.0, abs=1e-15)
        assert first_order_stat_cdf(mixture_example, 2, 3.0) == pytest.approx(1.0, abs=1e-15)
        assert first_order_stat_cdf(mixture_example, 2, 1.0, left=True) == 0.0

    def test_uniform_second(self):
        joint = IIDJoint(n=2, marginal=Marginal.uniform())
        assert second_order_stat_cdf(joint, 0.5) == pytest.approx(0.75)

    def test_second_against_brute_force(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 4))
            joint = random_affiliated_discrete(rng, n, support_size=int(rng.integers(2, 5)))
            for p in list(joint.support) + [0.0, 0.5, 1.0]:
                assert second_order_stat_cdf(joint, p) == pytest.approx(_brute_force_second(joint, p), abs=1e-12)

    def test_mixture_is_weighted(self, rng):
        joint = random_mixture(rng, 3)
        p = np.linspace(0.0, 1.0, 17)
        expected = sum(w * np.asarray(g.cdf(p)) ** 3 for w, g in zip(joint.weights, joint.components))
        np.testing.assert_allclose(first_order_stat_cdf(joint, 3, p), expected, atol=1e-14)

    def test_spike(self):
        joint = SpikeMixture(n=3, marginal=Marginal.uniform())
        first, second = order_stat_cdfs(joint, np.array([0.0, 0.5]))
        np.testing.assert_allclose(first, [0.0, 0.5], atol=1e-14)
        np.testing.assert_allclose(second, [1.0, 1.0], atol=1e-14)

    def test_single_buyer_second_is_zero(self):
        joint = IIDJoint(n=1, marginal=Marginal.uniform())
        _, second = order_stat_cdfs(joint, np.array([0.0, 0.3]))
        np.testing.assert_allclose(second, [1.0, 1.0])

    def test_domain(self):
        joint = IIDJoint(n=1, marginal=Marginal.uniform())
        with pytest.raises(DomainError):
            second_order_stat_cdf(joint, 0.5)
        with pytest.raises(DomainError):
            first_order_stat_cdf(joint, 2, 0.5)


@pytest.mark.unit
class TestAffiliation:
    def test_mixture_example(self, mixture_example):
        ok, witness = check_affiliation(mixture_example)
        assert not ok
        assert witness == ((1.0, 3.0), (2.0, 2.0))
        assert check_mixture_necessary(mixture_example)

    def test_affiliated_example(self, affiliated_example):
        ok, witness = check_affiliation(affiliated_example)
        assert ok and witness is None
        assert not check_mixture_necessary(affiliated_example)

    @given(st.lists(st.integers(min_value=1, max_value=40), min_size=3, max_size=3))
    @settings(max_examples=50, deadline=None)
    def test_product_laws(self, counts):
        total = sum(counts)
        joint = _product_law([Fraction(c, total) for c in counts])
        assert check_affiliation(joint) == (True, None)
        assert check_mixture_necessary(joint)

    def test_random_affiliated_laws(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 5))
            joint = random_affiliated_discrete(rng, n)
            assert len(joint.support) ** n <= 256
            assert check_affiliation(joint)[0]

    def test_mixture_check_needs_two_buyers(self, rng):
        with pytest.raises(DomainError):
            check_mixture_necessary(random_affiliated_discrete(rng, 3, support_size=2))


@pytest.mark.unit
class TestBinaryAffiliated:
    def test_iid_equality(self):
        q, n = 0.3, 4
        law = BinaryExchangeable(n=n, u=[q ** k * (1 - q) ** (n - k) for k in range(n + 1)])
        assert law.satisfies_chain(rel_tol=1e-12)
        assert law.max_cdf(n) == pytest.approx((1 - q) ** n)
        assert order_stat_root_gap(law) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_root_inequality(self, rng, n):
        for _ in range(200):
            law = sample_binary_exchangeable_affiliated(n, rng)
            total = sum(math.comb(n, k) * x for k, x in enumerate(law.u))
            assert total == pytest.approx(1.0, abs=1e-12)
            assert law.satisfies_chain(rel_tol=1e-9)
            assert order_stat_root_gap(law) >= -1e-12

    def test_budget(self):
        with pytest.raises(SamplingBudgetExhausted):
            sample_binary_exchangeable_affiliated(3, seed=1, budget=0)

    def test_domain(self):
        with pytest.raises(DomainError):
            sample_binary_exchangeable_affiliated(1, seed=1)


@pytest.mark.unit
class TestSampling:
    def test_isorevenue_atom_frequency(self):
        joint = IIDJoint(n=1, marginal=worst_case_marginal(1))
        draws = sample_joint(joint, 100_000, seed=3)
        assert draws.shape == (100_000, 1)
        assert np.mean(draws[:, 0] == 1.0) == pytest.approx(math.exp(-1.0), abs=0.01)

    def test_uniform_max(self):
        draws = sample_joint(IIDJoint(n=3, marginal=Marginal.uniform()), 50_000, seed=4)
        assert np.mean(draws.max(axis=1) <= 0.5) == pytest.approx(0.125, abs=0.01)

    def test_spike_has_one_nonzero(self):
        draws = sample_joint(SpikeMixture(n=4, marginal=Marginal.uniform(0.1, 1.0)), 1000, seed=5)
        assert np.all((draws > 0).sum(axis=1) == 1)

    def test_discrete_support(self, affiliated_example):
        draws = sample_joint(affiliated_example, 5000, seed=6)
        assert set(np.unique(draws)) <= {1.0, 2.0, 3.0}
        assert np.mean((draws[:, 0] == 1.0) & (draws[:, 1] == 1.0)) == pytest.approx(112 / 503, abs=0.02)

    def test_mixture_covariance_nonnegative(self):
        joint = MixtureJoint(n=2, weights=[0.5, 0.5],
                             components=[Marginal.uniform(0.0, 0.5), Marginal.uniform(0.5, 1.0)])
        draws = sample_joint(joint, 50_000, seed=7)
        assert np.cov(draws.T)[0, 1] > 0.0

    def test_seeded(self, rng):
        joint = random_mixture(rng, 3)
        np.testing.assert_array_equal(sample_joint(joint, 100, seed=11), sample_joint(joint, 100, seed=11))

    def test_count(self):
        with pytest.raises(DomainError):
            sample_joint(IIDJoint(n=2, marginal=Marginal.uniform()), 0)


@pytest.mark.unit
class TestModels:
    def test_exact_round_trip(self, mixture_example):
        text = JointDocument(joint=mixture_example).model_dump_json()
        assert '"5/16"' in text
        restored = JointDocument.model_validate_json(text).joint
        assert isinstance(restored, DiscreteExchangeable)
        assert restored.pmf == mixture_example.pmf

    def test_iid_document(self):
        document = JointDocument(joint=IIDJoint(n=2, marginal=worst_case_marginal(2)))
        restored = JointDocument.model_validate_json(document.model_dump_json())
        assert restored.model_dump() == document.model_dump()

    @pytest.mark.parametrize("text,kind", [
        ('{"joint": {"variant": "iid", "n": 2, "marginal": {"pieces": [{"lo": 0.0, "hi": 1.0, "kind": "constant", '
         '"weight": 1.0}], "atoms": []}}}', IIDJoint),
        ('{"joint": {"variant": "mixture", "n": 2, "weights": [0.5, 0.5], "components": [{"pieces": [], '
         '"atoms": [[0.2, 1.0]]}, {"pieces": [{"lo": 0.0, "hi": 1.0, "kind": "constant", "weight": 1.0}], '
         '"atoms": []}]}}', MixtureJoint),
        ('{"joint": {"variant": "discrete", "n": 2, "support": [0.25, 0.5, 1.0], "pmf": ["5/16", "7/64", "5/64", '
         '"7/64", "17/128", "9/128", "5/64", "9/128", "5/128"]}}', DiscreteExchangeable),
        ('{"joint": {"variant": "spike", "n": 3, "marginal": {"pieces": [{"lo": 0.5, "hi": 1.0, '
         '"kind": "constant", "weight": 2.0}], "atoms": []}}}', SpikeMixture),
    ])
    def test_documented_shapes(self, text, kind):
        joint = JointDocument.model_validate_json(text).joint
        assert isinstance(joint, kind)
        assert first_order_stat_cdf(joint, joint.n, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_unknown_variant(self):
        with pytest.raises(ValidationError):
            JointDocument.model_validate_json('{"joint": {"variant": "copula", "n": 2}}')

    def test_asymmetric_pmf(self):
        with pytest.raises(ValidationError):
            DiscreteExchangeable.from_matrix([1.0, 2.0], [["1/2", "1/4"], ["0", "1/4"]])

    def test_mass(self):
        with pytest.raises(ValidationError):
            Marginal(atoms=[(0.5, 0.4)])

    def test_cell_limit(self):
        with pytest.raises(ValidationError):
            DiscreteExchangeable(n=5, support=[0.1 * k for k in range(6)], pmf=[Fraction(1, 6 ** 5)] * 6 ** 5)

    def test_random_marginals_are_valid(self, rng):
        for smooth in (False, True):
            for _ in range(30):
                marginal = random_marginal(rng, smooth=smooth, floor=0.3 if smooth else 0.0)
                assert marginal.cdf(1.0) == pytest.approx(1.0, abs=1e-12)
                if smooth:
                    assert marginal.atom_at_one() > 0.0
