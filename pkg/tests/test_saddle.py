import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.core.errors import CheckFailed, DomainError, SaddleViolation
from app.services.optmech import minimax_regret
from app.services.saddle import general_class_check, mixture_equivalence_check, verify_saddle
from tests.conftest import INV_E


@pytest.mark.unit
class TestGeneralClass:
    def test_boundary_vector(self):
        assert general_class_check([0.8, 0.0, 0.0]) == pytest.approx(INV_E, abs=1e-12)

    def test_both_above_threshold(self):
        assert general_class_check([0.8, 0.6]) == pytest.approx(-0.6 * math.log(0.6), abs=1e-10)

    def test_below_threshold(self):
        assert general_class_check([0.2, 0.1]) == pytest.approx(0.2, abs=1e-14)

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=6))
    @settings(max_examples=300, deadline=None)
    def test_bound(self, v):
        assert general_class_check(v) <= INV_E + 1e-10

    def test_random_vectors(self, rng):
        vectors = rng.random((10_000, 4))
        values = np.array([general_class_check(v) for v in vectors])
        assert values.max() <= INV_E + 1e-10
        top = np.sort(vectors, axis=1)[:, ::-1]
        boundary = (top[:, 0] >= INV_E) & (top[:, 1] <= INV_E)
        np.testing.assert_allclose(values[boundary], INV_E, atol=1e-10)
        outside = np.maximum(INV_E - top[:, 0], top[:, 1] - INV_E) >= 1e-3
        assert np.all(values[outside] < INV_E - 1e-7)

    @pytest.mark.parametrize("v", [[0.9, 0.6], [0.3, 0.1], [1.0, 1.0, 0.5], [0.2]])
    def test_strictly_below_off_boundary(self, v):
        assert general_class_check(v) < INV_E - 1e-6

    def test_off_boundary_equality_is_flagged(self, monkeypatch):
        monkeypatch.setattr("app.services.saddle.pointwise_regret", lambda phi, v: INV_E)
        with pytest.raises(CheckFailed):
            general_class_check([0.9, 0.6])


@pytest.mark.unit
class TestMixtures:
    def test_mixture_equivalence(self):
        assert mixture_equivalence_check(2, probes=100, seed=3)

    def test_probe_floor(self):
        with pytest.raises(DomainError):
            mixture_equivalence_check(2, probes=10)


@pytest.mark.unit
class TestVerifySaddle:
    def test_small_run(self, fast_settings):
        report = verify_saddle(2, seed=1, grid_size=128)
        assert report.passed
        assert report.nature_gap <= 1e-3
        assert report.seller_gap >= -1e-6
        assert report.optimal_value == pytest.approx(minimax_regret(2), abs=1e-12)
        assert report.deterministic_reserve_margin >= -1e-8
        assert report.probes["iid"] == fast_settings.SADDLE_IID_PROBES
        assert report.probes["reserve_grid"] == fast_settings.SADDLE_RESERVE_GRID
        assert report.probes["other_optimal"] == 4

    def test_reproducible(self, fast_settings):
        first = verify_saddle(1, seed=np.random.SeedSequence([7, 1]), grid_size=128)
        second = verify_saddle(1, seed=np.random.SeedSequence([7, 1]), grid_size=128)
        assert first.model_dump() == second.model_dump()

    def test_violation_reports_probe(self, fast_settings, monkeypatch):
        monkeypatch.setattr("app.services.saddle.minimax_regret", lambda n: 0.25)
        with pytest.raises(SaddleViolation) as caught:
            verify_saddle(2, seed=1, grid_size=128)
        error = caught.value
        assert error.probe["family"]
        assert error.report is not None and not error.report.passed

    def test_tolerance_floor(self):
        with pytest.raises(DomainError):
            verify_saddle(2, tol=1e-4)

    def test_generator_seed_rejected(self, rng):
        with pytest.raises(DomainError):
            verify_saddle(2, seed=rng)

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_default_probes(self, n):
        report = verify_saddle(n, seed=0)
        assert report.passed
        assert sum(report.probes.values()) >= 700
