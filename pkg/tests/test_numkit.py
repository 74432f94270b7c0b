import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate
from scipy import special

from app.core.errors import DomainError, NoSignChange, ToleranceNotMet
from app.utils.numkit import (Interval, exp_integral_e1, exp_integral_e1_scaled, exp_integral_e1_scaled_gap,
                              golden_section_max, integrate, invert_cdf, panel_integrals, solve_monotone_root)


@pytest.mark.unit
class TestRoot:
    def test_linear_root(self):
        assert solve_monotone_root(lambda x: x - 0.3, 0.0, 1.0, tol=1e-14) == pytest.approx(0.3, abs=1e-12)

    def test_decreasing_function(self):
        root = solve_monotone_root(lambda x: math.exp(-x) - 0.5, 0.0, 5.0, tol=1e-14)
        assert root == pytest.approx(math.log(2.0), abs=1e-12)

    def test_endpoint_root(self):
        assert solve_monotone_root(lambda x: x, 0.0, 1.0) == 0.0

    def test_no_sign_change(self):
        with pytest.raises(NoSignChange):
            solve_monotone_root(lambda x: x + 1.0, 0.0, 1.0)

    def test_non_positive_tolerance(self):
        with pytest.raises(DomainError):
            solve_monotone_root(lambda x: x - 0.5, 0.0, 1.0, tol=0.0)

    def test_deterministic(self):
        f = lambda x: x ** 3 - 0.2  # noqa: E731
        assert solve_monotone_root(f, 0.0, 1.0) == solve_monotone_root(f, 0.0, 1.0)


@pytest.mark.unit
class TestIntegrate:
    def test_polynomial(self):
        value, err = integrate(lambda v: v, Interval(lo=0.0, hi=1.0))
        assert value == pytest.approx(0.5, abs=1e-12)
        assert err <= 1e-10

    def test_inverse_revenue_integral(self):
        e = math.e
        value, _ = integrate(lambda v: 1.0 - 1.0 / (e * v), Interval(lo=1.0 / e, hi=1.0))
        assert value == pytest.approx(1.0 - 2.0 / e, abs=1e-10)

    def test_kink_against_scipy(self):
        f = lambda v: np.abs(v - 0.37) * np.exp(v)  # noqa: E731
        ours, _ = integrate(f, Interval.spanning(0.0, 1.0, [0.37]))
        reference, _ = sp_integrate.quad(lambda v: abs(v - 0.37) * math.exp(v), 0.0, 1.0, points=[0.37])
        assert ours == pytest.approx(reference, abs=1e-10)

    def test_split_points_are_additive(self):
        f = lambda v: np.sin(3 * v) + v ** 2  # noqa: E731
        whole, _ = integrate(f, Interval(lo=0.0, hi=1.0))
        split, _ = integrate(f, Interval.spanning(0.0, 1.0, [0.25, 0.6]))
        assert whole == pytest.approx(split, abs=1e-11)

    def test_empty_interval(self):
        assert integrate(lambda v: v, Interval(lo=0.4, hi=0.4)) == (0.0, 0.0)

    def test_panel_budget(self):
        with pytest.raises(ToleranceNotMet):
            integrate(lambda v: np.sin(1.0 / np.maximum(v, 1e-9)), Interval(lo=0.0, hi=1.0), max_panels=20)

    def test_panel_integrals_sum(self):
        edges = np.linspace(0.0, 1.0, 9)
        parts = panel_integrals(lambda v: v ** 2, edges)
        assert len(parts) == 8
        assert parts.sum() == pytest.approx(1.0 / 3.0, abs=1e-14)


@pytest.mark.unit
class TestExponentialIntegral:
    @pytest.mark.parametrize("x", [1e-6, 0.01, 0.3, 1.0, 1.5, 4.0, 12.0, 40.0])
    def test_against_scipy(self, x):
        assert exp_integral_e1(x) == pytest.approx(special.exp1(x), rel=1e-12)

    def test_known_value(self):
        assert exp_integral_e1(1.0) == pytest.approx(0.219383934395520, abs=1e-13)

    def test_array_shape(self):
        x = np.array([[0.5, 2.0], [3.0, 8.0]])
        out = exp_integral_e1(x)
        assert out.shape == x.shape
        np.testing.assert_allclose(out, special.exp1(x), rtol=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            exp_integral_e1(x)

    @given(st.floats(min_value=1e-3, max_value=500.0))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, x):
        scaled = exp_integral_e1_scaled(x)
        assert 1.0 / (x + 1.0) < scaled < 1.0 / x

    def test_scaled_matches_unscaled(self):
        for x in (0.2, 1.0, 7.0, 30.0):
            assert exp_integral_e1_scaled(x) == pytest.approx(math.exp(x) * special.exp1(x), rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 5.0, 200.0, 999.0, 1001.0, 1e5])
    def test_scaled_gap(self, x):
        gap = exp_integral_e1_scaled_gap(x)
        assert gap > 0.0
        if x > 100:
            assert gap == pytest.approx(1.0 / x ** 2, rel=3.0 / x)
        else:
            assert gap == pytest.approx(1.0 / x - special.exp1(x) * math.exp(x), rel=1e-10)


@pytest.mark.unit
class TestInversionAndSearch:
    def test_uniform_inverse(self):
        u = np.linspace(0.0, 1.0, 11)
        x = invert_cdf(lambda v: v, lambda v: np.ones_like(v), u, 0.0, 1.0)
        np.testing.assert_allclose(x, u, atol=1e-12)

    def test_smooth_inverse_round_trip(self):
        cdf = lambda v: v ** 3  # noqa: E731
        density = lambda v: 3 * v ** 2  # noqa: E731
        u = np.array([0.001, 0.2, 0.5, 0.95])
        x = invert_cdf(cdf, density, u, 0.0, 1.0)
        np.testing.assert_allclose(cdf(x), u, atol=1e-11)

    def test_bisection_only(self):
        x = invert_cdf(lambda v: np.sqrt(v), None, np.array([0.5]), 0.0, 1.0)
        assert x[0] == pytest.approx(0.25, abs=1e-10)

    def test_golden_section(self):
        x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2 + 1.0, 0.0, 1.0)
        assert x == pytest.approx(0.3, abs=1e-6)
        assert fx == pytest.approx(1.0, abs=1e-12)

    def test_golden_section_endpoint(self):
        x, _ = golden_section_max(lambda t: t, 0.0, 1.0)
        assert x == 1.0

    def test_interval_validation(self):
        with pytest.raises(ValueError):
            Interval(lo=1.0, hi=0.0)
