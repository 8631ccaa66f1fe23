import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from antsel.analytic import (
    AnalyticSpec,
    binomial_identity_check,
    chi2n_cdf,
    diversity_bounds,
    dmt_curve,
    exp_integral,
    leading_coefficient_exact,
    outage_coefficient,
    pr_outage_quadrature,
    series_partial,
    theta0_cdf,
    theta0_pdf,
    theta_cdf,
    theta_pdf,
)


class TestAngleDensity:
    def test_spot_value(self):
        assert theta_pdf(math.pi / 4, 2) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n_r", range(2, 7))
    def test_normalization(self, n_r):
        total, _ = integrate.quad(lambda t: theta_pdf(t, n_r), 0.0, math.pi / 2)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_vanishes_at_origin(self):
        assert theta_pdf(1e-9, 3) < 1e-12

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            theta_pdf(0.0, 2)
        with pytest.raises(ValueError):
            theta_pdf(math.pi / 2, 2)
        with pytest.raises(ValueError):
            theta_pdf(0.5, 1)

    def test_cdf_consistent_with_pdf(self):
        for n_r in (2, 4):
            val, _ = integrate.quad(lambda t: theta_pdf(t, n_r), 0.0, 0.9)
            assert theta_cdf(0.9, n_r) == pytest.approx(val, rel=1e-10)


class TestChi2nCdf:
    def test_zero(self):
        assert chi2n_cdf(0.0, 3) == 0.0

    def test_median_of_one_term(self):
        assert chi2n_cdf(math.log(2.0), 1) == pytest.approx(0.5, rel=1e-12)

    def test_small_x_head(self):
        x = 1e-4
        assert chi2n_cdf(x, 3) / x ** 3 == pytest.approx(1.0 / 6.0, rel=1e-3)

    def test_matches_series_form(self):
        for n in (1, 2, 6):
            for x in (0.3, 1.7, 5.0):
                series = 1.0 - math.exp(-x) * sum(x ** k / math.factorial(k) for k in range(n))
                assert chi2n_cdf(x, n) == pytest.approx(series, rel=1e-12)


class TestLargestAngleLaw:
    def test_reduces_to_pair_law_at_order_one(self):
        grid = np.linspace(0.2, 1.4, 9)
        np.testing.assert_allclose(theta0_pdf(grid, 1), theta_pdf(grid, 2), rtol=1e-12)

    def test_cdf_endpoint(self):
        assert theta0_cdf(math.pi / 2, 5) == pytest.approx(1.0)

    def test_cdf_spot_value(self):
        assert theta0_cdf(math.pi / 4, 4) == pytest.approx(0.0625, rel=1e-12)

    def test_order_statistics_factorization(self):
        # the largest of n_t - 1 independent reference angles
        n_t, n_r = 4, 3
        m = (n_t - 1) * (n_r - 1)
        grid = np.linspace(0.1, 1.5, 8)
        np.testing.assert_allclose(theta0_cdf(grid, m), theta_cdf(grid, n_r) ** (n_t - 1), rtol=1e-12)


class TestExpansionCoefficients:
    def test_three_by_three(self):
        coeff = outage_coefficient(3, 3)
        assert coeff.m == 4
        assert coeff.leading_exact == Fraction(1, 120)
        assert coeff.leading == pytest.approx(1 / 120)

    def test_two_by_two_empty_sum(self):
        coeff = outage_coefficient(2, 2)
        assert coeff.m == 1
        assert coeff.b_m == 0.0
        assert coeff.leading_exact == 1

    def test_four_by_three(self):
        # 1/720 - 6 (1/5040 + 1/40320), frozen against the quadrature anchor below
        coeff = outage_coefficient(4, 3)
        assert coeff.leading_exact == Fraction(1, 20160)

    def test_expansion_head_structure(self):
        for n_t, n_r in ((2, 2), (3, 3), (4, 3)):
            coeff = outage_coefficient(n_t, n_r)
            assert coeff.a[0] == pytest.approx(1.0, abs=1e-12)
            assert all(abs(v) < 1e-12 for v in coeff.a[1:coeff.m])
            assert coeff.a[coeff.m] == pytest.approx(-1.0 / math.factorial(coeff.m), rel=1e-12)

    def test_head_polynomial_starts_at_reciprocal_m(self):
        coeff = outage_coefficient(4, 4)
        assert coeff.c[0] == pytest.approx(1.0 / coeff.m, rel=1e-12)

    def test_positivity_window(self):
        for n_t in range(2, 13):
            for n_r in range(2, 13):
                assert leading_coefficient_exact(n_t, n_r) > 0


class TestOutageQuadrature:
    def test_anchor_three_by_three(self):
        x = 1e-3
        ratio = pr_outage_quadrature(x, 3, 3) / (x ** 4 / 120.0)
        assert 0.98 <= ratio <= 1.02

    def test_anchor_four_by_three(self):
        x = 1e-3
        ratio = pr_outage_quadrature(x, 4, 3) / (x ** 6 / 20160.0)
        assert 0.98 <= ratio <= 1.02

    def test_saturation(self):
        assert pr_outage_quadrature(50.0, 3, 3) >= 1.0 - 1e-6

    def test_monotone_in_threshold(self):
        xs = np.geomspace(1e-3, 10.0, 12)
        vals = [pr_outage_quadrature(x, 3, 3) for x in xs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert all(0.0 <= v <= 1.0 for v in vals)

    def test_restricted_slope_agreement(self):
        xs = np.geomspace(1e-4, 1e-2, 9)
        s_u = np.polyfit(np.log(xs), np.log([pr_outage_quadrature(x, 3, 3) for x in xs]), 1)[0]
        s_r = np.polyfit(np.log(xs), np.log([pr_outage_quadrature(x, 3, 3, restricted=True) for x in xs]), 1)[0]
        assert abs(s_u - 4.0) <= 0.05
        assert abs(s_u - s_r) <= 0.05

    def test_quadrature_matches_coefficient_nearby(self):
        for n_t, n_r in ((3, 3), (4, 3), (3, 4)):
            coeff = outage_coefficient(n_t, n_r)
            x = 1e-3
            ratio = pr_outage_quadrature(x, n_t, n_r) / (coeff.leading * x ** coeff.m)
            assert ratio == pytest.approx(1.0, abs=0.02)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            pr_outage_quadrature(0.0, 3, 3)


class TestExpIntegral:
    def test_small_argument_limit(self):
        assert exp_integral(3, 1e-8) == pytest.approx(0.5, abs=1e-6)

    def test_unit_argument(self):
        # frozen from direct quadrature of e^{-m}/m over (1, inf)
        assert exp_integral(1, 1.0) == pytest.approx(0.2193839, abs=1e-7)

    def test_recursion_residual(self):
        for k in range(1, 7):
            for x in (0.1, 1.0, 5.0):
                res = k * exp_integral(k + 1, x) - math.exp(-x) + x * exp_integral(k, x)
                assert abs(res) < 1e-12

    @pytest.mark.parametrize("k", range(-4, 9))
    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0])
    def test_against_quadrature(self, k, x):
        ref, _ = integrate.quad(lambda t: t ** (-k) * math.exp(-x * t), 1.0, np.inf,
                                epsabs=0.0, epsrel=1e-13, limit=300)
        assert exp_integral(k, x) == pytest.approx(ref, rel=1e-10)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            exp_integral(2, 0.0)


class TestSeriesPartial:
    def test_limit_value(self):
        assert series_partial(4, 1000) == pytest.approx(1.0 / 480.0, rel=1e-9)

    def test_single_term(self):
        assert series_partial(3, 1) == pytest.approx(1.0 / math.factorial(5), rel=1e-12)

    def test_monotone_and_bounded(self):
        vals = [series_partial(4, k) for k in (1, 5, 20, 100, 1000)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= 1.0 / (4 * math.factorial(5))


class TestBinomialIdentity:
    def test_trivial(self):
        assert binomial_identity_check(5, 0)

    def test_hand_case(self):
        # 1 - 5 + 10 = 6 = C(4, 2)
        assert binomial_identity_check(5, 2)

    def test_exhaustive_small(self):
        assert all(binomial_identity_check(m, k) for m in range(1, 21) for k in range(m))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            binomial_identity_check(5, 5)


class TestDiversityBoundsAndDmt:
    def test_two_stream_exact(self):
        assert diversity_bounds(3, 3, 2) == (4, 4)

    def test_general_l(self):
        assert diversity_bounds(5, 3, 3) == (3, 6)

    def test_square_receive_side(self):
        # when n_r equals L the lower bound collapses to n_t - L + 1
        assert diversity_bounds(6, 3, 3)[0] == 4

    def test_dmt_points(self):
        assert dmt_curve(3, 3, 2, 0.0) == pytest.approx(4.0)
        assert dmt_curve(3, 3, 2, 1.0) == pytest.approx(2.0)
        assert dmt_curve(3, 3, 2, 2.0) == pytest.approx(0.0)

    def test_dmt_clamps_past_full_rate(self):
        assert dmt_curve(3, 3, 2, 5.0) == 0.0

    def test_dmt_bounds_at_zero_gain(self):
        assert dmt_curve(4, 4, 3, 0.0, bound="lower") == pytest.approx(4.0)
        assert dmt_curve(4, 4, 3, 0.0, bound="upper") == pytest.approx(6.0)

    def test_exact_requires_two_streams(self):
        with pytest.raises(ValueError):
            dmt_curve(4, 4, 3, 0.0, bound="exact-l2")

    def test_spec_derived_constants(self):
        spec = AnalyticSpec(3, 3, 2)
        assert (spec.m, spec.m_lower, spec.m_upper) == (4, 4, 4)
        assert spec.psi0 == pytest.approx(math.pi / 4)
        with pytest.raises(ValueError):
            AnalyticSpec(2, 3, 3)
