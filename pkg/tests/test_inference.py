"""Tests for intervals, analytic coverage, and the dependence LM test."""

import numpy as np
import pytest

from pupcast import (
    IntervalSpec,
    analytic_coverage_ar1,
    analytic_coverage_cs,
    analytic_coverage_ma1,
    analytic_coverage_pup,
    lm_dependence_test,
    prediction_interval,
)
from pupcast.exceptions import DomainError, InsufficientDataError, OverfitError

from conftest import simulate_ar_loop


class TestPredictionInterval:
    def test_standard_normal_quantile(self):
        lo, hi = prediction_interval(IntervalSpec(point=0.0, sd=1.0, alpha=0.05))
        assert lo == pytest.approx(-1.959963984540054, abs=1e-9)
        assert hi == pytest.approx(1.959963984540054, abs=1e-9)

    def test_degenerate_sd(self):
        lo, hi = prediction_interval(IntervalSpec(point=2.5, sd=0.0, alpha=0.05))
        assert (lo, hi) == (2.5, 2.5)

    def test_corrected_to_standard_width_ratio(self):
        # corrected variance gamma0*(1-rho^2) vs standard gamma0: ratio sqrt(1-rho^2)
        rho = 0.8
        wide = IntervalSpec(point=0.0, sd=1.0, alpha=0.05)
        narrow = IntervalSpec(point=0.0, sd=np.sqrt(1.0 - rho**2), alpha=0.05)
        assert narrow.half_width / wide.half_width == pytest.approx(0.6, rel=1e-12)

    def test_negative_sd_rejected(self):
        with pytest.raises(DomainError):
            IntervalSpec(point=0.0, sd=-1.0, alpha=0.05)


AR1_TABLE = [
    (1, 0.84, -2.26),
    (2, 0.87, -1.41),
    (3, 0.90, -1.01),
    (4, 0.92, -0.76),
    (5, 0.93, -0.59),
]


class TestAnalyticCoverageAr1:
    @pytest.mark.parametrize("h,coverage,bias", AR1_TABLE)
    def test_published_values(self, h, coverage, bias):
        rep = analytic_coverage_ar1(0.8, 0.5, -2.0, h, 0.05)
        assert rep.coverage == pytest.approx(coverage, abs=0.005)
        assert rep.standardized_bias == pytest.approx(bias, abs=0.005)
        assert rep.convention == "ar1-omega"

    def test_no_persistence_is_nominal(self):
        for h in (1, 3, 7):
            rep = analytic_coverage_ar1(0.0, 0.5, -2.0, h, 0.05)
            assert rep.coverage == pytest.approx(0.95, abs=1e-12)
            assert rep.standardized_bias == 0.0

    def test_distortion_decays_with_horizon(self):
        biases = [abs(analytic_coverage_ar1(0.8, 0.5, -2.0, h).standardized_bias) for h in range(1, 9)]
        assert all(b1 > b2 for b1, b2 in zip(biases, biases[1:]))

    def test_zero_conditioning_is_conservative(self):
        rep = analytic_coverage_ar1(0.8, 0.5, 0.0, 1, 0.05)
        assert rep.coverage >= 0.95


class TestAnalyticCoverageMa1:
    def test_published_h1(self):
        rep = analytic_coverage_ma1(0.8, 0.5, -2.0, 1)
        assert rep.coverage == pytest.approx(0.58, abs=0.01)
        assert rep.standardized_bias == pytest.approx(-1.77, abs=0.01)

    @pytest.mark.parametrize("h", [2, 3, 4, 5])
    def test_memory_of_one_period(self, h):
        rep = analytic_coverage_ma1(0.8, 0.5, -2.0, h)
        assert rep.coverage == 0.95
        assert rep.standardized_bias == 0.0

    def test_no_dependence(self):
        for h in (1, 2):
            rep = analytic_coverage_ma1(0.0, 0.5, -2.0, h)
            assert rep.coverage == pytest.approx(0.95, abs=1e-12)


CS_TABLE = [
    (1, 0.68, 0.89, -0.70),
    (2, -0.83, 0.86, 0.85),
    (3, -0.92, 0.84, 0.95),
    (4, 0.09, 0.95, -0.09),
    (5, 0.86, 0.86, -0.89),
]


class TestAnalyticCoverageCs:
    def test_published_negative_cov_column(self):
        e2 = [row[1] for row in CS_TABLE]
        reports = analytic_coverage_cs(-0.7289, 0.5, 0.841, e2, 0.05)
        for rep, (h, _, coverage, bias) in zip(reports, CS_TABLE):
            assert rep.horizon == h
            assert rep.coverage == pytest.approx(coverage, abs=0.01)
            assert rep.standardized_bias == pytest.approx(bias, abs=0.01)
            assert rep.convention == "simplified"

    def test_population_projection_coefficient(self):
        # sigma01 / sigma00 with the published parameterization
        assert 0.613 / 0.841 == pytest.approx(0.7289, abs=5e-5)

    def test_no_dependence(self):
        reports = analytic_coverage_cs(0.0, 0.5, 0.841, [0.5, -0.5], 0.05)
        for rep in reports:
            assert rep.coverage == pytest.approx(0.95, abs=1e-12)
            assert rep.standardized_bias == 0.0

    def test_formula_convention_widens_ratio(self):
        simp = analytic_coverage_cs(-0.4, 0.5, 0.841, [0.7], convention="simplified")[0]
        form = analytic_coverage_cs(-0.4, 0.5, 0.841, [0.7], convention="formula")[0]
        # same conditioning, larger width ratio under the conditional scale
        assert form.coverage > simp.coverage

    def test_formula_requires_positive_conditional_variance(self):
        with pytest.raises(DomainError):
            analytic_coverage_cs(-0.9, 0.5, 0.841, [0.7], convention="formula")

    def test_constant_conditioning_does_not_decay(self):
        reports = analytic_coverage_cs(-0.7289, 0.5, 0.841, [0.8] * 6)
        distortions = [0.95 - r.coverage for r in reports]
        assert min(distortions) == pytest.approx(max(distortions), abs=1e-12)
        assert distortions[0] > 0.01


class TestAnalyticCoveragePup:
    @pytest.mark.parametrize("process,h", [("ar1", 1), ("ma1", 3), ("cs", 2)])
    def test_nominal_everywhere(self, process, h):
        rep = analytic_coverage_pup(process, h, 0.05)
        assert rep.coverage == 0.95
        assert rep.standardized_bias == 0.0

    def test_unknown_process(self):
        with pytest.raises(DomainError):
            analytic_coverage_pup("garch", 1)


class TestCoverageMonotonicity:
    def test_coverage_decreases_in_absolute_bias(self):
        # fixed width ratio, scan the conditioning value on a grid
        values = np.linspace(0.0, 4.0, 30)
        cov = [analytic_coverage_ar1(0.8, 0.5, -v, 1).coverage for v in values]
        assert all(a > b for a, b in zip(cov, cov[1:]))

    def test_symmetric_in_sign(self):
        up = analytic_coverage_ar1(0.8, 0.5, 2.0, 1)
        down = analytic_coverage_ar1(0.8, 0.5, -2.0, 1)
        assert up.coverage == pytest.approx(down.coverage, abs=1e-12)
        assert up.standardized_bias == pytest.approx(-down.standardized_bias, abs=1e-12)


class TestLmDependenceTest:
    def test_null_size(self, rng_factory):
        rng = rng_factory(2024)
        rejections = 0
        n_panels = 1000
        for _ in range(n_panels):
            E = rng.normal(size=(5, 100))
            rep = lm_dependence_test(E, p_own=1, p_cross=0, unit=0)
            rejections += rep.p_value < 0.05
        rate = rejections / n_panels
        assert 0.03 <= rate <= 0.07

    def test_power_against_ar1(self, rng_factory):
        rng = rng_factory(77)
        rejections = 0
        n_panels = 300
        for _ in range(n_panels):
            e = simulate_ar_loop((0.8,), 1.0, 200, rng, burn=100)
            rep = lm_dependence_test(e, p_own=1, p_cross=0, unit=0)
            rejections += rep.p_value < 0.05
        assert rejections / n_panels >= 0.99

    def test_detects_cross_dependence(self, rng_factory):
        rng = rng_factory(5)
        base = rng.normal(size=200)
        E = np.vstack([0.8 * base + 0.3 * rng.normal(size=200), base])
        rep = lm_dependence_test(E, p_own=0, p_cross=0, unit=0)
        assert rep.df == 1
        assert rep.p_value < 1e-6

    def test_empty_hypothesis(self):
        with pytest.raises(DomainError):
            lm_dependence_test(np.random.default_rng(0).normal(size=(1, 50)), p_own=0, p_cross=0)

    def test_scale_invariance(self, rng_factory):
        rng = rng_factory(6)
        E = rng.normal(size=(4, 80))
        a = lm_dependence_test(E, p_own=2, p_cross=1, unit=1)
        b = lm_dependence_test(3.0 * E, p_own=2, p_cross=1, unit=1)
        assert a.statistic == pytest.approx(b.statistic, rel=1e-10)
        assert a.df == b.df

    def test_overparameterized(self, rng_factory):
        rng = rng_factory(7)
        E = rng.normal(size=(10, 30))
        with pytest.raises((OverfitError, InsufficientDataError)):
            lm_dependence_test(E, p_own=5, p_cross=1, unit=0)

    def test_covariates_enter_regression(self, rng_factory):
        rng = rng_factory(8)
        E = rng.normal(size=(3, 120))
        x = rng.normal(size=(120, 2))
        rep = lm_dependence_test(E, x=x, p_own=1, p_cross=0, unit=0)
        assert "covariate_0" in rep.regressors
        assert rep.df == 3  # 1 own lag + 2 cross units at lag 0

    def test_manifest_labels(self, rng_factory):
        rng = rng_factory(9)
        E = rng.normal(size=(2, 60))
        rep = lm_dependence_test(E, p_own=1, p_cross=1, unit=0)
        assert "own_lag_1" in rep.regressors
        assert "cross_u1_lag_-1" in rep.regressors
        assert "cross_u1_lag_0" in rep.regressors
        assert rep.df == 1 + 3
