"""Tests for the single-equation prediction operations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pupcast import (
    GlsFit,
    LinearFit,
    SeriesSample,
    ToeplitzCov,
    asymptotic_prediction_variance,
    blup_predict,
    cochrane_orcutt_fit,
    goldberger_correction,
    ols_fit,
    predict_plup,
    predict_standard,
    residual_autocorr,
)
from pupcast.exceptions import (
    CovarianceError,
    DomainError,
    HorizonError,
    InsufficientDataError,
    NonstationaryError,
    SingularDesignError,
    ZeroVarianceError,
)

from conftest import normal_equations_beta, simulate_ar_loop, yw_gamma0_closed_form


def make_fit(residuals, beta=(1.0,)):
    residuals = np.asarray(residuals, dtype=float)
    return LinearFit(
        beta=np.asarray(beta, dtype=float),
        residuals=residuals,
        gamma0_hat=float(np.mean(residuals**2)),
    )


class TestOlsFit:
    def test_exact_linear_data(self):
        sample = SeriesSample(y=[2.0, 4.0, 6.0], X=[[1.0], [2.0], [3.0]])
        fit = ols_fit(sample)
        np.testing.assert_allclose(fit.beta, [2.0], atol=1e-12)
        np.testing.assert_allclose(fit.residuals, np.zeros(3), atol=1e-12)

    def test_intercept_only_is_mean(self):
        sample = SeriesSample(y=[1.0, 2.0, 3.0, 4.0, 5.0], X=np.ones((5, 1)))
        fit = ols_fit(sample)
        np.testing.assert_allclose(fit.beta, [3.0], atol=1e-12)

    def test_matches_normal_equations_oracle(self, rng_factory):
        rng = rng_factory(42)
        X = rng.normal(size=(50, 2))
        beta_true = np.array([1.0, -1.0])
        y = X @ beta_true + 0.3 * rng.normal(size=50)
        fit = ols_fit(SeriesSample(y=y, X=X))
        np.testing.assert_allclose(fit.beta, normal_equations_beta(X, y), atol=1e-10)
        np.testing.assert_allclose(fit.residuals, y - X @ fit.beta, atol=0)
        assert fit.gamma0_hat == pytest.approx(np.mean(fit.residuals**2))

    def test_rank_deficient_design(self):
        X = np.column_stack([np.ones(6), np.ones(6) * 2.0])
        with pytest.raises(SingularDesignError):
            ols_fit(SeriesSample(y=np.arange(6.0), X=X))

    def test_too_few_observations(self):
        with pytest.raises(InsufficientDataError):
            SeriesSample(y=[1.0, 2.0], X=[[1.0, 0.0], [0.0, 1.0]])


class TestResidualAutocorr:
    def test_constant_series(self):
        assert residual_autocorr([3.0, 3.0, 3.0, 3.0], 1) == 1.0

    def test_alternating_series(self):
        assert residual_autocorr([2.0, -2.0, 2.0, -2.0, 2.0], 1) == -1.0

    def test_plim_matches_ar1_coefficient(self, rng_factory):
        e = simulate_ar_loop((0.8,), 1.0, 5000, rng_factory(7))
        assert 0.75 <= residual_autocorr(e, 1) <= 0.85

    def test_zero_residuals_error(self):
        with pytest.raises(ZeroVarianceError):
            residual_autocorr(np.zeros(10), 1)

    def test_horizon_too_large(self):
        with pytest.raises(HorizonError):
            residual_autocorr([1.0, 2.0, 3.0], 2)


class TestPredictStandard:
    def test_direct_evaluation(self):
        fit = make_fit([0.0, 1.0, -1.0], beta=(2.0,))
        bundle = predict_standard(fit, [3.0], 1)
        assert bundle.point == 6.0
        assert bundle.correction == 0.0
        assert bundle.method == "standard"

    def test_variance_is_gamma0(self, rng_factory):
        rng = rng_factory(1)
        X = rng.normal(size=(30, 2))
        y = X @ np.array([1.0, 2.0]) + rng.normal(size=30)
        fit = ols_fit(SeriesSample(y=y, X=X))
        bundle = predict_standard(fit, [0.5, -0.5], 4)
        assert bundle.variance == fit.gamma0_hat

    def test_dimension_mismatch(self):
        fit = make_fit([0.0, 1.0, -1.0], beta=(2.0,))
        with pytest.raises(DomainError):
            predict_standard(fit, [1.0, 2.0], 1)


class TestPredictPlup:
    def test_zero_autocorr_equals_standard(self):
        # residuals built so the lag-1 autocorrelation is exactly zero
        fit = make_fit([1.0, 0.0, -1.0, 0.0], beta=(2.0,))
        assert fit.rho_hat(1) == 0.0
        plup = predict_plup(fit, [3.0], 1)
        std = predict_standard(fit, [3.0], 1)
        assert plup.point == std.point
        assert plup.correction == 0.0
        assert plup.variance == std.variance

    def test_growth_rate_example(self):
        # standard point -1.722, last residual 1.03, correction 0.185
        rho = 0.185 / 1.03
        e2 = 1.03 / rho
        fit = make_fit([0.0, e2, 1.03], beta=(-1.722,))
        bundle = predict_plup(fit, [1.0], 1)
        assert bundle.correction == pytest.approx(0.185, abs=1e-12)
        assert bundle.point == pytest.approx(-1.537, abs=1e-12)

    def test_h1_modes_bit_identical(self, rng_factory):
        rng = rng_factory(3)
        X = rng.normal(size=(40, 2))
        y = X @ np.array([1.0, 1.0]) + rng.normal(size=40)
        fit = ols_fit(SeriesSample(y=y, X=X))
        direct = predict_plup(fit, [0.3, 0.7], 1, mode="direct")
        iterated = predict_plup(fit, [0.3, 0.7], 1, mode="iterated")
        assert direct == iterated

    def test_additive_identity_exact(self, rng_factory):
        rng = rng_factory(4)
        X = rng.normal(size=(60, 2))
        y = X @ np.array([1.0, -0.5]) + simulate_ar_loop((0.6,), 0.5, 60, rng)
        fit = ols_fit(SeriesSample(y=y, X=X))
        x_fut = np.array([0.2, -0.4])
        for h in (1, 2, 5):
            for mode in ("direct", "iterated"):
                plup = predict_plup(fit, x_fut, h, mode=mode)
                std = predict_standard(fit, x_fut, h)
                assert plup.point == std.point + plup.correction

    def test_needs_enough_residuals(self):
        fit = make_fit([1.0, 2.0, 0.5], beta=(1.0,))
        with pytest.raises(HorizonError):
            predict_plup(fit, [1.0], 2)


class TestCochraneOrcutt:
    def test_perfect_fit(self):
        X = np.column_stack([np.ones(8), np.arange(8.0)])
        y = X @ np.array([0.5, 2.0])
        gls = cochrane_orcutt_fit(SeriesSample(y=y, X=X))
        assert gls.phi == 0.0
        assert gls.converged
        np.testing.assert_allclose(gls.beta_gls, [0.5, 2.0], atol=1e-8)

    def test_white_noise_consistency(self, rng_factory):
        rng = rng_factory(10)
        X = np.column_stack([np.ones(500), rng.normal(size=500)])
        beta_true = np.array([1.0, 2.0])
        y = X @ beta_true + rng.normal(size=500)
        ols = ols_fit(SeriesSample(y=y, X=X))
        gls = cochrane_orcutt_fit(SeriesSample(y=y, X=X))
        assert abs(gls.phi) < 0.1
        # joint standard error scale ~ sigma/sqrt(n) = 1/22.4
        assert np.linalg.norm(gls.beta_gls - ols.beta) < 2.0 / np.sqrt(500)
        assert gls.converged

    def test_ar1_recovery(self, rng_factory):
        rng = rng_factory(11)
        X = np.column_stack([np.ones(500), rng.normal(size=500)])
        e = simulate_ar_loop((0.8,), 0.36, 500, rng)
        y = X @ np.array([1.0, 1.0]) + e
        gls = cochrane_orcutt_fit(SeriesSample(y=y, X=X))
        assert 0.72 <= gls.phi <= 0.88
        assert gls.residuals_gls == pytest.approx(y - X @ gls.beta_gls)

    def test_prais_winsten_close_to_co(self, rng_factory):
        rng = rng_factory(12)
        X = np.column_stack([np.ones(300), rng.normal(size=300)])
        y = X @ np.array([0.5, 1.0]) + simulate_ar_loop((0.5,), 1.0, 300, rng)
        co = cochrane_orcutt_fit(SeriesSample(y=y, X=X), variant="cochrane-orcutt")
        pw = cochrane_orcutt_fit(SeriesSample(y=y, X=X), variant="prais-winsten")
        assert abs(co.phi - pw.phi) < 0.1
        assert pw.converged

    def test_nonstationary_residuals_error(self):
        t = np.arange(30.0)
        y = 2.0**t
        X = np.ones((30, 1))
        with pytest.raises(NonstationaryError):
            cochrane_orcutt_fit(SeriesSample(y=y, X=X))

    def test_nonconvergence_flag(self, rng_factory):
        rng = rng_factory(13)
        X = np.column_stack([np.ones(100), rng.normal(size=100)])
        y = X @ np.array([1.0, 1.0]) + simulate_ar_loop((0.7,), 1.0, 100, rng)
        gls = cochrane_orcutt_fit(SeriesSample(y=y, X=X), tol=1e-16, max_iter=2)
        assert not gls.converged
        assert gls.iterations == 2


class TestBlupPredict:
    def make_gls(self, phi, residuals, beta=(1.0,), sigma_v2=1.0):
        return GlsFit(
            beta_gls=np.asarray(beta, dtype=float),
            phi=phi,
            residuals_gls=np.asarray(residuals, dtype=float),
            sigma_v2=sigma_v2,
            iterations=1,
            converged=True,
        )

    def test_spherical_reduction(self):
        gls = self.make_gls(0.0, [0.5, -0.5, 1.0], beta=(2.0,))
        bundle = blup_predict(gls, [3.0], 1)
        assert bundle.correction == 0.0
        assert bundle.point == 6.0
        assert bundle.variance == 1.0

    def test_stationary_limit(self):
        gls = self.make_gls(0.5, [0.5, -0.5, 1.0], sigma_v2=2.0)
        bundle = blup_predict(gls, [1.0], 200)
        assert bundle.correction == pytest.approx(0.0, abs=1e-12)
        assert bundle.variance == pytest.approx(2.0 / (1.0 - 0.25), rel=1e-12)

    def test_matches_dense_covariance_solve(self):
        phi, sigma_e2 = 0.5, 1.3
        cov = ToeplitzCov(sigma_e2=sigma_e2, phi=phi, size=3)
        residuals = np.array([0.4, -1.1, 0.9])
        for h in (1, 2, 4):
            expected = phi**h * residuals[-1]
            got = goldberger_correction(cov.matrix(), cov.target_cov(h), residuals)
            assert got == pytest.approx(expected, abs=1e-10)
            gls = self.make_gls(phi, residuals)
            assert blup_predict(gls, [0.0], h).correction == pytest.approx(expected, abs=1e-12)


class TestGoldbergerCorrection:
    def test_uncorrelated_target(self):
        assert goldberger_correction(2.0 * np.eye(4), np.zeros(4), np.ones(4)) == 0.0

    def test_identity_solve(self):
        r = np.array([1.0, -2.0, 0.5])
        assert goldberger_correction(np.eye(3), r, r) == pytest.approx(float(r @ r))

    def test_ar1_identity_dense(self):
        cov = ToeplitzCov(sigma_e2=1.0, phi=0.5, size=4)
        residuals = np.array([0.3, -0.2, 0.8, -1.5])
        for h in (1, 3):
            got = goldberger_correction(cov.matrix(), cov.target_cov(h), residuals)
            assert got == pytest.approx(0.5**h * residuals[-1], abs=1e-12)

    def test_not_positive_definite(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(CovarianceError):
            goldberger_correction(bad, np.ones(2), np.ones(2))

    def test_not_symmetric(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(CovarianceError):
            goldberger_correction(bad, np.ones(2), np.ones(2))


class TestAsymptoticVariance:
    def test_ar1_values(self):
        gamma0 = yw_gamma0_closed_form((0.8,), 0.05)
        assert gamma0 == pytest.approx(0.1389, abs=5e-5)
        assert asymptotic_prediction_variance(gamma0, 0.8, 0.8, 1, "plupd") == pytest.approx(
            0.05, rel=1e-10
        )

    def test_ar2_values(self):
        gamma0 = yw_gamma0_closed_form((1.3, -0.4), 0.05)
        assert gamma0 == pytest.approx(0.4321, abs=5e-5)
        rho1 = 1.3 / 1.4
        assert rho1 == pytest.approx(0.9286, abs=5e-5)
        assert asymptotic_prediction_variance(gamma0, rho1, rho1, 1, "plupd") == pytest.approx(
            0.0595, abs=5e-5
        )

    def test_white_noise_reduces_to_gamma0(self):
        for method in ("standard", "plupd", "plupi", "blup"):
            assert asymptotic_prediction_variance(0.7, 0.0, 0.0, 3, method) == 0.7

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            asymptotic_prediction_variance(1.0, 1.5, 0.0, 1, "plupd")
        with pytest.raises(DomainError):
            asymptotic_prediction_variance(-1.0, 0.0, 0.0, 1, "standard")
        with pytest.raises(DomainError):
            asymptotic_prediction_variance(1.0, 0.0, 0.0, 1, "nope")

    @given(
        rho1=st.floats(-1.0, 1.0),
        rho_h=st.floats(-1.0, 1.0),
        h=st.integers(1, 12),
        gamma0=st.floats(1e-6, 10.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_ordering_property(self, rho1, rho_h, h, gamma0):
        vd = asymptotic_prediction_variance(gamma0, rho1, rho_h, h, "plupd")
        vi = asymptotic_prediction_variance(gamma0, rho1, rho_h, h, "plupi")
        vs = asymptotic_prediction_variance(gamma0, rho1, rho_h, h, "standard")
        assert vd <= vi
        assert vd <= vs

    def test_equality_cases(self):
        # plupd == plupi when rho_h equals rho1**h; plupd == standard when rho_h is 0
        assert asymptotic_prediction_variance(2.0, 0.6, 0.6**3, 3, "plupd") == (
            asymptotic_prediction_variance(2.0, 0.6, 0.6**3, 3, "plupi")
        )
        assert asymptotic_prediction_variance(2.0, 0.6, 0.0, 4, "plupd") == (
            asymptotic_prediction_variance(2.0, 0.6, 0.0, 4, "standard")
        )

    def test_plupi_vs_standard_both_directions(self):
        # iterated beats standard iff 1 + rho1^{2h} - 2 rho1^h rho_h <= 1
        worse = asymptotic_prediction_variance(1.0, 0.9, 0.0, 1, "plupi")
        assert worse > 1.0
        better = asymptotic_prediction_variance(1.0, 0.8, 0.9, 1, "plupi")
        assert better < 1.0


class TestStatisticalConsistency:
    def test_rho1_mean_over_simulations(self, rng_factory):
        rng = rng_factory(99)
        values = []
        for _ in range(200):
            e = simulate_ar_loop((0.8,), 1.0, 2000, rng, burn=200)
            values.append(residual_autocorr(e, 1))
        assert abs(np.mean(values) - 0.8) < 0.02
