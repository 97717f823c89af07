"""Scikit-learn style estimators wrapping the prediction and imputation cores.

Both classes follow the fit/predict (or fit/transform) protocol and
inherit ``get_params``/``set_params`` from :class:`sklearn.base.BaseEstimator`,
so they clone and compose with the wider ecosystem.  Rows of the matrix
passed to ``predict`` are consecutive future periods: row ``i`` is
predicted at horizon ``i + 1``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import linpred
from .exceptions import DomainError
from .inference import IntervalSpec, prediction_interval
from .panel import (
    CorrectionSpec,
    PanelDataset,
    default_cs_selection,
    factor_fit_controls,
    impute_pup,
    treatment_effect,
)
from .validation import as_float_matrix, as_float_vector

__all__ = ["PupPredictor", "FactorImputer"]


class PupPredictor(BaseEstimator):
    """Linear predictor with an optional residual-correlation correction.

    Parameters
    ----------
    correction : {"none", "direct", "iterated", "blup"}
        "none" is the plain least-squares prediction; "direct" and
        "iterated" add the autocorrelation-scaled last residual; "blup"
        fits iterative feasible GLS and applies the AR(1) correction.
    variant : {"cochrane-orcutt", "prais-winsten"}
        Feasible-GLS flavor used when ``correction="blup"``.
    tol, max_iter
        Feasible-GLS convergence controls.

    Attributes
    ----------
    coef_ : ndarray
        Fitted coefficients (GLS coefficients when ``correction="blup"``).
    residuals_ : ndarray
        In-sample residuals on the same coefficient path.
    gamma0_ : float
        Mean squared residual.
    """

    def __init__(
        self,
        correction: str = "direct",
        variant: str = "cochrane-orcutt",
        tol: float = 1e-8,
        max_iter: int = 100,
    ):
        self.correction = correction
        self.variant = variant
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        if self.correction not in ("none", "direct", "iterated", "blup"):
            raise DomainError(f"unknown correction {self.correction!r}")
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        sample = linpred.SeriesSample(y=y, X=X)
        self.n_features_in_ = sample.n_predictors
        if self.correction == "blup":
            self.gls_ = linpred.cochrane_orcutt_fit(
                sample, tol=self.tol, max_iter=self.max_iter, variant=self.variant
            )
            self.coef_ = self.gls_.beta_gls
            self.residuals_ = self.gls_.residuals_gls
            self.phi_ = self.gls_.phi
            self.gamma0_ = float(np.mean(self.residuals_**2))
        else:
            self.fit_ = linpred.ols_fit(sample)
            self.coef_ = self.fit_.beta
            self.residuals_ = self.fit_.residuals
            self.gamma0_ = self.fit_.gamma0_hat
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise DomainError("call fit before predict")

    def predict_bundles(self, X) -> list[linpred.PredictionBundle]:
        """One prediction bundle per row; row ``i`` is horizon ``i + 1``."""
        self._check_fitted()
        X = as_float_matrix(X, "X")
        bundles = []
        for i in range(X.shape[0]):
            h = i + 1
            if self.correction == "blup":
                bundles.append(linpred.blup_predict(self.gls_, X[i], h))
            elif self.correction == "none":
                bundles.append(linpred.predict_standard(self.fit_, X[i], h))
            else:
                bundles.append(linpred.predict_plup(self.fit_, X[i], h, mode=self.correction))
        return bundles

    def predict(self, X) -> np.ndarray:
        return np.array([b.point for b in self.predict_bundles(X)])

    def predict_interval(self, X, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
        bundles = self.predict_bundles(X)
        lo, hi = [], []
        for b in bundles:
            interval = prediction_interval(IntervalSpec(point=b.point, sd=b.sd, alpha=alpha))
            lo.append(interval[0])
            hi.append(interval[1])
        return np.array(lo), np.array(hi)


class FactorImputer(BaseEstimator):
    """Factor-model imputer for counterfactual panel cells.

    Fits principal components on the control block and imputes the
    treated units' untreated outcomes after the pre-period, optionally
    corrected for serial (``mode="ts"``), cross-sectional
    (``mode="cs"``), or joint (``mode="both"``) residual correlation.
    ``transform`` returns the outcome matrix with every treated
    post-period cell replaced by its imputed counterfactual.
    """

    def __init__(
        self,
        n_factors: int = 2,
        mode: str = "none",
        ar_order: int = 1,
        cs_lag: int = 0,
        selection: object = None,
        ts_mode: str = "direct",
    ):
        self.n_factors = n_factors
        self.mode = mode
        self.ar_order = ar_order
        self.cs_lag = cs_lag
        self.selection = selection
        self.ts_mode = ts_mode

    def _spec(self, pattern) -> CorrectionSpec:
        selection = self.selection
        if selection is None:
            selection = default_cs_selection(pattern.n_controls, pattern.t0)
        return CorrectionSpec(
            mode=self.mode,
            ar_order=self.ar_order,
            cs_lag=self.cs_lag,
            selection=selection,
            ts_mode=self.ts_mode,
        )

    def fit(self, Y, n_treated: int | None = None, t0: int | None = None):
        """Fit on an outcome matrix or a ready :class:`PanelDataset`."""
        if isinstance(Y, PanelDataset):
            panel = Y
        else:
            if n_treated is None or t0 is None:
                raise DomainError("pass n_treated and t0 when fitting from a matrix")
            panel = PanelDataset(Y=as_float_matrix(Y, "Y"), n_treated=n_treated, t0=t0)
        self.panel_ = panel
        self.fit_ = factor_fit_controls(panel, self.n_factors)
        self.spec_ = self._spec(panel.pattern)
        return self

    def _check_fitted(self):
        if not hasattr(self, "fit_"):
            raise DomainError("call fit before imputing")

    def impute(self, unit: int, horizon: int):
        self._check_fitted()
        return impute_pup(self.fit_, unit, horizon, self.spec_)

    def impute_all(self, units=None, horizons=None):
        self._check_fitted()
        pat = self.panel_.pattern
        units = range(pat.n_treated) if units is None else units
        horizons = range(1, pat.n_post + 1) if horizons is None else horizons
        return [self.impute(u, h) for u in units for h in horizons]

    def treatment_effect(self, unit: int, target="time_average"):
        self._check_fitted()
        pat = self.panel_.pattern
        results = [self.impute(unit, h) for h in range(1, pat.n_post + 1)]
        return treatment_effect(self.panel_, results, target)

    def transform(self, Y=None) -> np.ndarray:
        """Outcome matrix with treated post-period cells imputed."""
        self._check_fitted()
        pat = self.panel_.pattern
        out = self.panel_.Y.copy()
        for unit in range(pat.n_treated):
            for h in range(1, pat.n_post + 1):
                out[unit, pat.t0 + h - 1] = self.impute(unit, h).y0_hat
        return out

    def fit_transform(self, Y, n_treated: int | None = None, t0: int | None = None):
        return self.fit(Y, n_treated=n_treated, t0=t0).transform()
