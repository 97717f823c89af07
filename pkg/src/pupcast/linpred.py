"""Single-equation linear prediction with correlation-corrected errors.

Implements the ordinary-least-squares fit, iterative feasible GLS
(Cochrane-Orcutt / Prais-Winsten), the covariance-based best linear
unbiased correction, and practical corrections that add a residual
autocorrelation term to the standard point prediction.  Asymptotic
prediction-error variances for every method live here as well.

All solves go through least-squares or symmetric positive-definite
factorizations; no matrix is ever inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import (
    CovarianceError,
    DomainError,
    HorizonError,
    InsufficientDataError,
    NonstationaryError,
    SingularDesignError,
    ZeroVarianceError,
)
from .validation import as_float_matrix, as_float_vector, check_horizon, check_symmetric

__all__ = [
    "RHO_CLAMP",
    "METHODS",
    "SeriesSample",
    "LinearFit",
    "GlsFit",
    "PredictionBundle",
    "ToeplitzCov",
    "ols_fit",
    "residual_autocorr",
    "predict_standard",
    "predict_plup",
    "cochrane_orcutt_fit",
    "blup_predict",
    "goldberger_correction",
    "asymptotic_prediction_variance",
]

#: Bound applied to autocorrelations inside variance formulas only.  Point
#: corrections always use the raw estimate so the additive identity
#: point = standard + correction is exact.
RHO_CLAMP = 0.999

#: Recognized prediction methods, in the order reports print them.
METHODS = ("standard", "plupd", "plupi", "blup")

# Relative threshold below which a residual sum of squares is treated as an
# exact fit (pure floating-point noise).
_EXACT_FIT_RTOL = 1e-24


def _clamp(rho: float) -> float:
    return float(min(max(rho, -RHO_CLAMP), RHO_CLAMP))


@dataclass(frozen=True)
class SeriesSample:
    """One unit's outcome vector and predictor matrix over the pre-period.

    Parameters
    ----------
    y : ndarray, shape (n_obs,)
        Outcome series.
    X : ndarray, shape (n_obs, n_predictors)
        Predictors, may include an intercept column.  Full column rank is
        checked at fit time, not here.
    """

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = as_float_vector(self.y, "y")
        X = as_float_matrix(self.X, "X")
        if X.shape[0] != y.shape[0]:
            raise DomainError(
                f"y and X disagree on sample size: {y.shape[0]} vs {X.shape[0]}"
            )
        if X.shape[1] < 1:
            raise DomainError("X must have at least one column")
        if y.shape[0] <= X.shape[1]:
            raise InsufficientDataError(
                f"need more observations ({y.shape[0]}) than predictors ({X.shape[1]})"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LinearFit:
    """Least-squares fit: coefficients, residuals, and residual moments.

    ``gamma0_hat`` is the mean of squared residuals (no degrees-of-freedom
    correction).  Sample autocorrelations of the residuals are computed on
    demand through :meth:`rho_hat`.
    """

    beta: np.ndarray
    residuals: np.ndarray
    gamma0_hat: float

    def rho_hat(self, h: int) -> float:
        """Sample autocorrelation of the residuals at lag ``h``."""
        return residual_autocorr(self.residuals, h)

    @property
    def n_obs(self) -> int:
        return self.residuals.shape[0]


@dataclass(frozen=True)
class GlsFit:
    """Iterative feasible-GLS fit with an AR(1) error model."""

    beta_gls: np.ndarray
    phi: float
    residuals_gls: np.ndarray
    sigma_v2: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PredictionBundle:
    """A point prediction, its additive correction, and a plug-in variance.

    The identity ``point == standard_point + correction`` holds exactly:
    ``point`` is always assembled as that sum on a single arithmetic path.
    """

    point: float
    correction: float
    method: str
    horizon: int
    variance: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.variance < 0.0:
            raise DomainError(f"variance must be nonnegative, got {self.variance}")
        if self.method == "standard" and self.correction != 0.0:
            raise DomainError("standard predictions carry no correction")

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class ToeplitzCov:
    """AR(1) error covariance: entry (i, j) equals ``sigma_e2 * phi**|i-j|``."""

    sigma_e2: float
    phi: float
    size: int

    def __post_init__(self):
        if self.sigma_e2 < 0.0:
            raise DomainError("sigma_e2 must be nonnegative")
        if abs(self.phi) >= 1.0:
            raise NonstationaryError(f"|phi| must be < 1, got {self.phi}")
        if self.size < 1:
            raise DomainError("size must be positive")

    def matrix(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.sigma_e2 * self.phi ** np.abs(idx[:, None] - idx[None, :])

    def target_cov(self, h: int) -> np.ndarray:
        """Covariance of the in-sample errors with the error ``h`` steps past the end."""
        check_horizon(h)
        idx = np.arange(self.size)
        return self.sigma_e2 * self.phi ** (self.size - 1 - idx + h)


def ols_fit(sample: SeriesSample) -> LinearFit:
    """Fit ordinary least squares and retain the residual second moments.

    Parameters
    ----------
    sample : SeriesSample

    Returns
    -------
    LinearFit

    Raises
    ------
    SingularDesignError
        If the predictor matrix is rank deficient.
    """
    X, y = sample.X, sample.y
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < sample.n_predictors:
        raise SingularDesignError(
            f"X has rank {rank} < {sample.n_predictors}; drop collinear columns"
        )
    residuals = y - X @ beta
    gamma0_hat = float(np.mean(residuals**2))
    return LinearFit(beta=beta, residuals=residuals, gamma0_hat=gamma0_hat)


def residual_autocorr(residuals, h: int) -> float:
    """Sample autocorrelation of a residual series at lag ``h``.

    Only observed pairs enter: the numerator sums ``e[t-h] * e[t]`` over
    ``t = h+1 .. n`` and the denominator sums ``e[t-h]**2`` over the same
    index set.  The ratio is not algebraically bounded by one.

    Raises
    ------
    HorizonError
        If ``h >= n - 1`` so fewer than two pairs would remain.
    ZeroVarianceError
        If the denominator is exactly zero (all-zero residuals).
    """
    e = as_float_vector(residuals, "residuals")
    check_horizon(h)
    n = e.shape[0]
    if h >= n - 1:
        raise HorizonError(f"lag {h} too large for a series of length {n}")
    num = float(e[h:] @ e[:-h])
    den = float(e[:-h] @ e[:-h])
    if den == 0.0:
        raise ZeroVarianceError("residuals are identically zero; autocorrelation undefined")
    return num / den


def predict_standard(fit: LinearFit, x_future, h: int = 1) -> PredictionBundle:
    """Uncorrected least-squares prediction at horizon ``h``.

    The plug-in error variance is ``gamma0_hat``: with a consistent
    coefficient estimate the prediction error is the future disturbance
    itself, whose variance is the marginal residual variance.
    """
    x = as_float_vector(x_future, "x_future")
    check_horizon(h)
    if x.shape[0] != fit.beta.shape[0]:
        raise DomainError(
            f"x_future has length {x.shape[0]}, expected {fit.beta.shape[0]}"
        )
    point = float(x @ fit.beta)
    return PredictionBundle(
        point=point, correction=0.0, method="standard", horizon=h, variance=fit.gamma0_hat
    )


def predict_plup(fit: LinearFit, x_future, h: int = 1, mode: str = "direct") -> PredictionBundle:
    """Standard prediction plus a residual-autocorrelation correction.

    ``mode="direct"`` scales the last residual by the lag-``h``
    autocorrelation; ``mode="iterated"`` by the lag-1 autocorrelation
    raised to ``h``.  At ``h == 1`` the two coincide and the direct bundle
    is returned for either mode.  Variances use the clamped
    autocorrelation (see :data:`RHO_CLAMP`); the point correction uses the
    raw estimate.
    """
    if mode not in ("direct", "iterated"):
        raise DomainError(f"mode must be 'direct' or 'iterated', got {mode!r}")
    x = as_float_vector(x_future, "x_future")
    check_horizon(h)
    if x.shape[0] != fit.beta.shape[0]:
        raise DomainError(
            f"x_future has length {x.shape[0]}, expected {fit.beta.shape[0]}"
        )
    base = float(x @ fit.beta)
    e_last = float(fit.residuals[-1])
    rho_h = fit.rho_hat(h)
    if mode == "iterated" and h > 1:
        rho1 = fit.rho_hat(1)
        coef = rho1**h
        variance = asymptotic_prediction_variance(
            fit.gamma0_hat, _clamp(rho1), _clamp(rho_h), h, "plupi"
        )
        method = "plupi"
    else:
        coef = rho_h
        variance = asymptotic_prediction_variance(
            fit.gamma0_hat, _clamp(rho_h), _clamp(rho_h), h, "plupd"
        )
        method = "plupd"
    correction = coef * e_last
    return PredictionBundle(
        point=base + correction,
        correction=correction,
        method=method,
        horizon=h,
        variance=variance,
    )


def _ar1_coef(e: np.ndarray, scale: float) -> float:
    """Lag-1 regression coefficient of a residual series, 0.0 for exact fits."""
    den = float(e[:-1] @ e[:-1])
    if den <= _EXACT_FIT_RTOL * e.shape[0] * scale:
        return 0.0
    return float(e[1:] @ e[:-1]) / den


def cochrane_orcutt_fit(
    sample: SeriesSample,
    tol: float = 1e-8,
    max_iter: int = 100,
    variant: str = "cochrane-orcutt",
) -> GlsFit:
    """Iterative feasible GLS under an AR(1) error model.

    Alternates a quasi-differenced regression (given the current ``phi``)
    with a lag-1 autoregression of the implied residuals until the ``phi``
    update falls below ``tol`` or ``max_iter`` passes.  The
    ``"prais-winsten"`` variant keeps the first observation, scaled by
    ``sqrt(1 - phi**2)``; ``"cochrane-orcutt"`` drops it.

    Non-convergence returns the last iterate with ``converged=False``.
    An estimated ``|phi| >= 1`` at any point is a hard error: the methods
    here assume stationary errors, and projecting back silently would mask
    the violation.
    """
    if variant not in ("cochrane-orcutt", "prais-winsten"):
        raise DomainError(f"unknown variant {variant!r}")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if sample.n_obs <= sample.n_predictors + 1:
        raise InsufficientDataError(
            "iterative GLS needs n_obs > n_predictors + 1 "
            f"(got {sample.n_obs} and {sample.n_predictors})"
        )
    X, y = sample.X, sample.y
    scale = max(1.0, float(np.mean(y**2)))

    fit0 = ols_fit(sample)
    e = fit0.residuals
    phi = _ar1_coef(e, scale)
    if abs(phi) >= 1.0:
        raise NonstationaryError(f"estimated AR(1) coefficient {phi:.6f} is not stationary")

    beta = fit0.beta
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ys = y[1:] - phi * y[:-1]
        Xs = X[1:] - phi * X[:-1]
        if variant == "prais-winsten":
            w = np.sqrt(1.0 - phi**2)
            ys = np.concatenate(([w * y[0]], ys))
            Xs = np.vstack((w * X[0], Xs))
        beta, _, rank, _ = np.linalg.lstsq(Xs, ys, rcond=None)
        if rank < sample.n_predictors:
            raise SingularDesignError("quasi-differenced design is rank deficient")
        e = y - X @ beta
        phi_new = _ar1_coef(e, scale)
        if abs(phi_new) >= 1.0:
            raise NonstationaryError(
                f"estimated AR(1) coefficient {phi_new:.6f} is not stationary"
            )
        done = abs(phi_new - phi) < tol
        phi = phi_new
        if done:
            converged = True
            break

    v = e[1:] - phi * e[:-1]
    sigma_v2 = float(np.mean(v**2))
    return GlsFit(
        beta_gls=beta,
        phi=phi,
        residuals_gls=e,
        sigma_v2=sigma_v2,
        iterations=iterations,
        converged=converged,
    )


def blup_predict(gls: GlsFit, x_future, h: int = 1) -> PredictionBundle:
    """Best linear unbiased prediction under the fitted AR(1) error model.

    Adds ``phi**h`` times the last GLS residual to the GLS regression
    prediction.  The plug-in variance is the ``h``-step innovation
    variance ``sigma_v2 * (1 - phi**(2h)) / (1 - phi**2)``.
    """
    x = as_float_vector(x_future, "x_future")
    check_horizon(h)
    if x.shape[0] != gls.beta_gls.shape[0]:
        raise DomainError(
            f"x_future has length {x.shape[0]}, expected {gls.beta_gls.shape[0]}"
        )
    base = float(x @ gls.beta_gls)
    correction = gls.phi**h * float(gls.residuals_gls[-1])
    variance = gls.sigma_v2 * (1.0 - gls.phi ** (2 * h)) / (1.0 - gls.phi**2)
    return PredictionBundle(
        point=base + correction,
        correction=correction,
        method="blup",
        horizon=h,
        variance=variance,
    )


def goldberger_correction(Omega, omega_vec, residuals) -> float:
    """Covariance-based correction ``omega_vec' Omega^{-1} residuals``.

    Computed through a Cholesky solve; ``Omega`` is never inverted.

    Raises
    ------
    CovarianceError
        If ``Omega`` is not symmetric positive definite.
    """
    Omega = check_symmetric(Omega, "Omega")
    omega_vec = as_float_vector(omega_vec, "omega_vec")
    residuals = as_float_vector(residuals, "residuals")
    n = Omega.shape[0]
    if omega_vec.shape[0] != n or residuals.shape[0] != n:
        raise DomainError("Omega, omega_vec and residuals must share one dimension")
    try:
        factor = cho_factor(Omega, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
        raise CovarianceError(f"Omega is not positive definite: {exc}") from exc
    except Exception as exc:
        raise CovarianceError(f"Omega is not positive definite: {exc}") from exc
    return float(omega_vec @ cho_solve(factor, residuals))


def asymptotic_prediction_variance(
    gamma0: float, rho1: float, rho_h: float, h: int, method: str
) -> float:
    """Asymptotic prediction-error variance for a given method.

    ``standard`` ignores the last residual (variance ``gamma0``); the
    direct correction removes the lag-``h`` correlated part
    (``gamma0 * (1 - rho_h**2)``); the iterated correction pays for the
    gap between ``rho1**h`` and ``rho_h``; ``blup`` is the AR(1)
    ``h``-step innovation variance.

    The iterated value is assembled as the direct value plus
    ``gamma0 * (rho_h - rho1**h)**2`` -- algebraically identical to
    ``gamma0 * (1 + rho1**(2h) - 2 rho1**h rho_h)`` -- so the ordering
    direct <= iterated holds exactly in floating point as well.
    """
    gamma0 = float(gamma0)
    if gamma0 < 0.0:
        raise DomainError(f"gamma0 must be nonnegative, got {gamma0}")
    check_horizon(h)
    if abs(rho1) > 1.0 or abs(rho_h) > 1.0:
        raise DomainError(
            f"correlations must lie in [-1, 1], got rho1={rho1}, rho_h={rho_h}"
        )
    if method == "standard":
        return gamma0
    if method == "plupd":
        return gamma0 * (1.0 - rho_h**2)
    if method == "plupi":
        direct = gamma0 * (1.0 - rho_h**2)
        return direct + gamma0 * (rho_h - rho1**h) ** 2
    if method == "blup":
        return gamma0 * (1.0 - rho1 ** (2 * h))
    raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
