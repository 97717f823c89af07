"""Factor-model imputation of counterfactual outcomes with error corrections.

A panel holds outcomes for treated and control units; treated units stop
revealing their untreated outcome after the pre-period.  A principal-
components fit on the control block provides the standard imputation, and
corrections exploit serial correlation in a unit's own residuals,
contemporaneous correlation with control residuals, or both.  A dense
stacked-covariance solver provides the exact linear-unbiased correction
on small instances and serves as the oracle for the fast paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import linpred
from .exceptions import (
    CovarianceError,
    DomainError,
    InsufficientDataError,
    NonstationaryError,
    OverfitError,
)
from .linpred import RHO_CLAMP, asymptotic_prediction_variance, residual_autocorr
from .validation import as_float_matrix, as_float_vector, check_horizon, check_symmetric

__all__ = [
    "TreatmentPattern",
    "PanelDataset",
    "FactorFit",
    "CorrectionSpec",
    "ImputationResult",
    "EffectEstimate",
    "StackedCov",
    "default_cs_selection",
    "factor_fit_controls",
    "loadings_given_factors",
    "impute_standard",
    "ts_correction",
    "cs_correction",
    "combined_correction",
    "panel_blup_oracle",
    "stacked_residuals",
    "impute_pup",
    "treatment_effect",
]

#: Largest stacked-vector size the dense oracle will factorize.
ORACLE_SIZE_LIMIT = 5000


def _clamp(rho: float) -> float:
    return float(min(max(rho, -RHO_CLAMP), RHO_CLAMP))


@dataclass(frozen=True)
class TreatmentPattern:
    """Dimensions of a block treatment design: who is treated, and when."""

    n_units: int
    n_treated: int
    t0: int
    n_periods: int

    def __post_init__(self):
        if not 1 <= self.n_treated < self.n_units:
            raise DomainError(
                f"need 1 <= n_treated < n_units, got {self.n_treated} of {self.n_units}"
            )
        if not 1 <= self.t0 < self.n_periods:
            raise DomainError(
                f"need 1 <= t0 < n_periods, got t0={self.t0}, n_periods={self.n_periods}"
            )

    @property
    def n_controls(self) -> int:
        return self.n_units - self.n_treated

    @property
    def n_post(self) -> int:
        return self.n_periods - self.t0

    @property
    def stacked_size(self) -> int:
        """Length of the stacked observed-outcome vector: every unit's
        pre-period, then the control units' post-period."""
        return self.n_units * self.t0 + self.n_controls * self.n_post


@dataclass(frozen=True)
class PanelDataset:
    """Outcome matrix with a block treatment pattern.

    Units are stored treated-first: rows ``0..n_treated-1`` are treated
    from period ``t0+1`` on; every other cell holds the untreated outcome.
    """

    Y: np.ndarray
    n_treated: int
    t0: int

    def __post_init__(self):
        Y = as_float_matrix(self.Y, "Y")
        object.__setattr__(self, "Y", Y)
        # raises if the pattern is inconsistent
        self.pattern

    @property
    def pattern(self) -> TreatmentPattern:
        return TreatmentPattern(
            n_units=self.Y.shape[0],
            n_treated=self.n_treated,
            t0=self.t0,
            n_periods=self.Y.shape[1],
        )

    @property
    def treated_units(self) -> tuple[int, ...]:
        return tuple(range(self.n_treated))

    def observed_outcome(self, unit: int, h: int) -> float:
        """Observed outcome of ``unit`` at ``h`` periods past the pre-period."""
        check_horizon(h)
        if h > self.pattern.n_post:
            raise DomainError(f"horizon {h} exceeds the {self.pattern.n_post} post periods")
        return float(self.Y[unit, self.t0 + h - 1])


@dataclass(frozen=True)
class FactorFit:
    """Principal-components fit of a panel.

    ``factors`` spans all periods; ``loadings`` and ``intercepts`` cover
    every unit.  Residuals exist only on observed untreated cells: the
    pre-period block for all units and the post-period block for
    controls.  The fitted common component is identified only up to a
    rotation of the factors, and everything downstream depends on the
    factors solely through ``loadings @ factors.T``.
    """

    panel: PanelDataset
    n_factors: int
    factors: np.ndarray  # (n_periods, n_factors)
    loadings: np.ndarray  # (n_units, n_factors)
    intercepts: np.ndarray  # (n_units,)
    residuals_pre: np.ndarray  # (n_units, t0)
    residuals_post: np.ndarray  # (n_controls, n_post)

    @property
    def pattern(self) -> TreatmentPattern:
        return self.panel.pattern

    def common_component(self) -> np.ndarray:
        """Fitted rank-``n_factors`` component, ``(n_units, n_periods)``."""
        return self.loadings @ self.factors.T

    def unit_residuals(self, unit: int) -> np.ndarray:
        """Pre-period residuals of one unit."""
        return self.residuals_pre[unit]


@dataclass(frozen=True)
class CorrectionSpec:
    """Which correction to apply on top of the standard imputation.

    ``mode`` selects none, own-history ("ts"), control cross-section
    ("cs"), or both.  ``ar_order`` is the own-lag depth, ``cs_lag`` the
    lead/lag width for control terms (0 keeps only contemporaneous
    values).  ``selection`` restricts the control regressors: ``"all"``,
    ``("top_k", k)`` keeping the k most pre-period-correlated controls, or
    ``("threshold", c)`` keeping those with absolute correlation >= c.
    ``ts_mode`` picks the direct or iterated variant of the first-order
    own-history correction.
    """

    mode: str = "none"
    ar_order: int = 1
    cs_lag: int = 0
    selection: object = "all"
    ts_mode: str = "direct"

    def __post_init__(self):
        if self.mode not in ("none", "ts", "cs", "both"):
            raise DomainError(f"unknown correction mode {self.mode!r}")
        if self.mode in ("ts", "both") and self.ar_order < 1:
            raise DomainError("ar_order must be >= 1 when the mode includes 'ts'")
        if self.cs_lag < 0:
            raise DomainError("cs_lag must be nonnegative")
        if self.ts_mode not in ("direct", "iterated"):
            raise DomainError(f"ts_mode must be 'direct' or 'iterated', got {self.ts_mode!r}")
        _check_selection(self.selection)


def default_cs_selection(n_controls: int, t0: int):
    """Default control-regressor rule: keep every control while the count
    stays at or below half the pre-period, otherwise screen down to the
    t0/10 most pre-period-correlated controls."""
    if n_controls <= t0 / 2:
        return "all"
    return ("top_k", max(t0 // 10, 1))


def _check_selection(selection) -> None:
    if selection == "all":
        return
    if (
        isinstance(selection, tuple)
        and len(selection) == 2
        and selection[0] in ("top_k", "threshold")
    ):
        kind, value = selection
        if kind == "top_k" and (int(value) != value or value < 1):
            raise DomainError("top_k selection needs an integer k >= 1")
        if kind == "threshold" and not 0.0 <= float(value):
            raise DomainError("threshold selection needs a nonnegative cutoff")
        return
    raise DomainError(
        f"selection must be 'all', ('top_k', k) or ('threshold', c); got {selection!r}"
    )


@dataclass(frozen=True)
class ImputationResult:
    """One imputed counterfactual cell and the implied treatment effect.

    ``delta_hat + y0_hat`` equals the observed outcome exactly.
    ``gamma0`` and ``rho1`` are the unit's plug-in residual variance and
    lag-1 autocorrelation; effect aggregation reuses them to build the
    fitted-error-model covariance across horizons.
    """

    unit: int
    horizon: int
    y0_hat: float
    correction: float
    delta_hat: float
    variance: float
    method: str
    gamma0: float
    rho1: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise DomainError("variance must be nonnegative")


@dataclass(frozen=True)
class EffectEstimate:
    """A pointwise or time-averaged treatment effect with plug-in variance."""

    unit: int
    target: str
    value: float
    variance: float


@dataclass(frozen=True)
class StackedCov:
    """Error covariance for the stacked observed-outcome vector.

    ``sigma`` is the contemporaneous unit-by-unit covariance and ``phi``
    holds one AR(1) coefficient per unit.  Covariance across cells is
    ``sigma[i, j] * phi_of_later_unit ** |t - s|``, the law implied by a
    diagonal first-order autoregression with cross-correlated
    innovations; it reduces to a pure Toeplitz structure when ``sigma``
    is diagonal and to a contemporaneous-only structure when every
    ``phi`` is zero.
    """

    sigma: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        sigma = check_symmetric(self.sigma, "sigma")
        phi = as_float_vector(self.phi, "phi")
        if phi.shape[0] != sigma.shape[0]:
            raise DomainError("phi must have one entry per unit")
        if np.any(np.abs(phi) >= 1.0):
            raise NonstationaryError("every |phi| must be < 1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "phi", phi)

    def cross_cov(self, unit_a, time_a, unit_b, time_b) -> np.ndarray:
        """Covariance between cells (unit_a, time_a) and (unit_b, time_b).

        Vectorized over broadcastable index arrays; times are 1-based.
        """
        ua = np.asarray(unit_a)
        ub = np.asarray(unit_b)
        dt = np.asarray(time_a) - np.asarray(time_b)
        later = np.where(dt >= 0, ua, ub)
        return self.sigma[ua, ub] * self.phi[later] ** np.abs(dt)


def _stacked_index(pattern: TreatmentPattern):
    """Unit and 1-based time index of every stacked-vector entry."""
    n, n1, t0, t = pattern.n_units, pattern.n_treated, pattern.t0, pattern.n_periods
    units_pre = np.repeat(np.arange(n), t0)
    times_pre = np.tile(np.arange(1, t0 + 1), n)
    units_post = np.repeat(np.arange(n1, n), t - t0)
    times_post = np.tile(np.arange(t0 + 1, t + 1), n - n1)
    return np.concatenate([units_pre, units_post]), np.concatenate([times_pre, times_post])


def loadings_given_factors(panel: PanelDataset, factors) -> tuple[np.ndarray, np.ndarray]:
    """Intercepts and loadings for every unit, given a factor matrix.

    Control units are regressed on the factors over all periods, treated
    units over the pre-period only (their later outcomes are
    contaminated).  Both regressions include an intercept, which is
    equivalent to demeaning outcome and factors over the unit's own
    estimation window.
    """
    F = as_float_matrix(factors, "factors")
    pat = panel.pattern
    if F.shape[0] != pat.n_periods:
        raise DomainError("factors must cover every period")
    n, r = pat.n_units, F.shape[1]
    intercepts = np.empty(n)
    loadings = np.empty((n, r))
    for i in range(n):
        window = slice(None) if i >= pat.n_treated else slice(0, pat.t0)
        yi = panel.Y[i, window]
        Fi = F[window]
        f_mean = Fi.mean(axis=0)
        y_mean = yi.mean()
        lam, _, _, _ = np.linalg.lstsq(Fi - f_mean, yi - y_mean, rcond=None)
        loadings[i] = lam
        intercepts[i] = y_mean - lam @ f_mean
    return intercepts, loadings


def factor_fit_controls(panel: PanelDataset, n_factors: int) -> FactorFit:
    """Principal-components fit estimated from the control block.

    Each control unit is demeaned over all periods; the leading
    ``n_factors`` principal components of that block (scaled so the
    factor matrix has unit second moment per column) give the factors
    for every period.  Loadings then come from per-unit regressions, so
    treated units use only their clean pre-period observations.

    Raises
    ------
    DomainError
        If ``n_factors`` exceeds the control-block dimensions, or a unit
        has zero variance over its estimation window.
    """
    pat = panel.pattern
    if not 1 <= n_factors <= min(pat.n_controls, pat.n_periods):
        raise DomainError(
            f"n_factors must lie in [1, {min(pat.n_controls, pat.n_periods)}], got {n_factors}"
        )
    controls = panel.Y[pat.n_treated :]
    variances = controls.var(axis=1)
    if np.any(variances == 0.0):
        bad = int(np.argmax(variances == 0.0)) + pat.n_treated
        raise DomainError(f"unit {bad} has zero variance; factors are not identified")
    treated_pre = panel.Y[: pat.n_treated, : pat.t0]
    if np.any(treated_pre.var(axis=1) == 0.0):
        raise DomainError("a treated unit has zero pre-period variance")

    z = (controls - controls.mean(axis=1, keepdims=True)).T  # (n_periods, n_controls)
    u, s, _ = np.linalg.svd(z, full_matrices=False)
    factors = np.sqrt(pat.n_periods) * u[:, :n_factors]

    intercepts, loadings = loadings_given_factors(panel, factors)
    common = loadings @ factors.T
    fitted = intercepts[:, None] + common
    residuals_pre = panel.Y[:, : pat.t0] - fitted[:, : pat.t0]
    residuals_post = panel.Y[pat.n_treated :, pat.t0 :] - fitted[pat.n_treated :, pat.t0 :]
    return FactorFit(
        panel=panel,
        n_factors=n_factors,
        factors=factors,
        loadings=loadings,
        intercepts=intercepts,
        residuals_pre=residuals_pre,
        residuals_post=residuals_post,
    )


def _check_treated(fit: FactorFit, unit: int) -> None:
    if not 0 <= unit < fit.pattern.n_treated:
        raise DomainError(
            f"unit {unit} is not treated; only units 0..{fit.pattern.n_treated - 1} "
            "have counterfactual cells to impute"
        )


def impute_standard(fit: FactorFit, unit: int, h: int) -> float:
    """Uncorrected imputation: intercept plus loading times future factor."""
    _check_treated(fit, unit)
    check_horizon(h)
    pat = fit.pattern
    if h > pat.n_post:
        raise DomainError(f"horizon {h} exceeds the {pat.n_post} post periods")
    return float(fit.intercepts[unit] + fit.loadings[unit] @ fit.factors[pat.t0 + h - 1])


def ts_correction(residuals_i, h: int, p: int = 1, mode: str = "direct") -> float:
    """Own-history correction for the error ``h`` steps past the sample.

    For ``p == 1`` this is the last residual scaled by the lag-``h``
    autocorrelation (``mode="direct"``) or by the lag-1 autocorrelation
    to the ``h``-th power (``mode="iterated"``).  For ``p > 1`` an AR(p)
    is fit to the residuals by least squares and iterated ``h`` steps;
    ``mode`` is ignored.
    """
    e = as_float_vector(residuals_i, "residuals_i")
    check_horizon(h)
    if p < 1:
        raise DomainError("p must be >= 1")
    if mode not in ("direct", "iterated"):
        raise DomainError(f"mode must be 'direct' or 'iterated', got {mode!r}")
    if e.shape[0] < p + h + 1:
        raise InsufficientDataError(
            f"need at least p + h + 1 = {p + h + 1} residuals, got {e.shape[0]}"
        )
    if p == 1:
        if mode == "iterated" and h > 1:
            return residual_autocorr(e, 1) ** h * float(e[-1])
        return residual_autocorr(e, h) * float(e[-1])
    # AR(p) by least squares on the observed lags, no intercept.
    cols = [e[p - s - 1 : e.shape[0] - s - 1] for s in range(p)]
    Z = np.column_stack(cols)
    coef, _, _, _ = np.linalg.lstsq(Z, e[p:], rcond=None)
    state = list(e[-p:][::-1])  # state[0] is the most recent value
    forecast = 0.0
    for _ in range(h):
        forecast = float(coef @ state)
        state = [forecast] + state[:-1]
    return forecast


def _selected_controls(fit: FactorFit, unit: int, selection) -> np.ndarray:
    """Indices (into the control block) of the regressor controls."""
    _check_selection(selection)
    pat = fit.pattern
    y = fit.residuals_pre[unit]
    controls = fit.residuals_pre[pat.n_treated :]
    n0 = controls.shape[0]
    if selection == "all":
        if n0 > pat.t0 / 2:
            raise OverfitError(
                f"{n0} control regressors for {pat.t0} pre-periods; "
                "use a ('top_k', k) or ('threshold', c) selection"
            )
        return np.arange(n0)
    kind, value = selection
    norm_y = np.sqrt(float(y @ y))
    norms = np.sqrt(np.einsum("ij,ij->i", controls, controls))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(controls @ y) / np.where(norms * norm_y > 0.0, norms * norm_y, np.inf)
    if kind == "top_k":
        k = min(int(value), n0)
        order = np.argsort(-corr, kind="stable")
        return np.sort(order[:k])
    return np.flatnonzero(corr >= float(value))


def cs_correction(fit: FactorFit, unit: int, h: int, selection: object = "all") -> float:
    """Cross-section correction from contemporaneous control residuals.

    Projects the unit's pre-period residuals on the selected controls'
    pre-period residuals (least squares, no intercept: residuals are
    centered by construction) and applies the coefficients to the
    controls' residuals ``h`` periods past the pre-period.
    """
    theta, sel = _cs_regression(fit, unit, selection)
    check_horizon(h)
    if h > fit.pattern.n_post:
        raise DomainError(f"horizon {h} exceeds the {fit.pattern.n_post} post periods")
    return float(theta @ fit.residuals_post[sel, h - 1])


def _cs_regression(fit: FactorFit, unit: int, selection) -> tuple[np.ndarray, np.ndarray]:
    _check_treated(fit, unit)
    sel = _selected_controls(fit, unit, selection)
    if sel.size == 0:
        return np.zeros(0), sel
    pat = fit.pattern
    Z = fit.residuals_pre[pat.n_treated :][sel].T  # (t0, n_selected)
    y = fit.residuals_pre[unit]
    theta, _, _, _ = np.linalg.lstsq(Z, y, rcond=None)
    return theta, sel


def combined_correction(fit: FactorFit, unit: int, h: int, spec: CorrectionSpec) -> float:
    """Correction mixing own-history and control cross-section terms.

    The coefficients on the unit's own lagged residuals and on the
    control residuals at leads/lags up to ``cs_lag`` are estimated
    jointly in one pre-period least-squares regression whose regressor
    offsets mirror the evaluation offsets.  Degenerate specs delegate to
    :func:`ts_correction` / :func:`cs_correction` so the nesting
    identities hold exactly.
    """
    check_horizon(h)
    if spec.mode == "none":
        return 0.0
    if spec.mode == "ts":
        return ts_correction(fit.residuals_pre[unit], h, spec.ar_order, spec.ts_mode)
    if spec.mode == "cs" and spec.cs_lag == 0:
        return cs_correction(fit, unit, h, spec.selection)
    coef, values, _, _ = _joint_regression(fit, unit, h, spec)
    return float(coef @ values)


def _joint_regression(fit: FactorFit, unit: int, h: int, spec: CorrectionSpec):
    """Joint estimation for 'both' (and lagged-'cs') corrections.

    Returns the coefficients, the evaluation regressor values, the
    training residual sum of squares, and the training sample size.
    """
    _check_treated(fit, unit)
    pat = fit.pattern
    t0 = pat.t0
    own_lags = [h + s for s in range(spec.ar_order + 1)] if spec.mode == "both" else []
    p_j = spec.cs_lag
    sel = _selected_controls(fit, unit, spec.selection)

    max_lag = max(own_lags) if own_lags else p_j
    t_lo = max(max_lag, p_j)  # 0-based first usable target index
    t_hi = t0 - p_j
    n_train = t_hi - t_lo
    n_reg = len(own_lags) + sel.size * (2 * p_j + 1)
    if n_reg == 0:
        return np.zeros(0), np.zeros(0), 0.0, max(n_train, 1)
    if n_train <= n_reg:
        raise InsufficientDataError(
            f"{n_train} usable pre-periods for {n_reg} joint regressors"
        )

    e_i = fit.residuals_pre[unit]
    controls = fit.residuals_pre[pat.n_treated :]
    cols = []
    values = []
    for lag in own_lags:
        cols.append(e_i[t_lo - lag : t_hi - lag])
        # a regressor at lag h + s is evaluated at e_{i, T0 - s}
        s = lag - h
        values.append(float(e_i[t0 - 1 - s]))
    for j in sel:
        for s in range(-p_j, p_j + 1):
            cols.append(controls[j, t_lo - s : t_hi - s])
            values.append(_control_residual_at(fit, j, h - s))
    Z = np.column_stack(cols)
    y = e_i[t_lo:t_hi]
    coef, _, _, _ = np.linalg.lstsq(Z, y, rcond=None)
    rss = float(np.sum((y - Z @ coef) ** 2))
    return coef, np.asarray(values), rss, n_train


def _control_residual_at(fit: FactorFit, control_idx: int, offset: int) -> float:
    """Control residual ``offset`` periods past the pre-period (<= 0 is pre)."""
    pat = fit.pattern
    if offset <= 0:
        t = pat.t0 + offset  # 1-based pre-period index
        if t < 1:
            raise DomainError("evaluation index falls before the sample")
        return float(fit.residuals_pre[pat.n_treated + control_idx, t - 1])
    if offset > pat.n_post:
        raise DomainError(
            f"evaluation index {pat.t0 + offset} falls past the {pat.n_periods} periods"
        )
    return float(fit.residuals_post[control_idx, offset - 1])


def stacked_residuals(fit: FactorFit) -> np.ndarray:
    """Residuals stacked in the canonical observed-cell order.

    All units' pre-period residuals (unit-major), then the control
    units' post-period residuals (unit-major).
    """
    return np.concatenate([fit.residuals_pre.ravel(), fit.residuals_post.ravel()])


def panel_blup_oracle(
    cov: StackedCov,
    pattern: TreatmentPattern,
    unit: int,
    h: int,
    residuals,
) -> float:
    """Exact linear-unbiased correction by a dense stacked solve.

    Builds the full covariance of the stacked observed-cell errors and
    the covariance of those errors with the target cell ``(unit, t0+h)``,
    then returns ``target_cov' Cov^{-1} residuals`` through a Cholesky
    solve.  Guarded to stacked sizes of at most ``ORACLE_SIZE_LIMIT``.
    """
    check_horizon(h)
    if not 0 <= unit < pattern.n_treated:
        raise DomainError(f"unit {unit} is not treated")
    if h > pattern.n_post:
        raise DomainError(f"horizon {h} exceeds the {pattern.n_post} post periods")
    if cov.sigma.shape[0] != pattern.n_units:
        raise DomainError("covariance dimension does not match the pattern")
    n = pattern.stacked_size
    if n > ORACLE_SIZE_LIMIT:
        raise DomainError(
            f"stacked size {n} exceeds the dense-solve guard ({ORACLE_SIZE_LIMIT})"
        )
    e = as_float_vector(residuals, "residuals")
    if e.shape[0] != n:
        raise DomainError(f"residuals must have length {n}, got {e.shape[0]}")

    units, times = _stacked_index(pattern)
    gamma = cov.cross_cov(units[:, None], times[:, None], units[None, :], times[None, :])
    omega = cov.cross_cov(
        np.full(n, unit), np.full(n, pattern.t0 + h), units, times
    )
    try:
        factor = cho_factor(gamma, lower=True)
    except Exception as exc:
        raise CovarianceError(f"stacked covariance is not positive definite: {exc}") from exc
    return float(omega @ cho_solve(factor, e))


def _unit_moments(fit: FactorFit, unit: int) -> tuple[float, float]:
    e = fit.residuals_pre[unit]
    gamma0 = float(np.mean(e**2))
    rho1 = residual_autocorr(e, 1)
    return gamma0, rho1


def impute_pup(fit: FactorFit, unit: int, h: int, spec: CorrectionSpec) -> ImputationResult:
    """Corrected imputation with a plug-in error variance.

    The counterfactual is the standard imputation plus the correction
    selected by ``spec``; the treatment effect is the observed outcome
    minus that counterfactual.  Variances: own-history corrections use
    the direct/iterated asymptotic formulas with clamped
    autocorrelations; cross-section corrections use the regression
    residual variance (marginal variance minus explained part, floored
    at zero), as does the joint correction.
    """
    _check_treated(fit, unit)
    check_horizon(h)
    pat = fit.pattern
    if h > pat.n_post:
        raise DomainError(f"horizon {h} exceeds the {pat.n_post} post periods")
    base = impute_standard(fit, unit, h)
    gamma0, rho1 = _unit_moments(fit, unit)

    if spec.mode == "none":
        correction = 0.0
        variance = gamma0
    elif spec.mode == "ts":
        correction = ts_correction(fit.residuals_pre[unit], h, spec.ar_order, spec.ts_mode)
        rho_h = residual_autocorr(fit.residuals_pre[unit], h)
        kind = "plupi" if (spec.ts_mode == "iterated" and h > 1) else "plupd"
        variance = asymptotic_prediction_variance(
            gamma0, _clamp(rho1), _clamp(rho_h), h, kind
        )
    elif spec.mode == "cs" and spec.cs_lag == 0:
        theta, sel = _cs_regression(fit, unit, spec.selection)
        correction = (
            float(theta @ fit.residuals_post[sel, h - 1]) if sel.size else 0.0
        )
        if sel.size:
            Z = fit.residuals_pre[pat.n_treated :][sel]
            sigma00 = (Z @ Z.T) / pat.t0
            variance = max(gamma0 - float(theta @ sigma00 @ theta), 0.0)
        else:
            variance = gamma0
    else:
        coef, values, rss, n_train = _joint_regression(fit, unit, h, spec)
        correction = float(coef @ values) if coef.size else 0.0
        variance = max(rss / n_train, 0.0) if coef.size else gamma0

    y0_hat = base + correction
    observed = fit.panel.observed_outcome(unit, h)
    method = "standard" if spec.mode == "none" else f"pup-{spec.mode}"
    return ImputationResult(
        unit=unit,
        horizon=h,
        y0_hat=y0_hat,
        correction=correction,
        delta_hat=observed - y0_hat,
        variance=variance,
        method=method,
        gamma0=gamma0,
        rho1=rho1,
    )


def treatment_effect(
    panel: PanelDataset, results: list[ImputationResult], target
) -> EffectEstimate:
    """Pointwise or time-averaged treatment effect for one unit.

    ``target`` is either an integer horizon (pointwise pass-through) or
    ``"time_average"``, which averages the per-horizon effects over the
    whole post-period and computes the variance from the fitted error
    model: AR(1)-implied autocovariances of the (corrected) error for
    own-history and uncorrected methods, independence across horizons
    for cross-section and joint corrections.
    """
    if not results:
        raise DomainError("no imputation results supplied")
    units = {r.unit for r in results}
    if len(units) != 1:
        raise DomainError(f"results mix units {sorted(units)}")
    unit = results[0].unit
    methods = {r.method for r in results}
    if len(methods) != 1:
        raise DomainError(f"results mix methods {sorted(methods)}")
    by_h = {r.horizon: r for r in results}
    if len(by_h) != len(results):
        raise DomainError("duplicate horizons in results")

    if target != "time_average":
        h = int(target)
        check_horizon(h)
        if h not in by_h:
            raise DomainError(f"no result at horizon {h}")
        r = by_h[h]
        return EffectEstimate(
            unit=unit, target=f"pointwise({h})", value=r.delta_hat, variance=r.variance
        )

    t1 = panel.pattern.n_post
    missing = [h for h in range(1, t1 + 1) if h not in by_h]
    if missing:
        raise DomainError(f"time_average needs horizons 1..{t1}; missing {missing}")
    ordered = [by_h[h] for h in range(1, t1 + 1)]
    value = float(np.mean([r.delta_hat for r in ordered]))

    method = ordered[0].method
    gamma0 = ordered[0].gamma0
    rho = _clamp(ordered[0].rho1)
    hs = np.arange(1, t1 + 1)
    if method == "standard":
        cov = gamma0 * rho ** np.abs(hs[:, None] - hs[None, :])
    elif method == "pup-ts":
        hmin = np.minimum(hs[:, None], hs[None, :])
        cov = gamma0 * rho ** np.abs(hs[:, None] - hs[None, :]) * (1.0 - rho ** (2 * hmin))
    else:
        cov = np.diag([r.variance for r in ordered])
    variance = float(np.sum(cov)) / t1**2
    return EffectEstimate(
        unit=unit, target="time_average", value=value, variance=max(variance, 0.0)
    )
