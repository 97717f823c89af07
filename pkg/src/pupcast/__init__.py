"""pupcast: counterfactual imputation and prediction with predictable errors.

Point predictions and panel imputations that correct for serially or
cross-sectionally correlated errors, analytic conditional-coverage
calculators, a residual-dependence LM test, and a seeded Monte Carlo
harness for the reproduction experiments.
"""

from ._version import __version__
from .dgp import (
    Ar1Process,
    CrossSectionProcess,
    ErrorProcessSpec,
    FactorDgpSpec,
    LinearDgpSpec,
    Ma1Process,
    PRESETS,
    ar_autocovariances,
    get_preset,
    simulate_factor_dgp,
    simulate_linear_dgp,
    substream,
)
from .estimators import FactorImputer, PupPredictor
from .exceptions import (
    CovarianceError,
    DomainError,
    HorizonError,
    InsufficientDataError,
    NonstationaryError,
    OverfitError,
    PanelFormatError,
    PupcastError,
    SingularDesignError,
    ZeroVarianceError,
)
from .inference import (
    CoverageReport,
    IntervalSpec,
    LmTestReport,
    analytic_coverage_ar1,
    analytic_coverage_cs,
    analytic_coverage_ma1,
    analytic_coverage_pup,
    lm_dependence_test,
    prediction_interval,
)
from .io import RunManifest, load_panel, read_report, save_panel, write_report
from .linpred import (
    GlsFit,
    LinearFit,
    PredictionBundle,
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
from .mc import (
    Conditioning,
    McConfig,
    McCoverage,
    McReport,
    mc_coverage_oracle,
    run_factor_mc,
    run_linear_mc,
)
from .panel import (
    CorrectionSpec,
    EffectEstimate,
    FactorFit,
    ImputationResult,
    PanelDataset,
    StackedCov,
    TreatmentPattern,
    combined_correction,
    cs_correction,
    default_cs_selection,
    factor_fit_controls,
    impute_pup,
    impute_standard,
    loadings_given_factors,
    panel_blup_oracle,
    stacked_residuals,
    treatment_effect,
    ts_correction,
)

__all__ = [name for name in dir() if not name.startswith("_")]
