"""Exception types raised across the toolkit."""


class PupcastError(Exception):
    """Base class for all toolkit errors."""


class SingularDesignError(PupcastError, ValueError):
    """Predictor matrix is rank deficient."""


class InsufficientDataError(PupcastError, ValueError):
    """Too few observations for the requested fit or correction."""


class HorizonError(PupcastError, ValueError):
    """Requested horizon cannot be computed from the available sample."""


class ZeroVarianceError(PupcastError, ZeroDivisionError):
    """A variance or autocorrelation denominator is exactly zero."""


class NonstationaryError(PupcastError, ValueError):
    """An estimated autoregressive root reached or crossed the unit circle."""


class CovarianceError(PupcastError, ValueError):
    """A covariance matrix is not symmetric positive definite."""


class OverfitError(PupcastError, ValueError):
    """Regressor count too large for the available sample."""


class DomainError(PupcastError, ValueError):
    """An argument is outside its mathematical domain."""


class PanelFormatError(PupcastError, ValueError):
    """A panel file or panel specification is malformed."""
