"""Seedable data-generating processes for the simulation experiments.

Randomness convention: every stream is a numpy ``Generator`` backed by
the counter-based Philox bit generator, keyed through ``SeedSequence``
spawn keys, so replication ``r`` of a run owns the independent substream
``(seed, 0, r)`` regardless of execution order or thread count.
Gaussian draws use ``Generator.standard_normal`` (the ziggurat method).
All recursions burn in 500 periods by default before the sample starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.signal import lfilter

from .exceptions import DomainError, NonstationaryError
from .panel import PanelDataset
from .linpred import SeriesSample
from .validation import as_float_vector

__all__ = [
    "Ar1Process",
    "Ma1Process",
    "CrossSectionProcess",
    "ErrorProcessSpec",
    "ar_autocovariances",
    "LinearDgpSpec",
    "FactorDgpSpec",
    "DgpSpec",
    "PRESETS",
    "get_preset",
    "substream",
    "LinearSimulation",
    "FactorSimulation",
    "simulate_linear_dgp",
    "simulate_factor_dgp",
]

DEFAULT_BURN_IN = 500


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the spawn key ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _check_stationary_ar(ar: tuple[float, ...]) -> None:
    if not ar:
        return
    p = len(ar)
    companion = np.zeros((p, p))
    companion[0] = ar
    if p > 1:
        companion[1:, :-1] = np.eye(p - 1)
    if np.max(np.abs(np.linalg.eigvals(companion))) >= 1.0:
        raise NonstationaryError(f"AR coefficients {ar} have a root on or inside the unit circle")


def ar_autocovariances(ar, sigma_v2: float, max_lag: int) -> np.ndarray:
    """Autocovariances of a stationary AR process at lags ``0..max_lag``.

    Solves the linear system linking the first ``p+1`` autocovariances to
    the coefficients and innovation variance, then extends by recursion.
    """
    ar = tuple(float(a) for a in ar)
    if sigma_v2 <= 0.0:
        raise DomainError("sigma_v2 must be positive")
    _check_stationary_ar(ar)
    p = len(ar)
    if p == 0:
        out = np.zeros(max_lag + 1)
        out[0] = sigma_v2
        return out
    # unknowns gamma_0..gamma_p
    A = np.zeros((p + 1, p + 1))
    b = np.zeros(p + 1)
    A[0, 0] = 1.0
    for j, a in enumerate(ar, start=1):
        A[0, j] -= a
    b[0] = sigma_v2
    for k in range(1, p + 1):
        A[k, k] += 1.0
        for j, a in enumerate(ar, start=1):
            A[k, abs(k - j)] -= a
    gam = np.linalg.solve(A, b)
    out = np.empty(max(max_lag + 1, p + 1))
    out[: p + 1] = gam
    for k in range(p + 1, max_lag + 1):
        out[k] = sum(a * out[k - j] for j, a in enumerate(ar, start=1))
    return out[: max_lag + 1]


@dataclass(frozen=True)
class Ar1Process:
    """First-order autoregressive errors; ``sigma_v2`` is the innovation variance."""

    phi: float
    sigma_v2: float

    def __post_init__(self):
        if abs(self.phi) >= 1.0:
            raise NonstationaryError(f"|phi| must be < 1, got {self.phi}")
        if self.sigma_v2 <= 0.0:
            raise DomainError("sigma_v2 must be positive")

    @property
    def gamma0(self) -> float:
        return self.sigma_v2 / (1.0 - self.phi**2)


@dataclass(frozen=True)
class Ma1Process:
    """First-order moving-average errors."""

    theta: float
    sigma_v2: float

    def __post_init__(self):
        if abs(self.theta) > 1.0:
            raise DomainError(f"|theta| must be <= 1, got {self.theta}")
        if self.sigma_v2 <= 0.0:
            raise DomainError("sigma_v2 must be positive")

    @property
    def gamma0(self) -> float:
        return self.sigma_v2 * (1.0 + self.theta**2)


@dataclass(frozen=True)
class CrossSectionProcess:
    """Contemporaneous dependence of a unit's error on one control error."""

    theta1: float
    sigma_e1_2: float
    sigma00: float

    def __post_init__(self):
        if self.sigma_e1_2 <= 0.0 or self.sigma00 <= 0.0:
            raise DomainError("variances must be positive")

    @property
    def sigma_v1_2(self) -> float:
        return self.sigma_e1_2 - self.theta1**2 * self.sigma00


ErrorProcessSpec = Union[Ar1Process, Ma1Process, CrossSectionProcess]


@dataclass(frozen=True)
class LinearDgpSpec:
    """Single-equation design: AR errors plus autocorrelated regressors.

    Two independent AR(1) regressors with unit marginal variance are
    scaled by ``x_scale``; when ``x_scale`` is omitted it is calibrated
    analytically so the regression R-squared is 2/3 (signal variance
    equal to twice the error variance).
    """

    ar: tuple[float, ...]
    sigma_v2: float
    n_pre: int = 200
    n_ahead: int = 10
    beta: tuple[float, ...] = (1.0, 1.0)
    x_ar: float = 0.5
    x_scale: float | None = None
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        _check_stationary_ar(self.ar)
        if self.sigma_v2 <= 0.0:
            raise DomainError("sigma_v2 must be positive")
        if abs(self.x_ar) >= 1.0:
            raise NonstationaryError("|x_ar| must be < 1")
        if self.n_pre < len(self.beta) + 2:
            raise DomainError("n_pre too small")
        if self.n_ahead < 1:
            raise DomainError("n_ahead must be >= 1")
        if self.x_scale is None:
            signal = 2.0 * self.gamma0
            object.__setattr__(
                self, "x_scale", float(np.sqrt(signal / np.sum(np.square(self.beta))))
            )

    @property
    def gamma0(self) -> float:
        return float(ar_autocovariances(self.ar, self.sigma_v2, 0)[0])

    def autocovariances(self, max_lag: int) -> np.ndarray:
        return ar_autocovariances(self.ar, self.sigma_v2, max_lag)


@dataclass(frozen=True)
class FactorDgpSpec:
    """Two-factor panel design with one treated unit.

    The factors follow AR(1) recursions (coefficients 0.8 and 0.5 with
    innovation variances 0.5 and 0.3); loadings are standard normal.  The
    idiosyncratic errors are either serially correlated on the treated
    unit (``idio_kind="ts"``: AR(1) with coefficient 0.6) or
    contemporaneously tied to the first control (``idio_kind="cs"``:
    treated error = 0.5 x control error + noise).  The treatment adds
    ``delta`` to every treated post-period outcome.
    """

    idio_kind: str = "ts"
    n_units: int = 20
    n_treated: int = 1
    n_periods: int = 50
    t0: int = 40
    n_factors: int = 2
    factor_ar: tuple[float, ...] = (0.8, 0.5)
    factor_innovation_var: tuple[float, ...] = (0.5, 0.3)
    loading_sd: float = 1.0
    delta: float = 0.1
    idio_phi1: float = 0.6
    idio_sigma_v2: float = 0.25
    cs_weight: float = 0.5
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        if self.idio_kind not in ("ts", "cs"):
            raise DomainError(f"idio_kind must be 'ts' or 'cs', got {self.idio_kind!r}")
        if not 1 <= self.n_treated < self.n_units:
            raise DomainError("need 1 <= n_treated < n_units")
        if not 1 <= self.t0 < self.n_periods:
            raise DomainError("need 1 <= t0 < n_periods")
        if len(self.factor_ar) != self.n_factors or len(self.factor_innovation_var) != self.n_factors:
            raise DomainError("factor parameter lengths must match n_factors")
        for a in self.factor_ar:
            if abs(a) >= 1.0:
                raise NonstationaryError("factor AR coefficients must be inside the unit circle")
        if abs(self.idio_phi1) >= 1.0:
            raise NonstationaryError("|idio_phi1| must be < 1")
        if self.idio_sigma_v2 <= 0.0:
            raise DomainError("idio_sigma_v2 must be positive")
        if self.idio_kind == "cs" and self.n_units - self.n_treated < 1:
            raise DomainError("cs design needs at least one control unit")

    @property
    def n_post(self) -> int:
        return self.n_periods - self.t0


DgpSpec = Union[LinearDgpSpec, FactorDgpSpec]

#: Stable preset names for the reproduction experiments.
PRESETS: dict[str, DgpSpec] = {
    "table1-ar1": LinearDgpSpec(ar=(0.8,), sigma_v2=0.05),
    "table1-ar2": LinearDgpSpec(ar=(1.3, -0.4), sigma_v2=0.05),
    "table2-ts": FactorDgpSpec(idio_kind="ts"),
    "table2-cs": FactorDgpSpec(idio_kind="cs"),
}


def get_preset(name: str) -> DgpSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def _ar_filter(innovations: np.ndarray, ar: tuple[float, ...]) -> np.ndarray:
    """Run the all-pole recursion x_t = sum(ar_j x_{t-j}) + v_t from rest."""
    if not ar:
        return innovations
    return lfilter([1.0], np.concatenate(([1.0], -np.asarray(ar))), innovations, axis=0)


@dataclass(frozen=True)
class LinearSimulation:
    """One draw from a linear design, split into sample and future paths."""

    sample: SeriesSample
    x_future: np.ndarray
    e_future: np.ndarray
    e_pre: np.ndarray
    spec: LinearDgpSpec

    @property
    def y_future(self) -> np.ndarray:
        return self.x_future @ np.asarray(self.spec.beta) + self.e_future


@dataclass(frozen=True)
class FactorSimulation:
    """One draw from a factor panel design, with the generating truth."""

    panel: PanelDataset
    factors: np.ndarray  # (n_periods, n_factors)
    loadings: np.ndarray  # (n_units, n_factors)
    errors: np.ndarray  # (n_units, n_periods)
    spec: FactorDgpSpec

    @property
    def delta_path(self) -> np.ndarray:
        return np.full(self.spec.n_post, self.spec.delta)


def simulate_linear_dgp(
    spec: LinearDgpSpec,
    seed: int | None = None,
    conditioning: tuple[float, ...] | None = None,
    rng: np.random.Generator | None = None,
) -> LinearSimulation:
    """Draw one linear-design sample plus its future regressors and errors.

    ``conditioning`` fixes the last ``len(conditioning)`` pre-period
    errors at the given values and lets the post-period errors evolve
    from them through the true recursion (the already-drawn future
    innovations are reused, so a conditioned draw differs from the
    unconditioned one only through the overwritten state).
    """
    if rng is None:
        if seed is None:
            raise DomainError("provide either a seed or a generator")
        rng = substream(seed, 0, 0)
    k = len(spec.beta)
    total = spec.burn_in + spec.n_pre + spec.n_ahead

    zx = rng.standard_normal((total, k))
    x_all = _ar_filter(zx * np.sqrt(1.0 - spec.x_ar**2), (spec.x_ar,)) * spec.x_scale
    v = rng.standard_normal(total) * np.sqrt(spec.sigma_v2)
    e_all = _ar_filter(v, spec.ar)

    x = x_all[spec.burn_in :]
    e = e_all[spec.burn_in :].copy()
    v_tail = v[spec.burn_in :]

    if conditioning is not None:
        fixed = as_float_vector(conditioning, "conditioning")
        m = fixed.shape[0]
        if not 1 <= m <= spec.n_pre:
            raise DomainError("conditioning length must be in [1, n_pre]")
        e[spec.n_pre - m : spec.n_pre] = fixed
        p = len(spec.ar)
        for t in range(spec.n_pre, spec.n_pre + spec.n_ahead):
            past = sum(spec.ar[j - 1] * e[t - j] for j in range(1, p + 1)) if p else 0.0
            e[t] = past + v_tail[t]

    beta = np.asarray(spec.beta)
    x_pre = x[: spec.n_pre]
    e_pre = e[: spec.n_pre]
    y_pre = x_pre @ beta + e_pre
    sample = SeriesSample(y=y_pre, X=x_pre)
    return LinearSimulation(
        sample=sample,
        x_future=x[spec.n_pre :],
        e_future=e[spec.n_pre :],
        e_pre=e_pre,
        spec=spec,
    )


def simulate_factor_dgp(
    spec: FactorDgpSpec,
    seed: int | None = None,
    conditioning: tuple[float, ...] | None = None,
    fixed_control_post: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> FactorSimulation:
    """Draw one factor panel plus the generating factors, loadings, errors.

    ``conditioning`` (ts designs) fixes the tail of the treated unit's
    pre-period error and regenerates its post-period recursion.
    ``fixed_control_post`` (cs designs) overwrites the first control
    unit's post-period errors with a caller-supplied path -- drawn once
    and shared across replications -- and rebuilds the treated unit's
    post-period errors from it.
    """
    if rng is None:
        if seed is None:
            raise DomainError("provide either a seed or a generator")
        rng = substream(seed, 0, 0)
    n, t = spec.n_units, spec.n_periods
    total = spec.burn_in + t

    loadings = rng.standard_normal((n, spec.n_factors)) * spec.loading_sd
    zf = rng.standard_normal((total, spec.n_factors))
    factors = np.empty((t, spec.n_factors))
    for k in range(spec.n_factors):
        innov = zf[:, k] * np.sqrt(spec.factor_innovation_var[k])
        factors[:, k] = _ar_filter(innov, (spec.factor_ar[k],))[spec.burn_in :]

    zv = rng.standard_normal((total, n)) * np.sqrt(spec.idio_sigma_v2)
    errors = np.empty((n, t))
    if spec.idio_kind == "ts":
        errors[0] = _ar_filter(zv[:, 0], (spec.idio_phi1,))[spec.burn_in :]
        errors[1:] = zv[spec.burn_in :, 1:].T
        if conditioning is not None:
            fixed = as_float_vector(conditioning, "conditioning")
            m = fixed.shape[0]
            if not 1 <= m <= spec.t0:
                raise DomainError("conditioning length must be in [1, t0]")
            errors[0, spec.t0 - m : spec.t0] = fixed
            v0 = zv[spec.burn_in :, 0]
            for s in range(spec.t0, t):
                errors[0, s] = spec.idio_phi1 * errors[0, s - 1] + v0[s]
    else:
        errors[1:] = zv[spec.burn_in :, 1:].T
        if fixed_control_post is not None:
            path = as_float_vector(fixed_control_post, "fixed_control_post")
            if path.shape[0] != spec.n_post:
                raise DomainError(f"fixed_control_post must have length {spec.n_post}")
            errors[1, spec.t0 :] = path
        errors[0] = spec.cs_weight * errors[1] + zv[spec.burn_in :, 0]
        if conditioning is not None:
            raise DomainError("cs designs condition through fixed_control_post")

    y0 = loadings @ factors.T + errors
    y = y0.copy()
    y[: spec.n_treated, spec.t0 :] += spec.delta
    panel = PanelDataset(Y=y, n_treated=spec.n_treated, t0=spec.t0)
    return FactorSimulation(
        panel=panel, factors=factors, loadings=loadings, errors=errors, spec=spec
    )
