"""Monte Carlo engine: replication, scoring, and coverage oracles.

Replications run over pre-assigned result slots, each with its own
Philox substream keyed by (seed, 0, replication), and are reduced by a
single ordered pass afterwards -- so a report is bit-identical for a
fixed (config, seed) whatever the thread count.  ``PUPCAST_THREADS``
caps the worker pool (0 or unset means automatic).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from . import linpred
from .dgp import (
    Ar1Process,
    CrossSectionProcess,
    ErrorProcessSpec,
    FactorDgpSpec,
    LinearDgpSpec,
    Ma1Process,
    simulate_factor_dgp,
    simulate_linear_dgp,
    substream,
)
from .exceptions import DomainError
from .io import RunManifest
from .panel import CorrectionSpec, factor_fit_controls, impute_pup

__all__ = [
    "Conditioning",
    "McConfig",
    "McReport",
    "McCoverage",
    "resolve_threads",
    "run_linear_mc",
    "run_factor_mc",
    "mc_coverage_oracle",
]

THREADS_ENV = "PUPCAST_THREADS"


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: explicit argument, else PUPCAST_THREADS, else auto."""
    value = requested
    if value is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if raw:
            try:
                value = int(raw)
            except ValueError:
                raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value is None or value == 0:
        return min(os.cpu_count() or 1, 8)
    if value < 0:
        raise DomainError("thread count must be nonnegative")
    return value


@dataclass(frozen=True)
class Conditioning:
    """What is held fixed across replications.

    ``fix_pre_errors`` pins the tail of the (treated unit's) pre-period
    error path; ``fix_control_post`` holds one control unit's post-period
    error path fixed at a single draw shared by all replications.
    """

    fix_pre_errors: tuple[float, ...] | None = None
    fix_control_post: bool = False

    def __post_init__(self):
        if self.fix_pre_errors is not None:
            object.__setattr__(
                self, "fix_pre_errors", tuple(float(v) for v in self.fix_pre_errors)
            )
            if len(self.fix_pre_errors) == 0:
                raise DomainError("fix_pre_errors must name at least one value")
        if self.fix_pre_errors is not None and self.fix_control_post:
            raise DomainError("choose one conditioning mode")


@dataclass(frozen=True)
class McConfig:
    """Full description of one Monte Carlo run."""

    dgp: LinearDgpSpec | FactorDgpSpec
    reps: int = 5000
    seed: int = 0
    horizons: tuple[int, ...] = tuple(range(1, 11))
    alpha: float = 0.05
    methods: tuple[str, ...] | None = None
    conditioning: Conditioning | None = None
    n_factors: int | None = None
    cs_selection: object = None
    keep_errors: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if any(h < 1 for h in self.horizons) or len(set(self.horizons)) != len(self.horizons):
            raise DomainError("horizons must be distinct positive integers")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must be in (0, 1)")
        if self.methods is not None:
            object.__setattr__(self, "methods", tuple(self.methods))
        if self.conditioning is not None:
            cond = self.conditioning
            if isinstance(self.dgp, LinearDgpSpec) and cond.fix_control_post:
                raise DomainError("linear designs have no control units to fix")
            if (
                isinstance(self.dgp, FactorDgpSpec)
                and self.dgp.idio_kind == "cs"
                and cond.fix_pre_errors is not None
            ):
                raise DomainError("cs factor designs condition on the control post path")
            if (
                isinstance(self.dgp, FactorDgpSpec)
                and self.dgp.idio_kind == "ts"
                and cond.fix_control_post
            ):
                raise DomainError("ts factor designs condition on pre-period errors")

    def echo(self) -> dict:
        d = asdict(self)
        d["dgp_kind"] = type(self.dgp).__name__
        return d


_EPS_MSE = 1e-9


@dataclass(frozen=True)
class McReport:
    """Per-method, per-horizon bias / MSE / coverage with MC standard errors."""

    methods: tuple[str, ...]
    horizons: tuple[int, ...]
    bias: np.ndarray
    mse: np.ndarray
    coverage: np.ndarray
    bias_se: np.ndarray
    mse_se: np.ndarray
    reps: int
    manifest: RunManifest
    errors: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.coverage < 0.0) or np.any(self.coverage > 1.0):
            raise DomainError("coverage must lie in [0, 1]")
        if np.any(self.mse < self.bias**2 - _EPS_MSE * (1.0 + self.mse)):
            raise DomainError("MSE below squared bias; aggregation is inconsistent")

    def _index(self, method: str) -> int:
        try:
            return self.methods.index(method)
        except ValueError:
            raise DomainError(f"no method {method!r} in report") from None

    def cell(self, method: str, horizon: int) -> dict:
        i = self._index(method)
        try:
            j = self.horizons.index(horizon)
        except ValueError:
            raise DomainError(f"no horizon {horizon} in report") from None
        return {
            "bias": float(self.bias[i, j]),
            "mse": float(self.mse[i, j]),
            "coverage": float(self.coverage[i, j]),
            "bias_se": float(self.bias_se[i, j]),
            "mse_se": float(self.mse_se[i, j]),
        }

    def avg(self, method: str) -> dict:
        i = self._index(method)
        return {
            "bias": float(np.mean(self.bias[i])),
            "mse": float(np.mean(self.mse[i])),
            "coverage": float(np.mean(self.coverage[i])),
        }

    def payload(self) -> dict:
        return {
            "manifest": self.manifest.to_dict(),
            "methods": list(self.methods),
            "horizons": list(self.horizons),
            "reps": self.reps,
            "bias": self.bias.tolist(),
            "mse": self.mse.tolist(),
            "coverage": self.coverage.tolist(),
            "bias_se": self.bias_se.tolist(),
            "mse_se": self.mse_se.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "McReport":
        return cls(
            methods=tuple(payload["methods"]),
            horizons=tuple(payload["horizons"]),
            bias=np.asarray(payload["bias"], dtype=np.float64),
            mse=np.asarray(payload["mse"], dtype=np.float64),
            coverage=np.asarray(payload["coverage"], dtype=np.float64),
            bias_se=np.asarray(payload["bias_se"], dtype=np.float64),
            mse_se=np.asarray(payload["mse_se"], dtype=np.float64),
            reps=int(payload["reps"]),
            manifest=RunManifest.from_dict(payload["manifest"]),
        )

    def same_results(self, other: "McReport") -> bool:
        """Bitwise equality of the numeric payload (manifest ignored)."""
        return (
            self.methods == other.methods
            and self.horizons == other.horizons
            and self.reps == other.reps
            and np.array_equal(self.bias, other.bias)
            and np.array_equal(self.mse, other.mse)
            and np.array_equal(self.coverage, other.coverage)
            and np.array_equal(self.bias_se, other.bias_se)
            and np.array_equal(self.mse_se, other.mse_se)
        )


def _psi_weights(ar: tuple[float, ...], h: int) -> np.ndarray:
    """Moving-average weights of an AR process up to lag h-1."""
    psi = np.zeros(h)
    psi[0] = 1.0
    for j in range(1, h):
        psi[j] = sum(ar[k - 1] * psi[j - k] for k in range(1, min(j, len(ar)) + 1))
    return psi


def _ar_point_forecast(tail: np.ndarray, ar: tuple[float, ...], h: int) -> float:
    """Iterate the AR recursion h steps from the observed tail, no noise."""
    if not ar:
        return 0.0
    state = list(tail[::-1])  # most recent first
    value = 0.0
    for _ in range(h):
        value = sum(a * state[j] for j, a in enumerate(ar))
        state = [value] + state[: len(ar) - 1]
    return float(value)


def _chunks(n: int, parts: int):
    edges = np.linspace(0, n, parts + 1, dtype=int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _aggregate(config, methods, errors, hits, command, wall) -> McReport:
    reps = config.reps
    bias = errors.mean(axis=2)
    mse = (errors**2).mean(axis=2)
    coverage = hits.mean(axis=2)
    if reps > 1:
        bias_se = errors.std(axis=2, ddof=1) / np.sqrt(reps)
        mse_se = (errors**2).std(axis=2, ddof=1) / np.sqrt(reps)
    else:
        bias_se = np.zeros_like(bias)
        mse_se = np.zeros_like(mse)
    manifest = RunManifest.create(
        command=command, config=config.echo(), seed=config.seed, wall_time_s=wall
    )
    return McReport(
        methods=methods,
        horizons=config.horizons,
        bias=bias,
        mse=mse,
        coverage=coverage,
        bias_se=bias_se,
        mse_se=mse_se,
        reps=reps,
        manifest=manifest,
        errors=errors if config.keep_errors else None,
    )


LINEAR_METHODS = ("best", "noadj", "ols", "plupi", "plupd")


def run_linear_mc(config: McConfig, threads: int | None = None) -> McReport:
    """Replicate the single-equation experiment and score every method.

    Each replication simulates a fresh sample, fits least squares, and
    predicts at every horizon with the infeasible benchmarks ("best"
    knows the coefficients, error recursion, and realized errors;
    "noadj" knows the coefficients only) and the feasible methods
    ("ols", "plupi", "plupd").  Scored prediction errors are
    ``actual - predicted``; a hit means the two-sided interval at
    ``config.alpha`` covers the actual value.
    """
    spec = config.dgp
    if not isinstance(spec, LinearDgpSpec):
        raise DomainError("run_linear_mc needs a LinearDgpSpec")
    methods = config.methods or LINEAR_METHODS
    unknown = [m for m in methods if m not in LINEAR_METHODS]
    if unknown:
        raise DomainError(f"unknown linear methods {unknown}; expected {LINEAR_METHODS}")
    horizons = config.horizons
    if max(horizons) > spec.n_ahead:
        raise DomainError(f"horizons exceed the simulated {spec.n_ahead} future periods")
    cond = config.conditioning.fix_pre_errors if config.conditioning else None

    z = float(ndtri(1.0 - config.alpha / 2.0))
    beta = np.asarray(spec.beta)
    gamma0_true = spec.gamma0
    sd_noadj = np.sqrt(gamma0_true)
    hmax = max(horizons)
    psi = _psi_weights(spec.ar, hmax)
    sd_best = {h: float(np.sqrt(spec.sigma_v2 * np.sum(psi[:h] ** 2))) for h in horizons}
    p = len(spec.ar)

    M, H = len(methods), len(horizons)
    errors = np.empty((M, H, config.reps))
    hits = np.empty((M, H, config.reps), dtype=bool)

    def one_rep(r: int) -> None:
        rng = substream(config.seed, 0, r)
        sim = simulate_linear_dgp(spec, conditioning=cond, rng=rng)
        fit = linpred.ols_fit(sim.sample)
        y_future = sim.y_future
        for j, h in enumerate(horizons):
            x_fut = sim.x_future[h - 1]
            y_true = float(y_future[h - 1])
            for i, m in enumerate(methods):
                if m == "best":
                    point = float(x_fut @ beta) + _ar_point_forecast(
                        sim.e_pre[-max(p, 1) :], spec.ar, h
                    )
                    sd = sd_best[h]
                elif m == "noadj":
                    point = float(x_fut @ beta)
                    sd = sd_noadj
                elif m == "ols":
                    b = linpred.predict_standard(fit, x_fut, h)
                    point, sd = b.point, b.sd
                elif m == "plupi":
                    b = linpred.predict_plup(fit, x_fut, h, mode="iterated")
                    point, sd = b.point, b.sd
                else:
                    b = linpred.predict_plup(fit, x_fut, h, mode="direct")
                    point, sd = b.point, b.sd
                err = y_true - point
                errors[i, j, r] = err
                hits[i, j, r] = abs(err) <= z * sd

    start = time.perf_counter()
    n_threads = resolve_threads(threads)
    if n_threads <= 1 or config.reps < 4:
        for r in range(config.reps):
            one_rep(r)
    else:

        def worker(bounds):
            for r in range(*bounds):
                one_rep(r)

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(worker, _chunks(config.reps, n_threads)))
    wall = time.perf_counter() - start
    return _aggregate(config, methods, errors, hits, "run_linear_mc", wall)


FACTOR_METHODS_TS = ("best", "pca", "pupd", "pupi")
FACTOR_METHODS_CS = ("best", "pca", "pup")


def run_factor_mc(config: McConfig, threads: int | None = None) -> McReport:
    """Replicate the factor-panel experiment and score the imputations.

    Scored errors are ``effect_estimate - true_effect`` for the first
    treated unit.  "best" knows the generating factors, loadings, and
    errors; "pca" is the uncorrected factor imputation; "pupd"/"pupi"
    add the direct/iterated own-history correction (ts designs) and
    "pup" the cross-section correction (cs designs).
    """
    spec = config.dgp
    if not isinstance(spec, FactorDgpSpec):
        raise DomainError("run_factor_mc needs a FactorDgpSpec")
    is_ts = spec.idio_kind == "ts"
    methods = config.methods or (FACTOR_METHODS_TS if is_ts else FACTOR_METHODS_CS)
    allowed = FACTOR_METHODS_TS if is_ts else FACTOR_METHODS_CS
    unknown = [m for m in methods if m not in allowed]
    if unknown:
        raise DomainError(f"unknown factor methods {unknown}; expected {allowed}")
    horizons = config.horizons
    if max(horizons) > spec.n_post:
        raise DomainError(f"horizons exceed the {spec.n_post} post periods")
    n_factors = config.n_factors or spec.n_factors

    cond_pre = None
    fixed_post = None
    if config.conditioning is not None:
        cond_pre = config.conditioning.fix_pre_errors
        if config.conditioning.fix_control_post:
            shared = substream(config.seed, 1)
            fixed_post = shared.standard_normal(spec.n_post) * np.sqrt(spec.idio_sigma_v2)

    z = float(ndtri(1.0 - config.alpha / 2.0))
    phi1 = spec.idio_phi1
    s2 = spec.idio_sigma_v2
    if is_ts:
        sd_best = {
            h: float(np.sqrt(s2 * (1.0 - phi1 ** (2 * h)) / (1.0 - phi1**2)))
            for h in horizons
        }
    else:
        sd_best = {h: float(np.sqrt(s2)) for h in horizons}
    # A wide control screen drowns the correction in post-selection noise at
    # this panel size; default to the single most-correlated control.
    selection = config.cs_selection if config.cs_selection is not None else ("top_k", 1)
    spec_none = CorrectionSpec(mode="none")
    spec_ts_d = CorrectionSpec(mode="ts", ar_order=1, ts_mode="direct")
    spec_ts_i = CorrectionSpec(mode="ts", ar_order=1, ts_mode="iterated")
    spec_cs = CorrectionSpec(mode="cs", selection=selection)

    M, H = len(methods), len(horizons)
    errors = np.empty((M, H, config.reps))
    hits = np.empty((M, H, config.reps), dtype=bool)
    delta_true = spec.delta

    def one_rep(r: int) -> None:
        rng = substream(config.seed, 0, r)
        sim = simulate_factor_dgp(
            spec, conditioning=cond_pre, fixed_control_post=fixed_post, rng=rng
        )
        ffit = factor_fit_controls(sim.panel, n_factors)
        results = {}
        for m in methods:
            if m == "pca":
                results[m] = {h: impute_pup(ffit, 0, h, spec_none) for h in horizons}
            elif m == "pupd":
                results[m] = {h: impute_pup(ffit, 0, h, spec_ts_d) for h in horizons}
            elif m == "pupi":
                results[m] = {h: impute_pup(ffit, 0, h, spec_ts_i) for h in horizons}
            elif m == "pup":
                results[m] = {h: impute_pup(ffit, 0, h, spec_cs) for h in horizons}
        for j, h in enumerate(horizons):
            t_idx = spec.t0 + h - 1
            for i, m in enumerate(methods):
                if m == "best":
                    y0 = float(sim.loadings[0] @ sim.factors[t_idx])
                    if is_ts:
                        y0 += phi1**h * float(sim.errors[0, spec.t0 - 1])
                    else:
                        y0 += spec.cs_weight * float(sim.errors[1, t_idx])
                    delta_hat = sim.panel.observed_outcome(0, h) - y0
                    sd = sd_best[h]
                else:
                    res = results[m][h]
                    delta_hat = res.delta_hat
                    sd = float(np.sqrt(res.variance))
                err = delta_hat - delta_true
                errors[i, j, r] = err
                hits[i, j, r] = abs(err) <= z * sd

    start = time.perf_counter()
    n_threads = resolve_threads(threads)
    if n_threads <= 1 or config.reps < 4:
        for r in range(config.reps):
            one_rep(r)
    else:

        def worker(bounds):
            for r in range(*bounds):
                one_rep(r)

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(worker, _chunks(config.reps, n_threads)))
    wall = time.perf_counter() - start
    return _aggregate(config, methods, errors, hits, "run_factor_mc", wall)


@dataclass(frozen=True)
class McCoverage:
    """Empirical coverage with its binomial standard error."""

    coverage: float
    se: float
    reps: int
    horizon: int
    method: str
    convention: str


def mc_coverage_oracle(
    process: ErrorProcessSpec,
    conditioning: float,
    h: int,
    reps: int = 50_000,
    alpha: float = 0.05,
    seed: int = 0,
    method: str = "standard",
    convention: str = "simplified",
) -> McCoverage:
    """Simulated conditional coverage of population-parameter intervals.

    Draws the error process conditionally, forms the standard or
    corrected interval from the true parameters, and returns the hit
    rate.  For AR(1) the conditional law is exact; for MA(1) and the
    cross-section case the ``convention`` picks the conditional scale
    (``"simplified"`` uses the marginal scale, matching the analytic
    calculators' default; ``"formula"`` uses the innovation scale, the
    exact conditional law in the cross-section case).
    """
    if reps < 1000:
        raise DomainError("reps must be >= 1000 for a meaningful coverage estimate")
    if method not in ("standard", "pup"):
        raise DomainError(f"method must be 'standard' or 'pup', got {method!r}")
    if convention not in ("simplified", "formula"):
        raise DomainError(f"unknown convention {convention!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must be in (0, 1)")
    if h < 1:
        raise DomainError("horizon must be >= 1")
    rng = substream(seed, 0, 0)
    z = float(ndtri(1.0 - alpha / 2.0))
    e0 = float(conditioning)

    if isinstance(process, Ar1Process):
        phi, s2 = process.phi, process.sigma_v2
        gamma0 = process.gamma0
        sigma_e = np.sqrt(gamma0)
        v = rng.standard_normal((reps, h)) * np.sqrt(s2)
        pows = phi ** np.arange(h - 1, -1, -1)
        e_h = phi**h * e0 + v @ pows
        if method == "standard":
            hits = np.abs(e_h) <= z * sigma_e
        else:
            omega_h = np.sqrt(gamma0 * (1.0 - phi ** (2 * h)))
            hits = np.abs(e_h - phi**h * e0) <= z * omega_h
        convention = "ar1-omega"
    elif isinstance(process, Ma1Process):
        theta, s2 = process.theta, process.sigma_v2
        gamma0 = process.gamma0
        sigma_e = np.sqrt(gamma0)
        mean = theta * e0 if h == 1 else 0.0
        e_h = mean + sigma_e * rng.standard_normal(reps)
        if method == "standard":
            hits = np.abs(e_h) <= z * sigma_e
        else:
            rho1 = theta / (1.0 + theta**2)
            corr = rho1 * e0 if h == 1 else 0.0
            width = np.sqrt(gamma0 * (1.0 - rho1**2)) if h == 1 else sigma_e
            hits = np.abs(e_h - corr) <= z * width
        convention = "simplified-sigma_e"
    elif isinstance(process, CrossSectionProcess):
        sigma_e1 = np.sqrt(process.sigma_e1_2)
        sigma_v1_2 = process.sigma_v1_2
        if convention == "formula" or method == "pup":
            if sigma_v1_2 <= 0.0:
                raise DomainError("sigma_e1_2 must exceed theta1**2 * sigma00")
        mean = process.theta1 * e0
        scale = sigma_e1 if convention == "simplified" else np.sqrt(sigma_v1_2)
        if method == "pup":
            scale = np.sqrt(sigma_v1_2)
        e_h = mean + scale * rng.standard_normal(reps)
        if method == "standard":
            hits = np.abs(e_h) <= z * sigma_e1
        else:
            hits = np.abs(e_h - mean) <= z * np.sqrt(sigma_v1_2)
    else:
        raise DomainError(f"unsupported process type {type(process).__name__}")

    coverage = float(np.mean(hits))
    se = float(np.sqrt(max(coverage * (1.0 - coverage), 1e-12) / reps))
    return McCoverage(
        coverage=coverage, se=se, reps=reps, horizon=h, method=method, convention=convention
    )
