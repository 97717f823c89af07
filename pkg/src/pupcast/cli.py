"""Command line interface.

Subcommands: impute, simulate, coverage, lmtest, blup.  Results go to
stdout as CSV or JSON (and to ``--output`` when given); log lines go to
stderr.  Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys

import numpy as np

from ._version import __version__
from .dgp import CrossSectionProcess, FactorDgpSpec, LinearDgpSpec, get_preset
from .exceptions import DomainError, PupcastError
from .inference import (
    IntervalSpec,
    analytic_coverage_ar1,
    analytic_coverage_cs,
    analytic_coverage_ma1,
    lm_dependence_test,
    prediction_interval,
)
from .io import RunManifest, load_panel, load_panel_config, write_report
from .linpred import residual_autocorr
from .mc import Conditioning, McConfig, run_factor_mc, run_linear_mc
from .panel import (
    CorrectionSpec,
    StackedCov,
    default_cs_selection,
    factor_fit_controls,
    impute_pup,
    impute_standard,
    panel_blup_oracle,
    stacked_residuals,
)

log = logging.getLogger("pupcast")


def parse_correction(text: str, pattern) -> CorrectionSpec:
    """Map a CLI correction token to a CorrectionSpec."""
    selection = default_cs_selection(pattern.n_controls, pattern.t0)
    if text == "none":
        return CorrectionSpec(mode="none")
    if text == "ar1":
        return CorrectionSpec(mode="ts", ar_order=1)
    if text.startswith("arp:"):
        try:
            p = int(text.split(":", 1)[1])
        except ValueError:
            raise DomainError(f"bad correction {text!r}; use arp:P with integer P") from None
        return CorrectionSpec(mode="ts", ar_order=p)
    if text == "cs":
        return CorrectionSpec(mode="cs", selection=selection)
    if text == "both":
        return CorrectionSpec(mode="both", ar_order=1, cs_lag=0, selection=selection)
    raise DomainError(f"unknown correction {text!r}; use none|ar1|arp:P|cs|both")


def _emit(text: str, output: str | None) -> None:
    sys.stdout.write(text)
    if output:
        with open(output, "w", encoding="utf-8") as f:
            f.write(text)


def _rows_to_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else str(v) for v in row])
    return buf.getvalue()


def _resolve_panel_args(args):
    cfg = load_panel_config(args.config) if getattr(args, "config", None) else {}
    treated = args.treated.split(",") if args.treated else cfg.get("treated")
    t0 = args.t0 if args.t0 is not None else cfg.get("t0")
    factors = args.factors if args.factors is not None else cfg.get("factors", 2)
    if not treated or t0 is None:
        raise DomainError("treated units and t0 are required (flags or --config)")
    return treated, int(t0), int(factors), cfg


def cmd_impute(args) -> int:
    treated, t0, factors, cfg = _resolve_panel_args(args)
    panel, ids = load_panel(args.panel, treated, t0)
    fit = factor_fit_controls(panel, factors)
    corr_token = args.correction or cfg.get("correction", "none")
    if isinstance(corr_token, dict):
        spec = CorrectionSpec(**corr_token)
    else:
        spec = parse_correction(corr_token, panel.pattern)
    hmax = args.horizons or panel.pattern.n_post
    if not 1 <= hmax <= panel.pattern.n_post:
        raise DomainError(f"--horizons must lie in [1, {panel.pattern.n_post}]")
    rows = []
    for unit in range(panel.n_treated):
        for h in range(1, hmax + 1):
            res = impute_pup(fit, unit, h, spec)
            lo, hi = prediction_interval(
                IntervalSpec(point=res.delta_hat, sd=float(np.sqrt(res.variance)), alpha=args.alpha)
            )
            rows.append(
                [
                    ids[unit],
                    h,
                    res.y0_hat,
                    res.correction,
                    res.delta_hat,
                    res.variance,
                    lo,
                    hi,
                    res.method,
                ]
            )
    header = [
        "unit",
        "horizon",
        "y0_hat",
        "correction",
        "delta_hat",
        "variance",
        "lower",
        "upper",
        "method",
    ]
    if args.format == "json":
        manifest = RunManifest.create(
            command="impute",
            config={
                "panel": args.panel,
                "treated": list(treated),
                "t0": t0,
                "factors": factors,
                "correction": corr_token,
                "horizons": hmax,
                "alpha": args.alpha,
            },
            inputs=[args.panel],
        )
        payload = {
            "manifest": manifest.to_dict(),
            "columns": header,
            "rows": [[r[0]] + [v for v in r[1:]] for r in rows],
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.output)
    else:
        _emit(_rows_to_csv(header, rows), args.output)
    return 0


def cmd_simulate(args) -> int:
    spec = get_preset(args.preset)
    conditioning = None
    if args.conditional:
        if isinstance(spec, LinearDgpSpec):
            conditioning = Conditioning(fix_pre_errors=(0.5, 1.0))
        elif spec.idio_kind == "ts":
            conditioning = Conditioning(fix_pre_errors=(1.0,))
        else:
            conditioning = Conditioning(fix_control_post=True)
    config = McConfig(
        dgp=spec,
        reps=args.reps,
        seed=args.seed,
        alpha=args.alpha,
        conditioning=conditioning,
    )
    log.info("running %s with %d replications (seed %d)", args.preset, args.reps, args.seed)
    report = run_linear_mc(config) if isinstance(spec, LinearDgpSpec) else run_factor_mc(config)
    if args.output:
        write_report(report, args.output, format=args.format)
    from .io import _report_csv

    if args.format == "json":
        sys.stdout.write(json.dumps(report.payload(), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(_report_csv(report))
    return 0


def cmd_coverage(args) -> int:
    hmax = args.hmax
    if hmax < 1:
        raise DomainError("--hmax must be >= 1")
    rows = []
    if args.process == "ar1":
        if args.phi is None or args.sigmav2 is None or args.e0 is None:
            raise DomainError("ar1 coverage needs --phi, --sigmav2 and --e0")
        for h in range(1, hmax + 1):
            rep = analytic_coverage_ar1(args.phi, args.sigmav2, args.e0, h, args.alpha)
            rows.append([h, rep.coverage, rep.standardized_bias, rep.convention])
    elif args.process == "ma1":
        if args.theta is None or args.sigmav2 is None or args.e0 is None:
            raise DomainError("ma1 coverage needs --theta, --sigmav2 and --e0")
        for h in range(1, hmax + 1):
            rep = analytic_coverage_ma1(args.theta, args.sigmav2, args.e0, h, args.alpha)
            rows.append([h, rep.coverage, rep.standardized_bias, rep.convention])
    else:
        if args.theta1 is None or args.sigmae1sq is None or args.sigma00 is None or not args.e2:
            raise DomainError("cs coverage needs --theta1, --sigmae1sq, --sigma00 and --e2")
        path = [float(v) for v in args.e2.split(",")]
        if len(path) < hmax:
            raise DomainError(f"--e2 must supply at least {hmax} values")
        reports = analytic_coverage_cs(
            args.theta1, args.sigmae1sq, args.sigma00, path[:hmax], args.alpha, args.convention
        )
        rows = [[r.horizon, r.coverage, r.standardized_bias, r.convention] for r in reports]
    _emit(_rows_to_csv(["horizon", "coverage", "bias", "convention"], rows), args.output)
    return 0


def cmd_lmtest(args) -> int:
    treated, t0, factors, _ = _resolve_panel_args(args)
    panel, ids = load_panel(args.panel, treated, t0)
    fit = factor_fit_controls(panel, factors)
    if args.unit not in ids:
        raise DomainError(f"unknown unit {args.unit!r}")
    unit = ids.index(args.unit)
    report = lm_dependence_test(
        fit.residuals_pre, p_own=args.own_lags, p_cross=args.cross_lags, unit=unit
    )
    rows = [[args.unit, report.statistic, report.df, report.p_value, report.n_obs]]
    _emit(_rows_to_csv(["unit", "statistic", "df", "p_value", "n_obs"], rows), args.output)
    return 0


def cmd_blup(args) -> int:
    treated, t0, factors, _ = _resolve_panel_args(args)
    panel, ids = load_panel(args.panel, treated, t0)
    fit = factor_fit_controls(panel, factors)
    pat = panel.pattern
    sigma = (fit.residuals_pre @ fit.residuals_pre.T) / pat.t0
    phi = np.array(
        [
            float(np.clip(residual_autocorr(fit.residuals_pre[i], 1), -0.999, 0.999))
            for i in range(pat.n_units)
        ]
    )
    cov = StackedCov(sigma=sigma, phi=phi)
    resid = stacked_residuals(fit)
    hmax = args.horizons or pat.n_post
    rows = []
    for unit in range(pat.n_treated):
        for h in range(1, hmax + 1):
            base = impute_standard(fit, unit, h)
            corr = panel_blup_oracle(cov, pat, unit, h, resid)
            y0 = base + corr
            rows.append([ids[unit], h, y0, corr, panel.observed_outcome(unit, h) - y0])
    _emit(
        _rows_to_csv(["unit", "horizon", "y0_hat", "correction", "delta_hat"], rows),
        args.output,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pupcast",
        description=(
            "Counterfactual imputation and prediction with corrections for "
            "serially or cross-sectionally correlated errors."
        ),
    )
    parser.add_argument("--version", action="version", version=f"pupcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_panel_args(p):
        p.add_argument("--panel", required=True, help="wide CSV panel (rows=units)")
        p.add_argument("--config", help="sidecar JSON with treated/t0/factors/correction")
        p.add_argument("--treated", help="comma-separated treated unit ids")
        p.add_argument("--t0", type=int, help="last pre-treatment period (1-based)")
        p.add_argument("--factors", type=int, help="number of factors (default 2)")
        p.add_argument("--output", help="also write the result to this file")

    p = sub.add_parser("impute", help="impute counterfactuals and treatment effects")
    add_panel_args(p)
    p.add_argument(
        "--correction",
        help="none | ar1 | arp:P | cs | both (default none)",
    )
    p.add_argument("--horizons", type=int, help="impute horizons 1..H (default: all post periods)")
    p.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("simulate", help="run a preset Monte Carlo experiment")
    p.add_argument("--preset", required=True, help="table1-ar1 | table1-ar2 | table2-ts | table2-cs")
    p.add_argument("--reps", type=int, default=5000, help="replications (default 5000)")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    p.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")
    p.add_argument(
        "--conditional",
        action="store_true",
        help="condition on the preset's fixed errors instead of redrawing them",
    )
    p.add_argument("--output", help="write the report to this file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="analytic conditional coverage tables")
    p.add_argument("--process", required=True, choices=("ar1", "ma1", "cs"))
    p.add_argument("--phi", type=float, help="AR(1) coefficient")
    p.add_argument("--theta", type=float, help="MA(1) coefficient")
    p.add_argument("--sigmav2", type=float, help="innovation variance")
    p.add_argument("--e0", type=float, help="conditioning error value")
    p.add_argument("--theta1", type=float, help="cross-section projection coefficient")
    p.add_argument("--sigmae1sq", type=float, help="treated-unit error variance")
    p.add_argument("--sigma00", type=float, help="control-unit error variance")
    p.add_argument("--e2", help="comma-separated control error path")
    p.add_argument(
        "--convention",
        choices=("simplified", "formula"),
        default="simplified",
        help="cross-section standardization (default simplified)",
    )
    p.add_argument("--hmax", type=int, default=5, help="largest horizon (default 5)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--output", help="also write the table to this file")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("lmtest", help="LM test for residual dependence")
    add_panel_args(p)
    p.add_argument("--unit", required=True, help="unit id to test")
    p.add_argument("--own-lags", type=int, default=1, help="own lag order (default 1)")
    p.add_argument("--cross-lags", type=int, default=0, help="cross lead/lag order (default 0)")
    p.set_defaults(func=cmd_lmtest)

    p = sub.add_parser("blup", help="exact stacked-covariance correction (small panels)")
    add_panel_args(p)
    p.add_argument("--horizons", type=int, help="horizons 1..H (default: all post periods)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument(
        "--oracle",
        action="store_true",
        help="solve the dense stacked system (guarded to small instances)",
    )
    p.set_defaults(func=cmd_blup)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PupcastError as exc:
        log.error("error: %s", exc)
        return 1
    except OSError as exc:
        log.error("error: %s", exc)
        return 1


#: Operation-style alias for the dispatch entry point.
cli_dispatch = main


if __name__ == "__main__":
    sys.exit(main())
