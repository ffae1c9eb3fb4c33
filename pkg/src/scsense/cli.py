"""Command-line front end.

Subcommands: fit, analyze, coverage, leave-unit-out, backdate. Outputs are
JSON/CSV files plus static SVG charts under --out. Exit codes: 0 success,
2 input or validation error, 3 numerical solver failure.

The bundled tobacco-consumption panel is used when --input is omitted; any
long-format CSV with header `unit,period,outcome` works with explicit
--input/--treated/--first-treated-period flags (see data/README.md for how
to rerun the other case studies from their own files).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import robustness, scm, svg
from .calibration import coverage_curves
from .kernels import KernelError, SolveSettings
from .metrics import METRICS, UndefinedMetric
from .panel import Panel, PanelError, donor_view, load_csv
from .sensitivity import analyze, report_rows_csv, report_to_json

_BUNDLED_TREATED = "California"
_BUNDLED_FIRST_TREATED = 1989


def _bundled_path() -> Path:
    return Path(str(resources.files("scsense").joinpath("data/prop99.csv")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scsense",
        description="Synthetic control fitting and misspecification sensitivity analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="long-format CSV (default: bundled tobacco panel)")
    common.add_argument("--treated", help="treated unit id")
    common.add_argument("--first-treated-period", type=int, help="first period under treatment")
    common.add_argument("--target-period", type=int, help="post-treatment period of interest")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--workers", type=int, default=None, help="thread pool size")
    common.add_argument("--feas-tol", type=float, default=None)
    common.add_argument("--opt-tol", type=float, default=None)
    common.add_argument("--max-iters", type=int, default=None)
    common.add_argument("--bisect-tol", type=float, default=None)

    metric_kw = dict(
        default="uw",
        help="comma-separated metric codes from {uw, cw, ce, uw-multi} (default: uw)",
    )
    p_fit = sub.add_parser("fit", parents=[common], help="fit the synthetic control")
    p_an = sub.add_parser("analyze", parents=[common], help="sensitivity analysis")
    p_an.add_argument("--metric", **metric_kw)
    p_cov = sub.add_parser("coverage", parents=[common], help="placebo-of-placebo calibration")
    p_cov.add_argument("--metric", **metric_kw)
    p_luo = sub.add_parser("leave-unit-out", parents=[common], help="drop-one-donor envelope")
    p_luo.add_argument("--as-treated", help="unit in the treated role (default: treated unit)")
    p_bd = sub.add_parser("backdate", parents=[common], help="backdated fit with validation")
    p_bd.add_argument("--as-treated", help="unit in the treated role (default: treated unit)")
    p_bd.add_argument("--k", type=int, default=6, help="held-out pre-treatment periods (default 6)")
    for p in (p_fit, p_an, p_cov, p_luo, p_bd):
        p.set_defaults(func=_DISPATCH[p.prog.split()[-1]])
    return parser


def _load_panel(args) -> Panel:
    if args.input is None:
        path = _bundled_path()
        treated = args.treated or _BUNDLED_TREATED
        first = args.first_treated_period or _BUNDLED_FIRST_TREATED
    else:
        path = Path(args.input)
        if args.treated is None or args.first_treated_period is None:
            raise PanelError("--treated and --first-treated-period are required with --input")
        treated, first = args.treated, args.first_treated_period
    return load_csv(path, treated, first, args.target_period)


def _settings(args) -> SolveSettings:
    defaults = SolveSettings()
    return SolveSettings(
        feas_tol=args.feas_tol if args.feas_tol is not None else defaults.feas_tol,
        opt_tol=args.opt_tol if args.opt_tol is not None else defaults.opt_tol,
        max_iters=args.max_iters if args.max_iters is not None else defaults.max_iters,
        bisect_tol=args.bisect_tol if args.bisect_tol is not None else defaults.bisect_tol,
    )


def _metrics(args) -> list[str]:
    codes = [c.strip() for c in args.metric.split(",") if c.strip()]
    if not codes:
        raise PanelError("--metric must name at least one metric code")
    for code in codes:
        if code not in METRICS:
            raise PanelError(f"unknown metric code {code!r}; choose from {sorted(METRICS)}")
    return codes


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def cmd_fit(args) -> int:
    panel = _load_panel(args)
    settings = _settings(args)
    out = _outdir(args)
    fit = scm.fit(donor_view(panel, panel.treated_unit), settings)
    estimate = scm.effect(fit)
    doc = {
        "treated_unit": panel.treated_unit,
        "target_period": estimate.target_period,
        "tau_hat": estimate.tau_hat,
        "pre_error": fit.pre_error,
        "perfect_prefit": fit.perfect_prefit,
        "weights": {d: float(w) for d, w in zip(fit.view.donors, fit.weights)},
    }
    _write(out / "fit.json", json.dumps(doc, indent=2) + "\n")
    observed = panel.outcome_row(panel.treated_unit)
    lines = ["period,observed,synthetic"]
    for i, period in enumerate(panel.periods):
        lines.append(f"{period},{observed[i]!r},{float(fit.predicted_trend[i])!r}")
    _write(out / "trend.csv", "\n".join(lines) + "\n")
    treated_year = panel.periods[panel.t0_index + 1]
    chart = svg.trend_chart(
        panel.periods,
        [
            ("observed", list(observed), "#1f77b4"),
            ("synthetic", list(fit.predicted_trend), "#ff7f0e"),
        ],
        vlines=[treated_year],
        title=f"{panel.treated_unit}: observed vs synthetic",
    )
    _write(out / "trend.svg", chart)
    return 0


def cmd_analyze(args) -> int:
    panel = _load_panel(args)
    settings = _settings(args)
    codes = _metrics(args)
    out = _outdir(args)
    reports = [analyze(panel, METRICS[c], settings, args.workers) for c in codes]
    single = len(codes) == 1
    for code, report in zip(codes, reports):
        stem = "report" if single else f"report_{code}"
        _write(out / f"{stem}.json", report_to_json(report) + "\n")
        stem = "bounds" if single else f"bounds_{code}"
        _write(out / f"{stem}.csv", report_rows_csv(report))
    title = f"{panel.treated_unit}: effect bounds vs placebo error rank"
    _write(out / "bounds.svg", svg.bounds_chart(reports, title=title))
    return 0


def cmd_coverage(args) -> int:
    panel = _load_panel(args)
    settings = _settings(args)
    codes = _metrics(args)
    out = _outdir(args)
    curves = coverage_curves(panel, [METRICS[c] for c in codes], settings, args.workers)
    ordered = [curves[METRICS[c].kind] for c in codes]
    single = len(codes) == 1
    for code, curve in zip(codes, ordered):
        stem = "coverage" if single else f"coverage_{code}"
        lines = ["p,coverage"]
        for p, share in curve.points:
            lines.append(f"{p!r},{share!r}")
        _write(out / f"{stem}.csv", "\n".join(lines) + "\n")
    _write(out / "coverage.svg", svg.coverage_chart(ordered, title="zero-effect coverage"))
    return 0


def cmd_leave_unit_out(args) -> int:
    panel = _load_panel(args)
    settings = _settings(args)
    out = _outdir(args)
    unit = args.as_treated or panel.treated_unit
    results = robustness.leave_unit_out(panel, unit, settings, args.workers)
    base = scm.fit(donor_view(panel, unit), settings)
    band = results[0].band if results else np.column_stack([base.predicted_trend] * 2)
    observed = panel.outcome_row(unit)
    lines = ["period,observed,base,lo,hi"]
    for i, period in enumerate(panel.periods):
        lines.append(
            f"{period},{observed[i]!r},{float(base.predicted_trend[i])!r},"
            f"{float(band[i, 0])!r},{float(band[i, 1])!r}"
        )
    _write(out / "envelope.csv", "\n".join(lines) + "\n")
    doc = {
        "as_treated": unit,
        "target_period": panel.periods[panel.target_index],
        "observed_target": float(observed[panel.target_index]),
        "target_inside_band": bool(results[0].target_inside_band) if results else True,
        "dropped_units": [r.dropped_unit for r in results],
    }
    _write(out / "leave_unit_out.json", json.dumps(doc, indent=2) + "\n")
    chart = svg.trend_chart(
        panel.periods,
        [
            ("observed", list(observed), "#1f77b4"),
            ("synthetic", list(base.predicted_trend), "#ff7f0e"),
        ],
        vlines=[panel.periods[panel.t0_index + 1]],
        band=(band[:, 0], band[:, 1]),
        title=f"{unit}: leave-one-donor-out envelope",
    )
    _write(out / "leave_unit_out.svg", chart)
    return 0


def cmd_backdate(args) -> int:
    panel = _load_panel(args)
    settings = _settings(args)
    out = _outdir(args)
    unit = args.as_treated or panel.treated_unit
    result = robustness.backdate(panel, unit, args.k, settings)
    fit = result.fit_on_truncated
    observed = panel.outcome_row(unit)
    first_held_out = panel.t0_index - args.k + 1
    lines = ["period,observed,predicted,residual"]
    for i, resid in enumerate(result.validation_errors):
        idx = first_held_out + i
        lines.append(
            f"{panel.periods[idx]},{observed[idx]!r},"
            f"{float(fit.predicted_trend[idx])!r},{float(resid)!r}"
        )
    _write(out / "validation.csv", "\n".join(lines) + "\n")
    doc = {
        "as_treated": unit,
        "backdate_periods": result.backdate_periods,
        "pre_error_truncated": fit.pre_error,
        "target_period": panel.periods[panel.target_index],
        "target_prediction": float(fit.predicted_trend[panel.target_index]),
        "target_residual": float(
            fit.predicted_trend[panel.target_index] - observed[panel.target_index]
        ),
        "post_predictions": [float(v) for v in result.post_predictions],
    }
    _write(out / "backdate.json", json.dumps(doc, indent=2) + "\n")
    chart = svg.trend_chart(
        panel.periods,
        [
            ("observed", list(observed), "#1f77b4"),
            ("backdated synthetic", list(fit.predicted_trend), "#ff7f0e"),
        ],
        vlines=[panel.periods[first_held_out], panel.periods[panel.t0_index + 1]],
        title=f"{unit}: backdated fit (k={args.k})",
    )
    _write(out / "backdate.svg", chart)
    return 0


_DISPATCH = {
    "fit": cmd_fit,
    "analyze": cmd_analyze,
    "coverage": cmd_coverage,
    "leave-unit-out": cmd_leave_unit_out,
    "backdate": cmd_backdate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PanelError, UndefinedMetric, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KernelError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
