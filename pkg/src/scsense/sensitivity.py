"""End-to-end sensitivity analysis.

The pipeline: fit the treated unit, fit every placebo unit, score each
placebo fit's misspecification error, find the smallest error B0 at which a
zero effect becomes plausible for the treated unit, and report per-rank
bound intervals for the effect estimate. A linear contrast generalizes the
single-period effect to averages and slopes over the post-treatment window;
the plain analysis is exactly the point contrast at the target period.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import scm
from .kernels import DEFAULT_SETTINGS, SolveSettings, ZeroNormal
from .metrics import (
    METRICS,
    MisspecError,
    MisspecMetric,
    error_vs_hyperplane,
    linear_extremes_under_cap,
    resolve_metric,
)
from .panel import Panel, donor_view


@dataclass(frozen=True)
class ContrastSpec:
    """Linear contrast over the post-treatment window.

    c1 weights the treated unit's observed post-treatment outcomes, c0 the
    (counterfactual) control arm; the estimand is c1 @ y_treated_post +
    c0 @ y_counterfactual_post. Both vectors must have one entry per
    post-treatment period.
    """

    c1: np.ndarray
    c0: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        c1 = np.asarray(self.c1, dtype=np.float64)
        c0 = np.asarray(self.c0, dtype=np.float64)
        if c1.ndim != 1 or c1.shape != c0.shape:
            raise ValueError(f"c1 and c0 must be equal-length vectors, got {c1.shape} vs {c0.shape}")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c0", c0)

    @classmethod
    def point(cls, n_post: int, target_offset: int) -> "ContrastSpec":
        """Effect at a single post-treatment period (offset into the window)."""
        if not 0 <= target_offset < n_post:
            raise ValueError(f"target offset {target_offset} outside post window of {n_post}")
        e = np.zeros(n_post)
        e[target_offset] = 1.0
        return cls(c1=e, c0=-e, name="point")

    @classmethod
    def average(cls, n_post: int) -> "ContrastSpec":
        """Average effect over the post-treatment window."""
        v = np.full(n_post, 1.0 / n_post)
        return cls(c1=v, c0=-v, name="average")

    @classmethod
    def slope(cls, n_post: int) -> "ContrastSpec":
        """Average post-treatment slope: endpoints are the first
        post-treatment and the last period."""
        if n_post < 2:
            raise ValueError(f"slope contrast needs at least 2 post periods, got {n_post}")
        v = np.zeros(n_post)
        v[-1] = 1.0 / n_post
        v[0] = -1.0 / n_post
        return cls(c1=v, c0=-v, name="slope")


@dataclass(frozen=True)
class PlaceboRow:
    """One placebo unit's error and the treated-effect bounds at that error."""

    unit: str
    b_j: float
    percentile_rank: float
    lo: float
    hi: float
    plottable: bool


@dataclass(frozen=True)
class SensitivityReport:
    metric: MisspecMetric
    tau_hat: float
    placebo: tuple[PlaceboRow, ...]
    b0: float
    j0: int
    nu: float
    treated_unit: str
    target_period: int
    contrast: str
    notice: str | None = None

    @property
    def n_controls(self) -> int:
        return len(self.placebo)


def _pmap(fn, items, workers):
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def analyze_contrast(
    panel: Panel,
    metric,
    contrast: ContrastSpec,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> SensitivityReport:
    """Sensitivity analysis of a linear contrast of post-treatment outcomes.

    Every placebo unit is fitted in the treated role; its misspecification
    error is the metric-distance from its fitted weights to the weights that
    would have reproduced its own contrast value. Bound intervals for the
    treated contrast are then computed at each placebo error, and B0 is the
    smallest error at which the interval reaches zero.
    """
    metric = resolve_metric(metric)
    tview = donor_view(panel, panel.treated_unit)
    tfit = scm.fit(tview, settings)
    notice = None
    if tfit.perfect_prefit and metric.kind == "UnconstrainedWeight":
        metric = METRICS["uw-multi"]
        notice = (
            "perfect pre-treatment fit: fitted weights may not be unique; "
            "switched to the multi-optimum weight metric"
        )
    n_post = tview.n_post
    c1 = contrast.c1
    c0 = contrast.c0
    if c1.shape != (n_post,):
        raise ValueError(
            f"contrast length {c1.shape[0]} does not match {n_post} post-treatment periods"
        )
    g = tview.post_outcomes_donors() @ c0
    a1 = float(c1 @ tview.post_outcomes_treated())
    tau_hat = a1 + float(g @ tfit.weights)

    fits = scm.placebo_fits(panel, settings=settings, workers=workers)

    def one_error(unit: str) -> MisspecError:
        f = fits[unit]
        normal = f.view.post_outcomes_donors() @ c0
        offset = float(c0 @ f.view.post_outcomes_treated())
        return error_vs_hyperplane(metric, f, normal, offset, settings)

    units = list(fits.keys())
    errors = _pmap(one_error, units, workers)
    b0 = error_vs_hyperplane(metric, tfit, g, -a1, settings).value

    order = sorted(range(len(units)), key=lambda i: (errors[i].value, units[i]))
    J = len(units)

    def one_interval(i: int) -> tuple[float, float, bool]:
        b = errors[i].value
        if math.isinf(b):
            return -math.inf, math.inf, False
        mu_lo, mu_hi = linear_extremes_under_cap(metric, tfit, g, b, settings)
        return a1 + mu_lo, a1 + mu_hi, True

    intervals = _pmap(one_interval, order, workers)
    rows = tuple(
        PlaceboRow(
            unit=units[i],
            b_j=errors[i].value,
            percentile_rank=(k + 1) / J,
            lo=lo,
            hi=hi,
            plottable=plottable,
        )
        for k, (i, (lo, hi, plottable)) in enumerate(zip(order, intervals))
    )
    j0 = 1 + sum(1 for row in rows if row.b_j <= b0)
    nu = (j0 - 1) / J
    return SensitivityReport(
        metric=metric,
        tau_hat=tau_hat,
        placebo=rows,
        b0=b0,
        j0=j0,
        nu=nu,
        treated_unit=panel.treated_unit,
        target_period=panel.periods[panel.target_index],
        contrast=contrast.name,
        notice=notice,
    )


def analyze(
    panel: Panel,
    metric,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> SensitivityReport:
    """Sensitivity analysis of the effect at the target period. Identical to
    analyze_contrast with the point contrast at the target period."""
    offset = panel.target_index - panel.t0_index - 1
    contrast = ContrastSpec.point(panel.n_post, offset)
    return analyze_contrast(panel, metric, contrast, settings, workers)


def n_ratio(panel: Panel, j: str) -> float:
    """Norm ratio by which excluding control unit j from the target-outcome
    vector shrinks its length; always >= 1 and close to 1 in large pools."""
    if j == panel.treated_unit:
        raise ValueError(f"{j!r} is the treated unit, not a control")
    panel.unit_index(j)
    controls = panel.control_units
    y_all = np.array([panel.outcome_row(u)[panel.target_index] for u in controls])
    y_minus = np.array(
        [panel.outcome_row(u)[panel.target_index] for u in controls if u != j]
    )
    denom = float(np.linalg.norm(y_minus))
    if denom == 0.0:
        raise ZeroNormal(f"donor target outcomes excluding {j!r} have zero norm")
    return float(np.linalg.norm(y_all)) / denom


# ---------------------------------------------------------------------------
# Serialization: JSON report and CSV rows. Infinities travel as the strings
# "inf"/"-inf" so the files stay standard JSON/CSV.
# ---------------------------------------------------------------------------


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _dec(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def report_to_json(report: SensitivityReport) -> str:
    doc = {
        "metric": report.metric.code,
        "contrast": report.contrast,
        "treated_unit": report.treated_unit,
        "target_period": report.target_period,
        "tau_hat": report.tau_hat,
        "B0": _enc(report.b0),
        "j0": report.j0,
        "nu": report.nu,
        "notice": report.notice,
        "placebo": [
            {
                "unit": row.unit,
                "B_j": _enc(row.b_j),
                "percentile_rank": row.percentile_rank,
                "lo": _enc(row.lo),
                "hi": _enc(row.hi),
                "plottable": row.plottable,
            }
            for row in report.placebo
        ],
    }
    return json.dumps(doc, indent=2)


def report_from_json(text: str) -> SensitivityReport:
    doc = json.loads(text)
    rows = tuple(
        PlaceboRow(
            unit=r["unit"],
            b_j=_dec(r["B_j"]),
            percentile_rank=float(r["percentile_rank"]),
            lo=_dec(r["lo"]),
            hi=_dec(r["hi"]),
            plottable=bool(r["plottable"]),
        )
        for r in doc["placebo"]
    )
    return SensitivityReport(
        metric=resolve_metric(doc["metric"]),
        tau_hat=float(doc["tau_hat"]),
        placebo=rows,
        b0=_dec(doc["B0"]),
        j0=int(doc["j0"]),
        nu=float(doc["nu"]),
        treated_unit=doc["treated_unit"],
        target_period=int(doc["target_period"]),
        contrast=doc["contrast"],
        notice=doc["notice"],
    )


def _csvnum(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def report_rows_csv(report: SensitivityReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["percentile_rank", "unit", "B_j", "lo", "hi", "plottable"])
    for row in report.placebo:
        writer.writerow(
            [
                repr(row.percentile_rank),
                row.unit,
                _csvnum(row.b_j),
                _csvnum(row.lo),
                _csvnum(row.hi),
                str(row.plottable).lower(),
            ]
        )
    return out.getvalue()
