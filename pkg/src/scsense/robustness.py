"""Conventional robustness checks: leave-one-donor-out refits and backdated
fits validated on held-out pre-treatment periods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scm
from .kernels import DEFAULT_SETTINGS, SolveSettings
from .panel import DonorView, Panel, PanelError, donor_view
from .sensitivity import _pmap


class TooFewPeriods(PanelError):
    pass


@dataclass(frozen=True)
class LeaveUnitOutResult:
    """One donor dropped and refitted. band is the per-period [min, max]
    envelope across the base fit and every drop (shared by all results of a
    sweep); target_inside_band says whether the treated-role unit's observed
    target outcome falls inside that envelope."""

    dropped_unit: str
    refit: scm.ScFit
    trend: np.ndarray = field(repr=False)
    band: np.ndarray = field(repr=False)
    target_inside_band: bool


@dataclass(frozen=True)
class BackdateResult:
    """A fit on an early slice of the pre-treatment window. validation_errors
    are predicted-minus-observed residuals on the k held-out pre-treatment
    periods; post_predictions extend the truncated fit forward."""

    backdate_periods: int
    fit_on_truncated: scm.ScFit
    validation_errors: np.ndarray
    post_predictions: np.ndarray


def leave_unit_out(
    panel: Panel,
    as_treated: str,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> list[LeaveUnitOutResult]:
    """Refit once per positively weighted donor of the base fit.

    Donors whose base weight is numerically zero are skipped: dropping them
    cannot change the fit. The envelope includes the base fit's own trend.
    """
    base = scm.fit(donor_view(panel, as_treated), settings)
    dropped = [
        d for d, w in zip(base.view.donors, base.weights) if w > settings.feas_tol
    ]

    def one(unit: str) -> scm.ScFit:
        return scm.fit(donor_view(panel, as_treated, exclude=unit), settings)

    refits = _pmap(one, dropped, workers)
    trends = np.vstack([base.predicted_trend] + [f.predicted_trend for f in refits])
    band = np.column_stack([trends.min(axis=0), trends.max(axis=0)])
    band.flags.writeable = False
    t = panel.target_index
    observed = float(panel.outcome_row(as_treated)[t])
    inside = bool(band[t, 0] <= observed <= band[t, 1])
    return [
        LeaveUnitOutResult(
            dropped_unit=d,
            refit=f,
            trend=f.predicted_trend,
            band=band,
            target_inside_band=inside,
        )
        for d, f in zip(dropped, refits)
    ]


def backdate(
    panel: Panel,
    as_treated: str,
    k: int = 6,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> BackdateResult:
    """Fit on pre-treatment periods 0..(t0_index - k), validate on the last k.

    The default k=6 is CLI-overridable. Requires at least two fitting
    periods to remain.
    """
    k = int(k)
    if k < 1:
        raise TooFewPeriods(f"backdating needs k >= 1 held-out periods, got {k}")
    fit_end = panel.t0_index - k
    if fit_end + 1 < 2:
        raise TooFewPeriods(
            f"k={k} leaves {fit_end + 1} fitting periods; at least 2 required"
        )
    view = donor_view(panel, as_treated)
    truncated = DonorView(
        placebo_treated=view.placebo_treated,
        donors=view.donors,
        x_target=view.x_target[: fit_end + 1],
        X_donors=view.X_donors[: fit_end + 1],
        y_donors_target=view.y_donors_target,
        y_target=view.y_target,
        outcomes_donors=view.outcomes_donors,
        outcomes_treated=view.outcomes_treated,
        periods=view.periods,
        t0_index=fit_end,
        target_index=view.target_index,
    )
    fitted = scm.fit(truncated, settings)
    held_out = slice(fit_end + 1, panel.t0_index + 1)
    validation = fitted.predicted_trend[held_out] - view.outcomes_treated[held_out]
    return BackdateResult(
        backdate_periods=k,
        fit_on_truncated=fitted,
        validation_errors=validation,
        post_predictions=fitted.predicted_trend[panel.t0_index + 1 :].copy(),
    )
