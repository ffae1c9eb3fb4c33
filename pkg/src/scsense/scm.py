"""Synthetic control fits: the treated unit, every placebo unit, and the
external-weights hook for estimators that are affine in control outcomes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import DEFAULT_SETTINGS, DimensionMismatch, SolveSettings, simplex_ls
from .panel import DonorView, Panel, donor_view


@dataclass(frozen=True)
class ScFit:
    """A fitted synthetic control on one donor view.

    predicted_trend extends the fitted combination across every period;
    target_residual is predicted minus observed at the target period, the
    raw material of the placebo error distribution. in_simplex is False only
    for externally supplied weights that leave the simplex.
    """

    view: DonorView
    weights: np.ndarray
    pre_error: float
    predicted_trend: np.ndarray = field(repr=False)
    target_residual: float
    perfect_prefit: bool
    in_simplex: bool = True


@dataclass(frozen=True)
class EffectEstimate:
    tau_hat: float
    target_period: int


def _assemble(view: DonorView, weights: np.ndarray, pre_error: float,
              feas_tol: float, in_simplex: bool) -> ScFit:
    weights = np.array(weights, dtype=np.float64)
    trend = view.outcomes_donors.T @ weights
    trend.flags.writeable = False
    weights.flags.writeable = False
    return ScFit(
        view=view,
        weights=weights,
        pre_error=float(pre_error),
        predicted_trend=trend,
        target_residual=float(trend[view.target_index] - view.y_target),
        perfect_prefit=pre_error < feas_tol,
        in_simplex=in_simplex,
    )


def fit(view: DonorView, settings: SolveSettings = DEFAULT_SETTINGS) -> ScFit:
    """Least-squares simplex weights on the view's pre-treatment window."""
    weights, pre_error = simplex_ls(view.X_donors, view.x_target, settings)
    return _assemble(view, weights, pre_error, settings.feas_tol, in_simplex=True)


def effect(sc_fit: ScFit) -> EffectEstimate:
    """Observed minus predicted outcome at the target period."""
    return EffectEstimate(
        tau_hat=-sc_fit.target_residual,
        target_period=sc_fit.view.periods[sc_fit.view.target_index],
    )


def placebo_fits(
    panel: Panel,
    exclude: str | None = None,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> dict[str, ScFit]:
    """One fit per control unit cast in the treated role, in panel order.

    `exclude` removes a unit entirely: it is neither fitted as a placebo
    nor available as a donor to the others. Fits are independent, so they
    run on a thread pool; results are keyed deterministically in panel order.
    """
    units = [u for u in panel.control_units if u != exclude]

    def one(unit: str) -> ScFit:
        return fit(donor_view(panel, unit, exclude=exclude), settings)

    if workers == 1 or len(units) <= 1:
        return {u: one(u) for u in units}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        fits = list(pool.map(one, units))
    return dict(zip(units, fits))


def with_external_weights(
    view: DonorView,
    weights,
    intercept: float = 0.0,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> ScFit:
    """Wrap externally chosen weights (and optional intercept) as an ScFit.

    A nonzero intercept is realized as an appended constant donor named
    "(intercept)" whose outcome is 1 in every period, carrying the intercept
    as its weight. The simplex flag reflects the actual donor weights only,
    never the intercept.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (view.n_donors,):
        raise DimensionMismatch(
            f"expected {view.n_donors} weights, got shape {weights.shape}"
        )
    in_simplex = bool(
        weights.min(initial=0.0) >= -settings.feas_tol
        and abs(float(weights.sum()) - 1.0) <= settings.feas_tol
    )
    if intercept != 0.0:
        ones = np.ones((1, len(view.periods)))
        view = DonorView(
            placebo_treated=view.placebo_treated,
            donors=view.donors + ("(intercept)",),
            x_target=view.x_target,
            X_donors=np.hstack([view.X_donors, np.ones((view.X_donors.shape[0], 1))]),
            y_donors_target=np.append(view.y_donors_target, 1.0),
            y_target=view.y_target,
            outcomes_donors=np.vstack([view.outcomes_donors, ones]),
            outcomes_treated=view.outcomes_treated,
            periods=view.periods,
            t0_index=view.t0_index,
            target_index=view.target_index,
        )
        weights = np.append(weights, float(intercept))
    pre_error = float(np.linalg.norm(view.x_target - view.X_donors @ weights))
    return _assemble(view, weights, pre_error, settings.feas_tol, in_simplex=in_simplex)
