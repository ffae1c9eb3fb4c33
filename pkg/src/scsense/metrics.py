"""The four misspecification-error metrics.

Each metric answers two questions about a fitted synthetic control and a
target hyperplane {w : normal @ w = offset} (the weights that would have
predicted the target outcome exactly):

* placebo_error: how far the fitted weights are from that hyperplane, in
  the metric's own geometry;
* counterfactual_extremes: how far the predicted target outcome can move
  when the weights are allowed to drift up to a given error budget.

Kinds
-----
UnconstrainedWeight      straight-line distance in weight space; closed form.
ConstrainedWeight        distance measured inside the simplex; infinite when
                         the hyperplane misses the simplex.
ConstrainedError         relative extra pre-treatment fitting error needed to
                         predict the target exactly; infinite when impossible,
                         undefined on a perfect pre-treatment fit.
UnconstrainedWeightMulti distance from the nearest of *all* least-squares
                         optima, robust to non-unique fitted weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import (
    DEFAULT_SETTINGS,
    Infeasible,
    SolveSettings,
    TargetHyperplane,
    ZeroNormal,
)
from .scm import ScFit


class UndefinedMetric(Exception):
    """The metric is not defined for this fit (zero denominator)."""


@dataclass(frozen=True)
class MisspecMetric:
    kind: str

    _KINDS = (
        "UnconstrainedWeight",
        "ConstrainedWeight",
        "ConstrainedError",
        "UnconstrainedWeightMulti",
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}; expected one of {self._KINDS}")

    @property
    def code(self) -> str:
        return {v: k for k, v in METRICS_BY_CODE.items()}[self.kind]


UNCONSTRAINED_WEIGHT = MisspecMetric("UnconstrainedWeight")
CONSTRAINED_WEIGHT = MisspecMetric("ConstrainedWeight")
CONSTRAINED_ERROR = MisspecMetric("ConstrainedError")
UNCONSTRAINED_WEIGHT_MULTI = MisspecMetric("UnconstrainedWeightMulti")

METRICS_BY_CODE = {
    "uw": "UnconstrainedWeight",
    "cw": "ConstrainedWeight",
    "ce": "ConstrainedError",
    "uw-multi": "UnconstrainedWeightMulti",
}

METRICS: dict[str, MisspecMetric] = {
    "uw": UNCONSTRAINED_WEIGHT,
    "cw": CONSTRAINED_WEIGHT,
    "ce": CONSTRAINED_ERROR,
    "uw-multi": UNCONSTRAINED_WEIGHT_MULTI,
}


def resolve_metric(metric) -> MisspecMetric:
    """Accept a MisspecMetric, a CLI code ('uw'), or a kind name."""
    if isinstance(metric, MisspecMetric):
        return metric
    if metric in METRICS:
        return METRICS[metric]
    return MisspecMetric(str(metric))


@dataclass(frozen=True)
class MisspecError:
    """A nonnegative error value; +inf is a first-class member ordered last."""

    value: float
    metric: MisspecMetric
    unit: str

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 0:
            raise ValueError(f"misspecification error must be >= 0, got {self.value}")


def _optimal_face_range(
    fit: ScFit, c: np.ndarray, settings: SolveSettings
) -> tuple[float, float]:
    """Range of c @ w over the simplex weights fitting (weakly) as well as
    the returned optimum."""
    view = fit.view
    return kernels.linear_range_on_fitted_face(
        c, view.X_donors, view.x_target, settings,
        ls_solution=(np.asarray(fit.weights), fit.pre_error),
    )


def error_vs_hyperplane(
    metric: MisspecMetric,
    fit: ScFit,
    normal: np.ndarray,
    offset: float,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> MisspecError:
    """Distance, in the metric's geometry, from the fit to the weights set
    {w : normal @ w = offset}. The workhorse behind placebo_error and
    nullifying_error; contrast analyses call it with their own hyperplane."""
    normal = np.asarray(normal, dtype=np.float64)
    if float(np.linalg.norm(normal)) == 0.0:
        raise ZeroNormal(
            f"degenerate all-zero target vector for unit {fit.view.placebo_treated!r}"
        )
    h = TargetHyperplane(normal=normal, offset=float(offset))
    w = np.asarray(fit.weights, dtype=np.float64)
    kind = metric.kind
    if kind == "UnconstrainedWeight":
        _, value = kernels.hyperplane_project(w, h)
    elif kind == "ConstrainedWeight":
        try:
            _, value = kernels.project_simplex_hyperplane(w, h, settings)
        except Infeasible:
            value = math.inf
    elif kind == "ConstrainedError":
        if fit.perfect_prefit:
            raise UndefinedMetric(
                f"relative-error metric undefined: unit {fit.view.placebo_treated!r} "
                "has a perfect pre-treatment fit"
            )
        try:
            _, constrained = kernels.simplex_ls_on_hyperplane(
                fit.view.X_donors, fit.view.x_target, h, settings
            )
            value = max(constrained / fit.pre_error - 1.0, 0.0)
        except Infeasible:
            value = math.inf
    elif kind == "UnconstrainedWeightMulti":
        lo, hi = _optimal_face_range(fit, normal, settings)
        b = float(offset)
        value = max(lo - b, b - hi, 0.0) / float(np.linalg.norm(normal))
    else:  # pragma: no cover - MisspecMetric validates kinds
        raise ValueError(f"unknown metric kind {kind!r}")
    return MisspecError(value=float(value), metric=metric, unit=fit.view.placebo_treated)


def placebo_error(
    metric: MisspecMetric, fit: ScFit, settings: SolveSettings = DEFAULT_SETTINGS
) -> MisspecError:
    """Misspecification error of a placebo fit against its own observed
    target outcome."""
    view = fit.view
    return error_vs_hyperplane(metric, fit, view.y_donors_target, view.y_target, settings)


def nullifying_error(
    metric: MisspecMetric, treated_fit: ScFit, settings: SolveSettings = DEFAULT_SETTINGS
) -> MisspecError:
    """Smallest misspecification error at which a zero effect is plausible:
    the distance from the treated fit to weights that reproduce the observed
    treated outcome exactly. Same minimization as placebo_error; the treated
    unit's own view supplies the hyperplane."""
    view = treated_fit.view
    return error_vs_hyperplane(
        metric, treated_fit, view.y_donors_target, view.y_target, settings
    )


def linear_extremes_under_cap(
    metric: MisspecMetric,
    fit: ScFit,
    c: np.ndarray,
    cap_value: float,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> tuple[float, float]:
    """Extremes of c @ w over all weights within cap_value of the fit, in the
    metric's geometry. Infinite caps: the two unconstrained kinds release the
    weights entirely, the simplex-constrained kinds stop at the simplex."""
    c = np.asarray(c, dtype=np.float64)
    if cap_value < 0:
        raise ValueError(f"cap must be nonnegative, got {cap_value}")
    w = np.asarray(fit.weights, dtype=np.float64)
    kind = metric.kind
    if kind == "UnconstrainedWeight":
        if math.isinf(cap_value):
            return -math.inf, math.inf
        return kernels.ball_linear_extremes(c, w, cap_value)
    if kind == "ConstrainedWeight":
        if math.isinf(cap_value):
            return float(c.min()), float(c.max())
        lo, _ = kernels.min_linear_on_ball_simplex(c, w, cap_value, settings)
        hi, _ = kernels.min_linear_on_ball_simplex(-c, w, cap_value, settings)
        return lo, -hi
    if kind == "ConstrainedError":
        if math.isinf(cap_value):
            return float(c.min()), float(c.max())
        err_cap = (1.0 + cap_value) * fit.pre_error
        return kernels.extremize_linear_under_error_cap(
            c, fit.view.X_donors, fit.view.x_target, err_cap, settings,
            ls_solution=(w, fit.pre_error),
        )
    if kind == "UnconstrainedWeightMulti":
        if math.isinf(cap_value):
            return -math.inf, math.inf
        lo0, hi0 = _optimal_face_range(fit, c, settings)
        span = cap_value * float(np.linalg.norm(c))
        return lo0 - span, hi0 + span
    raise ValueError(f"unknown metric kind {kind!r}")  # pragma: no cover


def counterfactual_extremes(
    metric: MisspecMetric,
    treated_fit: ScFit,
    cap: MisspecError,
    settings: SolveSettings = DEFAULT_SETTINGS,
) -> tuple[float, float]:
    """Smallest and largest plausible counterfactual target outcomes when the
    weights may be misspecified by up to cap."""
    if cap.metric != metric:
        raise ValueError(f"cap was measured under {cap.metric.kind}, not {metric.kind}")
    return linear_extremes_under_cap(
        metric, treated_fit, treated_fit.view.y_donors_target, cap.value, settings
    )
