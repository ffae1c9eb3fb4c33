"""Synthetic control fitting and misspecification sensitivity for panel data."""

from .kernels import (
    DimensionMismatch,
    DimensionTooLarge,
    Infeasible,
    KernelError,
    NoConvergence,
    SolveSettings,
    TargetHyperplane,
    ZeroNormal,
)
from .panel import (
    BadPeriodOrder,
    DonorView,
    MissingCell,
    NonRectangular,
    Panel,
    PanelError,
    TooFewPrePeriods,
    TooFewUnits,
    UnknownUnit,
    donor_view,
    load_csv,
    subpanel,
    write_csv,
)
from .scm import EffectEstimate, ScFit, effect, fit, placebo_fits, with_external_weights
from .metrics import (
    METRICS,
    MisspecError,
    MisspecMetric,
    UndefinedMetric,
    counterfactual_extremes,
    nullifying_error,
    placebo_error,
)
from .sensitivity import (
    ContrastSpec,
    PlaceboRow,
    SensitivityReport,
    analyze,
    analyze_contrast,
    n_ratio,
    report_from_json,
    report_rows_csv,
    report_to_json,
)
from .robustness import BackdateResult, LeaveUnitOutResult, TooFewPeriods, backdate, leave_unit_out
from .calibration import CoverageCurve, coverage, coverage_curves

__version__ = "0.1.0"

__all__ = [
    "SolveSettings",
    "TargetHyperplane",
    "KernelError",
    "DimensionMismatch",
    "DimensionTooLarge",
    "Infeasible",
    "NoConvergence",
    "ZeroNormal",
    "Panel",
    "DonorView",
    "PanelError",
    "MissingCell",
    "NonRectangular",
    "UnknownUnit",
    "BadPeriodOrder",
    "TooFewPrePeriods",
    "TooFewUnits",
    "donor_view",
    "load_csv",
    "write_csv",
    "subpanel",
    "ScFit",
    "EffectEstimate",
    "fit",
    "effect",
    "placebo_fits",
    "with_external_weights",
    "MisspecMetric",
    "MisspecError",
    "METRICS",
    "UndefinedMetric",
    "placebo_error",
    "nullifying_error",
    "counterfactual_extremes",
    "ContrastSpec",
    "SensitivityReport",
    "PlaceboRow",
    "analyze",
    "analyze_contrast",
    "n_ratio",
    "report_to_json",
    "report_from_json",
    "report_rows_csv",
    "LeaveUnitOutResult",
    "BackdateResult",
    "TooFewPeriods",
    "leave_unit_out",
    "backdate",
    "CoverageCurve",
    "coverage",
    "coverage_curves",
    "__version__",
]
