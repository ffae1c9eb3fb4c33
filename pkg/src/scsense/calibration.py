"""Placebo-of-placebo calibration: every control unit takes a turn as the
treated unit (with the true treated unit removed from the universe), and the
curve reports how often a zero effect is covered as a function of the
percentile-rank cutoff.

The inner analyses need only each placebo error and the zero-effect
threshold B0, never the bound intervals themselves: for every metric kind
the interval at error budget B contains zero exactly when B >= B0, because
the feasible weight sets grow with B and B0 is by construction the smallest
budget whose set touches the zero-effect hyperplane. That equivalence is
what keeps the full sweep (J outer runs of J-1 fits each) cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import scm
from .kernels import DEFAULT_SETTINGS, SolveSettings
from .metrics import MisspecMetric, nullifying_error, placebo_error, resolve_metric
from .panel import Panel, donor_view, subpanel
from .sensitivity import _pmap


@dataclass(frozen=True)
class CoverageCurve:
    """Coverage of the zero effect against the percentile-rank cutoff.

    points holds (cutoff rank p, share of units covered at p) at every
    achievable rank; per_unit_min_rank maps each unit to the smallest rank
    at which its own zero effect enters the bounds (+inf if it never does).
    """

    metric: MisspecMetric
    points: tuple[tuple[float, float], ...]
    per_unit_min_rank: dict[str, float]

    def at(self, p: float) -> float:
        """Coverage share at an arbitrary cutoff rank in [0, 1]."""
        n = len(self.per_unit_min_rank)
        covered = sum(1 for r in self.per_unit_min_rank.values() if r <= p + 1e-12)
        return covered / n


def _min_covering_rank(errors: list[float], b0: float) -> tuple[int | None, int]:
    """Smallest 1-based rank k with sorted error B_(k) >= b0, or None."""
    ordered = sorted(errors)
    for k, b in enumerate(ordered, start=1):
        if b >= b0:
            return k, len(ordered)
    return None, len(ordered)


def coverage_curves(
    panel: Panel,
    metrics,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> dict[str, CoverageCurve]:
    """Coverage curves for several metrics from one shared sweep of fits.

    The outer loop (one sub-analysis per control unit) parallelizes; each
    sub-analysis reuses its fits for every requested metric, which is what
    makes the all-metrics run affordable.
    """
    metrics = [resolve_metric(m) for m in metrics]
    units = list(panel.control_units)

    def one(unit: str) -> dict[str, float | None]:
        sub = subpanel(panel, treated=unit, drop=panel.treated_unit)
        tfit = scm.fit(donor_view(sub, unit), settings)
        fits = scm.placebo_fits(sub, settings=settings, workers=1)
        out: dict[str, float | None] = {}
        for metric in metrics:
            errors = [placebo_error(metric, f, settings).value for f in fits.values()]
            b0 = nullifying_error(metric, tfit, settings).value
            k, n = _min_covering_rank(errors, b0)
            out[metric.kind] = None if k is None else k / n
        return out

    per_unit = _pmap(one, units, workers)
    n_inner = len(units) - 1
    curves: dict[str, CoverageCurve] = {}
    for metric in metrics:
        ranks = {
            u: (math.inf if row[metric.kind] is None else row[metric.kind])
            for u, row in zip(units, per_unit)
        }
        points = tuple(
            (k / n_inner, sum(1 for r in ranks.values() if r <= k / n_inner + 1e-12) / len(units))
            for k in range(1, n_inner + 1)
        )
        curves[metric.kind] = CoverageCurve(
            metric=metric, points=points, per_unit_min_rank=ranks
        )
    return curves


def coverage(
    panel: Panel,
    metric,
    settings: SolveSettings = DEFAULT_SETTINGS,
    workers: int | None = None,
) -> CoverageCurve:
    """Coverage curve for a single metric."""
    metric = resolve_metric(metric)
    return coverage_curves(panel, [metric], settings, workers)[metric.kind]
