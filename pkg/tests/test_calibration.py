from __future__ import annotations

import math

import numpy as np
import pytest

from scsense import coverage, coverage_curves
from scsense.calibration import _min_covering_rank
from scsense.metrics import METRICS
from tests.conftest import random_panel


def test_min_covering_rank_hand_cases():
    assert _min_covering_rank([0.1, 0.2, 0.3], 0.15) == (2, 3)
    assert _min_covering_rank([0.3, 0.1, 0.2], 0.15) == (2, 3)
    assert _min_covering_rank([0.1, 0.2, 0.3], 0.0) == (1, 3)
    assert _min_covering_rank([0.1, 0.2, 0.3], 0.3) == (3, 3)
    assert _min_covering_rank([0.1, 0.2, 0.3], 0.31) == (None, 3)
    # a tie at the threshold counts as covering
    assert _min_covering_rank([0.5, 0.5], 0.5) == (1, 2)


@pytest.fixture(scope="module")
def small_curves():
    rng = np.random.default_rng(7)
    panel = random_panel(rng, n_units=7, n_pre=9, n_post=3)
    return panel, coverage_curves(panel, list(METRICS))


def test_curve_points_at_achievable_ranks(small_curves):
    panel, curves = small_curves
    n_controls = len(panel.control_units)
    n_inner = n_controls - 1
    assert set(curves) == {m.kind for m in METRICS.values()}
    for curve in curves.values():
        assert len(curve.points) == n_inner
        ps = [p for p, _ in curve.points]
        assert ps == pytest.approx([k / n_inner for k in range(1, n_inner + 1)])


def test_curve_nondecreasing_within_unit_interval(small_curves):
    _, curves = small_curves
    for curve in curves.values():
        cov = [c for _, c in curve.points]
        assert all(0.0 <= c <= 1.0 for c in cov)
        assert all(b >= a for a, b in zip(cov, cov[1:]))


def test_per_unit_ranks_consistent_with_points(small_curves):
    panel, curves = small_curves
    n_units = len(panel.control_units)
    for curve in curves.values():
        assert set(curve.per_unit_min_rank) == set(panel.control_units)
        assert panel.treated_unit not in curve.per_unit_min_rank
        for p, cov in curve.points:
            expected = (
                sum(1 for r in curve.per_unit_min_rank.values() if r <= p + 1e-12)
                / n_units
            )
            assert cov == pytest.approx(expected)
            assert cov == pytest.approx(curve.at(p))


def test_at_extremes(small_curves):
    _, curves = small_curves
    for curve in curves.values():
        assert curve.at(0.0) == 0.0 or curve.at(0.0) > 0.0
        finite = [r for r in curve.per_unit_min_rank.values() if math.isfinite(r)]
        n = len(curve.per_unit_min_rank)
        assert curve.at(1.0) == pytest.approx(len(finite) / n)
        # never-covered units show up as +inf ranks, not missing keys
        assert all(r > 0.0 for r in curve.per_unit_min_rank.values())


def test_single_metric_matches_joint_run(small_curves):
    panel, curves = small_curves
    solo = coverage(panel, "uw")
    joint = curves["UnconstrainedWeight"]
    assert solo.points == joint.points
    assert solo.per_unit_min_rank == joint.per_unit_min_rank


def test_deterministic_across_runs():
    rng = np.random.default_rng(21)
    panel = random_panel(rng, n_units=6, n_pre=8, n_post=2)
    a = coverage(panel, "cw")
    b = coverage(panel, "cw")
    assert a.points == b.points
    assert a.per_unit_min_rank == b.per_unit_min_rank


def test_inner_analyses_drop_true_treated(prop99):
    # each sub-analysis removes California, leaving 37 placebo errors per
    # control unit, so achievable ranks are k/37
    curve = coverage(prop99, "uw")
    assert len(curve.points) == 37
    assert curve.points[0][0] == pytest.approx(1 / 37)
    assert len(curve.per_unit_min_rank) == 38
    assert "California" not in curve.per_unit_min_rank
