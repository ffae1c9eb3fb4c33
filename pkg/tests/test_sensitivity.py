"""End-to-end sensitivity reports: ranks, bound intervals, contrasts, JSON."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from scsense import (
    ContrastSpec,
    Panel,
    analyze,
    analyze_contrast,
    n_ratio,
    report_from_json,
    report_rows_csv,
    report_to_json,
)
from scsense.kernels import grid_oracle
from scsense.metrics import METRICS
from scsense.scm import fit
from scsense.panel import donor_view
from tests.conftest import random_panel


def _copycat_panel(rng, n_units=6):
    """Treated row equals donor row 1 exactly, so the true effect is zero."""
    base = random_panel(rng, n_units=n_units)
    outcomes = base.outcomes.copy()
    outcomes[0] = outcomes[1]
    return Panel(
        list(base.units), list(base.periods), outcomes, base.treated_unit,
        base.t0_index, base.target_index,
    )


# ------------------------------------------------------------------ reports


def test_prop99_uw_headline(prop99):
    rep = analyze(prop99, METRICS["uw"])
    assert rep.treated_unit == "California"
    assert rep.target_period == 2000
    assert rep.tau_hat == pytest.approx(-26.6, abs=0.5)
    assert rep.n_controls == 38
    assert rep.j0 == 37
    assert rep.nu == pytest.approx(36 / 38)
    assert rep.notice is None


def test_prop99_cw_headline(prop99):
    rep = analyze(prop99, METRICS["cw"])
    assert rep.j0 == 36
    assert rep.nu == pytest.approx(35 / 38)


def test_placebo_rows_sorted_and_ranked(prop99):
    rep = analyze(prop99, METRICS["uw"])
    values = [r.b_j for r in rep.placebo]
    assert values == sorted(values)
    ranks = [r.percentile_rank for r in rep.placebo]
    assert ranks == [pytest.approx((k + 1) / 38) for k in range(38)]
    assert len({r.unit for r in rep.placebo}) == 38


def test_finite_intervals_contain_tau_and_nest(prop99):
    for code in ["uw", "cw", "ce", "uw-multi"]:
        rep = analyze(prop99, METRICS[code])
        prev = None
        for row in rep.placebo:
            if not row.plottable:
                assert row.lo == -math.inf and row.hi == math.inf
                continue
            assert row.lo <= rep.tau_hat + 1e-7
            assert row.hi >= rep.tau_hat - 1e-7
            if prev is not None:
                assert row.lo <= prev[0] + 1e-6
                assert row.hi >= prev[1] - 1e-6
            prev = (row.lo, row.hi)


def test_zero_in_interval_iff_error_covers_nullifier(prop99):
    for code in ["uw", "cw", "ce", "uw-multi"]:
        rep = analyze(prop99, METRICS[code])
        for row in rep.placebo:
            covers = row.lo <= 0.0 <= row.hi
            assert covers == (row.b_j >= rep.b0), (code, row.unit)


def test_uw_interval_closed_form(prop99):
    rep = analyze(prop99, METRICS["uw"])
    ratios = {u: n_ratio(prop99, u) for u in prop99.control_units}
    view = donor_view(prop99, "California")
    for row in rep.placebo:
        sub = fit(donor_view(prop99, row.unit))
        half = abs(sub.target_residual) * ratios[row.unit]
        assert row.hi - rep.tau_hat == pytest.approx(half, abs=1e-8)
        assert rep.tau_hat - row.lo == pytest.approx(half, abs=1e-8)
        assert row.hi - row.lo == pytest.approx(
            2.0 * row.b_j * np.linalg.norm(view.y_donors_target), abs=1e-7
        )


def test_copycat_panel_zero_everything():
    rng = np.random.default_rng(2)
    panel = _copycat_panel(rng)
    rep = analyze(panel, METRICS["cw"])
    assert rep.tau_hat == pytest.approx(0.0, abs=1e-7)
    assert rep.b0 <= 1e-9
    assert rep.j0 == 1
    assert rep.nu == 0.0


def test_perfect_prefit_switches_metric_with_notice():
    rng = np.random.default_rng(2)
    panel = _copycat_panel(rng)
    rep = analyze(panel, METRICS["uw"])
    assert rep.metric.kind == "UnconstrainedWeightMulti"
    assert rep.notice is not None
    assert rep.b0 <= 1e-9


def test_relabeling_units_leaves_nu_alone():
    rng = np.random.default_rng(31)
    panel = random_panel(rng, n_units=7)
    rep1 = analyze(panel, METRICS["uw"])
    renamed = Panel(
        [f"x{u}" for u in panel.units], list(panel.periods), panel.outcomes.copy(),
        f"x{panel.treated_unit}", panel.t0_index, panel.target_index,
    )
    rep2 = analyze(renamed, METRICS["uw"])
    assert rep2.nu == rep1.nu
    assert rep2.j0 == rep1.j0


def test_scale_equivariance():
    rng = np.random.default_rng(47)
    panel = random_panel(rng, n_units=6)
    scaled = Panel(
        list(panel.units), list(panel.periods), panel.outcomes * 3.0,
        panel.treated_unit, panel.t0_index, panel.target_index,
    )
    for code in ["uw", "cw", "ce", "uw-multi"]:
        a = analyze(panel, METRICS[code])
        b = analyze(scaled, METRICS[code])
        assert b.tau_hat == pytest.approx(3.0 * a.tau_hat, rel=1e-6)
        assert b.nu == a.nu
        assert [r.unit for r in b.placebo] == [r.unit for r in a.placebo]
        for ra, rb in zip(a.placebo, b.placebo):
            assert rb.b_j == pytest.approx(ra.b_j, rel=1e-5, abs=1e-9)
            if ra.plottable:
                assert rb.lo == pytest.approx(3.0 * ra.lo, rel=1e-5, abs=1e-6)
                assert rb.hi == pytest.approx(3.0 * ra.hi, rel=1e-5, abs=1e-6)


# ------------------------------------------------------------------- ratios


def test_n_ratio_frozen_oracle():
    outcomes = np.array(
        [
            [1.0, 1.0, 9.0],
            [1.0, 2.0, 3.0],
            [2.0, 1.0, 4.0],
        ]
    )
    panel = Panel(["t", "a", "b"], [1, 2, 3], outcomes, "t", 1, 2)
    # control target outcomes are (3, 4); dropping the 3 leaves norm 4
    assert n_ratio(panel, "a") == pytest.approx(5.0 / 4.0)
    # alternative form 1 / sqrt(1 - (3/5)^2)
    assert n_ratio(panel, "a") == pytest.approx(1.0 / math.sqrt(1.0 - 0.36))
    assert n_ratio(panel, "b") == pytest.approx(5.0 / 3.0)


def test_n_ratio_zero_outcome_unit():
    outcomes = np.array(
        [
            [1.0, 1.0, 9.0],
            [1.0, 2.0, 0.0],
            [2.0, 1.0, 4.0],
        ]
    )
    panel = Panel(["t", "a", "b"], [1, 2, 3], outcomes, "t", 1, 2)
    assert n_ratio(panel, "a") == pytest.approx(1.0)


def test_n_ratio_tends_to_one_on_growing_pools():
    rng = np.random.default_rng(8)
    worst = {}
    for n_controls in [5, 50, 500]:
        n = n_controls + 1
        outcomes = rng.uniform(50.0, 150.0, size=(n, 4))
        panel = Panel([f"u{i}" for i in range(n)], [1, 2, 3, 4], outcomes, "u0", 1, 3)
        worst[n_controls] = max(n_ratio(panel, u) - 1.0 for u in panel.control_units)
        assert worst[n_controls] >= 0.0
    assert worst[50] < worst[5]
    assert worst[500] < worst[50]
    assert worst[500] < 0.05


# ---------------------------------------------------------------- contrasts


def test_point_contrast_equals_plain_analyze(prop99):
    for code in ["uw", "cw"]:
        rep = analyze(prop99, METRICS[code])
        spec = ContrastSpec.point(prop99.n_post, prop99.target_index - prop99.t0_index - 1)
        via_contrast = analyze_contrast(prop99, METRICS[code], spec)
        assert via_contrast.tau_hat == rep.tau_hat
        assert via_contrast.b0 == rep.b0
        assert [(r.unit, r.b_j, r.lo, r.hi) for r in via_contrast.placebo] == [
            (r.unit, r.b_j, r.lo, r.hi) for r in rep.placebo
        ]


def test_slope_contrast_telescopes_to_zero():
    rng = np.random.default_rng(12)
    n_units, n_periods = 5, 9
    levels = rng.uniform(10.0, 30.0, size=n_units)
    shared = np.cumsum(rng.uniform(0.5, 1.5, size=n_periods))
    outcomes = levels[:, None] + shared[None, :]
    panel = Panel([f"u{i}" for i in range(n_units)], list(range(n_periods)),
                  outcomes, "u0", 4, n_periods - 1)
    spec = ContrastSpec.slope(panel.n_post)
    rep = analyze_contrast(panel, METRICS["uw"], spec)
    assert rep.tau_hat == pytest.approx(0.0, abs=1e-9)
    assert rep.b0 <= 1e-9


def test_slope_preset_needs_two_post_periods():
    with pytest.raises(ValueError):
        ContrastSpec.slope(1)


def test_contrast_length_validation(prop99):
    bad = ContrastSpec(np.ones(3), -np.ones(3) / 3.0)
    with pytest.raises(ValueError):
        analyze_contrast(prop99, METRICS["uw"], bad)


def test_average_contrast_bounds_vs_grid_oracle():
    rng = np.random.default_rng(77)
    panel = random_panel(rng, n_units=4, n_pre=7, n_post=3, scale=1.0)
    spec = ContrastSpec.average(panel.n_post)
    rep = analyze_contrast(panel, METRICS["cw"], spec)
    view = donor_view(panel, panel.treated_unit)
    sc = fit(view)
    g = view.post_outcomes_donors() @ spec.c0
    a1 = float(spec.c1 @ view.post_outcomes_treated())
    for row in rep.placebo:
        if not row.plottable:
            continue
        feas = lambda W: ((W - sc.weights) ** 2).sum(axis=1) <= row.b_j**2
        lo, _ = grid_oracle(lambda W: W @ g, feas, 3, 1e-3)
        hi, _ = grid_oracle(lambda W: -(W @ g), feas, 3, 1e-3)
        assert row.lo == pytest.approx(a1 + lo, abs=1e-2)
        assert row.hi == pytest.approx(a1 - hi, abs=1e-2)


# ------------------------------------------------------------- serialization


def test_report_json_round_trip_identity(prop99):
    rep = analyze(prop99, METRICS["cw"])
    text = report_to_json(rep)
    again = report_to_json(report_from_json(text))
    assert text == again


def test_report_json_infinite_rows(prop99):
    rep = analyze(prop99, METRICS["cw"])
    doc = json.loads(report_to_json(rep))
    assert doc["metric"] == "cw"
    flagged = [r for r in doc["placebo"] if not r["plottable"]]
    assert len(flagged) == 2
    for r in flagged:
        assert r["B_j"] == "inf"
        assert r["lo"] == "-inf" and r["hi"] == "inf"


def test_report_csv_export(prop99):
    rep = analyze(prop99, METRICS["uw"])
    text = report_rows_csv(rep)
    lines = text.strip().splitlines()
    assert lines[0] == "percentile_rank,unit,B_j,lo,hi,plottable"
    assert len(lines) == 39
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(1 / 38)
