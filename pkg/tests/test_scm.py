"""Fit layer: simplex least-squares fits, placebo sweeps, external weights."""
from __future__ import annotations

import numpy as np
import pytest

from scsense import (
    DimensionMismatch,
    Panel,
    donor_view,
    effect,
    fit,
    placebo_fits,
    with_external_weights,
)
from scsense.kernels import grid_oracle
from tests.conftest import random_panel


def test_fit_california_effect_is_large_negative(prop99):
    est = effect(fit(donor_view(prop99, "California")))
    assert est.target_period == 2000
    assert est.tau_hat < -15.0


def test_fit_perfect_prefit_vertex(tiny_panel):
    # unit C's pre-trend is an exact copy of A's shifted by 1; build a panel
    # where the treated pre-trend equals one donor column
    outcomes = np.array(
        [
            [1.0, 1.5, 9.0, 9.0],
            [1.0, 1.5, 2.0, 2.5],
            [4.0, 9.0, 1.0, 7.0],
        ]
    )
    panel = Panel(["A", "B", "C"], [1, 2, 3, 4], outcomes, "A", 1, 3)
    sc = fit(donor_view(panel, "A"))
    assert sc.perfect_prefit
    assert sc.pre_error <= 1e-9
    assert np.allclose(sc.weights, [1.0, 0.0], atol=1e-6)


def test_fit_j2_matches_grid_oracle():
    rng = np.random.default_rng(101)
    panel = random_panel(rng, n_units=3, n_pre=6, n_post=2)
    view = donor_view(panel, panel.treated_unit)
    sc = fit(view)
    val, arg = grid_oracle(
        lambda W: np.linalg.norm(W @ view.X_donors.T - view.x_target, axis=1),
        None,
        2,
        1e-4,
    )
    assert sc.pre_error == pytest.approx(val, abs=1e-3)
    assert np.allclose(sc.weights, arg, atol=1e-3)


def test_fit_trend_and_residual_identity(prop99):
    sc = fit(donor_view(prop99, "California"))
    assert sc.predicted_trend.shape == (31,)
    want = sc.predicted_trend[prop99.target_index] - sc.view.y_target
    assert sc.target_residual == pytest.approx(want, abs=1e-12)
    assert effect(sc).tau_hat == pytest.approx(-sc.target_residual)


def test_additive_effect_recovered():
    """Inject a post-treatment shift into a donor-spanned treated unit."""
    rng = np.random.default_rng(55)
    base = random_panel(rng, n_units=5, n_pre=8, n_post=3)
    mix = np.array([0.0, 0.4, 0.35, 0.25])
    treated_row = mix @ base.outcomes[1:, :]
    delta = -7.5
    outcomes = base.outcomes.copy()
    outcomes[0, :] = treated_row
    outcomes[0, base.t0_index + 1 :] += delta
    panel = Panel(
        list(base.units), list(base.periods), outcomes, base.treated_unit,
        base.t0_index, base.target_index,
    )
    est = effect(fit(donor_view(panel, panel.treated_unit)))
    assert est.tau_hat == pytest.approx(delta, abs=1e-5)


def test_placebo_fits_counts_and_exclusion(prop99):
    fits = placebo_fits(prop99)
    assert len(fits) == 38
    assert "California" not in fits
    sub = placebo_fits(prop99, exclude="Virginia")
    assert len(sub) == 37
    assert "Virginia" not in sub
    assert all(len(f.weights) == 36 for f in sub.values())


def test_placebo_fits_identical_units_zero_residual():
    outcomes = np.tile(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), (4, 1))
    panel = Panel(["A", "B", "C", "D"], [1, 2, 3, 4, 5], outcomes, "A", 2, 4)
    for sc in placebo_fits(panel).values():
        assert sc.target_residual == pytest.approx(0.0, abs=1e-9)


def test_zero_weight_drop_invariance():
    rng = np.random.default_rng(77)
    panel = random_panel(rng, n_units=7, n_pre=9, n_post=2)
    # make one donor useless so its weight lands at zero
    outcomes = panel.outcomes.copy()
    outcomes[3, :] = 1e4
    panel = Panel(
        list(panel.units), list(panel.periods), outcomes, panel.treated_unit,
        panel.t0_index, panel.target_index,
    )
    base = fit(donor_view(panel, panel.treated_unit))
    dead = panel.units[3]
    idx = base.view.donors.index(dead)
    assert base.weights[idx] <= 1e-9
    refit = fit(donor_view(panel, panel.treated_unit, exclude=dead))
    assert refit.pre_error == pytest.approx(base.pre_error, abs=1e-7)
    assert refit.target_residual == pytest.approx(base.target_residual, abs=1e-5)
    kept = [w for i, w in enumerate(base.weights) if i != idx]
    assert np.allclose(refit.weights, kept, atol=1e-5)


def test_effect_invariant_to_donor_ordering(prop99):
    sc = fit(donor_view(prop99, "California"))
    perm = list(prop99.units)
    perm.remove("California")
    rng = np.random.default_rng(5)
    rng.shuffle(perm)
    reordered = Panel(
        perm + ["California"],
        list(prop99.periods),
        np.vstack([prop99.outcome_row(u) for u in perm] + [prop99.outcome_row("California")]),
        "California",
        prop99.t0_index,
        prop99.target_index,
    )
    sc2 = fit(donor_view(reordered, "California"))
    assert effect(sc2).tau_hat == pytest.approx(effect(sc).tau_hat, abs=1e-6)


def test_external_weights_identity(prop99):
    view = donor_view(prop99, "California")
    sc = fit(view)
    ext = with_external_weights(view, sc.weights)
    assert ext.in_simplex
    assert np.allclose(ext.predicted_trend, sc.predicted_trend)
    assert ext.target_residual == pytest.approx(sc.target_residual)


def test_external_weights_did_oracle(prop99):
    # difference-in-differences counterfactual computed directly from the
    # panel arrays, then reproduced through the external-weights hook
    view = donor_view(prop99, "California")
    J = len(view.donors)
    donors_mean = view.outcomes_donors.mean(axis=0)
    pre_gap = float(
        (view.outcomes_treated[: prop99.t0_index + 1] - donors_mean[: prop99.t0_index + 1]).mean()
    )
    did_trend = donors_mean + pre_gap

    ext = with_external_weights(view, np.full(J, 1.0 / J), intercept=pre_gap)
    assert ext.in_simplex
    assert np.allclose(ext.predicted_trend, did_trend, atol=1e-10)
    did_tau = view.y_target - did_trend[prop99.target_index]
    assert effect(ext).tau_hat == pytest.approx(did_tau, abs=1e-10)


def test_external_weights_flagging_and_shape(prop99):
    view = donor_view(prop99, "California")
    J = len(view.donors)
    flagged = with_external_weights(view, np.full(J, 0.9 / J))
    assert not flagged.in_simplex
    with pytest.raises(DimensionMismatch):
        with_external_weights(view, np.ones(J + 3))
