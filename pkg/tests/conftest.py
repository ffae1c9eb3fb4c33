from __future__ import annotations

import numpy as np
import pytest

from scsense import Panel, load_csv
from scsense.cli import _bundled_path


@pytest.fixture(scope="session")
def prop99() -> Panel:
    return load_csv(_bundled_path(), treated="California", first_treated_period=1989)


@pytest.fixture()
def tiny_panel() -> Panel:
    # 3 units over 4 periods, unit A treated starting in period 3
    units = ["A", "B", "C"]
    periods = [1, 2, 3, 4]
    outcomes = np.array(
        [
            [1.0, 2.0, 3.0, 4.0],
            [1.0, 1.5, 2.0, 2.5],
            [2.0, 3.0, 4.0, 5.0],
        ]
    )
    return Panel(
        units=units,
        periods=periods,
        outcomes=outcomes,
        treated_unit="A",
        t0_index=1,
        target_index=3,
    )


def random_panel(
    rng: np.random.Generator,
    n_units: int = 6,
    n_pre: int = 8,
    n_post: int = 3,
    scale: float = 50.0,
) -> Panel:
    """Factor-structured panel so simplex fits are meaningful but inexact."""
    n_periods = n_pre + n_post
    loadings = rng.uniform(0.2, 1.8, size=(n_units, 2))
    factors = np.vstack(
        [
            np.linspace(1.0, 2.0, n_periods),
            np.sin(np.linspace(0.0, 3.0, n_periods)) + 1.5,
        ]
    )
    outcomes = scale * (loadings @ factors) + rng.normal(0.0, 0.5, size=(n_units, n_periods))
    units = [f"u{i}" for i in range(n_units)]
    return Panel(
        units=units,
        periods=list(range(2000, 2000 + n_periods)),
        outcomes=outcomes,
        treated_unit="u0",
        t0_index=n_pre - 1,
        target_index=n_periods - 1,
    )
