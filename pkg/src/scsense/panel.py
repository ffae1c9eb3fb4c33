"""Panel data model: ingestion, validation, and the index conventions every
other module relies on.

A Panel is a rectangular block of outcomes, units by periods, with one
treated unit and an integer split between pre- and post-treatment periods.
Index conventions: pre-treatment periods are 0..t0_index inclusive, the
target period of interest sits at target_index (default: the last period).
Panels are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class PanelError(Exception):
    """Base class for panel construction and validation failures."""


class MissingCell(PanelError):
    pass


class NonRectangular(PanelError):
    pass


class UnknownUnit(PanelError):
    pass


class BadPeriodOrder(PanelError):
    pass


class TooFewPrePeriods(PanelError):
    pass


class TooFewUnits(PanelError):
    pass


@dataclass(frozen=True)
class Panel:
    """Rectangular outcome panel with a single treated unit.

    outcomes is indexed (unit, period) following the order of `units` and
    `periods`. t0_index is the 0-based index of the last pre-treatment
    period; target_index points at the post-treatment period under study.
    """

    units: tuple[str, ...]
    periods: tuple[int, ...]
    outcomes: np.ndarray
    treated_unit: str
    t0_index: int
    target_index: int

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=np.float64)
        object.__setattr__(self, "units", tuple(str(u) for u in self.units))
        object.__setattr__(self, "periods", tuple(int(p) for p in self.periods))
        object.__setattr__(self, "outcomes", outcomes)
        n, t = len(self.units), len(self.periods)
        if outcomes.shape != (n, t):
            raise NonRectangular(
                f"outcomes shape {outcomes.shape} does not match {n} units x {t} periods"
            )
        if not np.all(np.isfinite(outcomes)):
            bad = np.argwhere(~np.isfinite(outcomes))[0]
            raise MissingCell(
                f"non-finite outcome for unit {self.units[bad[0]]!r}, period {self.periods[bad[1]]}"
            )
        if len(set(self.units)) != n:
            raise NonRectangular("duplicate unit identifiers")
        if any(b <= a for a, b in zip(self.periods, self.periods[1:])):
            raise BadPeriodOrder(f"periods must be strictly increasing, got {self.periods}")
        if n - 1 < 2:
            raise TooFewUnits(f"need at least 2 control units, got {n - 1}")
        if self.units.count(self.treated_unit) != 1:
            raise UnknownUnit(f"treated unit {self.treated_unit!r} not in panel units")
        if self.t0_index < 1:
            raise TooFewPrePeriods(
                f"need at least two pre-treatment periods, last pre index is {self.t0_index}"
            )
        if self.t0_index + 1 >= t:
            raise TooFewPrePeriods(
                f"no post-treatment periods: last pre index {self.t0_index} of {t} periods"
            )
        if not self.t0_index < self.target_index < t:
            raise BadPeriodOrder(
                f"target index {self.target_index} must lie in the post-treatment range "
                f"{self.t0_index + 1}..{t - 1}"
            )
        outcomes.flags.writeable = False

    @property
    def n_pre(self) -> int:
        return self.t0_index + 1

    @property
    def n_post(self) -> int:
        return len(self.periods) - self.t0_index - 1

    @property
    def control_units(self) -> tuple[str, ...]:
        return tuple(u for u in self.units if u != self.treated_unit)

    def unit_index(self, unit: str) -> int:
        try:
            return self.units.index(unit)
        except ValueError:
            raise UnknownUnit(f"unit {unit!r} not in panel units") from None

    def outcome_row(self, unit: str) -> np.ndarray:
        return self.outcomes[self.unit_index(unit)]


@dataclass(frozen=True)
class DonorView:
    """One unit singled out as (placebo) treated, the rest as its donor pool.

    x_target holds the treated-role unit's pre-treatment outcomes, X_donors
    the donors' pre-treatment outcomes with one column per donor in panel
    order. y_donors_target / y_target are the target-period outcomes. The
    full donor rows are kept so fitted trends extend across all periods.
    """

    placebo_treated: str
    donors: tuple[str, ...]
    x_target: np.ndarray
    X_donors: np.ndarray
    y_donors_target: np.ndarray
    y_target: float
    outcomes_donors: np.ndarray = field(repr=False)
    outcomes_treated: np.ndarray = field(repr=False)
    periods: tuple[int, ...] = field(repr=False)
    t0_index: int
    target_index: int

    @property
    def n_donors(self) -> int:
        return len(self.donors)

    @property
    def n_post(self) -> int:
        return len(self.periods) - self.t0_index - 1

    def post_outcomes_donors(self) -> np.ndarray:
        """Donor post-treatment outcomes, one row per donor."""
        return self.outcomes_donors[:, self.t0_index + 1 :]

    def post_outcomes_treated(self) -> np.ndarray:
        return self.outcomes_treated[self.t0_index + 1 :]


def donor_view(panel: Panel, as_treated: str, exclude: str | None = None) -> DonorView:
    """View the panel with `as_treated` in the treated role.

    The donor pool is every unit except `as_treated`, the panel's true
    treated unit, and the optional `exclude`, in panel order. Passing the
    true treated unit itself yields the main analysis view.
    """
    panel.unit_index(as_treated)
    if exclude is not None:
        if exclude == as_treated:
            raise UnknownUnit(f"exclude {exclude!r} coincides with the treated-role unit")
        panel.unit_index(exclude)
    dropped = {as_treated, panel.treated_unit, exclude}
    donors = tuple(u for u in panel.units if u not in dropped)
    if not donors:
        raise TooFewUnits("donor pool is empty")
    idx = [panel.units.index(u) for u in donors]
    pre = slice(0, panel.t0_index + 1)
    outcomes_donors = panel.outcomes[idx]
    treated_row = panel.outcome_row(as_treated)
    return DonorView(
        placebo_treated=as_treated,
        donors=donors,
        x_target=treated_row[pre],
        X_donors=outcomes_donors[:, pre].T.copy(),
        y_donors_target=outcomes_donors[:, panel.target_index].copy(),
        y_target=float(treated_row[panel.target_index]),
        outcomes_donors=outcomes_donors,
        outcomes_treated=treated_row,
        periods=panel.periods,
        t0_index=panel.t0_index,
        target_index=panel.target_index,
    )


def load_csv(
    path,
    treated: str,
    first_treated_period: int,
    target_period: int | None = None,
) -> Panel:
    """Load a long-format CSV (header exactly `unit,period,outcome`).

    Units keep their first-appearance order; periods are sorted ascending as
    integers. t0_index is the index of the period immediately before
    first_treated_period; target_period defaults to the last period.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise MissingCell(f"cannot read panel file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NonRectangular(f"{path} is empty") from None
        if [h.strip() for h in header] != ["unit", "period", "outcome"]:
            raise NonRectangular(
                f"header must be exactly 'unit,period,outcome', got {','.join(header)!r}"
            )
        cells: dict[tuple[str, int], float] = {}
        units: list[str] = []
        seen_units: set[str] = set()
        period_set: set[int] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise NonRectangular(f"line {lineno}: expected 3 fields, got {len(row)}")
            unit = row[0].strip()
            try:
                period = int(row[1].strip())
            except ValueError:
                raise BadPeriodOrder(
                    f"line {lineno}: period {row[1]!r} is not an integer"
                ) from None
            try:
                outcome = float(row[2].strip())
            except ValueError:
                raise MissingCell(
                    f"line {lineno}: outcome {row[2]!r} for unit {unit!r}, period {period} "
                    "is not a decimal literal"
                ) from None
            key = (unit, period)
            if key in cells:
                raise NonRectangular(f"duplicated (unit, period) row: {unit!r}, {period}")
            cells[key] = outcome
            if unit not in seen_units:
                seen_units.add(unit)
                units.append(unit)
            period_set.add(period)
    if not units:
        raise NonRectangular(f"{path} contains no data rows")
    periods = sorted(period_set)
    outcomes = np.empty((len(units), len(periods)), dtype=np.float64)
    for i, unit in enumerate(units):
        for j, period in enumerate(periods):
            try:
                outcomes[i, j] = cells[(unit, period)]
            except KeyError:
                raise MissingCell(f"missing outcome for unit {unit!r}, period {period}") from None
    if treated not in seen_units:
        raise UnknownUnit(f"treated unit {treated!r} not found in {path}")
    first_treated_period = int(first_treated_period)
    t0_index = sum(1 for p in periods if p < first_treated_period) - 1
    if t0_index < 1:
        raise TooFewPrePeriods(
            f"fewer than two periods precede first treated period {first_treated_period}"
        )
    if target_period is None:
        target_index = len(periods) - 1
    else:
        target_period = int(target_period)
        try:
            target_index = periods.index(target_period)
        except ValueError:
            raise BadPeriodOrder(f"target period {target_period} not in panel periods") from None
    return Panel(
        units=tuple(units),
        periods=tuple(periods),
        outcomes=outcomes,
        treated_unit=treated,
        t0_index=t0_index,
        target_index=target_index,
    )


def write_csv(panel: Panel, path) -> None:
    """Write the panel back to long format; floats as shortest round-trip reprs."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "period", "outcome"])
        for i, unit in enumerate(panel.units):
            for j, period in enumerate(panel.periods):
                writer.writerow([unit, period, repr(float(panel.outcomes[i, j]))])


def subpanel(panel: Panel, treated: str, drop: str | None = None) -> Panel:
    """A new panel with a different treated unit, optionally dropping one unit.

    Index conventions (t0_index, target_index) carry over unchanged; used by
    the placebo-of-placebo calibration where the true treated unit leaves
    the universe entirely.
    """
    panel.unit_index(treated)
    if drop == treated:
        raise ValueError(f"cannot drop the new treated unit {drop!r}")
    keep = [i for i, u in enumerate(panel.units) if u != drop]
    units = tuple(panel.units[i] for i in keep)
    return Panel(
        units=units,
        periods=panel.periods,
        outcomes=panel.outcomes[keep].copy(),
        treated_unit=treated,
        t0_index=panel.t0_index,
        target_index=panel.target_index,
    )
