"""Dynamic-effect estimators for two consecutive staggered binary treatments.

Setting: both treatments turn on and never off, and no group receives the
second treatment before the first. Groups are bucketed into cohorts by the
date they adopt the first treatment. Within a cohort, groups that adopt the
second treatment are compared, horizon by horizon, to cohort mates that have
not adopted it yet; because both arms have carried the first treatment for
the same length of time, its (possibly dynamic) effect differences out as
long as its path over time is common across groups.

Per cohort f and calendar date t, the horizon-l contrast compares the
long difference Y_t - Y_{t-l-1} of groups with second-adoption date t - l
against that of cohort mates still unadopted at t; contrasts are averaged
with weights proportional to adopter size. Placebo analogues shift the same
two arms to the one-period pre-adoption window (t-l-2) -> (t-l-1), which is
usable whenever t-l-2 >= f, and have expectation zero exactly when the
first treatment's effect path is common.

Also provided: an event study of the first treatment on the second-free
subsample, the event study of the bundled (summed) treatment, a per-group
linear-trend extrapolation fallback for the second treatment, and the
group partition by adoption order used to split mixed-order applications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    HorizonOutOfRange,
    InsufficientPrePeriods,
    NoControls,
    NotStaggered,
    PathologicalDesign,
    WrongOrder,
)
from .panel import VALUE_TOL, PanelDataset


@dataclass(frozen=True)
class CohortStructure:
    """Adoption dates and cohort bookkeeping for the two staggered treatments.

    Dates are 1-based dense period indices, with T + 1 meaning "never".
    ``eligible`` lists the cohorts containing at least two groups with
    distinct post-initial second-adoption dates; ``nt[f]`` is the last date
    at which some cohort-f group is still unadopted, ``l_nt_f[f]`` the
    largest horizon estimable inside cohort f, and ``n_ell[l]`` the total
    adopter size reaching horizon l with a valid in-cohort comparison.
    """

    first: int
    second: int
    f1: np.ndarray
    f2: np.ndarray
    cohorts: dict[int, tuple[int, ...]]
    eligible: tuple[int, ...]
    nt: dict[int, int]
    l_nt_f: dict[int, int]
    l_nt: int
    n_ell: dict[int, float]


@dataclass(frozen=True)
class HorizonComponent:
    cohort: object  # first-adoption period label
    period: object
    value: float
    n_treated: float
    n_control: float
    weight: float


@dataclass(frozen=True)
class DynamicEffectResult:
    """Per-horizon estimates with their cohort-by-date components."""

    estimates: dict[int, float]
    components: dict[int, tuple[HorizonComponent, ...]]
    placebos: dict[int, float]
    standard_errors: dict[int, float] | None = None

    def to_dict(self) -> dict:
        return {
            "horizons": [
                {
                    "ell": ell,
                    "estimate": est,
                    "components": [
                        {
                            "f": c.cohort,
                            "t": c.period,
                            "did": c.value,
                            "n_treated": c.n_treated,
                            "n_control": c.n_control,
                            "weight": c.weight,
                        }
                        for c in self.components.get(ell, ())
                    ],
                }
                for ell, est in sorted(self.estimates.items())
            ],
            "placebos": [
                {"ell": ell, "estimate": est}
                for ell, est in sorted(self.placebos.items())
            ],
            "standard_errors": (
                None if self.standard_errors is None
                else [{"ell": ell, "se": se}
                      for ell, se in sorted(self.standard_errors.items())]
            ),
        }


def adoption_dates(panel: PanelDataset, k: int) -> np.ndarray:
    """First 1-based period with treatment ``k`` on per group, T + 1 if never.

    Raises NotStaggered if the treatment ever switches off.
    """
    d = panel.d[k]
    T = panel.n_periods
    if np.any(d[:, 1:] < d[:, :-1] - VALUE_TOL):
        gi, ti = np.argwhere(d[:, 1:] < d[:, :-1] - VALUE_TOL)[0]
        raise NotStaggered(
            f"treatment {k} switches off for group "
            f"{panel.group_labels[gi]!r} at period {panel.period_labels[ti + 1]!r}"
        )
    on = d > 0.5
    dates = np.full(panel.n_groups, T + 1, dtype=int)
    rows, cols = np.nonzero(on)
    for gi in range(panel.n_groups):
        hit = cols[rows == gi]
        if hit.size:
            dates[gi] = int(hit.min()) + 1
    return dates


def _validate_consecutive(panel: PanelDataset, first: int, second: int):
    panel.require_binary("staggered-design estimation")
    f1 = adoption_dates(panel, first)
    f2 = adoption_dates(panel, second)
    bad = np.nonzero(f2 < f1)[0]
    if bad.size:
        raise WrongOrder(
            f"group {panel.group_labels[bad[0]]!r} adopts the second treatment "
            f"before the first"
        )
    return f1, f2


def build_cohorts(panel: PanelDataset, first: int, second: int) -> CohortStructure:
    """Validate the consecutive staggered design and compute its cohort structure."""
    f1, f2 = _validate_consecutive(panel, first, second)
    T = panel.n_periods

    cohorts: dict[int, tuple[int, ...]] = {}
    for f in sorted(set(int(v) for v in f1)):
        cohorts[f] = tuple(int(g) for g in np.nonzero(f1 == f)[0])

    eligible = []
    for f, members in cohorts.items():
        if f > T:
            continue
        dates = sorted(int(f2[g]) for g in members)
        if any(1 < a < b for a in dates for b in dates):
            eligible.append(f)
    if not eligible:
        raise PathologicalDesign(
            "no cohort has two groups adopting the second treatment at "
            "different dates after the first period"
        )

    nt: dict[int, int] = {}
    l_nt_f: dict[int, int] = {}
    for f in eligible:
        members = cohorts[f]
        nt[f] = int(max(f2[g] for g in members)) - 1
        # horizons are measured from usable adopters only: adoption strictly
        # after the cohort date (simultaneous adopters never enter an arm)
        # and within the observation window
        usable = [int(f2[g]) for g in members if f < f2[g] <= T and f2[g] >= 2]
        if usable:
            l_nt_f[f] = nt[f] - min(usable)
    if not l_nt_f:
        raise PathologicalDesign(
            "eligible cohorts contain no usable adopter of the second treatment"
        )
    l_nt = max(l_nt_f.values())

    n_ell: dict[int, float] = {}
    for ell in range(l_nt + 1):
        total = 0.0
        for f in eligible:
            if f not in l_nt_f:
                continue
            for t in range(ell + f + 1, nt[f] + 1):
                total += sum(panel.n[g, t - 1] for g in cohorts[f]
                             if f2[g] == t - ell)
        n_ell[ell] = total

    return CohortStructure(first=first, second=second, f1=f1, f2=f2,
                           cohorts=cohorts, eligible=tuple(sorted(eligible)),
                           nt=nt, l_nt_f=l_nt_f, l_nt=l_nt, n_ell=n_ell)


def _cohort_arm_components(panel: PanelDataset, structure: CohortStructure,
                           ell: int, window: str):
    """Shared adopter-versus-not-yet components for effects and placebos.

    ``window`` selects the outcome contrast: "effect" uses the long difference
    t -> t-l-1, "placebo" the pre-adoption step (t-l-2) -> (t-l-1).
    """
    f2 = structure.f2
    out = []
    for f in structure.eligible:
        if f not in structure.l_nt_f:
            continue
        t_lo = ell + f + 1
        if window == "placebo":
            t_lo = ell + f + 2
        for t in range(t_lo, structure.nt[f] + 1):
            members = structure.cohorts[f]
            adopters = [g for g in members if f2[g] == t - ell]
            if not adopters:
                continue
            controls = [g for g in members if f2[g] > t]
            n_tr = float(sum(panel.n[g, t - 1] for g in adopters))
            n_co = float(sum(panel.n[g, t - 1] for g in controls))
            if n_co == 0:
                continue
            if window == "effect":
                hi, lo = t - 1, t - ell - 2
            else:
                hi, lo = t - ell - 2, t - ell - 3
            dy_tr = sum(panel.n[g, t - 1] * (panel.y[g, hi] - panel.y[g, lo])
                        for g in adopters) / n_tr
            dy_co = sum(panel.n[g, t - 1] * (panel.y[g, hi] - panel.y[g, lo])
                        for g in controls) / n_co
            out.append((f, t, dy_tr - dy_co, n_tr, n_co))
    return out


def did_ell(panel: PanelDataset, structure: CohortStructure,
            ell: int) -> tuple[float, tuple[HorizonComponent, ...]]:
    """Effect of the second treatment at horizon ``ell`` (periods since adoption)."""
    if not 0 <= ell <= structure.l_nt:
        raise HorizonOutOfRange(
            f"horizon {ell} outside the estimable range 0..{structure.l_nt}"
        )
    raw = _cohort_arm_components(panel, structure, ell, window="effect")
    n_ell = structure.n_ell[ell]
    components = []
    estimate = 0.0
    for f, t, value, n_tr, n_co in raw:
        weight = n_tr / n_ell
        estimate += weight * value
        components.append(HorizonComponent(
            cohort=panel.period_labels[f - 1], period=panel.period_labels[t - 1],
            value=value, n_treated=n_tr, n_control=n_co, weight=weight,
        ))
    return float(estimate), tuple(components)


def placebo_ell(panel: PanelDataset, structure: CohortStructure, ell: int) -> float:
    """Pre-adoption analogue of :func:`did_ell`; expectation zero under the
    common-evolution assumption on the first treatment's effect."""
    if not 0 <= ell <= structure.l_nt:
        raise HorizonOutOfRange(
            f"horizon {ell} outside the estimable range 0..{structure.l_nt}"
        )
    raw = _cohort_arm_components(panel, structure, ell, window="placebo")
    if not raw:
        feasible = tuple(
            l for l in range(structure.l_nt + 1)
            if _cohort_arm_components(panel, structure, l, window="placebo")
        )
        raise InsufficientPrePeriods(
            f"no pre-adoption window for horizon {ell}",
            feasible_horizons=feasible,
        )
    total_n = sum(n_tr for _, _, _, n_tr, _ in raw)
    return float(sum(n_tr * value for _, _, value, n_tr, _ in raw) / total_n)


def second_treatment_effects(panel: PanelDataset, first: int, second: int,
                             placebos: bool = True) -> DynamicEffectResult:
    """All estimable horizons of the second treatment, with placebos."""
    structure = build_cohorts(panel, first, second)
    estimates: dict[int, float] = {}
    components: dict[int, tuple[HorizonComponent, ...]] = {}
    placebo_map: dict[int, float] = {}
    for ell in range(structure.l_nt + 1):
        est, comp = did_ell(panel, structure, ell)
        estimates[ell] = est
        components[ell] = comp
        if placebos:
            try:
                placebo_map[ell] = placebo_ell(panel, structure, ell)
            except InsufficientPrePeriods:
                pass
    return DynamicEffectResult(estimates=estimates, components=components,
                               placebos=placebo_map)


def _event_study(panel: PanelDataset, adopt: np.ndarray, cap: np.ndarray,
                 placebos: bool) -> DynamicEffectResult:
    """Cohort event study of one staggered treatment.

    ``adopt[g]`` is the adoption date, ``cap[g]`` the last calendar period
    (1-based) at which group g may serve in the adopter arm. Controls at date
    t are groups with ``adopt > t``; adopters need a pre-period, so cohorts
    adopting in period 1 never enter the adopter arm.
    """
    T = panel.n_periods
    raw: dict[int, list] = {}
    for ell in range(T - 1):
        entries = []
        for t in range(2 + ell, T + 1):
            adopters = [g for g in range(panel.n_groups)
                        if adopt[g] == t - ell and adopt[g] >= 2 and t <= cap[g]]
            if not adopters:
                continue
            controls = [g for g in range(panel.n_groups) if adopt[g] > t]
            if not controls:
                continue
            n_tr = float(sum(panel.n[g, t - 1] for g in adopters))
            n_co = float(sum(panel.n[g, t - 1] for g in controls))
            dy_tr = sum(panel.n[g, t - 1] * (panel.y[g, t - 1] - panel.y[g, t - ell - 2])
                        for g in adopters) / n_tr
            dy_co = sum(panel.n[g, t - 1] * (panel.y[g, t - 1] - panel.y[g, t - ell - 2])
                        for g in controls) / n_co
            entries.append((t, dy_tr - dy_co, n_tr, n_co, adopters, controls))
        if entries:
            raw[ell] = entries
    if not raw:
        raise NoControls(
            "no adoption date has a not-yet-treated comparison group"
        )

    estimates: dict[int, float] = {}
    components: dict[int, tuple[HorizonComponent, ...]] = {}
    placebo_map: dict[int, float] = {}
    for ell, entries in raw.items():
        n_ell = sum(e[2] for e in entries)
        est = 0.0
        comp = []
        for t, value, n_tr, n_co, _, _ in entries:
            weight = n_tr / n_ell
            est += weight * value
            comp.append(HorizonComponent(
                cohort=panel.period_labels[t - ell - 1],
                period=panel.period_labels[t - 1],
                value=value, n_treated=n_tr, n_control=n_co, weight=weight,
            ))
        estimates[ell] = float(est)
        components[ell] = tuple(comp)

        if placebos:
            pl_entries = []
            for t, _, _, _, adopters, controls in entries:
                if t - ell - 3 < 0:
                    continue
                n_tr = float(sum(panel.n[g, t - 1] for g in adopters))
                n_co = float(sum(panel.n[g, t - 1] for g in controls))
                hi, lo = t - ell - 2, t - ell - 3
                dy_tr = sum(panel.n[g, t - 1] * (panel.y[g, hi] - panel.y[g, lo])
                            for g in adopters) / n_tr
                dy_co = sum(panel.n[g, t - 1] * (panel.y[g, hi] - panel.y[g, lo])
                            for g in controls) / n_co
                pl_entries.append((n_tr, dy_tr - dy_co))
            if pl_entries:
                tot = sum(n for n, _ in pl_entries)
                placebo_map[ell] = float(
                    sum(n * v for n, v in pl_entries) / tot
                )
    return DynamicEffectResult(estimates=estimates, components=components,
                               placebos=placebo_map)


def first_treatment_effects(panel: PanelDataset, first: int,
                            second: int, placebos: bool = True) -> DynamicEffectResult:
    """Event study of the first treatment on the second-treatment-free sample.

    Cells under the second treatment are unusable, so each group's horizon is
    truncated at the period before its second adoption; comparison groups are
    those that have not adopted the first treatment yet.
    """
    f1, f2 = _validate_consecutive(panel, first, second)
    return _event_study(panel, adopt=f1, cap=f2 - 1, placebos=placebos)


def combined_effects(panel: PanelDataset, first: int, second: int,
                     placebos: bool = True) -> DynamicEffectResult:
    """Event study of the bundled treatment (sum of the two indicators).

    Horizons count from the first adoption of anything; estimates mix the
    first treatment's effect with the arrival of the second, and the two
    cannot be separated for groups adopting both at once.
    """
    panel.require_binary("staggered-design estimation")
    for k in (first, second):
        adoption_dates(panel, k)  # monotonicity check
    f1 = adoption_dates(panel, first)
    f2 = adoption_dates(panel, second)
    bundle_adopt = np.minimum(f1, f2)
    cap = np.full(panel.n_groups, panel.n_periods, dtype=int)
    return _event_study(panel, adopt=bundle_adopt, cap=cap, placebos=placebos)


@dataclass(frozen=True)
class LinearTrendsResult:
    estimate: float
    contributions: tuple[tuple[object, float, float], ...]  # (group, value, weight)
    dropped: tuple[tuple[object, str], ...]

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "contributions": [
                {"g": g, "value": v, "weight": w} for g, v, w in self.contributions
            ],
            "dropped": [{"g": g, "reason": r} for g, r in self.dropped],
        }


def did_ell_linear_trends(panel: PanelDataset, structure: CohortStructure,
                          ell: int) -> LinearTrendsResult:
    """Second-treatment effect at horizon ``ell`` via per-group linear trends.

    For each adopting group, a linear trend is fit (size-weighted) on its
    outcomes between first and second adoption and extrapolated to the
    horizon date; the counterfactual needs no in-cohort control, at the cost
    of assuming the pre-adoption evolution really is linear. Groups with
    fewer than two fit points are dropped and reported.
    """
    f1, f2 = structure.f1, structure.f2
    T = panel.n_periods
    contributions = []
    dropped = []
    for g in range(panel.n_groups):
        if not f1[g] < f2[g] <= T:
            continue
        t_target = int(f2[g]) + ell
        if t_target > T:
            continue
        lo, hi = int(f1[g]), int(f2[g]) - 1
        periods = np.arange(lo, hi + 1, dtype=float)
        if periods.size < 2:
            dropped.append((panel.group_labels[g], "fewer_than_two_pre_periods"))
            continue
        yv = panel.y[g, lo - 1:hi]
        wv = panel.n[g, lo - 1:hi]
        slope, intercept = np.polyfit(periods, yv, 1, w=np.sqrt(wv))
        predicted = intercept + slope * t_target
        contributions.append(
            (panel.group_labels[g],
             float(panel.y[g, t_target - 1] - predicted),
             float(panel.n[g, t_target - 1]))
        )
    if not contributions:
        raise InsufficientPrePeriods(
            f"no group has both a two-point pre-adoption window and an "
            f"observation at horizon {ell}",
            dropped=tuple(dropped),
        )
    total = sum(w for _, _, w in contributions)
    estimate = sum(w * v for _, v, w in contributions) / total
    out = tuple((g, v, w / total) for g, v, w in contributions)
    return LinearTrendsResult(estimate=float(estimate), contributions=out,
                              dropped=tuple(dropped))


@dataclass(frozen=True)
class OrderPartition:
    """Groups split by adoption order, plus the three analysis subsamples.

    Each subsample keeps the never-treated groups so it remains usable as a
    comparison pool.
    """

    first_before_second: tuple
    second_before_first: tuple
    simultaneous: tuple
    never_treated: tuple

    @property
    def first_subsample(self) -> tuple:
        return self.first_before_second + self.never_treated

    @property
    def second_subsample(self) -> tuple:
        return self.second_before_first + self.never_treated

    @property
    def simultaneous_subsample(self) -> tuple:
        return self.simultaneous + self.never_treated

    def to_dict(self) -> dict:
        return {
            "first_before_second": list(self.first_before_second),
            "second_before_first": list(self.second_before_first),
            "simultaneous": list(self.simultaneous),
            "never_treated": list(self.never_treated),
            "subsamples": {
                "first": list(self.first_subsample),
                "second": list(self.second_subsample),
                "simultaneous": list(self.simultaneous_subsample),
            },
        }


def split_by_order(panel: PanelDataset, first: int, second: int) -> OrderPartition:
    """Partition groups by which treatment arrives first (no order required)."""
    panel.require_binary("staggered-design estimation")
    f1 = adoption_dates(panel, first)
    f2 = adoption_dates(panel, second)
    T = panel.n_periods
    fb, sb, sim, nev = [], [], [], []
    for g, label in enumerate(panel.group_labels):
        if f1[g] > T and f2[g] > T:
            nev.append(label)
        elif f1[g] < f2[g]:
            fb.append(label)
        elif f2[g] < f1[g]:
            sb.append(label)
        else:
            sim.append(label)
    return OrderPartition(first_before_second=tuple(fb),
                          second_before_first=tuple(sb),
                          simultaneous=tuple(sim), never_treated=tuple(nev))
