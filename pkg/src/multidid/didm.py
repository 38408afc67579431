"""Heterogeneity-robust static estimator for a treatment among several.

The estimator isolates one treatment by comparing consecutive-period outcome
evolutions between "switchers" (cells whose target treatment changes while
every other treatment stays put) and "stayers" (groups whose treatments all
stay put and match the switcher's previous-period treatment vector). Each
(period, baseline) stratum contributes one difference-in-differences, and the
strata are averaged with weights proportional to switcher size.

Both directions are used: cells gaining the treatment are compared to
untreated stayers, cells losing it to treated stayers. Switching cells with
no matching stayer, or whose other treatments move at the same time, are
dropped and reported. The estimate is zero by convention when no switcher
survives.

Discrete ordered (non-binary) target treatments are supported as a natural
extension: strata are formed on (previous value, new value, other-treatment
baseline) and each stratum's contrast is divided by the size of the change.
Pass ``binary_only=True`` to refuse non-binary targets instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonBinaryTreatment
from .panel import VALUE_TOL, PanelDataset


@dataclass(frozen=True)
class SwitcherCell:
    group: object
    period: object
    direction: str  # "up" or "down"
    baseline: tuple[float, ...]  # other treatments, previous period
    target_from: float
    target_to: float
    n: float


@dataclass(frozen=True)
class DroppedSwitcher:
    group: object
    period: object
    reason: str  # "other_treatment_changed" or "no_matching_stayer"


@dataclass(frozen=True)
class SwitcherSet:
    cells: tuple[SwitcherCell, ...]
    n_s: float
    dropped: tuple[DroppedSwitcher, ...]


@dataclass(frozen=True)
class DidmComponent:
    period: object
    baseline: tuple[float, ...]
    direction: str
    target_from: float
    target_to: float
    n_switchers: float
    n_stayers: float
    value: float
    weight: float


@dataclass(frozen=True)
class DidmResult:
    estimate: float
    n_s: float
    components: tuple[DidmComponent, ...]
    dropped: tuple[DroppedSwitcher, ...]
    standard_error: float | None = None

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "n_switchers": self.n_s,
            "components": [
                {
                    "t": c.period,
                    "baseline": list(c.baseline),
                    "direction": c.direction,
                    "target_from": c.target_from,
                    "target_to": c.target_to,
                    "did": c.value,
                    "weight": c.weight,
                }
                for c in self.components
            ],
            "dropped": [
                {"g": d.group, "t": d.period, "reason": d.reason}
                for d in self.dropped
            ],
            "standard_error": self.standard_error,
        }


def _changed(a: float, b: float) -> bool:
    return abs(a - b) > VALUE_TOL


def _stayer_groups(panel: PanelDataset, ti: int, target: int,
                   target_value: float, baseline: np.ndarray) -> list[int]:
    """Groups whose treatments are all unchanged over (ti-1, ti) and equal to
    (target_value, baseline)."""
    d = panel.d
    others = [j for j in range(panel.n_treatments) if j != target]
    out = []
    for gi in range(panel.n_groups):
        if _changed(d[target, gi, ti], d[target, gi, ti - 1]):
            continue
        if _changed(d[target, gi, ti - 1], target_value):
            continue
        ok = True
        for pos, j in enumerate(others):
            if _changed(d[j, gi, ti], d[j, gi, ti - 1]):
                ok = False
                break
            if _changed(d[j, gi, ti - 1], baseline[pos]):
                ok = False
                break
        if ok:
            out.append(gi)
    return out


def find_switchers(panel: PanelDataset, target: int) -> SwitcherSet:
    """Cells whose target treatment changes between consecutive periods and
    that have a matching stayer; unusable switching cells are reported."""
    d = panel.d
    others = [j for j in range(panel.n_treatments) if j != target]
    cells: list[SwitcherCell] = []
    dropped: list[DroppedSwitcher] = []
    n_s = 0.0
    for ti in range(1, panel.n_periods):
        for gi in range(panel.n_groups):
            prev = float(d[target, gi, ti - 1])
            curr = float(d[target, gi, ti])
            if not _changed(curr, prev):
                continue
            g = panel.group_labels[gi]
            t = panel.period_labels[ti]
            if any(_changed(d[j, gi, ti], d[j, gi, ti - 1]) for j in others):
                dropped.append(DroppedSwitcher(g, t, "other_treatment_changed"))
                continue
            baseline = d[others, gi, ti - 1] if others else np.empty(0)
            if not _stayer_groups(panel, ti, target, prev, baseline):
                dropped.append(DroppedSwitcher(g, t, "no_matching_stayer"))
                continue
            cell = SwitcherCell(
                group=g, period=t,
                direction="up" if curr > prev else "down",
                baseline=tuple(float(v) for v in baseline),
                target_from=prev, target_to=curr,
                n=float(panel.n[gi, ti]),
            )
            cells.append(cell)
            n_s += cell.n
    return SwitcherSet(cells=tuple(cells), n_s=n_s, dropped=tuple(dropped))


def didm(panel: PanelDataset, target: int, binary_only: bool = False) -> DidmResult:
    """Switcher-versus-stayer estimate of the target treatment's effect.

    Strata are aggregated in a fixed order (ascending period, then baseline,
    then the target transition) so the reduction is bit-reproducible.
    """
    d = panel.d
    if binary_only:
        vals = d[target]
        if np.any((np.abs(vals) > VALUE_TOL) & (np.abs(vals - 1.0) > VALUE_TOL)):
            raise NonBinaryTreatment(
                "target treatment is not binary and binary_only was requested"
            )
    switchers = find_switchers(panel, target)

    strata: dict[tuple, list[SwitcherCell]] = {}
    for cell in switchers.cells:
        ti = panel.period_index(cell.period)
        key = (ti, cell.baseline, cell.target_from, cell.target_to)
        strata.setdefault(key, []).append(cell)

    components: list[DidmComponent] = []
    estimate = 0.0
    for key in sorted(strata):
        ti, baseline, prev, curr = key
        members = strata[key]
        sw_n = sum(c.n for c in members)
        dy_sw = 0.0
        for c in members:
            gi = panel.group_index(c.group)
            dy_sw += c.n * (panel.y[gi, ti] - panel.y[gi, ti - 1])
        dy_sw /= sw_n

        stay = _stayer_groups(panel, ti, target, prev, np.asarray(baseline))
        st_n = float(sum(panel.n[gi, ti] for gi in stay))
        dy_st = sum(panel.n[gi, ti] * (panel.y[gi, ti] - panel.y[gi, ti - 1])
                    for gi in stay) / st_n

        value = (dy_sw - dy_st) / (curr - prev)
        weight = sw_n / switchers.n_s
        estimate += weight * value
        components.append(DidmComponent(
            period=panel.period_labels[ti], baseline=baseline,
            direction="up" if curr > prev else "down",
            target_from=prev, target_to=curr,
            n_switchers=sw_n, n_stayers=st_n, value=value, weight=weight,
        ))

    if switchers.n_s == 0:
        estimate = 0.0
    return DidmResult(estimate=float(estimate), n_s=switchers.n_s,
                      components=tuple(components), dropped=switchers.dropped)


def delta_s_oracle(synthetic, target: int) -> float:
    """True switcher-average effect, read off stored potential outcomes.

    Evaluates, over the switcher set of the synthetic panel, the size-weighted
    mean effect of moving the target treatment between its observed endpoint
    values while holding the other treatments at their observed values; zero
    when the set is empty.
    """
    panel = synthetic.panel
    switchers = find_switchers(panel, target)
    if switchers.n_s == 0:
        return 0.0
    total = 0.0
    for cell in switchers.cells:
        gi = panel.group_index(cell.group)
        ti = panel.period_index(cell.period)
        d_obs = panel.d[:, gi, ti].copy()
        d_hi = d_obs.copy()
        d_hi[target] = cell.target_to
        d_lo = d_obs.copy()
        d_lo[target] = cell.target_from
        effect = synthetic.potential_outcome(gi, ti, d_hi) \
            - synthetic.potential_outcome(gi, ti, d_lo)
        total += cell.n * effect / (cell.target_to - cell.target_from)
    return float(total / switchers.n_s)
