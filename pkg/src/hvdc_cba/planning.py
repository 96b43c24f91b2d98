"""Turn an hourly kinetic-energy series into remedial-action plans.

DI reduction is scheduled in events: each run of deficit hours is padded on
both sides, runs closer than the merge gap are joined, and the whole event
holds the largest hourly requirement rounded up to 50 MW blocks. FFR and EPC
are reserved only in the deficit hours themselves, at the hourly requirement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .core import HourlySeries
from .frequency import DI_BLOCK_MW, Action, Unreachable

Sizer = Callable[[float], float]

DEFAULT_PAD_H = 2
DEFAULT_MERGE_GAP_H = 6


@dataclass(frozen=True)
class Event:
    start: int
    end: int  # inclusive
    mw: float

    @property
    def hours(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class RemedialPlan:
    strategy: Action
    hourly_mw: tuple[float, ...]
    events: tuple[Event, ...] = ()
    infeasible_hours: tuple[int, ...] = ()
    scenario: str = ""

    @property
    def occasions(self) -> int | None:
        return len(self.events) if self.strategy is Action.DI_REDUCTION else None

    @property
    def hours(self) -> int:
        return sum(1 for mw in self.hourly_mw if mw > 0)

    @property
    def volume_mwh(self) -> float:
        return math.fsum(self.hourly_mw)

    @property
    def energy_gwh(self) -> float:
        return self.volume_mwh / 1000.0

    @property
    def feasible(self) -> bool:
        return not self.infeasible_hours

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "scenario": self.scenario,
            "occasions": self.occasions,
            "hours": self.hours,
            "energy_gwh": self.energy_gwh,
            "events": [{"start": e.start, "end": e.end, "mw": e.mw} for e in self.events],
            "infeasible_hours": list(self.infeasible_hours),
            "hourly_mw": list(self.hourly_mw),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RemedialPlan":
        strategy = Action(doc["strategy"])
        events = tuple(Event(int(e["start"]), int(e["end"]), float(e["mw"])) for e in doc.get("events", ()))
        if "hourly_mw" in doc:
            hourly = tuple(float(v) for v in doc["hourly_mw"])
        else:
            horizon = int(doc.get("horizon_h", max((e.end + 1 for e in events), default=0)))
            hourly = _paint(horizon, events)
        return cls(strategy, hourly, events, tuple(doc.get("infeasible_hours", ())), doc.get("scenario", ""))


def _paint(horizon: int, events: Sequence[Event]) -> tuple[float, ...]:
    mw = [0.0] * horizon
    for e in events:
        for h in range(e.start, e.end + 1):
            mw[h] = e.mw
    return tuple(mw)


def deficit_hours(series: HourlySeries | Sequence[float], threshold_gws: float) -> list[int]:
    values = series.values if isinstance(series, HourlySeries) else series
    return [h for h, v in enumerate(values) if v < threshold_gws]


def _runs(hours: Sequence[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for h in hours:
        if runs and h == runs[-1][1] + 1:
            runs[-1][1] = h
        else:
            runs.append([h, h])
    return runs


def _size_hours(values, hours, sizer: Sizer):
    need, bad = {}, []
    for h in hours:
        try:
            need[h] = float(sizer(values[h]))
        except Unreachable:
            bad.append(h)
    return need, bad


def plan_di_reduction(
    series: HourlySeries,
    threshold_gws: float,
    sizer: Sizer,
    pad_h: int = DEFAULT_PAD_H,
    merge_gap_h: int = DEFAULT_MERGE_GAP_H,
) -> RemedialPlan:
    if pad_h < 0 or merge_gap_h < 0:
        raise ValueError("pad_h and merge_gap_h must be non-negative")
    values = series.values
    n = len(values)
    deficits = deficit_hours(values, threshold_gws)
    need, bad = _size_hours(values, deficits, sizer)

    spans = [[max(a - pad_h, 0), min(b + pad_h, n - 1)] for a, b in _runs(deficits)]
    merged: list[list[int]] = []
    for a, b in spans:
        if merged and a - merged[-1][1] - 1 <= merge_gap_h:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])

    events = []
    for a, b in merged:
        peak = max((need.get(h, 0.0) for h in range(a, b + 1)), default=0.0)
        mw = math.ceil(peak / DI_BLOCK_MW - 1e-9) * DI_BLOCK_MW
        if mw > 0:
            events.append(Event(a, b, float(mw)))
    return RemedialPlan(Action.DI_REDUCTION, _paint(n, events), tuple(events), tuple(bad), series.label)


def plan_stepped(
    series: HourlySeries,
    threshold_gws: float,
    sizer: Sizer,
    strategy: Action | str = Action.FFR,
) -> RemedialPlan:
    strategy = Action(strategy)
    if strategy is Action.DI_REDUCTION:
        raise ValueError("use plan_di_reduction for DI reduction")
    values = series.values
    need, bad = _size_hours(values, deficit_hours(values, threshold_gws), sizer)
    hourly = [0.0] * len(values)
    for h, mw in need.items():
        hourly[h] = float(math.ceil(mw - 1e-9))
    return RemedialPlan(strategy, tuple(hourly), (), tuple(bad), series.label)
