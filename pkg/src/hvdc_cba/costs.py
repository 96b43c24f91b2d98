"""Euro cost of DI reduction, FFR procurement and HVDC emergency power control.

All amounts are EUR; currency conversion happens before data reaches this
module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import HourlySeries
from .frequency import Action
from .planning import RemedialPlan

BOOTSTRAP_STREAM = 1
_BLOCK = 1000


@dataclass(frozen=True)
class DiCostParams:
    opportunity_eur_mwh: float = 4.64
    fixed_eur_per_event: float = 4740.0
    regulating_price: float | HourlySeries = 54.06
    substitute_hours_per_event: int = 24

    def __post_init__(self):
        if isinstance(self.regulating_price, HourlySeries):
            if self.regulating_price.unit != "EUR/MWh":
                raise ValueError(f"regulating price series must be EUR/MWh, got {self.regulating_price.unit}")
            if any(v < 0 for v in self.regulating_price.values):
                raise ValueError("regulating prices must be non-negative")
        elif self.regulating_price < 0:
            raise ValueError("regulating price must be non-negative")
        if min(self.opportunity_eur_mwh, self.fixed_eur_per_event, self.substitute_hours_per_event) < 0:
            raise ValueError("DI cost parameters must be non-negative")


TSO_SHARES = {"Energinet": 0.14, "Statnett": 0.42, "Svenska kraftnat": 0.24, "Fingrid": 0.20}


@dataclass(frozen=True)
class FfrCostParams:
    price_eur_mw_h: float = 48.95
    tso_shares: Mapping[str, float] = field(default_factory=lambda: dict(TSO_SHARES))

    def __post_init__(self):
        if abs(math.fsum(self.tso_shares.values()) - 1.0) > 1e-12:
            raise ValueError("TSO shares must sum to 1")
        if self.price_eur_mw_h < 0:
            raise ValueError("FFR price must be non-negative")


@dataclass(frozen=True)
class EpcCostParams:
    reserve_price_samples: tuple[float, ...]  # EUR/MW/h
    reservation_price_samples: tuple[float, ...]  # EUR/MW/h
    bootstrap_n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.reserve_price_samples or not self.reservation_price_samples:
            raise ValueError("price sample lists must be non-empty")
        if self.bootstrap_n < 1000:
            raise ValueError("bootstrap_n must be at least 1000")


@dataclass(frozen=True)
class CostItem:
    name: str
    eur: float


@dataclass(frozen=True)
class Distribution:
    mean: float
    p5: float
    p95: float


@dataclass(frozen=True)
class StrategyCost:
    strategy: Action
    items: tuple[CostItem, ...]
    attribution: Mapping[str, float] = field(default_factory=dict)
    distribution: Distribution | None = None

    @property
    def total_eur(self) -> float:
        return math.fsum(i.eur for i in self.items)

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy.value,
            "total_eur": self.total_eur,
            "items": {i.name: i.eur for i in self.items},
        }
        if self.attribution:
            d["attribution_eur"] = dict(self.attribution)
        if self.distribution is not None:
            d["distribution_eur"] = {
                "mean": self.distribution.mean,
                "p5": self.distribution.p5,
                "p95": self.distribution.p95,
            }
        return d


def _require(plan: RemedialPlan, strategy: Action):
    if plan.strategy is not strategy:
        raise ValueError(f"expected a {strategy.value} plan, got {plan.strategy.value}")


def di_cost(plan: RemedialPlan, params: DiCostParams = DiCostParams()) -> StrategyCost:
    _require(plan, Action.DI_REDUCTION)
    opportunity = plan.volume_mwh * params.opportunity_eur_mwh
    fixed = len(plan.events) * params.fixed_eur_per_event
    price = params.regulating_price
    parts = []
    for e in plan.events:
        hours = range(e.start, e.start + min(e.hours, params.substitute_hours_per_event))
        if isinstance(price, HourlySeries):
            if hours and hours[-1] >= len(price):
                raise ValueError(f"regulating prices missing for hours up to {hours[-1]}")
            parts.extend(e.mw * price.values[h] for h in hours)
        else:
            parts.append(e.mw * len(hours) * price)
    return StrategyCost(
        Action.DI_REDUCTION,
        (
            CostItem("opportunity", opportunity),
            CostItem("fixed_compensation", fixed),
            CostItem("substitution", math.fsum(parts)),
        ),
    )


def ffr_cost(plan: RemedialPlan, params: FfrCostParams = FfrCostParams()) -> StrategyCost:
    _require(plan, Action.FFR)
    total = plan.volume_mwh * params.price_eur_mw_h
    shares = {tso: total * share for tso, share in params.tso_shares.items()}
    return StrategyCost(Action.FFR, (CostItem("reservation", total),), shares)


def bootstrap_means(samples: Sequence[float], n: int, seed: int, stream: int) -> np.ndarray:
    """``n`` bootstrap replicates of the sample mean.

    Samples are sorted first so the result does not depend on input order.
    Replicates are drawn in blocks of 1000, each block from its own seed
    substream, so any block can be recomputed independently.
    """
    data = np.sort(np.asarray(samples, dtype=float))
    out = np.empty(n)
    for b, start in enumerate(range(0, n, _BLOCK)):
        size = min(_BLOCK, n - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(BOOTSTRAP_STREAM, stream, b)))
        idx = rng.integers(0, len(data), size=(size, len(data)))
        out[start:start + size] = data[idx].mean(axis=1)
    return out


def epc_cost(plan: RemedialPlan, params: EpcCostParams) -> StrategyCost:
    _require(plan, Action.EPC)
    v = plan.volume_mwh
    reserve = bootstrap_means(params.reserve_price_samples, params.bootstrap_n, params.seed, 0)
    reservation = bootstrap_means(params.reservation_price_samples, params.bootstrap_n, params.seed, 1)
    totals = v * (reserve + reservation)
    p5, p95 = np.percentile(totals, [5, 95])
    return StrategyCost(
        Action.EPC,
        (
            CostItem("primary_reserve", float(v * reserve.mean())),
            CostItem("hvdc_reservation", float(v * reservation.mean())),
        ),
        distribution=Distribution(float(totals.mean()), float(p5), float(p95)),
    )


def savings_pct(cheaper: float, reference: float) -> float | None:
    """``1 - cheaper/reference`` in percent; ``None`` when the reference is zero."""
    if reference == 0:
        return None
    return 100.0 * (1.0 - cheaper / reference)


@dataclass(frozen=True)
class CostReport:
    """Priced strategies for one scenario; a strategy without a plan is ``None``."""

    di: StrategyCost | None
    ffr: StrategyCost | None
    epc: StrategyCost | None
    scenario: str = ""

    @property
    def strategies(self) -> tuple[StrategyCost, ...]:
        return tuple(c for c in (self.di, self.ffr, self.epc) if c is not None)

    @property
    def savings(self) -> dict[str, float | None]:
        def pct(a, b):
            return None if a is None or b is None else savings_pct(a.total_eur, b.total_eur)

        return {
            "epc_vs_di_pct": pct(self.epc, self.di),
            "epc_vs_ffr_pct": pct(self.epc, self.ffr),
            "ffr_vs_di_pct": pct(self.ffr, self.di),
        }

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "strategies": [c.to_dict() for c in self.strategies],
            "savings": self.savings,
        }


def compare_costs(
    di: StrategyCost | None, ffr: StrategyCost | None, epc: StrategyCost | None, scenario: str = ""
) -> CostReport:
    for cost, strategy in ((di, Action.DI_REDUCTION), (ffr, Action.FFR), (epc, Action.EPC)):
        if cost is not None and cost.strategy is not strategy:
            raise ValueError(f"expected {strategy.value} cost, got {cost.strategy.value}")
    return CostReport(di, ffr, epc, scenario)
