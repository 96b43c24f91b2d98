"""Welfare-maximising zonal clearing with internalised interconnector losses.

One market hour is a linear program. Every interconnector flow is split into a
non-negative forward and reverse part, each bounded by its ATC. On an
interconnector whose losses are internalised the sending zone gives up ``x``
and the receiving zone gets ``x - loss(x)``; for piecewise-linear losses each
direction is further split into one variable per segment. Zonal prices are the
duals of the zonal balance rows.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .core import BidCurve, Interconnector, LineKind, NetworkModel, Side, validate_curve
from .losses import build_pwl, linearize_secant, true_loss

DEFAULT_SEGMENTS = 5
PRICE_CAP_EUR_MWH = 3000.0

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


class LossMode(str, Enum):
    NO_FACTORS = "none"
    LINEAR_HVDC = "linear-hvdc"
    PWL_HVDC = "pwl-hvdc"
    PWL_AC_HVDC = "pwl-all"

    def internalizes(self, kind: LineKind) -> bool:
        if self is LossMode.NO_FACTORS:
            return False
        if self is LossMode.PWL_AC_HVDC:
            return True
        return kind is LineKind.HVDC

    @property
    def piecewise(self) -> bool:
        return self in (LossMode.PWL_HVDC, LossMode.PWL_AC_HVDC)


class MarketError(RuntimeError):
    pass


class InfeasibleMarket(MarketError):
    """No dispatch balances every zone; ``zone`` and ``direction`` name the binding side."""

    def __init__(self, hour: int, zone: str, direction: str, mw: float):
        self.hour, self.zone, self.direction, self.mw = hour, zone, direction, mw
        super().__init__(f"hour {hour}: {direction} of {mw:.3f} MW in zone {zone}")


@dataclass(frozen=True)
class MarketInstance:
    hour: int
    network: NetworkModel
    bids: Mapping[str, Sequence[BidCurve]]
    mode: LossMode = LossMode.NO_FACTORS
    segments: int = DEFAULT_SEGMENTS


@dataclass(frozen=True)
class AcceptedStep:
    zone: str
    side: Side
    index: int
    price_eur_mwh: float
    offered_mw: float
    accepted_mw: float


@dataclass(frozen=True)
class FlowResult:
    id: str
    kind: LineKind
    from_zone: str
    to_zone: str
    net_mw: float
    forward_mw: float
    reverse_mw: float
    modeled_loss_mw: float
    realized_loss_mw: float
    constant_loss_mw: float
    internalized: bool
    pinned: bool

    @property
    def receiving_zone(self) -> str:
        return self.to_zone if self.net_mw >= 0 else self.from_zone


@dataclass(frozen=True)
class MarketSolution:
    hour: int
    mode: LossMode
    prices: dict[str, float]
    accepted: tuple[AcceptedStep, ...]
    flows: dict[str, FlowResult]
    welfare_eur: float
    status: str = "optimal"

    def to_dict(self) -> dict:
        return {
            "hour": self.hour,
            "mode": self.mode.value,
            "status": self.status,
            "welfare_eur": self.welfare_eur,
            "prices_eur_mwh": self.prices,
            "accepted": [
                {
                    "zone": a.zone,
                    "side": a.side.value,
                    "step": a.index,
                    "price_eur_mwh": a.price_eur_mwh,
                    "offered_mw": a.offered_mw,
                    "accepted_mw": a.accepted_mw,
                }
                for a in self.accepted
            ],
            "flows": [
                {
                    "id": f.id,
                    "kind": f.kind.value,
                    "from": f.from_zone,
                    "to": f.to_zone,
                    "net_mw": f.net_mw,
                    "forward_mw": f.forward_mw,
                    "reverse_mw": f.reverse_mw,
                    "modeled_loss_mw": f.modeled_loss_mw,
                    "realized_loss_mw": f.realized_loss_mw,
                    "internalized": f.internalized,
                    "pinned": f.pinned,
                }
                for f in self.flows.values()
            ],
        }


# --------------------------------------------------------------------------
# LP assembly


def _segments_for(ic: Interconnector, mode: LossMode, n_seg: int) -> tuple[list, list, bool]:
    """(forward, reverse) lists of ``(slope, width)`` columns for one line."""
    p_max = ic.loss.p_max_mw
    fwd_cap = min(ic.atc_forward_mw, p_max)
    rev_cap = min(ic.atc_reverse_mw, p_max)
    if not mode.internalizes(ic.kind):
        return [(0.0, fwd_cap)], [(0.0, rev_cap)], False
    if not mode.piecewise:
        g = linearize_secant(ic.loss).gamma
        return [(g, fwd_cap)], [(g, rev_cap)], True
    pwl = build_pwl(ic.loss, n_seg)

    def clip(cap):
        cols = []
        for x0, x1, s in zip(pwl.breakpoints, pwl.breakpoints[1:], pwl.slopes):
            if x0 >= cap:
                break
            cols.append((s, min(x1, cap) - x0))
        return cols or [(pwl.slopes[0], 0.0)]

    return clip(fwd_cap), clip(rev_cap), True


@dataclass
class _Lp:
    zones: tuple[str, ...]
    cost: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    entries: list = field(default_factory=list)  # (row, col, value)
    rhs: np.ndarray = None
    steps: list = field(default_factory=list)  # (col, zone, side, index, price, qty)
    lines: list = field(default_factory=list)  # (ic, fwd cols+slopes, rev cols+slopes, internalized)
    pinned: list = field(default_factory=list)

    def column(self, cost: float, upper: float, *entries: tuple[int, float]) -> int:
        j = len(self.cost)
        self.cost.append(cost)
        self.upper.append(upper)
        for row, val in entries:
            self.entries.append((row, j, val))
        return j

    def matrices(self):
        a = np.zeros((len(self.zones), len(self.cost)))
        for r, c, v in self.entries:
            a[r, c] += v
        return np.asarray(self.cost, dtype=float), a, [(0.0, u) for u in self.upper]


def _assemble(inst: MarketInstance) -> _Lp:
    zones = inst.network.zone_ids
    row = {z: i for i, z in enumerate(zones)}
    lp = _Lp(zones, rhs=np.zeros(len(zones)))

    for z in zones:
        curves = inst.bids.get(z, ())
        if not curves:
            raise MarketError(f"hour {inst.hour}: zone {z} has no bid curve")
        for curve in curves:
            problems = validate_curve(curve, f"hour {inst.hour} zone {z} {curve.side.value}")
            if problems:
                raise MarketError("; ".join(str(p) for p in problems))
            sign = 1.0 if curve.side is Side.SUPPLY else -1.0
            for k, s in enumerate(curve.steps):
                j = lp.column(sign * s.price_eur_mwh, s.quantity_mw, (row[z], sign))
                lp.steps.append((j, z, curve.side, k, s.price_eur_mwh, s.quantity_mw))
    unknown = set(inst.bids) - set(zones)
    if unknown:
        raise MarketError(f"hour {inst.hour}: bids for undeclared zones {sorted(unknown)}")

    for ic in inst.network.at_hour(inst.hour):
        a, b = row[ic.from_zone], row[ic.to_zone]
        if ic.pinned:
            # constant injection: from-zone exports, to-zone imports
            lp.rhs[a] += ic.fixed_flow_mw
            lp.rhs[b] -= ic.fixed_flow_mw
            lp.pinned.append(ic)
            continue
        fwd, rev, internal = _segments_for(ic, inst.mode, inst.segments)
        fcols = [(lp.column(0.0, w, (a, -1.0), (b, 1.0 - s)), s) for s, w in fwd]
        rcols = [(lp.column(0.0, w, (b, -1.0), (a, 1.0 - s)), s) for s, w in rev]
        lp.lines.append((ic, fcols, rcols, internal))
    return lp


def _diagnose(inst: MarketInstance, lp: _Lp, a_eq: np.ndarray, bounds) -> InfeasibleMarket:
    """Phase-one LP with per-zone shortage/surplus slacks to locate the infeasibility."""
    nz = len(lp.zones)
    eye = np.eye(nz)
    a = np.hstack([a_eq, eye, -eye])
    c = np.concatenate([np.zeros(a_eq.shape[1]), np.ones(2 * nz)])
    res = linprog(c, A_eq=a, b_eq=lp.rhs, bounds=list(bounds) + [(0, None)] * (2 * nz), method="highs-ds")
    if res.status != 0:
        return InfeasibleMarket(inst.hour, "?", "unknown imbalance", float("nan"))
    short = res.x[-2 * nz:-nz]
    surplus = res.x[-nz:]
    k = int(np.argmax(np.maximum(short, surplus)))
    if short[k] >= surplus[k]:
        return InfeasibleMarket(inst.hour, lp.zones[k], "shortage", float(short[k]))
    return InfeasibleMarket(inst.hour, lp.zones[k], "surplus", float(surplus[k]))


def clear(inst: MarketInstance) -> MarketSolution:
    """Clear one hour. Raises ``InfeasibleMarket`` if the zonal balances cannot hold."""
    lp = _assemble(inst)
    c, a_eq, bounds = lp.matrices()
    if a_eq.shape[1] == 0:
        if np.any(lp.rhs != 0):
            raise _diagnose(inst, lp, a_eq, bounds)
        x, duals, welfare = np.zeros(0), np.zeros(len(lp.zones)), 0.0
    else:
        res = linprog(c, A_eq=a_eq, b_eq=lp.rhs, bounds=bounds, method="highs-ds", options=_HIGHS_OPTIONS)
        if res.status == 2:
            raise _diagnose(inst, lp, a_eq, bounds)
        if res.status != 0:
            raise MarketError(f"hour {inst.hour}: solver status {res.status}: {res.message}")
        x, duals, welfare = res.x, res.eqlin.marginals, -float(res.fun)

    accepted = tuple(
        AcceptedStep(z, side, k, price, qty, float(min(max(x[j], 0.0), qty)))
        for j, z, side, k, price, qty in lp.steps
    )
    flows: dict[str, FlowResult] = {}
    for ic, fcols, rcols, internal in lp.lines:
        fwd = float(sum(x[j] for j, _ in fcols))
        rev = float(sum(x[j] for j, _ in rcols))
        modeled = float(sum(s * x[j] for j, s in fcols + rcols)) if internal else 0.0
        net = fwd - rev
        net = max(-ic.loss.p_max_mw, min(ic.loss.p_max_mw, net))
        if not internal:
            # lossless in the market, so only the netted flow is meaningful
            fwd, rev = max(net, 0.0), max(-net, 0.0)
        flows[ic.id] = FlowResult(
            ic.id, ic.kind, ic.from_zone, ic.to_zone, net, fwd, rev,
            modeled, true_loss(ic.loss, net), ic.loss.a0_mw, internal, False,
        )
    for ic in lp.pinned:
        f = ic.fixed_flow_mw
        flows[ic.id] = FlowResult(
            ic.id, ic.kind, ic.from_zone, ic.to_zone, f, max(f, 0.0), max(-f, 0.0),
            0.0, true_loss(ic.loss, f), ic.loss.a0_mw, False, True,
        )
    flows = {ic.id: flows[ic.id] for ic in inst.network.interconnectors}
    prices = {z: float(p) for z, p in zip(lp.zones, duals)}
    return MarketSolution(inst.hour, inst.mode, prices, accepted, flows, welfare)


def residual_loss(flow: FlowResult) -> float:
    """Loss the TSO still has to buy after the market has paid for its modelled share."""
    variable = flow.realized_loss_mw - flow.constant_loss_mw
    return max(variable - flow.modeled_loss_mw, 0.0) + flow.constant_loss_mw


def settle(solution: MarketSolution) -> float:
    """EUR cost of procuring residual losses at the receiving zone's price."""
    return math.fsum(
        residual_loss(f) * solution.prices[f.receiving_zone] for f in solution.flows.values()
    )


# --------------------------------------------------------------------------
# year studies


@dataclass(frozen=True)
class HourRecord:
    hour: int
    welfare_eur: float
    settlement_eur: float
    hvdc_loss_mw: float
    ac_loss_mw: float
    flows: tuple[tuple[str, float, float, float], ...]  # id, net, modeled, realized


@dataclass(frozen=True)
class YearReport:
    mode: LossMode
    segments: int
    hours: tuple[int, ...]
    records: tuple[HourRecord, ...]
    infeasible: tuple[tuple[int, str], ...]
    hvdc_loss_mwh: float
    ac_loss_mwh: float
    welfare_eur: float
    settlement_eur: float

    @property
    def coverage(self) -> int:
        return len(self.records)

    @property
    def total_loss_mwh(self) -> float:
        return self.hvdc_loss_mwh + self.ac_loss_mwh

    @property
    def net_benefit_eur(self) -> float:
        return self.welfare_eur - self.settlement_eur

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "segments": self.segments,
            "horizon_hours": len(self.hours),
            "feasible_hours": self.coverage,
            "infeasible_hours": [{"hour": h, "reason": r} for h, r in self.infeasible],
            "hvdc_loss_mwh": self.hvdc_loss_mwh,
            "ac_loss_mwh": self.ac_loss_mwh,
            "total_loss_mwh": self.total_loss_mwh,
            "welfare_eur": self.welfare_eur,
            "settlement_eur": self.settlement_eur,
            "net_benefit_eur": self.net_benefit_eur,
        }


def _record(sol: MarketSolution) -> HourRecord:
    hvdc = math.fsum(f.realized_loss_mw for f in sol.flows.values() if f.kind is LineKind.HVDC)
    ac = math.fsum(f.realized_loss_mw for f in sol.flows.values() if f.kind is LineKind.AC)
    rows = tuple((f.id, f.net_mw, f.modeled_loss_mw, f.realized_loss_mw) for f in sol.flows.values())
    return HourRecord(sol.hour, sol.welfare_eur, settle(sol), hvdc, ac, rows)


def _clear_chunk(args) -> list:
    network, chunk, mode, segments = args
    out = []
    for hour, bids in chunk:
        try:
            out.append(_record(clear(MarketInstance(hour, network, bids, mode, segments))))
        except MarketError as err:
            out.append((hour, str(err)))
    return out


def run_year(
    network: NetworkModel,
    bids_by_hour: Mapping[int, Mapping[str, Sequence[BidCurve]]],
    mode: LossMode,
    segments: int = DEFAULT_SEGMENTS,
    workers: int = 1,
    chunk_hours: int = 168,
) -> YearReport:
    """Clear and settle every hour; sums are exact (``math.fsum``) in hour order."""
    mode = LossMode(mode)
    hours = tuple(sorted(bids_by_hour))
    chunks = [
        (network, [(h, bids_by_hour[h]) for h in hours[i:i + chunk_hours]], mode, segments)
        for i in range(0, len(hours), chunk_hours)
    ]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_clear_chunk, chunks) for r in part]
    else:
        results = [r for chunk in chunks for r in _clear_chunk(chunk)]

    records = tuple(r for r in results if isinstance(r, HourRecord))
    infeasible = tuple(r for r in results if not isinstance(r, HourRecord))
    return YearReport(
        mode=mode,
        segments=segments,
        hours=hours,
        records=records,
        infeasible=infeasible,
        hvdc_loss_mwh=math.fsum(r.hvdc_loss_mw for r in records),
        ac_loss_mwh=math.fsum(r.ac_loss_mw for r in records),
        welfare_eur=math.fsum(r.welfare_eur for r in records),
        settlement_eur=math.fsum(r.settlement_eur for r in records),
    )


@dataclass(frozen=True)
class Savings:
    reference: LossMode
    alternative: LossMode
    savings_eur: float
    hvdc_loss_delta_mwh: float
    ac_loss_delta_mwh: float
    net_loss_delta_mwh: float
    net_loss_delta_pct: float | None

    def to_dict(self) -> dict:
        return {
            "reference": self.reference.value,
            "alternative": self.alternative.value,
            "savings_eur": self.savings_eur,
            "hvdc_loss_delta_mwh": self.hvdc_loss_delta_mwh,
            "ac_loss_delta_mwh": self.ac_loss_delta_mwh,
            "net_loss_delta_mwh": self.net_loss_delta_mwh,
            "net_loss_delta_pct": self.net_loss_delta_pct,
        }


def compare(reference: YearReport, alternative: YearReport) -> Savings:
    """Deltas of ``alternative`` against ``reference``; positive savings favour the alternative."""
    if reference.hours != alternative.hours:
        raise ValueError("reports cover different horizons")
    net = alternative.total_loss_mwh - reference.total_loss_mwh
    pct = 100.0 * net / reference.total_loss_mwh if reference.total_loss_mwh else None
    return Savings(
        reference.mode,
        alternative.mode,
        alternative.net_benefit_eur - reference.net_benefit_eur,
        alternative.hvdc_loss_mwh - reference.hvdc_loss_mwh,
        alternative.ac_loss_mwh - reference.ac_loss_mwh,
        net,
        pct,
    )


def loss_rows(report: YearReport) -> Iterable[tuple[int, str, float, float, float]]:
    """Rows for ``losses.csv``: hour, interconnector, flow, modeled and realized loss."""
    for rec in report.records:
        for ic, net, modeled, realized in rec.flows:
            yield rec.hour, ic, net, modeled, realized
