"""Seeded synthetic study data: network, hourly bids and a kinetic-energy series.

The generated data stand in for market and inertia datasets that are not
public. The six-zone template has three parallel HVDC links into DK1 and an
HVDC link running in parallel with an AC path between SE and FI, so both
routing effects of loss factors show up. Numbers are synthetic.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Area,
    BidCurve,
    HourlySeries,
    Interconnector,
    LineKind,
    NetworkModel,
    Override,
    QuadraticLossModel,
    Side,
    Zone,
    save_network,
    write_bids,
    write_series,
)
from .market import PRICE_CAP_EUR_MWH

SYNTH_STREAM = 0
HOURS_PER_YEAR = 8760

# id, area, mean load MW, supply blocks as (share of mean load, price low, price high)
ZONE_TEMPLATE = (
    ("NO", Area.NORDIC, 14000.0, ((0.55, 6.0, 14.0), (0.45, 15.0, 26.0), (0.40, 28.0, 42.0), (0.30, 90.0, 150.0))),
    ("SE", Area.NORDIC, 15000.0, ((0.45, 7.0, 12.0), (0.45, 14.0, 27.0), (0.35, 30.0, 48.0), (0.40, 90.0, 150.0))),
    ("FI", Area.NORDIC, 9500.0, ((0.35, 9.0, 16.0), (0.45, 22.0, 40.0), (0.45, 45.0, 70.0), (0.40, 90.0, 150.0))),
    ("DK2", Area.NORDIC, 1800.0, ((0.60, 28.0, 45.0), (0.80, 50.0, 75.0), (0.30, 90.0, 150.0))),
    ("DK1", Area.CONTINENTAL, 2500.0, ((0.70, 30.0, 48.0), (0.80, 52.0, 80.0), (0.40, 90.0, 150.0))),
    ("DE", Area.CONTINENTAL, 8000.0, ((0.70, 25.0, 40.0), (0.60, 42.0, 60.0), (0.60, 62.0, 90.0), (0.30, 90.0, 150.0))),
)

# wind capacity as a share of mean load, offered near zero price
WIND_SHARE = {"DK1": 1.0, "DK2": 0.5, "SE": 0.15, "DE": 0.3}

# id, from, to, kind, atc fwd, atc rev, (a0, b, c, p_max), pinned
LINE_TEMPLATE = (
    ("NO-SE", "NO", "SE", LineKind.AC, 3500.0, 3500.0, (0.0, 0.002, 3.0e-6, 4000.0), False),
    ("SE-FI-AC", "SE", "FI", LineKind.AC, 1500.0, 1500.0, (0.0, 0.004, 1.2e-5, 2000.0), False),
    ("Fennoskan", "SE", "FI", LineKind.HVDC, 1200.0, 1200.0, (4.0, 0.008, 1.2e-5, 1200.0), False),
    ("SE-DK2", "SE", "DK2", LineKind.AC, 1300.0, 1700.0, (0.0, 0.003, 6.0e-6, 2000.0), False),
    ("Skagerrak", "NO", "DK1", LineKind.HVDC, 1632.0, 1632.0, (6.0, 0.010, 1.0e-5, 1700.0), False),
    ("Kontiskan", "SE", "DK1", LineKind.HVDC, 715.0, 740.0, (3.0, 0.006, 2.5e-5, 740.0), False),
    ("Storebaelt", "DK2", "DK1", LineKind.HVDC, 590.0, 600.0, (2.0, 0.004, 2.0e-5, 600.0), False),
    ("DK1-DE", "DK1", "DE", LineKind.AC, 2500.0, 2500.0, (0.0, 0.003, 4.0e-6, 3000.0), True),
    ("Kontek", "DK2", "DE", LineKind.HVDC, 585.0, 600.0, (2.0, 0.006, 2.0e-5, 600.0), True),
)

ADVERSARIAL_LINE = "Skagerrak"


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 2025
    zones: int = 6
    horizon_h: int = HOURS_PER_YEAR
    load_scale: float = 1.0
    price_scale: float = 1.0
    load_noise: float = 0.03
    ek_base_gws: float = 200.0
    ek_seasonal_amp_gws: float = 45.0
    ek_daily_amp_gws: float = 12.0
    ek_noise_sd_gws: float = 9.0
    ek_noise_rho: float = 0.9
    dry_scaling: float = 1.0
    adversarial_hour: int | None = 0
    scenario: str = "synthetic-2025"

    def __post_init__(self):
        if not 1 <= self.zones <= len(ZONE_TEMPLATE):
            raise ValueError(f"zones must be between 1 and {len(ZONE_TEMPLATE)}")
        if self.horizon_h < 1:
            raise ValueError("horizon_h must be positive")
        for name in ("load_scale", "price_scale", "ek_base_gws", "dry_scaling"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("load_noise", "ek_seasonal_amp_gws", "ek_daily_amp_gws", "ek_noise_sd_gws"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.ek_noise_rho < 1:
            raise ValueError("ek_noise_rho must lie in [0, 1)")
        if self.ek_base_gws - self.ek_seasonal_amp_gws - self.ek_daily_amp_gws <= 0:
            raise ValueError("E_k shape must stay positive: base must exceed the amplitudes")


@dataclass(frozen=True)
class SyntheticStudy:
    spec: SyntheticSpec
    network: NetworkModel
    bids: dict = field(repr=False)
    kinetic_energy: HourlySeries = field(repr=False)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(SYNTH_STREAM, *key)))


def _network(spec: SyntheticSpec, pinned_flows: dict[str, np.ndarray]) -> NetworkModel:
    chosen = ZONE_TEMPLATE[: spec.zones]
    ids = {z[0] for z in chosen}
    zones = tuple(Zone(z, z, area) for z, area, _, _ in chosen)
    lines, overrides = [], []
    for name, a, b, kind, fwd, rev, (a0, bb, c, pmax), pinned in LINE_TEMPLATE:
        if a not in ids or b not in ids:
            continue
        lines.append(
            Interconnector(name, a, b, kind, fwd, rev, QuadraticLossModel(a0, bb, c, pmax), 0.0 if pinned else None)
        )
    for ic in lines:
        if ic.pinned:
            for h, f in enumerate(pinned_flows[ic.id]):
                overrides.append(Override(h, ic.id, fixed_flow_mw=float(f)))
    if spec.adversarial_hour is not None and spec.adversarial_hour < spec.horizon_h:
        for ic in lines:
            if ic.pinned:
                continue
            if ic.id != ADVERSARIAL_LINE:
                overrides.append(Override(spec.adversarial_hour, ic.id, atc_forward_mw=0.0, atc_reverse_mw=0.0))
        overrides = [
            Override(o.hour, o.interconnector, fixed_flow_mw=0.0)
            if o.hour == spec.adversarial_hour and o.fixed_flow_mw is not None
            else o
            for o in overrides
        ]
    overrides.sort(key=lambda o: (o.hour, o.interconnector))
    return NetworkModel(zones, tuple(lines), tuple(overrides))


def _profiles(spec: SyntheticSpec, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    season = np.cos(2 * math.pi * h / HOURS_PER_YEAR)  # +1 in January, -1 in July
    day = np.cos(2 * math.pi * (h % 24) / 24)  # +1 at midnight
    load_shape = 1.0 + 0.15 * season - 0.08 * day
    return load_shape, season


def generate(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticStudy:
    n = spec.horizon_h
    h = np.arange(n)
    load_shape, season = _profiles(spec, h)
    chosen = ZONE_TEMPLATE[: spec.zones]
    ids = [z[0] for z in chosen]

    rng_pin = _rng(spec.seed, 0)
    pinned = {}
    for name, *_rest, pin in LINE_TEMPLATE:
        if not pin:
            continue
        fwd, rev = _rest[3], _rest[4]
        raw = np.clip(rng_pin.normal(0.0, 0.35, n), -0.9, 0.9)
        pinned[name] = np.round(np.where(raw >= 0, raw * fwd, raw * rev), 1)

    rng_bids = _rng(spec.seed, 1)
    wind = {}
    for z in ids:
        w = np.empty(n)
        x = rng_bids.uniform(0.2, 0.6)
        for i in range(n):
            x = min(max(0.95 * x + 0.05 * 0.35 + rng_bids.normal(0.0, 0.06), 0.0), 1.0)
            w[i] = x
        wind[z] = w

    bids: dict[int, dict[str, tuple[BidCurve, ...]]] = {}
    for i in range(n):
        hour_bids = {}
        for z, _area, mean_load, blocks in chosen:
            load = mean_load * spec.load_scale * load_shape[i] * (1 + rng_bids.normal(0.0, spec.load_noise))
            steps = []
            for share, lo, hi in blocks:
                price = rng_bids.uniform(lo, hi) * spec.price_scale
                steps.append((round(share * mean_load * spec.load_scale, 1), round(price, 2)))
            wind_mw = round(WIND_SHARE.get(z, 0.0) * mean_load * spec.load_scale * wind[z][i], 1)
            if wind_mw > 0:
                steps.append((wind_mw, round(rng_bids.uniform(0.0, 2.0), 2)))
            steps.sort(key=lambda s: s[1])
            hour_bids[z] = (
                BidCurve.of(Side.SUPPLY, steps),
                BidCurve.of(Side.DEMAND, [(round(load, 1), PRICE_CAP_EUR_MWH)]),
            )
        bids[i] = hour_bids

    adv = spec.adversarial_hour
    if adv is not None and adv < n and {"NO", "DK1"} <= set(ids):
        bids[adv] = dict(bids[adv])
        no_load = bids[adv]["NO"][1]
        bids[adv]["NO"] = (BidCurve.of(Side.SUPPLY, [(30000.0, 10.0)]), no_load)
        bids[adv]["DK1"] = (
            BidCurve.of(Side.SUPPLY, [(5000.0, 10.2)]),
            BidCurve.of(Side.DEMAND, [(400.0, PRICE_CAP_EUR_MWH)]),
        )

    rng_ek = _rng(spec.seed, 2)
    noise = np.empty(n)
    state = 0.0
    innov = spec.ek_noise_sd_gws * math.sqrt(1 - spec.ek_noise_rho**2)
    for i in range(n):
        state = spec.ek_noise_rho * state + rng_ek.normal(0.0, innov)
        noise[i] = state
    day = np.cos(2 * math.pi * (h % 24) / 24)
    ek = spec.ek_base_gws + spec.ek_seasonal_amp_gws * season - spec.ek_daily_amp_gws * day + noise
    ek = np.maximum(ek, 0.2 * spec.ek_base_gws) * spec.dry_scaling
    series = HourlySeries(spec.scenario, tuple(float(v) for v in np.round(ek, 1)), "GWs")

    return SyntheticStudy(spec, _network(spec, pinned), bids, series)


def write_study(study: SyntheticStudy, outdir: str | Path) -> dict[str, Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "network": out / "network.json",
        "bids": out / "bids.csv",
        "ek": out / "ek.csv",
    }
    save_network(study.network, paths["network"])
    write_bids(study.bids, paths["bids"])
    write_series(study.kinetic_energy, paths["ek"], digits=1)
    return paths


def spec_dict(spec: SyntheticSpec) -> dict:
    return asdict(spec)
