"""Post-disturbance frequency of a single-machine equivalent system.

The swing equation

    d(df)/dt = f0 * (P_fcr + P_ffr + P_epc - dP - D*df) / (2*E_k)

is integrated with fixed-step RK4. FCR-D follows its static droop (zero above
the band's upper edge, full volume at the lower edge) through a first-order
lag. FFR and HVDC emergency power control are stepped reserves: each trigger
injects its block once frequency has fallen to its threshold, after a delay
and a linear ramp. The two are dynamically identical and differ only in cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernel

GWS_TO_MWS = 1000.0
DI_BLOCK_MW = 50.0
EK_SEARCH = (1.0, 1000.0)
EK_TOLERANCE = 0.1


class SimulationError(RuntimeError):
    pass


class Unreachable(ValueError):
    """The nadir target cannot be met inside the allowed search range."""


class Action(str, Enum):
    DI_REDUCTION = "di"
    FFR = "ffr"
    EPC = "epc"


@dataclass(frozen=True)
class FrequencyModel:
    kinetic_energy_gws: float
    fcr_d_mw: float
    f0_hz: float = 50.0
    fcr_band_hz: tuple[float, float] = (49.9, 49.5)
    fcr_lag_s: float = 7.2
    load_damping_mw_per_hz: float = 0.0
    nadir_floor_hz: float = 49.0
    load_shed_hz: float = 48.8

    def __post_init__(self):
        hi, lo = self.fcr_band_hz
        if not self.kinetic_energy_gws > 0:
            raise ValueError("kinetic energy must be positive")
        if not hi > lo:
            raise ValueError("FCR band upper edge must exceed the lower edge")
        if not self.load_shed_hz < self.nadir_floor_hz < self.f0_hz:
            raise ValueError("nadir floor must lie between load-shedding level and f0")
        if not self.fcr_lag_s > 0:
            raise ValueError("FCR lag must be positive")
        if self.fcr_d_mw < 0 or self.load_damping_mw_per_hz < 0:
            raise ValueError("FCR volume and load damping must be non-negative")

    def with_inertia(self, kinetic_energy_gws: float) -> "FrequencyModel":
        return replace(self, kinetic_energy_gws=kinetic_energy_gws)


TRIGGER_BAND_HZ = (49.5, 49.7)


@dataclass(frozen=True)
class SteppedReserve:
    """Blocks of power released at falling-frequency thresholds."""

    triggers: tuple[tuple[float, float], ...]  # (threshold Hz, block MW)
    activation_delay_s: float
    full_activation_s: float
    sustain: bool = True

    def __post_init__(self):
        lo, hi = TRIGGER_BAND_HZ
        thresholds = [t for t, _ in self.triggers]
        if any(not lo <= t <= hi for t in thresholds):
            raise ValueError(f"trigger thresholds must lie within {TRIGGER_BAND_HZ} Hz")
        if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("trigger thresholds must be strictly decreasing")
        if any(not blk > 0 for _, blk in self.triggers):
            raise ValueError("trigger blocks must be positive")
        if self.activation_delay_s < 0 or self.full_activation_s < 0:
            raise ValueError("delays must be non-negative")

    @property
    def total_mw(self) -> float:
        return sum(b for _, b in self.triggers)

    def with_block(self, block_mw: float) -> "SteppedReserve":
        """Same timing, one trigger at the first threshold carrying ``block_mw``."""
        return replace(self, triggers=((self.triggers[0][0], block_mw),))


def default_ffr(block_mw: float = 100.0) -> SteppedReserve:
    return SteppedReserve(((49.6, block_mw),), activation_delay_s=1.0, full_activation_s=0.3)


def default_epc(block_mw: float = 100.0) -> SteppedReserve:
    return SteppedReserve(((49.6, block_mw),), activation_delay_s=0.25, full_activation_s=0.25)


@dataclass(frozen=True)
class Disturbance:
    lost_generation_mw: float = 1450.0
    onset_s: float = 0.0

    def __post_init__(self):
        if self.lost_generation_mw < 0:
            raise ValueError("lost generation must be non-negative")


@dataclass(frozen=True)
class Activation:
    reserve: str
    threshold_hz: float
    block_mw: float
    time_s: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    f: np.ndarray
    p_fcr: np.ndarray
    p_ffr: np.ndarray
    p_epc: np.ndarray
    nadir_hz: float
    nadir_time_s: float
    shed: bool
    activations: tuple[Activation, ...] = field(default=())

    def rows(self):
        return zip(self.t, self.f, self.p_fcr, self.p_ffr, self.p_epc)


def _flatten(ffr: SteppedReserve | None, epc: SteppedReserve | None):
    thr, blk, delay, ramp, sustain, group, names = [], [], [], [], [], [], []
    for g, (name, res) in enumerate((("ffr", ffr), ("epc", epc))):
        if res is None:
            continue
        for threshold, block in res.triggers:
            thr.append(float(threshold))
            blk.append(float(block))
            delay.append(float(res.activation_delay_s))
            ramp.append(float(res.full_activation_s))
            sustain.append(bool(res.sustain))
            group.append(g)
            names.append(name)
    return thr, blk, delay, ramp, sustain, group, names


def _run(model, disturbance, ffr, epc, horizon_s, dt_s, record):
    if not dt_s <= 0.05:
        raise ValueError("dt_s must be <= 0.05 s")
    if not horizon_s >= 30:
        raise ValueError("horizon_s must be >= 30 s")
    n_steps = int(round(horizon_s / dt_s))
    thr, blk, delay, ramp, sustain, group, names = _flatten(ffr, epc)
    hi, lo = model.fcr_band_hz
    out = kernel.integrate(
        model.f0_hz,
        model.kinetic_energy_gws * GWS_TO_MWS,
        float(disturbance.lost_generation_mw),
        float(disturbance.onset_s),
        float(model.fcr_d_mw),
        hi,
        lo,
        model.fcr_lag_s,
        model.load_damping_mw_per_hz,
        model.load_shed_hz,
        thr, blk, delay, ramp, sustain, group,
        float(dt_s),
        n_steps,
        record,
    )
    status, nadir, nadir_t, shed, first, samples, t_end = out
    if status != kernel.OK:
        raise SimulationError(
            f"non-finite state at t={t_end:.3f} s (E_k={model.kinetic_energy_gws} GWs, "
            f"dP={disturbance.lost_generation_mw} MW, dt={dt_s} s)"
        )
    return nadir, nadir_t, shed, first, samples, (thr, blk, names)


def simulate(
    model: FrequencyModel,
    disturbance: Disturbance,
    ffr: SteppedReserve | None = None,
    epc: SteppedReserve | None = None,
    horizon_s: float = 60.0,
    dt_s: float = 0.01,
) -> Trajectory:
    nadir, nadir_t, shed, first, s, (thr, blk, names) = _run(
        model, disturbance, ffr, epc, horizon_s, dt_s, True
    )
    log = tuple(
        Activation(n, th, b, ft) for n, th, b, ft in zip(names, thr, blk, first) if not math.isnan(ft)
    )
    return Trajectory(s[:, 0], s[:, 1], s[:, 2], s[:, 3], s[:, 4], nadir, nadir_t, shed, log)


def nadir(
    model: FrequencyModel,
    disturbance: Disturbance,
    ffr: SteppedReserve | None = None,
    epc: SteppedReserve | None = None,
    horizon_s: float = 60.0,
    dt_s: float = 0.01,
) -> float:
    """Nadir only, without storing the trajectory."""
    return _run(model, disturbance, ffr, epc, horizon_s, dt_s, False)[0]


def nadir_ok(trajectory: Trajectory | float, floor_hz: float = 49.0) -> bool:
    value = trajectory if isinstance(trajectory, (int, float)) else trajectory.nadir_hz
    return value >= floor_hz


def initial_rocof(model: FrequencyModel, disturbance: Disturbance) -> float:
    """Rate of change of frequency right after the disturbance, Hz/s."""
    return -model.f0_hz * disturbance.lost_generation_mw / (2.0 * model.kinetic_energy_gws * GWS_TO_MWS)


# --------------------------------------------------------------------------
# sizing


def _smallest(lo: int, hi: int, ok: Callable[[int], bool]) -> int:
    """Smallest integer in [lo, hi] with ``ok`` true, given ``ok(hi)`` and monotone ``ok``."""
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def required_kinetic_energy(
    model: FrequencyModel,
    disturbance: Disturbance,
    ffr: SteppedReserve | None = None,
    epc: SteppedReserve | None = None,
    bounds: tuple[float, float] = EK_SEARCH,
    tol_gws: float = EK_TOLERANCE,
    probes: int = 6,
    **sim,
) -> float:
    """Smallest kinetic energy (GWs, to ``tol_gws``) keeping the nadir at or above the floor.

    The nadir is first sampled at ``probes`` points across ``bounds``; a drop
    anywhere along that grid means bisection would be meaningless and raises
    ``ValueError``.
    """
    lo, hi = bounds
    floor = model.nadir_floor_hz

    def value(ek):
        return nadir(model.with_inertia(ek), disturbance, ffr, epc, **sim)

    grid = np.geomspace(lo, hi, probes)
    samples = [value(ek) for ek in grid]
    if any(b < a - 1e-9 for a, b in zip(samples, samples[1:])):
        raise ValueError("nadir is not monotone in kinetic energy for this configuration")
    if samples[0] >= floor:
        return lo
    if samples[-1] < floor:
        raise Unreachable(f"nadir stays below {floor} Hz up to {hi} GWs")
    first_ok = next(i for i, v in enumerate(samples) if v >= floor)
    lo, hi = float(grid[first_ok - 1]), float(grid[first_ok])
    while hi - lo > tol_gws:
        mid = 0.5 * (lo + hi)
        if value(mid) >= floor:
            hi = mid
        else:
            lo = mid
    return hi


def size_action(
    model: FrequencyModel,
    disturbance: Disturbance,
    action: Action | str,
    template: SteppedReserve | None = None,
    **sim,
) -> float:
    """MW of DI reduction, FFR or EPC needed so the nadir meets the floor.

    DI reduction moves in 50 MW blocks; stepped reserves are sized to 1 MW with
    a single trigger placed at the template's first threshold.
    """
    action = Action(action)
    floor = model.nadir_floor_hz
    di = disturbance.lost_generation_mw
    if nadir(model, disturbance, **sim) >= floor:
        return 0.0

    if action is Action.DI_REDUCTION:
        n_max = math.ceil(di / DI_BLOCK_MW)

        def reduced(n):
            return replace(disturbance, lost_generation_mw=max(di - n * DI_BLOCK_MW, 0.0))

        if nadir(model, reduced(n_max), **sim) < floor:
            raise Unreachable("DI reduction cannot reach the nadir floor")
        n = _smallest(1, n_max, lambda k: nadir(model, reduced(k), **sim) >= floor)
        return n * DI_BLOCK_MW

    if template is None:
        template = default_ffr() if action is Action.FFR else default_epc()

    def secure(block):
        res = template.with_block(float(block))
        if action is Action.FFR:
            return nadir(model, disturbance, ffr=res, **sim) >= floor
        return nadir(model, disturbance, epc=res, **sim) >= floor

    top = max(int(math.ceil(di)), 1)
    if not secure(top):
        raise Unreachable(f"{action.value} block up to {top} MW cannot reach the nadir floor")
    return float(_smallest(1, top, secure))


def make_sizer(
    model: FrequencyModel,
    disturbance: Disturbance,
    action: Action | str,
    template: SteppedReserve | None = None,
    **sim,
) -> Callable[[float], float]:
    """Memoised ``E_k -> MW`` sizing function for the planners."""
    cache: dict[float, float | Unreachable] = {}

    def size(ek_gws: float) -> float:
        if ek_gws not in cache:
            try:
                cache[ek_gws] = size_action(model.with_inertia(ek_gws), disturbance, action, template, **sim)
            except Unreachable as err:
                cache[ek_gws] = err
        hit = cache[ek_gws]
        if isinstance(hit, Unreachable):
            raise hit
        return hit

    return size


def sweep(
    model: FrequencyModel,
    disturbance: Disturbance,
    ek_grid: Sequence[float],
    actions: Sequence[Action] = (Action.DI_REDUCTION, Action.FFR, Action.EPC),
    templates: Mapping[Action, SteppedReserve] | None = None,
    **sim,
) -> list[dict]:
    """Required MW per action across an inertia grid (``None`` where unreachable)."""
    templates = templates or {}
    rows = []
    for ek in ek_grid:
        row = {"ek_gws": float(ek)}
        for a in map(Action, actions):
            try:
                row[a.value] = size_action(model.with_inertia(float(ek)), disturbance, a, templates.get(a), **sim)
            except Unreachable:
                row[a.value] = None
        rows.append(row)
    return rows
