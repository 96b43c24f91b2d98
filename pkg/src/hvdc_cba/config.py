"""Study configuration and price-parameter files.

Both are JSON. Relative paths inside a config resolve against the directory
holding the config file, so a study folder can be moved as a unit.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .core import FormatError, HourlySeries
from .costs import DiCostParams, EpcCostParams, FfrCostParams
from .frequency import Disturbance, FrequencyModel, SteppedReserve, default_epc, default_ffr
from .market import DEFAULT_SEGMENTS, LossMode
from .planning import DEFAULT_MERGE_GAP_H, DEFAULT_PAD_H

# FCR-D volume used by studies unless overridden; see README for the calibration
STUDY_FCR_D_MW = 2400.0

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_RESERVE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "threshold_hz": _NUM,
        "activation_delay_s": _NONNEG,
        "full_activation_s": _NONNEG,
        "sustain": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"type": "string"},
        "network": {"type": "string"},
        "bids": {"type": "string"},
        "series": {"type": "string"},
        "prices": {"type": "string"},
        "output": {"type": "string"},
        "plans": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "string"} for k in ("di", "ffr", "epc")},
        },
        "mode": {"enum": [m.value for m in LossMode]},
        "segments": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "frequency": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fcr_d_mw": _NONNEG,
                "fcr_lag_s": _POS,
                "fcr_band_hz": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "load_damping_mw_per_hz": _NONNEG,
                "nadir_floor_hz": _NUM,
                "load_shed_hz": _NUM,
                "disturbance_mw": _NONNEG,
                "horizon_s": _POS,
                "dt_s": _POS,
                "ffr": _RESERVE_SCHEMA,
                "epc": _RESERVE_SCHEMA,
            },
        },
        "planner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pad_h": {"type": "integer", "minimum": 0},
                "merge_gap_h": {"type": "integer", "minimum": 0},
                "threshold_gws": _POS,
            },
        },
    },
}


@dataclass(frozen=True)
class FrequencySettings:
    fcr_d_mw: float = STUDY_FCR_D_MW
    fcr_lag_s: float = 7.2
    fcr_band_hz: tuple[float, float] = (49.9, 49.5)
    load_damping_mw_per_hz: float = 0.0
    nadir_floor_hz: float = 49.0
    load_shed_hz: float = 48.8
    disturbance_mw: float = 1450.0
    horizon_s: float = 60.0
    dt_s: float = 0.01
    ffr: Mapping[str, Any] = field(default_factory=dict)
    epc: Mapping[str, Any] = field(default_factory=dict)

    def model(self, kinetic_energy_gws: float = 200.0) -> FrequencyModel:
        return FrequencyModel(
            kinetic_energy_gws,
            self.fcr_d_mw,
            fcr_band_hz=tuple(self.fcr_band_hz),
            fcr_lag_s=self.fcr_lag_s,
            load_damping_mw_per_hz=self.load_damping_mw_per_hz,
            nadir_floor_hz=self.nadir_floor_hz,
            load_shed_hz=self.load_shed_hz,
        )

    def disturbance(self) -> Disturbance:
        return Disturbance(self.disturbance_mw)

    @property
    def sim(self) -> dict:
        return {"horizon_s": self.horizon_s, "dt_s": self.dt_s}

    def reserve(self, which: str, block_mw: float = 100.0) -> SteppedReserve:
        base = default_ffr(block_mw) if which == "ffr" else default_epc(block_mw)
        over = dict(self.ffr if which == "ffr" else self.epc)
        thr = over.pop("threshold_hz", base.triggers[0][0])
        return SteppedReserve(
            ((thr, block_mw),),
            over.get("activation_delay_s", base.activation_delay_s),
            over.get("full_activation_s", base.full_activation_s),
            over.get("sustain", base.sustain),
        )


@dataclass(frozen=True)
class PlannerSettings:
    pad_h: int = DEFAULT_PAD_H
    merge_gap_h: int = DEFAULT_MERGE_GAP_H
    threshold_gws: float | None = None  # computed from the frequency model when absent


@dataclass(frozen=True)
class StudyConfig:
    scenario: str = "study"
    network: Path | None = None
    bids: Path | None = None
    series: Path | None = None
    prices: Path | None = None
    output: Path = Path("out")
    plans: Mapping[str, Path] = field(default_factory=dict)  # precomputed plan.json per strategy
    mode: LossMode = LossMode.PWL_AC_HVDC
    segments: int = DEFAULT_SEGMENTS
    seed: int = 0
    workers: int = 1
    frequency: FrequencySettings = FrequencySettings()
    planner: PlannerSettings = PlannerSettings()

    def require(self, *names: str) -> None:
        """Fail unless every named input path is set and exists."""
        unset = [n for n in names if getattr(self, n) is None]
        if unset:
            raise FormatError(f"config: {', '.join(unset)} required for this command (set in config or by flag)")
        for name in names:
            path = getattr(self, name)
            if not Path(path).is_file():
                raise FormatError(f"config: {name} file not found: {path}")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = str(v)
            elif isinstance(v, LossMode):
                v = v.value
            elif f.name == "plans":
                v = {k: str(p) for k, p in v.items()} or None
            elif isinstance(v, (FrequencySettings, PlannerSettings)):
                v = {k: (list(x) if isinstance(x, tuple) else x) for k, x in asdict(v).items()}
            if v is not None:
                d[f.name] = v
        return d


def _validated(doc: Any, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise FormatError(f"{what}: {where}: {err.message}") from None


def _read_json(path: Path, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise FormatError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise FormatError(f"{what} {path}: invalid JSON at line {err.lineno} column {err.colno}") from None


def config_from_dict(doc: Mapping, base: Path | None = None) -> StudyConfig:
    _validated(doc, CONFIG_SCHEMA, "config")
    base = base or Path(".")

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    def path(key):
        return resolve(doc[key]) if key in doc else None

    freq = dict(doc.get("frequency", {}))
    if "fcr_band_hz" in freq:
        freq["fcr_band_hz"] = tuple(freq["fcr_band_hz"])
    settings = FrequencySettings(**freq)
    try:
        settings.model()
        settings.reserve("ffr")
        settings.reserve("epc")
    except ValueError as err:
        raise FormatError(f"config: frequency: {err}") from None

    return StudyConfig(
        scenario=doc.get("scenario", "study"),
        network=path("network"),
        bids=path("bids"),
        series=path("series"),
        prices=path("prices"),
        output=path("output") or base / "out",
        plans={k: resolve(v) for k, v in doc.get("plans", {}).items()},
        mode=LossMode(doc.get("mode", LossMode.PWL_AC_HVDC.value)),
        segments=doc.get("segments", DEFAULT_SEGMENTS),
        seed=doc.get("seed", 0),
        workers=doc.get("workers", 1),
        frequency=settings,
        planner=PlannerSettings(**doc.get("planner", {})),
    )


def load_config(path: str | Path) -> StudyConfig:
    path = Path(path)
    return config_from_dict(_read_json(path, "config"), path.parent)


# --------------------------------------------------------------------------
# prices.json

_SAMPLES = {"type": "array", "items": _NONNEG, "minItems": 1}

PRICES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "di": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "opportunity_eur_mwh": _NONNEG,
                "fixed_eur_per_event": _NONNEG,
                "regulating_price_eur_mwh": {
                    "oneOf": [_NONNEG, {"type": "array", "items": _NONNEG, "minItems": 1}]
                },
                "substitute_hours_per_event": {"type": "integer", "minimum": 0},
            },
        },
        "ffr": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "price_eur_mw_h": _NONNEG,
                "tso_shares": {"type": "object", "additionalProperties": _NONNEG, "minProperties": 1},
            },
        },
        "epc": {
            "type": "object",
            "additionalProperties": False,
            "required": ["reserve_price_samples", "reservation_price_samples"],
            "properties": {
                "reserve_price_samples": _SAMPLES,
                "reservation_price_samples": _SAMPLES,
                "bootstrap_n": {"type": "integer", "minimum": 1000},
            },
        },
    },
    "required": ["epc"],
}


@dataclass(frozen=True)
class PriceParams:
    di: DiCostParams
    ffr: FfrCostParams
    epc: EpcCostParams


def prices_from_dict(doc: Mapping, seed: int = 0) -> PriceParams:
    _validated(doc, PRICES_SCHEMA, "prices")
    di = dict(doc.get("di", {}))
    reg = di.pop("regulating_price_eur_mwh", None)
    if isinstance(reg, list):
        di["regulating_price"] = HourlySeries("regulating price", tuple(float(v) for v in reg), "EUR/MWh")
    elif reg is not None:
        di["regulating_price"] = float(reg)
    epc = doc["epc"]
    try:
        return PriceParams(
            DiCostParams(**di),
            FfrCostParams(**doc.get("ffr", {})),
            EpcCostParams(
                tuple(float(v) for v in epc["reserve_price_samples"]),
                tuple(float(v) for v in epc["reservation_price_samples"]),
                epc.get("bootstrap_n", 10_000),
                seed,
            ),
        )
    except ValueError as err:
        raise FormatError(f"prices: {err}") from None


def load_prices(path: str | Path, seed: int = 0) -> PriceParams:
    return prices_from_dict(_read_json(Path(path), "prices"), seed)
