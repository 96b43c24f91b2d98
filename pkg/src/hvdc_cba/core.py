"""Domain types and file formats shared by the market and frequency studies.

Units are carried in field names (``_mw``, ``_gws``, ``_eur_mwh``). Flow on an
interconnector is positive from ``from_zone`` to ``to_zone`` everywhere in the
package.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema


class Area(str, Enum):
    NORDIC = "Nordic"
    CONTINENTAL = "ContinentalEurope"
    BALTIC = "Baltic"


class Side(str, Enum):
    SUPPLY = "Supply"
    DEMAND = "Demand"


class LineKind(str, Enum):
    AC = "AC"
    HVDC = "HVDC"


UNITS = ("MW", "GWs", "EUR/MWh", "EUR/MW/h")


class FormatError(ValueError):
    """Raised when an input document cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}"


@dataclass(frozen=True)
class Zone:
    id: str
    name: str = ""
    area: Area = Area.NORDIC


@dataclass(frozen=True)
class BidStep:
    quantity_mw: float
    price_eur_mwh: float


@dataclass(frozen=True)
class BidCurve:
    side: Side
    steps: tuple[BidStep, ...]

    @classmethod
    def of(cls, side: Side | str, steps: Iterable[tuple[float, float]]) -> "BidCurve":
        """Build a curve from ``(quantity, price)`` pairs."""
        return cls(Side(side), tuple(BidStep(float(q), float(p)) for q, p in steps))


@dataclass(frozen=True)
class QuadraticLossModel:
    """Interconnector loss ``a0 + b*|f| + c*f**2`` valid up to ``p_max``."""

    a0_mw: float = 0.0
    b: float = 0.0
    c_per_mw: float = 0.0
    p_max_mw: float = 1000.0


@dataclass(frozen=True)
class Interconnector:
    id: str
    from_zone: str
    to_zone: str
    kind: LineKind
    atc_forward_mw: float
    atc_reverse_mw: float
    loss: QuadraticLossModel = QuadraticLossModel()
    fixed_flow_mw: float | None = None

    @property
    def pinned(self) -> bool:
        return self.fixed_flow_mw is not None


@dataclass(frozen=True)
class Override:
    """Hour-specific replacement of ATC or pinned exchange on one interconnector."""

    hour: int
    interconnector: str
    atc_forward_mw: float | None = None
    atc_reverse_mw: float | None = None
    fixed_flow_mw: float | None = None


@dataclass(frozen=True)
class NetworkModel:
    zones: tuple[Zone, ...]
    interconnectors: tuple[Interconnector, ...]
    overrides: tuple[Override, ...] = ()
    _by_hour: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        by_hour: dict[int, list[Override]] = {}
        for o in self.overrides:
            by_hour.setdefault(o.hour, []).append(o)
        object.__setattr__(self, "_by_hour", by_hour)

    @property
    def zone_ids(self) -> tuple[str, ...]:
        return tuple(z.id for z in self.zones)

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(zone_id)

    def at_hour(self, hour: int) -> tuple[Interconnector, ...]:
        """Interconnectors with the overrides for ``hour`` applied."""
        changes = self._by_hour.get(hour)
        if not changes:
            return self.interconnectors
        patched = {ic.id: ic for ic in self.interconnectors}
        for o in changes:
            ic = patched[o.interconnector]
            kw = {}
            if o.atc_forward_mw is not None:
                kw["atc_forward_mw"] = o.atc_forward_mw
            if o.atc_reverse_mw is not None:
                kw["atc_reverse_mw"] = o.atc_reverse_mw
            if o.fixed_flow_mw is not None:
                kw["fixed_flow_mw"] = o.fixed_flow_mw
            patched[o.interconnector] = replace(ic, **kw)
        return tuple(patched[ic.id] for ic in self.interconnectors)


@dataclass(frozen=True)
class HourlySeries:
    label: str
    values: tuple[float, ...]
    unit: str

    def __post_init__(self):
        if self.unit not in UNITS:
            raise FormatError(f"series {self.label!r}: unknown unit {self.unit!r}")

    def __len__(self) -> int:
        return len(self.values)


# --------------------------------------------------------------------------
# validation


def _loss_violations(entity: str, m: QuadraticLossModel) -> list[Violation]:
    out = []
    for name in ("a0_mw", "b", "c_per_mw"):
        if getattr(m, name) < 0:
            out.append(Violation(entity, f"loss coefficient {name} is negative"))
    if not m.p_max_mw > 0:
        out.append(Violation(entity, "loss p_max_mw must be positive"))
    elif m.a0_mw + m.b * m.p_max_mw + m.c_per_mw * m.p_max_mw**2 >= m.p_max_mw:
        out.append(Violation(entity, "loss at p_max is not below p_max"))
    return out


def _fixed_flow_violation(entity, flow, atc_fwd, atc_rev) -> list[Violation]:
    if flow is None:
        return []
    limit = atc_fwd if flow >= 0 else atc_rev
    if abs(flow) > limit:
        return [Violation(entity, f"fixed flow {flow} MW exceeds ATC {limit} MW")]
    return []


def validate(network: NetworkModel) -> list[Violation]:
    """Return every broken invariant of ``network``; an empty list means valid."""
    out: list[Violation] = []
    if not network.zones:
        out.append(Violation("network", "at least one zone is required"))
    seen: set[str] = set()
    for z in network.zones:
        if z.id in seen:
            out.append(Violation(f"zone {z.id}", "duplicate zone id"))
        seen.add(z.id)

    ic_ids: set[str] = set()
    for ic in network.interconnectors:
        entity = f"interconnector {ic.id}"
        if ic.id in ic_ids:
            out.append(Violation(entity, "duplicate interconnector id"))
        ic_ids.add(ic.id)
        if ic.from_zone == ic.to_zone:
            out.append(Violation(entity, "from_zone equals to_zone"))
        for end in (ic.from_zone, ic.to_zone):
            if end not in seen:
                out.append(Violation(entity, f"endpoint {end!r} is not a declared zone"))
        if ic.atc_forward_mw < 0 or ic.atc_reverse_mw < 0:
            out.append(Violation(entity, "ATC must be non-negative"))
        out.extend(_loss_violations(entity, ic.loss))
        out.extend(_fixed_flow_violation(entity, ic.fixed_flow_mw, ic.atc_forward_mw, ic.atc_reverse_mw))

    base = {ic.id: ic for ic in network.interconnectors}
    for o in network.overrides:
        entity = f"override hour {o.hour} on {o.interconnector}"
        if o.hour < 0:
            out.append(Violation(entity, "hour must be non-negative"))
        ic = base.get(o.interconnector)
        if ic is None:
            out.append(Violation(entity, "unknown interconnector"))
            continue
        fwd = ic.atc_forward_mw if o.atc_forward_mw is None else o.atc_forward_mw
        rev = ic.atc_reverse_mw if o.atc_reverse_mw is None else o.atc_reverse_mw
        if fwd < 0 or rev < 0:
            out.append(Violation(entity, "ATC must be non-negative"))
        flow = ic.fixed_flow_mw if o.fixed_flow_mw is None else o.fixed_flow_mw
        out.extend(_fixed_flow_violation(entity, flow, fwd, rev))
    return out


def validate_curve(curve: BidCurve, entity: str = "bid curve") -> list[Violation]:
    out = []
    if not curve.steps:
        out.append(Violation(entity, "curve has no steps"))
    for i, s in enumerate(curve.steps):
        if not s.quantity_mw > 0:
            out.append(Violation(entity, f"step {i} quantity must be positive"))
        if not math.isfinite(s.price_eur_mwh):
            out.append(Violation(entity, f"step {i} price must be finite"))
    prices = [s.price_eur_mwh for s in curve.steps]
    pairs = list(zip(prices, prices[1:]))
    if curve.side is Side.SUPPLY and any(b < a for a, b in pairs):
        out.append(Violation(entity, "supply prices must be non-decreasing"))
    if curve.side is Side.DEMAND and any(b > a for a, b in pairs):
        out.append(Violation(entity, "demand prices must be non-increasing"))
    return out


# --------------------------------------------------------------------------
# network.json

_LOSS_SCHEMA = {
    "type": "object",
    "properties": {
        "a0_mw": {"type": "number", "minimum": 0},
        "b": {"type": "number", "minimum": 0},
        "c_per_mw": {"type": "number", "minimum": 0},
        "p_max_mw": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["a0_mw", "b", "c_per_mw", "p_max_mw"],
    "additionalProperties": False,
}

NETWORK_SCHEMA = {
    "type": "object",
    "properties": {
        "description": {"type": "string"},
        "zones": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "name": {"type": "string"},
                    "area": {"enum": [a.value for a in Area]},
                },
                "required": ["id", "area"],
                "additionalProperties": False,
            },
        },
        "interconnectors": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "from": {"type": "string"},
                    "to": {"type": "string"},
                    "kind": {"enum": [k.value for k in LineKind]},
                    "atc_fwd_mw": {"type": "number", "minimum": 0},
                    "atc_rev_mw": {"type": "number", "minimum": 0},
                    "loss": _LOSS_SCHEMA,
                    "fixed_flow_mw": {"type": ["number", "null"]},
                },
                "required": ["id", "from", "to", "kind", "atc_fwd_mw", "atc_rev_mw", "loss"],
                "additionalProperties": False,
            },
        },
        "overrides": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "hour": {"type": "integer", "minimum": 0},
                    "interconnector": {"type": "string"},
                    "atc_fwd_mw": {"type": "number", "minimum": 0},
                    "atc_rev_mw": {"type": "number", "minimum": 0},
                    "fixed_flow_mw": {"type": "number"},
                },
                "required": ["hour", "interconnector"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["zones", "interconnectors"],
    "additionalProperties": False,
}


def _schema_error(err: jsonschema.ValidationError) -> FormatError:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return FormatError(f"network.json field {where}: {err.message}")


def network_from_dict(doc: Mapping) -> NetworkModel:
    try:
        jsonschema.validate(doc, NETWORK_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    zones = tuple(Zone(z["id"], z.get("name", ""), Area(z["area"])) for z in doc["zones"])
    ics = []
    for d in doc["interconnectors"]:
        loss = d["loss"]
        ics.append(
            Interconnector(
                id=d["id"],
                from_zone=d["from"],
                to_zone=d["to"],
                kind=LineKind(d["kind"]),
                atc_forward_mw=float(d["atc_fwd_mw"]),
                atc_reverse_mw=float(d["atc_rev_mw"]),
                loss=QuadraticLossModel(
                    float(loss["a0_mw"]), float(loss["b"]), float(loss["c_per_mw"]), float(loss["p_max_mw"])
                ),
                fixed_flow_mw=None if d.get("fixed_flow_mw") is None else float(d["fixed_flow_mw"]),
            )
        )
    overrides = tuple(
        Override(
            hour=int(o["hour"]),
            interconnector=o["interconnector"],
            atc_forward_mw=o.get("atc_fwd_mw"),
            atc_reverse_mw=o.get("atc_rev_mw"),
            fixed_flow_mw=o.get("fixed_flow_mw"),
        )
        for o in doc.get("overrides", ())
    )
    network = NetworkModel(zones, tuple(ics), overrides)
    problems = validate(network)
    if problems:
        raise FormatError("invalid network: " + "; ".join(str(p) for p in problems))
    return network


def network_to_dict(network: NetworkModel) -> dict:
    ics = []
    for ic in network.interconnectors:
        d = {
            "id": ic.id,
            "from": ic.from_zone,
            "to": ic.to_zone,
            "kind": ic.kind.value,
            "atc_fwd_mw": ic.atc_forward_mw,
            "atc_rev_mw": ic.atc_reverse_mw,
            "loss": {
                "a0_mw": ic.loss.a0_mw,
                "b": ic.loss.b,
                "c_per_mw": ic.loss.c_per_mw,
                "p_max_mw": ic.loss.p_max_mw,
            },
        }
        if ic.fixed_flow_mw is not None:
            d["fixed_flow_mw"] = ic.fixed_flow_mw
        ics.append(d)
    doc = {
        "zones": [{"id": z.id, "name": z.name, "area": z.area.value} for z in network.zones],
        "interconnectors": ics,
    }
    if network.overrides:
        rows = []
        for o in network.overrides:
            row = {"hour": o.hour, "interconnector": o.interconnector}
            if o.atc_forward_mw is not None:
                row["atc_fwd_mw"] = o.atc_forward_mw
            if o.atc_reverse_mw is not None:
                row["atc_rev_mw"] = o.atc_reverse_mw
            if o.fixed_flow_mw is not None:
                row["fixed_flow_mw"] = o.fixed_flow_mw
            rows.append(row)
        doc["overrides"] = rows
    return doc


def loads_network(text: str) -> NetworkModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise FormatError(f"network.json line {err.lineno} column {err.colno}: {err.msg}") from None
    return network_from_dict(doc)


def load_network(source: str | Path | Mapping) -> NetworkModel:
    """Parse a network from a file path or an already-decoded dict."""
    if isinstance(source, Mapping):
        return network_from_dict(source)
    return loads_network(Path(source).read_text())


def save_network(network: NetworkModel, path: str | Path | None = None) -> str:
    text = json.dumps(network_to_dict(network), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


# --------------------------------------------------------------------------
# bids.csv

BID_COLUMNS = ("hour", "zone", "side", "price_eur_mwh", "quantity_mw")

Bids = dict[str, tuple[BidCurve, ...]]


def load_bids(path: str | Path) -> dict[int, Bids]:
    """Read ``bids.csv`` into ``{hour: {zone: (supply curve, demand curve)}}``.

    Steps are sorted into merit order (supply ascending, demand descending) with
    file order kept among equal prices.
    """
    raw: dict[int, dict[str, dict[Side, list[BidStep]]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != BID_COLUMNS:
            raise FormatError(f"{path}: expected columns {','.join(BID_COLUMNS)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                hour = int(row["hour"])
                side = Side(row["side"])
                step = BidStep(float(row["quantity_mw"]), float(row["price_eur_mwh"]))
            except ValueError as err:
                raise FormatError(f"{path} line {lineno}: {err}") from None
            if hour < 0:
                raise FormatError(f"{path} line {lineno}: negative hour")
            if not step.quantity_mw > 0:
                raise FormatError(f"{path} line {lineno}: quantity_mw must be positive")
            if not math.isfinite(step.price_eur_mwh):
                raise FormatError(f"{path} line {lineno}: price must be finite")
            raw.setdefault(hour, {}).setdefault(row["zone"], {}).setdefault(side, []).append(step)

    out: dict[int, Bids] = {}
    for hour, zones in raw.items():
        out[hour] = {}
        for zone, sides in zones.items():
            curves = []
            if Side.SUPPLY in sides:
                curves.append(BidCurve(Side.SUPPLY, tuple(sorted(sides[Side.SUPPLY], key=lambda s: s.price_eur_mwh))))
            if Side.DEMAND in sides:
                curves.append(BidCurve(Side.DEMAND, tuple(sorted(sides[Side.DEMAND], key=lambda s: -s.price_eur_mwh))))
            out[hour][zone] = tuple(curves)
    return dict(sorted(out.items()))


def dumps_bids(bids: Mapping[int, Bids]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BID_COLUMNS)
    for hour in sorted(bids):
        for zone, curves in bids[hour].items():
            for curve in curves:
                for s in curve.steps:
                    w.writerow([hour, zone, curve.side.value, _num(s.price_eur_mwh), _num(s.quantity_mw)])
    return buf.getvalue()


def write_bids(bids: Mapping[int, Bids], path: str | Path) -> None:
    Path(path).write_text(dumps_bids(bids))


def _num(x: float) -> str:
    return repr(round(float(x), 6))


# --------------------------------------------------------------------------
# series.csv


def load_series(path: str | Path, label: str | None = None) -> HourlySeries:
    text = Path(path).read_text()
    unit = None
    body = []
    for line in text.splitlines():
        if line.startswith("#unit="):
            unit = line[len("#unit="):].strip()
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body.append(line)
    if unit is None:
        raise FormatError(f"{path}: missing '#unit=' header line")
    if unit not in UNITS:
        raise FormatError(f"{path}: unknown unit {unit!r}")
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if tuple(reader.fieldnames or ()) != ("hour", "value"):
        raise FormatError(f"{path}: expected columns hour,value")
    values = []
    for i, row in enumerate(reader):
        try:
            hour, value = int(row["hour"]), float(row["value"])
        except (TypeError, ValueError):
            raise FormatError(f"{path}: bad row for hour index {i}") from None
        if hour != i:
            raise FormatError(f"{path}: expected hour {i}, found {hour} (missing entries?)")
        if not math.isfinite(value):
            raise FormatError(f"{path}: non-finite value at hour {hour}")
        values.append(value)
    return HourlySeries(label or Path(path).stem, tuple(values), unit)


def dumps_series(series: HourlySeries, digits: int = 3) -> str:
    buf = io.StringIO()
    buf.write(f"#unit={series.unit}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("hour", "value"))
    for h, v in enumerate(series.values):
        w.writerow((h, repr(round(v, digits))))
    return buf.getvalue()


def write_series(series: HourlySeries, path: str | Path, digits: int = 3) -> None:
    Path(path).write_text(dumps_series(series, digits))


def series_from(values: Sequence[float], unit: str, label: str = "series") -> HourlySeries:
    return HourlySeries(label, tuple(float(v) for v in values), unit)
