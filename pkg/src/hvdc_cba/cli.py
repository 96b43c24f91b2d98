"""``hvdc-cba`` command line.

Every command validates its inputs, computes all results in memory and only
then writes files, so a failing run leaves no partial outputs. Failures are
reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, data_path
from .config import StudyConfig, load_config, load_prices
from .core import (
    FormatError,
    dumps_bids,
    dumps_series,
    load_bids,
    load_network,
    load_series,
    network_to_dict,
)
from .costs import compare_costs, di_cost, epc_cost, ffr_cost
from .frequency import (
    Action,
    SimulationError,
    Unreachable,
    initial_rocof,
    make_sizer,
    required_kinetic_energy,
    simulate,
    size_action,
    sweep,
)
from .market import LossMode, MarketError, MarketInstance, clear, compare, loss_rows, run_year
from .planning import RemedialPlan, plan_di_reduction, plan_stepped
from .synth import SyntheticSpec, generate, spec_dict

EXIT_USAGE = 2
EXIT_COMPUTE = 3
EXIT_INTERNAL = 1


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_USAGE, **detail):
        super().__init__(message)
        self.kind, self.code, self.detail = kind, code, detail


# --------------------------------------------------------------------------
# output helpers


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=1, allow_nan=False) + "\n").encode()


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue().encode()


def _emit(outdir: Path, files: dict[str, bytes]) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name, blob in files.items():
        tmp = outdir / f".{name}.tmp"
        tmp.write_bytes(blob)
        os.replace(tmp, outdir / name)
    print(json.dumps({"status": "ok", "output": str(outdir), "files": sorted(files)}))


# --------------------------------------------------------------------------
# config resolution


def _config(args) -> StudyConfig:
    cfg = load_config(args.config) if args.config else StudyConfig()
    over = {}
    for key in ("network", "bids", "series", "prices"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = Path(val)
    if getattr(args, "out", None) is not None:
        over["output"] = Path(args.out)
    for key in ("seed", "workers", "segments"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    freq = {}
    for key, attr in (("fcr_d", "fcr_d_mw"), ("disturbance", "disturbance_mw"), ("dt", "dt_s"), ("horizon", "horizon_s")):
        val = getattr(args, key, None)
        if val is not None:
            freq[attr] = val
    if freq:
        over["frequency"] = replace(cfg.frequency, **freq)
    plan = {}
    for key in ("pad_h", "merge_gap_h", "threshold"):
        val = getattr(args, key, None)
        if val is not None:
            plan["threshold_gws" if key == "threshold" else key] = val
    if plan:
        over["planner"] = replace(cfg.planner, **plan)
    cfg = replace(cfg, **over)
    if cfg.workers < 1:
        raise FormatError("workers must be at least 1")
    if cfg.segments < 1:
        raise FormatError("segments must be at least 1")
    try:
        cfg.frequency.model()
    except ValueError as err:
        raise FormatError(f"frequency settings: {err}") from None
    return cfg


def _prices(cfg: StudyConfig):
    return load_prices(cfg.prices if cfg.prices is not None else data_path("prices.json"), cfg.seed)


# --------------------------------------------------------------------------
# market


def _market_inputs(cfg):
    cfg.require("network", "bids")
    return load_network(cfg.network), load_bids(cfg.bids)


def cmd_market_clear(args) -> None:
    cfg = _config(args)
    network, bids = _market_inputs(cfg)
    if args.hour not in bids:
        raise CliError("input", f"no bids for hour {args.hour}", hour=args.hour)
    mode = LossMode(args.mode) if args.mode else cfg.mode
    sol = clear(MarketInstance(args.hour, network, bids[args.hour], mode, cfg.segments))
    _emit(cfg.output, {"solution.json": _json(sol.to_dict())})


def cmd_market_run_year(args) -> None:
    cfg = _config(args)
    network, bids = _market_inputs(cfg)
    modes = list(LossMode) if args.mode == "all" else [LossMode(args.mode) if args.mode else cfg.mode]
    reports = {m: run_year(network, bids, m, cfg.segments, workers=cfg.workers) for m in modes}
    header = ("hour", "interconnector", "flow_mw", "modeled_loss_mw", "realized_loss_mw")
    files = {}
    if len(modes) == 1:
        (rep,) = reports.values()
        doc = rep.to_dict()
        files["losses.csv"] = _csv(header, loss_rows(rep))
    else:
        ref = reports[LossMode.NO_FACTORS]
        doc = {
            "reference": ref.mode.value,
            "reports": [r.to_dict() for r in reports.values()],
            "comparisons": [compare(ref, r).to_dict() for r in reports.values()],
        }
        for m, rep in reports.items():
            files[f"losses-{m.value}.csv"] = _csv(header, loss_rows(rep))
        files["fig6.csv"] = _csv(
            ("mode", "hvdc_loss_mwh", "ac_loss_mwh", "total_loss_mwh", "savings_eur"),
            (
                (m.value, r.hvdc_loss_mwh, r.ac_loss_mwh, r.total_loss_mwh, compare(ref, r).savings_eur)
                for m, r in reports.items()
            ),
        )
    files["report.json"] = _json(doc)
    _emit(cfg.output, files)


# --------------------------------------------------------------------------
# frequency


def _reserves(cfg, args):
    ffr = cfg.frequency.reserve("ffr", args.ffr) if getattr(args, "ffr", None) else None
    epc = cfg.frequency.reserve("epc", args.epc) if getattr(args, "epc", None) else None
    return ffr, epc


def cmd_freq_simulate(args) -> None:
    cfg = _config(args)
    fs = cfg.frequency
    model, dist = fs.model(args.ek), fs.disturbance()
    ffr, epc = _reserves(cfg, args)
    traj = simulate(model, dist, ffr, epc, **fs.sim)
    summary = {
        "kinetic_energy_gws": args.ek,
        "disturbance_mw": dist.lost_generation_mw,
        "nadir_hz": traj.nadir_hz,
        "nadir_time_s": traj.nadir_time_s,
        "nadir_ok": traj.nadir_hz >= model.nadir_floor_hz,
        "load_shed": traj.shed,
        "initial_rocof_hz_s": initial_rocof(model, dist),
        "activations": [a.__dict__ for a in traj.activations],
    }
    files = {
        "traj.csv": _csv(("t_s", "f_hz", "p_fcr_mw", "p_ffr_mw", "p_epc_mw"), traj.rows()),
        "nadir.json": _json(summary),
    }
    _emit(cfg.output, files)


def _actions(name: str) -> list[Action]:
    return list(Action) if name == "all" else [Action(name)]


def cmd_freq_size(args) -> None:
    cfg = _config(args)
    fs = cfg.frequency
    model, dist = fs.model(args.ek), fs.disturbance()
    row = {"ek_gws": args.ek}
    for a in _actions(args.action):
        template = None if a is Action.DI_REDUCTION else fs.reserve(a.value)
        try:
            row[a.value + "_mw"] = size_action(model, dist, a, template, **fs.sim)
        except Unreachable as err:
            raise CliError("unreachable", str(err), EXIT_COMPUTE, action=a.value, ek_gws=args.ek) from None
    _emit(cfg.output, {"size.csv": _csv(tuple(row), [tuple(row.values())])})


def _threshold(cfg) -> float:
    if cfg.planner.threshold_gws is not None:
        return cfg.planner.threshold_gws
    fs = cfg.frequency
    try:
        return required_kinetic_energy(fs.model(), fs.disturbance(), **fs.sim)
    except Unreachable as err:
        raise CliError("unreachable", str(err), EXIT_COMPUTE) from None


def cmd_freq_threshold(args) -> None:
    cfg = _config(args)
    fs = cfg.frequency
    doc = {
        "threshold_gws": _threshold(cfg),
        "fcr_d_mw": fs.fcr_d_mw,
        "disturbance_mw": fs.disturbance_mw,
        "nadir_floor_hz": fs.nadir_floor_hz,
    }
    _emit(cfg.output, {"threshold.json": _json(doc)})


def cmd_freq_sweep(args) -> None:
    cfg = _config(args)
    if not args.ek_step > 0 or args.ek_max < args.ek_min or args.ek_min <= 0:
        raise CliError("input", "need 0 < ek-min <= ek-max and ek-step > 0")
    grid = np.round(np.arange(args.ek_min, args.ek_max + args.ek_step / 2, args.ek_step), 6)
    fs = cfg.frequency
    actions = _actions(args.action)
    templates = {a: fs.reserve(a.value) for a in actions if a is not Action.DI_REDUCTION}
    rows = sweep(fs.model(), fs.disturbance(), [float(x) for x in grid], actions, templates, **fs.sim)
    header = ["ek_gws"] + [a.value + "_mw" for a in actions]
    body = [[r["ek_gws"]] + [r[a.value] for a in actions] for r in rows]
    _emit(cfg.output, {"fig2.csv": _csv(header, body)})


# --------------------------------------------------------------------------
# planning and costs


def _load_plan(path: Path, strategy: Action) -> RemedialPlan:
    try:
        plan = RemedialPlan.from_dict(json.loads(Path(path).read_text()))
    except FileNotFoundError:
        raise FormatError(f"plan file not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise FormatError(f"plan {path}: {err}") from None
    if plan.strategy is not strategy:
        raise FormatError(f"plan {path}: expected strategy {strategy.value}, got {plan.strategy.value}")
    return plan


def _plans(cfg) -> dict[Action, RemedialPlan]:
    given = {Action(k): _load_plan(p, Action(k)) for k, p in cfg.plans.items()}
    if len(given) == len(Action):
        return given
    if cfg.series is None and given:
        return given
    cfg.require("series")
    series = load_series(cfg.series, label=cfg.scenario)
    if any(v <= 0 for v in series.values):
        raise FormatError(f"series {cfg.series}: kinetic energy must be positive")
    if series.unit != "GWs":
        raise FormatError(f"series {cfg.series}: expected GWs, got {series.unit}")
    thr = _threshold(cfg)
    fs, pl = cfg.frequency, cfg.planner
    model, dist = fs.model(), fs.disturbance()
    plans = dict(given)
    if Action.DI_REDUCTION not in plans:
        sizer = make_sizer(model, dist, Action.DI_REDUCTION, **fs.sim)
        plans[Action.DI_REDUCTION] = plan_di_reduction(series, thr, sizer, pl.pad_h, pl.merge_gap_h)
    for a in (Action.FFR, Action.EPC):
        if a not in plans:
            sizer = make_sizer(model, dist, a, fs.reserve(a.value), **fs.sim)
            plans[a] = plan_stepped(series, thr, sizer, a)
    return {a: plans[a] for a in Action if a in plans}


def _table1(plans, scenario) -> bytes:
    return _csv(
        ("scenario", "strategy", "occasions", "hours", "energy_gwh"),
        ((scenario, a.value, p.occasions, p.hours, p.energy_gwh) for a, p in plans.items()),
    )


def _plan_files(plans) -> dict[str, bytes]:
    return {f"plan-{a.value}.json": _json(p.to_dict()) for a, p in plans.items()}


def _check_feasible(plans) -> None:
    bad = {a.value: list(p.infeasible_hours) for a, p in plans.items() if p.infeasible_hours}
    if bad:
        raise CliError("unreachable", "sizing unreachable for some hours", EXIT_COMPUTE, hours=bad)


def cmd_plan_build(args) -> None:
    cfg = _config(args)
    plans = _plans(cfg)
    _check_feasible(plans)
    files = _plan_files(plans)
    files["table1.csv"] = _table1(plans, cfg.scenario)
    _emit(cfg.output, files)


def cmd_cost_cba(args) -> None:
    cfg = _config(args)
    prices = _prices(cfg)
    plans = _plans(cfg)
    _check_feasible(plans)
    costs = {
        Action.DI_REDUCTION: lambda p: di_cost(p, prices.di),
        Action.FFR: lambda p: ffr_cost(p, prices.ffr),
        Action.EPC: lambda p: epc_cost(p, prices.epc),
    }
    priced = {a: costs[a](p) for a, p in plans.items()}
    report = compare_costs(
        priced.get(Action.DI_REDUCTION), priced.get(Action.FFR), priced.get(Action.EPC), cfg.scenario
    )
    fig3 = []
    for c in report.strategies:
        d = c.distribution
        fig3.append((cfg.scenario, c.strategy.value, c.total_eur, d and d.p5, d and d.p95))
    files = _plan_files(plans)
    files["table1.csv"] = _table1(plans, cfg.scenario)
    files["fig3.csv"] = _csv(("scenario", "strategy", "total_eur", "p5_eur", "p95_eur"), fig3)
    files["cba.json"] = _json(report.to_dict())
    _emit(cfg.output, files)


# --------------------------------------------------------------------------
# synthetic data


def cmd_synth(args) -> None:
    try:
        spec = SyntheticSpec(
            seed=args.seed,
            zones=args.zones,
            horizon_h=args.hours,
            dry_scaling=args.dry_scaling,
            ek_base_gws=args.ek_base,
            adversarial_hour=None if args.adversarial_hour < 0 else args.adversarial_hour,
            scenario=args.scenario,
        )
    except ValueError as err:
        raise FormatError(f"synthetic spec: {err}") from None
    study = generate(spec)
    out = Path(args.out)
    files = {
        "network.json": _json(network_to_dict(study.network)),
        "bids.csv": dumps_bids(study.bids).encode(),
        "ek.csv": dumps_series(study.kinetic_energy, digits=1).encode(),
    }
    files["prices.json"] = data_path("prices.json").read_bytes()
    files["spec.json"] = _json(spec_dict(spec))
    files["config.json"] = _json(
        {
            "scenario": spec.scenario,
            "network": "network.json",
            "bids": "bids.csv",
            "series": "ek.csv",
            "prices": "prices.json",
            "seed": spec.seed,
        }
    )
    _emit(out, files)


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def _common(p, market=False, freq=False, plan=False):
    g = p.add_argument_group("study")
    g.add_argument("--config", metavar="PATH", help="study config JSON (relative paths resolve against its folder)")
    g.add_argument("--out", metavar="DIR", help="output directory (default: config 'output', else ./out)")
    g.add_argument("--seed", type=int, help="seed for stochastic steps (default: config seed, else 0)")
    if market:
        g.add_argument("--network", metavar="PATH", help="network JSON (overrides config)")
        g.add_argument("--bids", metavar="PATH", help="bids CSV (overrides config)")
        g.add_argument("--segments", type=int, help="PWL segments per line (default: config, else 5)")
        g.add_argument("--workers", type=int, help="worker processes (default: config, else 1)")
    if freq:
        g.add_argument("--fcr-d", dest="fcr_d", type=float, metavar="MW", help="total FCR-D (default 2400)")
        g.add_argument("--disturbance", type=float, metavar="MW", help="lost generation (default 1450)")
        g.add_argument("--dt", type=float, metavar="S", help="RK4 step (default 0.01)")
        g.add_argument("--horizon", type=float, metavar="S", help="simulated time (default 60)")
    if plan:
        g.add_argument("--series", metavar="PATH", help="kinetic-energy CSV in GWs (overrides config)")
        g.add_argument("--prices", metavar="PATH", help="prices JSON (default: config, else bundled defaults)")
        g.add_argument("--pad-h", dest="pad_h", type=int, help="hours added before and after DI events (default 2)")
        g.add_argument("--merge-gap-h", dest="merge_gap_h", type=int, help="join DI events this close (default 6)")
        g.add_argument(
            "--threshold", type=float, metavar="GWS", help="E_k security threshold (default: computed by bisection)"
        )


def build_parser() -> argparse.ArgumentParser:
    mode_help = "loss internalisation: none, linear-hvdc, pwl-hvdc, pwl-all (default: config, else pwl-all)"
    ap = _Parser(prog="hvdc-cba", description="Loss-aware market clearing and remedial-action cost comparison.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = ap.add_subparsers(dest="group", metavar="{market,freq,plan,cost,synth}", parser_class=_Parser)
    groups.required = True

    market = groups.add_parser("market", help="market clearing").add_subparsers(dest="cmd", parser_class=_Parser)
    market.required = True
    p = market.add_parser("clear", help="clear one hour, write solution.json")
    _common(p, market=True)
    p.add_argument("--hour", type=int, default=0, help="hour index (default 0)")
    p.add_argument("--mode", choices=[m.value for m in LossMode], help=mode_help)
    p.set_defaults(func=cmd_market_clear)
    p = market.add_parser("run-year", help="clear every hour, write report.json and losses CSV")
    _common(p, market=True)
    p.add_argument("--mode", choices=[m.value for m in LossMode] + ["all"], help=mode_help + "; 'all' compares all four")
    p.set_defaults(func=cmd_market_run_year)

    freq = groups.add_parser("freq", help="frequency response").add_subparsers(dest="cmd", parser_class=_Parser)
    freq.required = True
    p = freq.add_parser("simulate", help="simulate one disturbance, write traj.csv and nadir.json")
    _common(p, freq=True)
    p.add_argument("--ek", type=float, required=True, metavar="GWS", help="system kinetic energy")
    p.add_argument("--ffr", type=float, metavar="MW", help="FFR block at its default trigger (default none)")
    p.add_argument("--epc", type=float, metavar="MW", help="EPC block at its default trigger (default none)")
    p.set_defaults(func=cmd_freq_simulate)
    p = freq.add_parser("size", help="MW of an action needed at one E_k, write size.csv")
    _common(p, freq=True)
    p.add_argument("--ek", type=float, required=True, metavar="GWS", help="system kinetic energy")
    p.add_argument("--action", choices=[a.value for a in Action] + ["all"], default="all", help="default all")
    p.set_defaults(func=cmd_freq_size)
    p = freq.add_parser("threshold", help="E_k needed without remedial action, write threshold.json")
    _common(p, freq=True)
    p.set_defaults(func=cmd_freq_threshold, threshold=None)
    p = freq.add_parser("sweep", help="action size across an E_k grid, write fig2.csv")
    _common(p, freq=True)
    p.add_argument("--ek-min", type=float, default=80.0, metavar="GWS", help="default 80")
    p.add_argument("--ek-max", type=float, default=240.0, metavar="GWS", help="default 240")
    p.add_argument("--ek-step", type=float, default=10.0, metavar="GWS", help="default 10")
    p.add_argument("--action", choices=[a.value for a in Action] + ["all"], default="all", help="default all")
    p.set_defaults(func=cmd_freq_sweep)

    plan = groups.add_parser("plan", help="remedial plans").add_subparsers(dest="cmd", parser_class=_Parser)
    plan.required = True
    p = plan.add_parser("build", help="plans from an E_k series, write plan-*.json and table1.csv")
    _common(p, freq=True, plan=True)
    p.set_defaults(func=cmd_plan_build)

    cost = groups.add_parser("cost", help="cost-benefit").add_subparsers(dest="cmd", parser_class=_Parser)
    cost.required = True
    p = cost.add_parser("cba", help="plan and price all strategies, write table1.csv, fig3.csv, cba.json")
    _common(p, freq=True, plan=True)
    p.set_defaults(func=cmd_cost_cba)

    p = groups.add_parser("synth", help="write a seeded synthetic study folder")
    d = SyntheticSpec()
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int, default=d.seed, help=f"default {d.seed}")
    p.add_argument("--zones", type=int, default=d.zones, help=f"zones from the template, 1-6 (default {d.zones})")
    p.add_argument("--hours", type=int, default=d.horizon_h, help=f"horizon (default {d.horizon_h})")
    p.add_argument("--dry-scaling", type=float, default=d.dry_scaling, help="multiplier on the E_k series (default 1.0)")
    p.add_argument("--ek-base", type=float, default=d.ek_base_gws, metavar="GWS", help=f"default {d.ek_base_gws}")
    p.add_argument(
        "--adversarial-hour", type=int, default=d.adversarial_hour, help="hour rigged against linear factors; -1 for none (default 0)"
    )
    p.add_argument("--scenario", default=d.scenario, help=f"label (default {d.scenario})")
    p.set_defaults(func=cmd_synth)
    return ap


def _fail(kind: str, message: str, code: int, **detail) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **detail}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except CliError as err:
        return _fail(err.kind, str(err), err.code, **err.detail)
    except FormatError as err:
        return _fail("input", str(err), EXIT_USAGE)
    except MarketError as err:
        return _fail("infeasible", str(err), EXIT_COMPUTE)
    except (Unreachable, SimulationError) as err:
        return _fail("unreachable" if isinstance(err, Unreachable) else "simulation", str(err), EXIT_COMPUTE)
    except ValueError as err:
        return _fail("input", str(err), EXIT_USAGE)
    except OSError as err:
        return _fail("io", str(err), EXIT_INTERNAL)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
