import pytest
from hypothesis import given
from hypothesis import strategies as st

from hvdc_cba.core import HourlySeries
from hvdc_cba.frequency import Action, Unreachable
from hvdc_cba.planning import Event, RemedialPlan, deficit_hours, plan_di_reduction, plan_stepped

EXAMPLE = HourlySeries("ex", (160.0, 155.0, 148.0, 145.0, 152.0, 149.0, 160.0), "GWs")


def flat(mw):
    return lambda ek: mw


def test_deficit_hours_example():
    assert deficit_hours(EXAMPLE, 150.0) == [2, 3, 5]
    assert deficit_hours(EXAMPLE, 100.0) == []
    assert deficit_hours(EXAMPLE, 145.0) == []  # equality is secure


def test_di_plan_example():
    plan = plan_di_reduction(EXAMPLE, 150.0, flat(100.0), pad_h=1, merge_gap_h=1)
    assert plan.events == (Event(1, 6, 100.0),)
    assert plan.occasions == 1
    assert plan.hours == 6
    assert plan.energy_gwh == pytest.approx(0.6)


def test_di_plan_empty():
    plan = plan_di_reduction(EXAMPLE, 100.0, flat(100.0))
    assert plan.events == () and plan.occasions == 0 and plan.energy_gwh == 0


def test_di_plan_separate_runs():
    s = HourlySeries("s", (100.0, 200.0, 200.0, 100.0), "GWs")
    plan = plan_di_reduction(s, 150.0, flat(50.0), pad_h=0, merge_gap_h=0)
    assert plan.events == (Event(0, 0, 50.0), Event(3, 3, 50.0))


def test_di_event_rounds_peak_up_to_blocks():
    s = HourlySeries("s", (140.0, 120.0, 140.0), "GWs")
    plan = plan_di_reduction(s, 150.0, lambda ek: 30.0 if ek > 130 else 120.0, pad_h=0, merge_gap_h=0)
    assert plan.events == (Event(0, 2, 150.0),)


def test_di_padding_clamped_to_horizon():
    s = HourlySeries("s", (100.0, 200.0, 200.0), "GWs")
    plan = plan_di_reduction(s, 150.0, flat(50.0), pad_h=5)
    assert plan.events == (Event(0, 2, 50.0),)


def test_stepped_plan_example():
    plan = plan_stepped(EXAMPLE, 150.0, flat(80.0), Action.FFR)
    assert plan.hours == 3
    assert plan.energy_gwh == pytest.approx(0.24)
    assert plan.occasions is None
    assert plan_stepped(EXAMPLE, 100.0, flat(80.0)).volume_mwh == 0


def test_ffr_and_epc_same_volume_under_same_sizing():
    a = plan_stepped(EXAMPLE, 150.0, flat(80.0), Action.FFR)
    b = plan_stepped(EXAMPLE, 150.0, flat(80.0), Action.EPC)
    assert a.hourly_mw == b.hourly_mw


def test_stepped_rejects_di():
    with pytest.raises(ValueError):
        plan_stepped(EXAMPLE, 150.0, flat(1.0), Action.DI_REDUCTION)


def test_unreachable_hours_flagged():
    def sizer(ek):
        if ek < 146:
            raise Unreachable("too low")
        return 10.0

    plan = plan_stepped(EXAMPLE, 150.0, sizer, Action.EPC)
    assert plan.infeasible_hours == (3,)
    assert not plan.feasible
    assert plan_di_reduction(EXAMPLE, 150.0, sizer).infeasible_hours == (3,)


def test_plan_dict_round_trip():
    plan = plan_di_reduction(EXAMPLE, 150.0, flat(100.0), pad_h=1, merge_gap_h=0)
    assert RemedialPlan.from_dict(plan.to_dict()) == plan
    doc = {"strategy": "di", "events": [{"start": 1, "end": 2, "mw": 100}], "horizon_h": 5}
    assert RemedialPlan.from_dict(doc).hourly_mw == (0, 100, 100, 0, 0)


series = st.lists(st.floats(100.0, 200.0, allow_nan=False), min_size=1, max_size=80).map(
    lambda v: HourlySeries("h", tuple(v), "GWs")
)


@given(series, st.integers(0, 4), st.integers(0, 8), st.floats(1.0, 400.0))
def test_structure_invariants(s, pad, gap, mw):
    di = plan_di_reduction(s, 150.0, flat(mw), pad, gap)
    step = plan_stepped(s, 150.0, flat(mw), Action.FFR)
    assert step.hours <= di.hours
    assert step.volume_mwh <= di.volume_mwh + 1e-9
    assert all(e.mw % 50 == 0 for e in di.events)
    assert all(a.end < b.start for a, b in zip(di.events, di.events[1:]))
    assert di.energy_gwh == pytest.approx(sum(di.hourly_mw) / 1000)
    assert di.hours == sum(1 for x in di.hourly_mw if x > 0)
    assert set(h for h, x in enumerate(step.hourly_mw) if x > 0) == set(deficit_hours(s, 150.0))


@given(series, st.integers(0, 4), st.integers(0, 8))
def test_merge_gap_monotone(s, pad, gap):
    a = plan_di_reduction(s, 150.0, flat(50.0), pad, gap)
    b = plan_di_reduction(s, 150.0, flat(50.0), pad, gap + 1)
    assert b.occasions <= a.occasions


@given(series)
def test_planning_is_pure(s):
    a = plan_di_reduction(s, 150.0, flat(70.0))
    b = plan_di_reduction(s, 150.0, flat(70.0))
    assert a == b


def test_negative_parameters_rejected():
    with pytest.raises(ValueError):
        plan_di_reduction(EXAMPLE, 150.0, flat(1.0), pad_h=-1)
