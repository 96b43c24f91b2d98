import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvdc_cba.core import HourlySeries
from hvdc_cba.costs import (
    DiCostParams,
    EpcCostParams,
    FfrCostParams,
    bootstrap_means,
    compare_costs,
    di_cost,
    epc_cost,
    ffr_cost,
    savings_pct,
)
from hvdc_cba.frequency import Action
from hvdc_cba.planning import RemedialPlan


def di_plan(events, horizon):
    doc = {"strategy": "di", "horizon_h": horizon,
           "events": [{"start": s, "end": e, "mw": mw} for s, e, mw in events]}
    return RemedialPlan.from_dict(doc)


def stepped(action, hourly):
    return RemedialPlan(action, tuple(hourly))


EPC = EpcCostParams((10.0, 12.0, 15.0, 20.0), (2.0, 3.0, 4.0))


def test_di_single_event_example():
    cost = di_cost(di_plan([(0, 9, 50.0)], 10), DiCostParams(regulating_price=0.0))
    assert cost.total_eur == pytest.approx(7060.0)


def test_di_replication_total():
    plan = di_plan([(0, 5, 100.0), (100, 179, 100.0), (400, 479, 100.0)], 8760)
    assert plan.occasions == 3 and plan.hours == 166
    assert plan.energy_gwh == pytest.approx(16.6)
    assert di_cost(plan).total_eur == pytest.approx(383_168.0, abs=0.5)


def test_di_substitution_capped_per_event():
    short = di_cost(di_plan([(0, 23, 10.0)], 50))
    long = di_cost(di_plan([(0, 47, 10.0)], 50))
    sub = {c.name: c.eur for c in short.items}["substitution"]
    assert sub == pytest.approx({c.name: c.eur for c in long.items}["substitution"])


def test_di_hourly_price_series():
    prices = HourlySeries("p", (10.0, 20.0, 30.0, 40.0), "EUR/MWh")
    cost = di_cost(di_plan([(1, 2, 10.0)], 4), DiCostParams(0.0, 0.0, prices, 24))
    assert cost.total_eur == pytest.approx(10 * 20 + 10 * 30)
    with pytest.raises(ValueError):
        di_cost(di_plan([(1, 2, 10.0)], 4), DiCostParams(0.0, 0.0, HourlySeries("p", (1.0,), "EUR/MWh"), 24))


def test_di_params_validated():
    with pytest.raises(ValueError):
        DiCostParams(regulating_price=-1.0)
    with pytest.raises(ValueError):
        DiCostParams(regulating_price=HourlySeries("p", (1.0,), "GWs"))


def test_ffr_total_and_attribution():
    hourly = [68_029.6 / 8] * 8
    cost = ffr_cost(stepped(Action.FFR, hourly))
    assert cost.total_eur == pytest.approx(3_330_049, abs=1)
    assert cost.attribution["Statnett"] == pytest.approx(1_398_620, abs=1)
    assert sum(cost.attribution.values()) == pytest.approx(cost.total_eur)


def test_ffr_hundred_mw_ten_hours():
    assert ffr_cost(stepped(Action.FFR, [100.0] * 10)).total_eur == pytest.approx(48_950.0)


def test_ffr_shares_must_sum_to_one():
    with pytest.raises(ValueError):
        FfrCostParams(tso_shares={"A": 0.5, "B": 0.4})


def test_wrong_strategy_rejected():
    with pytest.raises(ValueError):
        ffr_cost(stepped(Action.EPC, [1.0]))
    with pytest.raises(ValueError):
        compare_costs(ffr_cost(stepped(Action.FFR, [1.0])), None, None)


def test_epc_degenerate_samples_have_no_spread():
    cost = epc_cost(stepped(Action.EPC, [10.0] * 5), EpcCostParams((7.0,) * 6, (3.0,) * 4))
    d = cost.distribution
    assert d.mean == pytest.approx(500.0)
    assert d.p5 == pytest.approx(d.mean) and d.p95 == pytest.approx(d.mean)


def test_epc_seed_determinism():
    plan = stepped(Action.EPC, [25.0] * 4)
    assert epc_cost(plan, EPC) == epc_cost(plan, EPC)
    other = epc_cost(plan, EpcCostParams(EPC.reserve_price_samples, EPC.reservation_price_samples, seed=9))
    assert other.distribution != epc_cost(plan, EPC).distribution


def test_epc_invariant_under_sample_order():
    plan = stepped(Action.EPC, [25.0] * 4)
    shuffled = EpcCostParams(tuple(reversed(EPC.reserve_price_samples)), (4.0, 2.0, 3.0))
    assert epc_cost(plan, shuffled) == epc_cost(plan, EPC)


def test_bootstrap_mean_converges():
    p = 13.0
    means = bootstrap_means([0.0, 2 * p], 10_000, seed=3, stream=0)
    assert abs(means.mean() - p) <= 0.02 * p


def test_bootstrap_blocks_are_independent_of_length():
    a = bootstrap_means([1.0, 5.0, 9.0], 3000, 0, 0)
    b = bootstrap_means([1.0, 5.0, 9.0], 2000, 0, 0)
    np.testing.assert_array_equal(a[:2000], b)


def test_epc_interval_brackets_mean():
    d = epc_cost(stepped(Action.EPC, [40.0] * 3), EPC).distribution
    assert d.p5 <= d.mean <= d.p95


def test_epc_params_validated():
    with pytest.raises(ValueError):
        EpcCostParams((), (1.0,))
    with pytest.raises(ValueError):
        EpcCostParams((1.0,), (1.0,), bootstrap_n=10)


def test_savings_examples():
    assert savings_pct(10.0, 100.0) == pytest.approx(90.0)
    assert savings_pct(50.0, 100.0) == pytest.approx(50.0)
    assert savings_pct(1.0, 0.0) is None


def test_compare_report():
    di = di_cost(di_plan([(0, 9, 100.0)], 10))
    ffr = ffr_cost(stepped(Action.FFR, [100.0] * 10))
    report = compare_costs(di, ffr, None, "s")
    assert report.savings["epc_vs_di_pct"] is None
    assert report.savings["ffr_vs_di_pct"] == pytest.approx(100 * (1 - ffr.total_eur / di.total_eur))
    assert [s["strategy"] for s in report.to_dict()["strategies"]] == ["di", "ffr"]


volumes = st.lists(st.floats(0.0, 500.0), min_size=1, max_size=30)


@given(volumes, st.floats(0.5, 5.0))
def test_ffr_linear_in_volume(hourly, k):
    a = ffr_cost(stepped(Action.FFR, hourly)).total_eur
    b = ffr_cost(stepped(Action.FFR, [k * x for x in hourly])).total_eur
    assert b == pytest.approx(k * a, rel=1e-9, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(volumes, st.floats(0.5, 5.0))
def test_epc_linear_in_volume(hourly, k):
    a = epc_cost(stepped(Action.EPC, hourly), EPC)
    b = epc_cost(stepped(Action.EPC, [k * x for x in hourly]), EPC)
    assert b.total_eur == pytest.approx(k * a.total_eur, rel=1e-9, abs=1e-6)
    assert b.distribution.p95 == pytest.approx(k * a.distribution.p95, rel=1e-9, abs=1e-6)


@given(st.floats(0.0, 1e6), st.floats(1.0, 1e6))
def test_savings_in_range_when_cheaper(cheap, ref):
    cheap = min(cheap, ref)
    assert 0.0 <= savings_pct(cheap, ref) <= 100.0
