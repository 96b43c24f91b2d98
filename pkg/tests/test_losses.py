import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hvdc_cba.core import QuadraticLossModel
from hvdc_cba.losses import (
    LinearLossFactor,
    PwlLossModel,
    build_pwl,
    eval_pwl,
    eval_pwl_array,
    linearize_secant,
    pwl_error_bound,
    true_loss,
    variable_loss,
)


@st.composite
def quadratic(draw):
    p_max = draw(st.floats(50.0, 3000.0))
    b = draw(st.floats(0.0, 0.05))
    # keep L(p_max) < p_max
    c = draw(st.floats(0.0, 0.5 * (1 - b) / p_max))
    a0 = draw(st.floats(0.0, 10.0))
    return QuadraticLossModel(a0, b, c, p_max)


SKAGERRAK = QuadraticLossModel(6.0, 0.01, 1e-5, 1700.0)


def test_true_loss_is_symmetric_and_includes_constant():
    assert true_loss(SKAGERRAK, 0.0) == 6.0
    assert true_loss(SKAGERRAK, 1000.0) == pytest.approx(6 + 10 + 10)
    assert true_loss(SKAGERRAK, -1000.0) == true_loss(SKAGERRAK, 1000.0)


def test_flow_beyond_p_max_rejected():
    with pytest.raises(ValueError):
        variable_loss(SKAGERRAK, 1700.1)


def test_secant_gamma():
    assert linearize_secant(SKAGERRAK).gamma == pytest.approx(0.01 + 1e-5 * 1700)


def test_linear_factor_bounds():
    with pytest.raises(ValueError):
        LinearLossFactor(1.0)
    with pytest.raises(ValueError):
        LinearLossFactor(-0.1)


def test_pwl_hand_example():
    pwl = build_pwl(QuadraticLossModel(0.0, 0.0, 1e-4, 1000.0), 2)
    assert pwl.breakpoints == (0.0, 500.0, 1000.0)
    assert pwl.slopes == pytest.approx((0.05, 0.15))
    assert eval_pwl(pwl, 250.0) == pytest.approx(12.5)
    assert eval_pwl(pwl, -750.0) == pytest.approx(25 + 37.5)


def test_pwl_model_invariants():
    with pytest.raises(ValueError):
        PwlLossModel((0.0, 1.0, 2.0), (0.2, 0.1))  # not convex
    with pytest.raises(ValueError):
        PwlLossModel((0.0, 2.0, 1.0), (0.1, 0.2))  # not increasing
    with pytest.raises(ValueError):
        build_pwl(SKAGERRAK, 0)


@given(quadratic(), st.integers(1, 12))
def test_pwl_overestimates_and_is_exact_at_breakpoints(model, n):
    pwl = build_pwl(model, n)
    grid = np.linspace(0.0, model.p_max_mw, 401)
    exact = model.b * grid + model.c_per_mw * grid**2
    approx = eval_pwl_array(pwl, grid)
    assert np.all(approx >= exact - 1e-9)
    for x in pwl.breakpoints:
        assert eval_pwl(pwl, x) == pytest.approx(variable_loss(model, x), abs=1e-9)


@given(quadratic(), st.integers(1, 12))
def test_pwl_max_error_matches_bound(model, n):
    pwl = build_pwl(model, n)
    mids = 0.5 * (np.asarray(pwl.breakpoints[:-1]) + np.asarray(pwl.breakpoints[1:]))
    err = eval_pwl_array(pwl, mids) - (model.b * mids + model.c_per_mw * mids**2)
    assert np.max(err) == pytest.approx(pwl_error_bound(model, n), abs=1e-9)


@given(quadratic(), st.integers(1, 8))
def test_refinement_never_increases_error(model, n):
    assert pwl_error_bound(model, 2 * n) <= pwl_error_bound(model, n)


@given(quadratic(), st.integers(1, 12))
def test_slopes_non_decreasing(model, n):
    s = build_pwl(model, n).slopes
    assert all(b >= a for a, b in zip(s, s[1:]))


@given(quadratic())
def test_secant_overestimates(model):
    g = linearize_secant(model)
    for x in np.linspace(0, model.p_max_mw, 101):
        assert g(x) >= variable_loss(model, x) - 1e-9


@given(quadratic(), st.integers(1, 10), st.floats(-1.0, 1.0))
def test_scalar_and_vector_evaluation_agree(model, n, frac):
    pwl = build_pwl(model, n)
    x = frac * model.p_max_mw
    assert eval_pwl_array(pwl, np.array([x]))[0] == pytest.approx(eval_pwl(pwl, x), abs=1e-9)


def test_error_bound_formula():
    m = QuadraticLossModel(0.0, 0.0, 2e-5, 1000.0)
    assert pwl_error_bound(m, 5) == pytest.approx(2e-5 * 200**2 / 4)
    assert math.isclose(pwl_error_bound(m, 10), pwl_error_bound(m, 5) / 4)
