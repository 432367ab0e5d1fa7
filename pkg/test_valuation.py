"""
Tests for human capital, total wealth and the discounted-income oracle
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from errors import GridMismatchError
from income_sdde import IncomeState, brownian_path
from model_params import derive_constants
from valuation import (
    BOUNDARY,
    INADMISSIBLE,
    INTERIOR,
    gamma_total,
    human_capital,
    human_capital_components,
    human_capital_mc_oracle,
    state_price_density,
)


@pytest.fixture
def fast_decay_params(make_params):
    """Deterministic income with a short memory horizon"""
    return make_params(r=0.05, delta=0.05, mu_y=0.0, sigma_y=0.0, phi=0.02, m=20)


# ============================================================================
# CLOSED FORMS
# ============================================================================

def test_zero_kernel_human_capital(baseline_params):
    consts = derive_constants(baseline_params)
    state = IncomeState.initial(2.0, 5.0, baseline_params.income)
    present, past = human_capital_components(state, consts)
    assert present == pytest.approx(100.0)
    assert past == 0.0
    assert human_capital(state, consts) == pytest.approx(100.0)


def test_constant_kernel_human_capital(desk_params, desk_consts):
    state = IncomeState.initial(1.0, 1.0, desk_params.income)
    c = desk_consts
    rate = c.discount
    # int h over [-d, 0] for the constant kernel
    mass = c.g_inf * 0.01 * (2.0 - (1.0 - math.exp(-rate * 2.0)) / rate) / rate
    expected = c.g_inf + mass
    assert human_capital(state, c) == pytest.approx(expected, rel=1e-4)
    assert human_capital(state, c) > c.g_inf


def test_human_capital_is_homogeneous(desk_params, desk_consts):
    state = IncomeState.initial(1.3, np.linspace(0.8, 1.2, 51), desk_params.income)
    assert human_capital(state.scaled(2.5), desk_consts) == pytest.approx(
        2.5 * human_capital(state, desk_consts), rel=1e-14)


def test_human_capital_rejects_other_grid(desk_params, desk_consts):
    coarse = desk_params.with_grid(25)
    state = IncomeState.initial(1.0, 1.0, coarse.income)
    with pytest.raises(GridMismatchError):
        human_capital(state, desk_consts)


def test_gamma_total_classification(desk_params, desk_consts):
    state = IncomeState.initial(1.0, 1.0, desk_params.income)
    hc = human_capital(state, desk_consts)

    interior = gamma_total(1.0, state, desk_consts)
    assert interior.status == INTERIOR
    assert interior.gamma == pytest.approx(1.0 + hc)
    assert interior.admissible

    assert gamma_total(-hc, state, desk_consts).status == BOUNDARY

    short = gamma_total(-hc - 1.0, state, desk_consts)
    assert short.status == INADMISSIBLE
    assert not short.admissible


def test_gamma_total_batch(desk_params, desk_consts):
    state = IncomeState.initial(np.ones(3), 1.0, desk_params.income)
    hc = human_capital(IncomeState.initial(1.0, 1.0, desk_params.income), desk_consts)
    total = gamma_total(np.array([0.0, -hc, -2.0 * hc]), state, desk_consts)
    assert list(total.status) == [INTERIOR, BOUNDARY, INADMISSIBLE]
    assert not total.admissible


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(a=st.floats(0.1, 10.0), w=st.floats(-5.0, 5.0), shift=st.floats(-5.0, 5.0))
def test_gamma_total_is_linear(desk_params, desk_consts, a, w, shift):
    state = IncomeState.initial(1.2, np.linspace(0.9, 1.1, 51), desk_params.income)
    base = gamma_total(w, state, desk_consts).gamma
    assert gamma_total(w + shift, state, desk_consts).gamma - base == pytest.approx(shift, abs=1e-12)
    scaled = gamma_total(a * w, state.scaled(a), desk_consts).gamma
    assert scaled == pytest.approx(a * base, rel=1e-12, abs=1e-12 * a)


# ============================================================================
# STATE-PRICE DENSITY
# ============================================================================

def test_state_price_density_starts_at_one(desk_params):
    xi = state_price_density(desk_params.market, 0.01, brownian_path(4, 10, 0.1, n_paths=3))
    assert np.all(xi.values[0] == 1.0)
    assert np.all(xi.values > 0)


def test_state_price_density_discounts_on_average(desk_params):
    brownian = brownian_path(8, 50, 0.1, n_paths=4000)
    xi = state_price_density(desk_params.market, 0.01, brownian)
    terminal = xi.values[-1]
    se = terminal.std(ddof=1) / math.sqrt(terminal.size)
    assert abs(terminal.mean() - math.exp(-0.03 * 5.0)) <= 4.0 * se


# ============================================================================
# MONTE CARLO ORACLE
# ============================================================================

def test_oracle_deterministic_baseline(baseline_params):
    state = IncomeState.initial(1.0, 1.0, baseline_params.income)
    estimate = human_capital_mc_oracle(baseline_params, state, n_paths=10)
    assert estimate.stderr < 1e-10
    assert estimate.T == pytest.approx(math.log(1000.0) / 0.02)
    assert estimate.agrees_with(50.0)
    assert estimate.truncation_bound == pytest.approx(50.0 * 1e-3, rel=0.1)


def test_oracle_matches_closed_form(fast_decay_params):
    consts = derive_constants(fast_decay_params)
    state = IncomeState.initial(1.0, 1.0, fast_decay_params.income)
    estimate = human_capital_mc_oracle(fast_decay_params, state, n_paths=2000, seed=101)
    assert estimate.details['dt'] == pytest.approx(consts.ds / 2)
    assert estimate.agrees_with(human_capital(state, consts), z=4.0)


def test_oracle_is_reproducible(fast_decay_params):
    state = IncomeState.initial(1.0, 1.0, fast_decay_params.income)
    first = human_capital_mc_oracle(fast_decay_params, state, T=10.0, n_paths=50, seed=3)
    second = human_capital_mc_oracle(fast_decay_params, state, T=10.0, n_paths=50, seed=3)
    assert first.mean == second.mean and first.stderr == second.stderr


def test_oracle_of_zero_income_is_zero(desk_params):
    state = IncomeState.initial(0.0, 0.0, desk_params.income)
    estimate = human_capital_mc_oracle(desk_params, state, T=5.0, n_paths=20, seed=2)
    assert estimate.mean == 0.0
    assert estimate.stderr == 0.0
    assert estimate.truncation_bound == 0.0
