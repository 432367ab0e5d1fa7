"""
Tests for the acceptance criteria used by `suite`
"""

import math

import numpy as np
import pytest

import config
from acceptance import (
    CRITERIA,
    SuiteContext,
    check_admissibility,
    check_h_inf_ode,
    check_homogeneity,
    check_hypothesis_gate,
    check_suboptimality,
    check_wedges,
    convergence_gate,
    random_states,
    run_suite,
    strong_convergence_ratios,
)
from model_params import SampledKernel, derive_constants
from scenario import RunControls, Scenario, load_scenario
from valuation import gamma_total


@pytest.fixture
def desk_scenario(scenario_dir):
    return load_scenario(scenario_dir / 'desk_constant_kernel.toml', T=10.0, dt=0.04, n_paths=400)


def test_strong_convergence_ratios():
    assert np.allclose(strong_convergence_ratios([4.0, 2.0, 1.0]), [2.0, 2.0])


def test_convergence_gate_needs_every_halving_to_help():
    passed, mean_ratio = convergence_gate([1.31, 1.28, 1.37])
    assert passed and mean_ratio == pytest.approx(1.3195, abs=1e-3)
    passed, mean_ratio = convergence_gate([1.5, 0.95, 1.6])
    assert not passed and mean_ratio > 1.3
    assert not convergence_gate([1.25, 1.25, 1.25])[0]


def test_random_states_are_admissible(desk_params, desk_consts):
    states = random_states(desk_params, desk_consts, 20, seed=3)
    assert len(states) == 20
    for w, state in states:
        assert gamma_total(w, state, desk_consts).gamma > 0
        assert np.all(state.history > 0)


def test_closed_form_criteria_pass(desk_scenario):
    rows = run_suite(desk_scenario, criteria=[check_h_inf_ode, check_wedges, check_homogeneity,
                                              check_hypothesis_gate])
    assert len(rows) == 9
    failed = [(row.name, row.detail) for row in rows if not row.passed]
    assert failed == []
    assert {row.criterion for row in rows} == {'4', '5', '6', '10'}


def test_hypothesis_gate_names_errors(desk_scenario):
    rows = check_hypothesis_gate(SuiteContext(desk_scenario))
    details = {row.name: row.detail for row in rows}
    assert details['rejects hypothesis_one_violation.toml'].startswith('DiscountHypothesisError')
    assert 'β − β̄∞ > 0' in details['rejects hypothesis_one_violation.toml']
    assert details['rejects gamma_one.toml'].startswith('GammaExcludedError')


def test_hypothesis_gate_reports_accepted_scenario(desk_scenario, scenario_dir, tmp_path):
    (tmp_path / 'hypothesis_one_violation.toml').write_bytes(
        (scenario_dir / 'desk_constant_kernel.toml').read_bytes())
    for name in ('hypothesis_two_violation.toml', 'gamma_one.toml'):
        (tmp_path / name).write_bytes((scenario_dir / name).read_bytes())
    rows = check_hypothesis_gate(SuiteContext(desk_scenario), scenario_dir=tmp_path)
    assert [row.passed for row in rows] == [False, True, True]
    assert rows[0].detail == 'nothing'


def test_ode_check_with_sampled_kernel(desk_params):
    params = desk_params.with_kernel(SampledKernel(np.linspace(0.005, 0.015, 51)))
    scenario = Scenario('sampled', params, 1.0, 1.0, 1.0, RunControls(T=1.0, dt=0.04, n_paths=10))
    residual_row, boundary_row = check_h_inf_ode(SuiteContext(scenario))
    assert residual_row.passed and math.isnan(residual_row.value)
    assert boundary_row.passed


def test_boundary_row_measures_integrated_excursion(scenario_dir):
    scenario = load_scenario(scenario_dir / 'desk_constant_kernel.toml', T=1.0, dt=0.04, n_paths=50)
    rows = check_admissibility(SuiteContext(scenario))
    assert [row.passed for row in rows] == [True, True, True]
    boundary = rows[-1]
    assert boundary.tolerance == config.BOUNDARY_DRIFT_REL
    assert 0.0 < boundary.value <= config.BOUNDARY_DRIFT_REL


def test_suboptimality_rows_use_path_floor(scenario_dir, monkeypatch):
    monkeypatch.setattr(config, 'SUBOPTIMALITY_MIN_PATHS', 60)
    scenario = load_scenario(scenario_dir / 'desk_constant_kernel.toml', T=1.0, dt=0.04, n_paths=20)
    ctx = SuiteContext(scenario)
    rows = check_suboptimality(ctx)
    assert len(rows) == 4
    assert all('over 60 paths' in row.detail for row in rows)
    # the 20-path value runs are too small to serve as the optimal leg
    assert ctx.value_checks == {}


def test_suite_order_matches_criteria():
    assert [c.__name__ for c in CRITERIA][0] == 'check_value_function'
    assert [c.__name__ for c in CRITERIA][-1] == 'check_hypothesis_gate'
    assert len(CRITERIA) == 10


@pytest.mark.slow
def test_full_suite_on_reduced_desk_run(desk_scenario):
    derive_constants(desk_scenario.params)
    rows = run_suite(desk_scenario)
    assert len(rows) == 25
    failed = [(row.criterion, row.name, row.detail) for row in rows if not row.passed]
    assert failed == []
