"""
Tests for the delayed income equation: the Euler-Maruyama stepper, the
variation-of-constants oracle and the path-indexed Brownian increments
"""

import math

import numpy as np
import pytest

import config
from errors import GridMismatchError, StepIncompatibleError
from income_sdde import (
    IncomeState,
    brownian_path,
    convolve,
    count_sign_crossings,
    gbm_moments,
    n_time_steps,
    pathwise_max_difference,
    simulate_income,
    step,
    steps_per_cell,
    variation_of_constants_oracle,
)
from quadrature import delay_grid


# ============================================================================
# STATE
# ============================================================================

def test_initial_state_from_constant(desk_params):
    state = IncomeState.initial(2.0, 1.0, desk_params.income)
    assert state.history.shape == (51,)
    assert state.y == 2.0 and state.history[-1] == 2.0
    assert np.all(state.history[:-1] == 1.0)
    assert state.d == pytest.approx(2.0)


def test_initial_state_batch(desk_params):
    state = IncomeState.initial(np.array([1.0, 3.0]), 1.0, desk_params.income)
    assert state.history.shape == (51, 2)
    assert state.n_paths == 2
    assert np.array_equal(state.history[-1], [1.0, 3.0])


def test_initial_history_without_current_node(desk_params):
    state = IncomeState.initial(1.5, np.linspace(0.5, 1.0, 50), desk_params.income)
    assert state.history[-2] == 1.0 and state.history[-1] == 1.5


def test_history_length_mismatch(desk_params):
    with pytest.raises(GridMismatchError):
        IncomeState.initial(1.0, np.ones(10), desk_params.income)


def test_history_must_end_at_current_income(desk_params):
    with pytest.raises(GridMismatchError):
        IncomeState(0.0, 2.0, np.ones(51), desk_params.income.ds)


def test_scaled_state(desk_params):
    state = IncomeState.initial(2.0, 1.0, desk_params.income).scaled(3.0)
    assert state.y == 6.0
    assert np.all(state.history[:-1] == 3.0)


# ============================================================================
# GRID AND STEPS
# ============================================================================

def test_steps_per_cell():
    assert steps_per_cell(0.04, 0.004) == 10
    assert steps_per_cell(0.02, 0.001) == 20


@pytest.mark.parametrize('dt', [0.003, 0.05, 0.0, -0.01])
def test_incompatible_step(dt):
    with pytest.raises(StepIncompatibleError):
        steps_per_cell(0.04, dt)


def test_n_time_steps():
    assert n_time_steps(60, 0.004) == 15000
    assert n_time_steps(0, 0.004) == 0
    with pytest.raises(ValueError):
        n_time_steps(-1, 0.004)


def test_convolve_constant_history():
    nodes, ds = delay_grid(2.0, 50)
    assert convolve(np.ones(51), np.full(51, 0.01), ds) == pytest.approx(0.02, rel=1e-13)


def test_convolve_rejects_mismatched_grids():
    with pytest.raises(GridMismatchError):
        convolve(np.ones(40), np.ones(51), 0.04)


# ============================================================================
# BROWNIAN INCREMENTS
# ============================================================================

def test_path_increments_do_not_depend_on_path_count():
    few = brownian_path(7, 5, 0.01, n_paths=3)
    many = brownian_path(7, 5, 0.01, n_paths=2600)
    assert np.array_equal(few.increments, many.increments[:, :3])
    second_block = brownian_path(7, 5, 0.01, n_paths=2501)
    assert np.array_equal(second_block.increments[:, 2500], many.increments[:, 2500])


def test_seed_record_covers_every_block():
    brownian = brownian_path(7, 5, 0.01, n_paths=2600)
    assert brownian.seed.streams == range(0, 2)
    assert brownian.seed.to_dict()['streams'] == [0, 1]
    assert brownian.path(0).seed.stream == 0
    late = brownian.path(2500)
    assert late.seed.stream == 1
    assert late.seed.n_streams == 1
    replay = brownian_path(7, 5, 0.01, n_paths=2600, block_size=late.seed.block_size)
    assert np.array_equal(replay.increments[:, 2500], late.increments[:, 0])


def test_different_seeds_differ():
    first = brownian_path(1, 10, 0.01, n_paths=4)
    second = brownian_path(2, 10, 0.01, n_paths=4)
    assert not np.array_equal(first.increments, second.increments)


def test_increment_scale():
    dt = 0.01
    increments = brownian_path(11, 200, dt, n_paths=500).increments
    assert np.std(increments) == pytest.approx(math.sqrt(dt), rel=0.02)


def test_coarsen_sums_increments():
    fine = brownian_path(3, 8, 0.001, n_paths=2)
    coarse = fine.coarsen(4)
    assert coarse.dt == pytest.approx(0.004)
    assert coarse.n_steps == 2
    assert np.allclose(coarse.cumulative()[-1], fine.cumulative()[-1], rtol=0, atol=1e-14)
    with pytest.raises(StepIncompatibleError):
        fine.coarsen(3)


# ============================================================================
# SIMULATION
# ============================================================================

def test_delay_drives_income_growth(make_params):
    # y' = 0.1 int_{t-1}^t y, y = 1 before 0: y(1) = 1 + sqrt(0.1) sinh(sqrt(0.1))
    params = make_params(mu_y=0.0, sigma_y=0.0, phi=0.1, d=1.0)
    path, _ = simulate_income(params, 1.0, 1.0, T=1.0, dt=1e-3)
    expected = 1.0 + math.sqrt(0.1) * math.sinh(math.sqrt(0.1))
    assert path.y[-1, 0] == pytest.approx(expected, abs=5e-4)


def test_no_delay_no_noise_is_exponential_euler(make_params):
    params = make_params(mu_y=0.03, sigma_y=0.0, phi=None)
    path, _ = simulate_income(params, 2.0, 1.0, T=1.0, dt=0.004)
    assert path.y[-1, 0] == pytest.approx(2.0 * 1.00012 ** 250, rel=1e-12)


def test_batch_matches_single_steps(desk_params):
    path, brownian = simulate_income(desk_params, 1.0, 1.0, T=0.5, dt=0.004, seed=5, n_paths=3)
    state = IncomeState.initial(1.0, 1.0, desk_params.income)
    for k in range(brownian.n_steps):
        state = step(state, desk_params, brownian.increments[k, 1], brownian.dt)
    assert state.y == pytest.approx(path.y[-1, 1], rel=1e-12)
    assert state.t == pytest.approx(0.5)


def test_simulation_is_reproducible(desk_params):
    first, _ = simulate_income(desk_params, 1.0, 1.0, T=1.0, dt=0.004, seed=42, n_paths=10)
    second, _ = simulate_income(desk_params, 1.0, 1.0, T=1.0, dt=0.004, seed=42, n_paths=10)
    assert np.array_equal(first.y, second.y)


def test_positive_history_stays_positive(desk_params):
    path, _ = simulate_income(desk_params, 1.0, 1.0, T=5.0, dt=0.004, seed=9, n_paths=200)
    assert path.sign_crossings == 0
    assert np.all(path.y > 0)


def test_gbm_mean_without_delay(make_params):
    params = make_params(phi=None)
    path, _ = simulate_income(params, 1.0, 1.0, T=1.0, dt=0.004, seed=17, n_paths=4000)
    mean, variance = gbm_moments(1.0, 0.01, [0.1], 1.0)
    terminal = path.y[-1]
    assert abs(terminal.mean() - mean) <= 4.0 * math.sqrt(variance / terminal.size)
    assert terminal.var() == pytest.approx(variance, rel=0.15)


def test_oracle_agrees_with_euler(desk_params):
    fine = brownian_path(23, 4000, 0.0005, n_paths=20)
    gaps = []
    for brownian in (fine.coarsen(8), fine):
        euler, _ = simulate_income(desk_params, 1.0, 1.0, T=2.0, dt=brownian.dt, brownian=brownian)
        oracle = variation_of_constants_oracle(desk_params, 1.0, 1.0, brownian)
        gaps.append(pathwise_max_difference(euler.y, oracle.y))
    assert gaps[0] < 5e-3
    assert gaps[1] < gaps[0]


def test_oracle_gap_shrinks_over_three_halvings(desk_params):
    finest = brownian_path(29, 8000, 0.000125, n_paths=200)
    gaps = []
    for brownian in (finest.coarsen(8), finest.coarsen(4), finest.coarsen(2), finest):
        euler, _ = simulate_income(desk_params, 1.0, 1.0, T=1.0, dt=brownian.dt, brownian=brownian)
        oracle = variation_of_constants_oracle(desk_params, 1.0, 1.0, brownian)
        gaps.append(pathwise_max_difference(euler.y, oracle.y))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all(ratios > 1.0)
    assert math.exp(np.mean(np.log(ratios))) >= config.CONVERGENCE_RATIO_MIN


def test_oracle_of_zero_data_is_zero(desk_params):
    oracle = variation_of_constants_oracle(desk_params, 0.0, 0.0, brownian_path(5, 100, 0.004, n_paths=3))
    assert np.all(oracle.y == 0.0)


def test_zero_horizon_is_the_initial_point(desk_params):
    path, _ = simulate_income(desk_params, 1.5, 1.0, T=0.0, dt=0.004, seed=1)
    assert path.y.shape == (1, 1)
    assert path.y[0, 0] == 1.5
    assert path.sign_crossings == 0


def test_oracle_is_exact_without_noise_or_delay(make_params):
    params = make_params(mu_y=0.02, sigma_y=0.0, phi=None)
    oracle = variation_of_constants_oracle(params, 1.0, 1.0, brownian_path(1, 250, 0.004))
    assert oracle.y[-1, 0] == pytest.approx(math.exp(0.02), rel=1e-12)


def test_path_frame_layout(desk_params):
    path, brownian = simulate_income(desk_params, 1.0, 1.0, T=0.02, dt=0.004, n_paths=2)
    frame = path.to_frame(brownian)
    assert list(frame.columns) == ['path_id', 't', 'y', 'dZ_1']
    assert len(frame) == 2 * 6
    assert frame['dZ_1'].isna().sum() == 2


def test_sign_crossings_counted():
    y = np.array([[1.0, 1.0, -1.0], [0.5, -0.1, -2.0], [0.2, 0.3, -1.0]])
    assert count_sign_crossings(y, np.array([1.0, 1.0, -1.0])) == 1
