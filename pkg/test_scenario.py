"""
Tests for scenario files, history CSVs and run-control precedence
"""

import json

import numpy as np
import pytest

import config
from errors import ConfigParseError, GridMismatchError
from model_params import ConstantKernel, SampledKernel, ZeroKernel
from scenario import RunControls, load_scenario, read_history, read_values_csv

MINIMAL = """
name = "minimal"

[market]
r = 0.02
mu = [0.06]
sigma = [[0.2]]

[preferences]
rho = 0.03
gamma = 2.0
delta = 0.01

[income]
mu_y = 0.01
sigma_y = [0.1]
d = 1.0
m = 20
{kernel}

[initial]
w = 2.0
x0 = 1.5
{history}
"""


def write_scenario(tmp_path, kernel='kernel = 0.01', history='history = 1.0', extra=''):
    path = tmp_path / 'scenario.toml'
    path.write_text(MINIMAL.format(kernel=kernel, history=history) + extra, encoding='utf-8')
    return path


def test_desk_scenario(scenario_dir):
    scenario = load_scenario(scenario_dir / 'desk_constant_kernel.toml')
    assert scenario.name == 'desk_constant_kernel'
    assert isinstance(scenario.params.income.phi, ConstantKernel)
    assert scenario.params.income.m == 50
    assert (scenario.w, scenario.x0, scenario.x1) == (1.0, 1.0, 1.0)
    assert scenario.run.T == 60.0 and scenario.run.dt == 0.004
    assert scenario.run.n_paths == 20000
    assert scenario.check().ok


def test_defaults_fill_missing_run_table(tmp_path):
    scenario = load_scenario(write_scenario(tmp_path))
    assert scenario.params.prefs.k == 1.0
    assert scenario.run.seed == config.DEFAULT_SEED
    assert scenario.run.T == config.DEFAULT_HORIZON


def test_flags_override_file(scenario_dir):
    scenario = load_scenario(scenario_dir / 'desk_constant_kernel.toml', seed=7, T=5.0,
                             n_paths=None, gamma=2.0)
    assert scenario.run.seed == 7 and scenario.run.T == 5.0
    assert scenario.run.n_paths == 20000
    assert scenario.params.prefs.gamma == 2.0


def test_kernel_variants(tmp_path):
    zero = load_scenario(write_scenario(tmp_path, kernel='kernel = { type = "zero" }'))
    assert isinstance(zero.params.income.phi, ZeroKernel)
    sampled = load_scenario(write_scenario(tmp_path, kernel=f'kernel = {[0.01] * 21}'))
    assert isinstance(sampled.params.income.phi, SampledKernel)


def test_kernel_from_csv(tmp_path):
    (tmp_path / 'phi.csv').write_text('phi\n' + '\n'.join(['0.01'] * 21) + '\n', encoding='utf-8')
    scenario = load_scenario(write_scenario(tmp_path, kernel='kernel = { csv = "phi.csv" }'))
    assert np.all(scenario.params.income.phi.values == 0.01)


def test_sampled_kernel_wrong_length(tmp_path):
    with pytest.raises(GridMismatchError):
        load_scenario(write_scenario(tmp_path, kernel=f'kernel = {[0.01] * 10}'))


def test_history_variants(tmp_path):
    values = np.linspace(0.5, 1.5, 20)
    (tmp_path / 'history.csv').write_text('\n'.join(repr(float(v)) for v in values) + '\n', encoding='utf-8')
    from_table = load_scenario(write_scenario(tmp_path, history='history = { csv = "history.csv" }'))
    assert from_table.x1 == pytest.approx(values)
    from_flag = load_scenario(write_scenario(tmp_path), history=str(tmp_path / 'history.csv'))
    assert from_flag.x1 == pytest.approx(values)
    constant = load_scenario(write_scenario(tmp_path), history='0.75')
    assert constant.x1 == 0.75


def test_history_wrong_length():
    with pytest.raises(ConfigParseError, match='m = 20'):
        read_history([1.0] * 7, 20)


def test_values_csv_skips_header_and_comments(tmp_path):
    path = tmp_path / 'values.csv'
    path.write_text('# income\ny\n1.0\n2.0\n', encoding='utf-8')
    assert np.array_equal(read_values_csv(path), [1.0, 2.0])
    (tmp_path / 'empty.csv').write_text('y\n', encoding='utf-8')
    with pytest.raises(ConfigParseError):
        read_values_csv(tmp_path / 'empty.csv')


def test_json_scenario(tmp_path, scenario_dir):
    desk = load_scenario(scenario_dir / 'desk_constant_kernel.toml')
    document = {
        'name': 'as_json',
        'market': desk.params.market.to_dict(),
        'preferences': desk.params.prefs.to_dict(),
        'income': {'mu_y': 0.01, 'sigma_y': [0.1], 'd': 2.0, 'm': 50, 'kernel': 0.01},
        'initial': {'w': 1.0, 'x0': 1.0, 'history': 1.0},
    }
    path = tmp_path / 'scenario.json'
    path.write_text(json.dumps(document), encoding='utf-8')
    scenario = load_scenario(path)
    assert scenario.name == 'as_json'
    assert scenario.params.market.r == desk.params.market.r
    assert scenario.check().ok


@pytest.mark.parametrize('broken', [
    'name = "unterminated\n',
    '[market]\nr = 0.02\n',
])
def test_unusable_files(tmp_path, broken):
    path = tmp_path / 'broken.toml'
    path.write_text(broken, encoding='utf-8')
    with pytest.raises(ConfigParseError):
        load_scenario(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        load_scenario(tmp_path / 'absent.toml')


def test_missing_parameter(tmp_path):
    path = tmp_path / 'scenario.toml'
    path.write_text(MINIMAL.format(kernel='', history='').replace('rho = 0.03\n', ''), encoding='utf-8')
    with pytest.raises(ConfigParseError, match='rho'):
        load_scenario(path)


def test_malformed_run_controls(tmp_path):
    with pytest.raises(ConfigParseError):
        load_scenario(write_scenario(tmp_path, extra='\n[run]\nformat = "xml"\n'))
    with pytest.raises(ConfigParseError):
        load_scenario(write_scenario(tmp_path, extra='\n[run]\nsteps = 4\n'))


def test_run_controls_reject_bad_values():
    with pytest.raises(ConfigParseError):
        RunControls(dt=0.0)
    with pytest.raises(ConfigParseError):
        RunControls(workers=0)


def test_scenario_dict_is_json_ready(scenario_dir):
    scenario = load_scenario(scenario_dir / 'baseline_zero_kernel.toml')
    document = scenario.to_dict()
    json.dumps(document)
    assert document['initial'] == {'w': 1.0, 'x0': 1.0, 'x1': 1.0}
    assert document['run']['format'] == config.DEFAULT_FORMAT
