"""
Shared test fixtures: the desk scenario, the zero-kernel baseline and a
factory for one-asset parameter sets
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from model_params import (  # noqa: E402
    IncomeParams,
    MarketParams,
    ModelParams,
    Preferences,
    derive_constants,
)


def build_params(r=0.02, mu=0.06, sigma=0.2, rho=0.03, gamma=0.5, k=1.0, delta=0.01,
                 mu_y=0.01, sigma_y=0.1, d=2.0, phi=0.01, m=50):
    """One-asset ModelParams; phi is a number (constant kernel), None, or a kernel/spec"""
    return ModelParams(
        market=MarketParams(r, [mu], [[sigma]]),
        prefs=Preferences(rho, gamma, k, delta),
        income=IncomeParams(mu_y, [sigma_y], d, phi, m),
    )


@pytest.fixture
def make_params():
    return build_params


@pytest.fixture
def desk_params():
    return build_params()


@pytest.fixture
def desk_consts(desk_params):
    return derive_constants(desk_params)


@pytest.fixture
def baseline_params():
    """phi = 0, kappa = 0, deterministic income: beta = 0.02"""
    return build_params(mu=0.02, sigma=1.0, sigma_y=0.0, phi=None)


@pytest.fixture
def scenario_dir():
    return Path(__file__).parent / 'scenarios'
