"""
Scenario Module
Reads TOML / JSON scenario files and income-history CSVs into ModelParams,
an initial state and resolved run controls
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import config
from errors import ConfigParseError
from model_params import (
    IncomeParams,
    MarketParams,
    ModelParams,
    Preferences,
    kernel_from_spec,
    validate,
)

logger = logging.getLogger(__name__)


@dataclass
class RunControls:
    """Resolved run controls: flags > scenario file > environment > defaults"""
    T: float = config.DEFAULT_HORIZON
    dt: float = config.DEFAULT_DT
    n_paths: int = config.DEFAULT_PATHS
    seed: int = config.DEFAULT_SEED
    sim_paths: int = config.DEFAULT_SIM_PATHS
    record_every: int = config.DEFAULT_RECORD_EVERY
    workers: int = config.DEFAULT_WORKERS
    out_dir: str = str(config.DEFAULT_OUT_DIR)
    format: str = config.DEFAULT_FORMAT

    def __post_init__(self):
        self.T = float(self.T)
        self.dt = float(self.dt)
        for name in ('n_paths', 'seed', 'sim_paths', 'record_every', 'workers'):
            setattr(self, name, int(getattr(self, name)))
        self.out_dir = str(self.out_dir)
        if self.format not in config.OUTPUT_FORMATS:
            raise ConfigParseError(f"format must be one of {config.OUTPUT_FORMATS}, got {self.format!r}")
        if self.dt <= 0 or self.T < 0:
            raise ConfigParseError(f"need dt > 0 and T >= 0, got dt={self.dt:g}, T={self.T:g}")
        if self.n_paths < 1 or self.sim_paths < 1 or self.workers < 1 or self.record_every < 1:
            raise ConfigParseError("paths, workers and record_every must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Scenario:
    """One parameter set, its initial state (w, x0, x1) and the run controls"""
    name: str
    params: ModelParams
    w: float
    x0: float
    x1: float | np.ndarray
    run: RunControls = field(default_factory=RunControls)
    description: str = ''
    source: str = ''

    def check(self):
        """ValidationReport of the standing hypotheses"""
        return validate(self.params.market, self.params.prefs, self.params.income)

    def with_overrides(self, gamma=None, **run_overrides):
        """Copy with flag values applied; None leaves a value untouched"""
        params = self.params if gamma is None else self.params.with_gamma(gamma)
        changes = {key: value for key, value in run_overrides.items() if value is not None}
        return replace(self, params=params, run=replace(self.run, **changes) if changes else self.run)

    def history_values(self):
        return self.x1 if np.isscalar(self.x1) else np.asarray(self.x1).tolist()

    def to_dict(self):
        return {
            'name': self.name,
            'description': self.description,
            'source': self.source,
            'params': self.params.to_dict(),
            'initial': {'w': self.w, 'x0': self.x0, 'x1': self.history_values()},
            'run': self.run.to_dict(),
        }


# ============================================================================
# FILE READERS
# ============================================================================

def _read_document(path):
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as e:
        raise ConfigParseError(f"cannot read scenario file {path}: {e}") from e
    try:
        if path.suffix.lower() == '.json':
            return json.loads(text.decode('utf-8'))
        return tomllib.loads(text.decode('utf-8'))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigParseError(f"{path}: {e}") from e


def read_values_csv(path):
    """
    One column of numbers from a CSV file; a non-numeric header row is skipped

    Returns:
        np.ndarray
    """
    try:
        frame = pd.read_csv(path, header=None, comment='#')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigParseError(f"cannot read values from {path}: {e}") from e
    values = pd.to_numeric(frame.iloc[:, 0], errors='coerce').dropna().to_numpy(dtype=float)
    if values.size == 0:
        raise ConfigParseError(f"{path} holds no numeric values")
    return values


def read_history(spec, m, base_dir=None):
    """
    Initial income history x1 on [-d, 0] from a scenario value or a flag

    Args:
        spec: Number (constant history), list of m or m+1 numbers, a CSV path,
            or {csv = "path"}
        m (int): Delay-grid resolution
        base_dir (Path): Directory that relative CSV paths are resolved against

    Returns:
        float or np.ndarray
    """
    if isinstance(spec, dict):
        spec = spec.get('csv', spec.get('value'))
    if isinstance(spec, str):
        try:
            return float(spec)
        except ValueError:
            pass
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        spec = read_values_csv(path)
    if spec is None:
        raise ConfigParseError("initial history is missing")
    if np.isscalar(spec):
        return float(spec)
    values = np.asarray(spec, dtype=float)
    if values.ndim != 1 or values.shape[0] not in (m, m + 1):
        raise ConfigParseError(f"history needs m = {m} or m+1 = {m + 1} values, got {values.shape}")
    return values


def _kernel(spec, m, base_dir):
    if isinstance(spec, dict) and 'csv' in spec:
        path = Path(spec['csv'])
        spec = read_values_csv(path if path.is_absolute() else Path(base_dir) / path)
    return kernel_from_spec(spec, m)


def _section(document, *names):
    for name in names:
        if name in document:
            return document[name]
    raise ConfigParseError(f"scenario has no [{names[0]}] table")


def params_from_dict(document, base_dir='.'):
    """ModelParams from the market / preferences / income tables"""
    market = _section(document, 'market')
    prefs = _section(document, 'preferences', 'prefs')
    income = _section(document, 'income')
    try:
        m = int(income.get('m', config.DEFAULT_GRID))
        return ModelParams(
            market=MarketParams(market['r'], market['mu'], market['sigma']),
            prefs=Preferences(float(prefs['rho']), float(prefs['gamma']),
                              float(prefs.get('k', 1.0)), float(prefs['delta'])),
            income=IncomeParams(
                mu_y=income['mu_y'],
                sigma_y=income['sigma_y'],
                d=income['d'],
                phi=_kernel(income.get('kernel'), m, base_dir),
                m=m,
            ),
        )
    except KeyError as e:
        raise ConfigParseError(f"scenario is missing parameter {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ConfigParseError(f"malformed scenario parameter: {e}") from e


def load_scenario(path, **overrides):
    """
    Load a scenario file and apply flag overrides

    Args:
        path: TOML (preferred) or JSON file
        **overrides: gamma, history and any RunControls field; None is ignored

    Returns:
        Scenario

    Raises:
        ConfigParseError: Unreadable file, bad syntax or missing/malformed values
    """
    path = Path(path)
    document = _read_document(path)
    base_dir = path.resolve().parent
    params = params_from_dict(document, base_dir)

    initial = document.get('initial', {})
    history = overrides.pop('history', None)
    gamma = overrides.pop('gamma', None)
    try:
        x0 = float(initial.get('x0', 1.0))
        w = float(initial.get('w', 0.0))
    except (TypeError, ValueError) as e:
        raise ConfigParseError(f"malformed initial state: {e}") from e
    if history is not None:
        x1 = read_history(history, params.income.m)
    else:
        x1 = read_history(initial.get('history', x0), params.income.m, base_dir)

    try:
        run = RunControls(**{**config.get_run_defaults(), **document.get('run', {})})
    except (TypeError, ValueError) as e:
        raise ConfigParseError(f"malformed run controls: {e}") from e

    scenario = Scenario(
        name=str(document.get('name', path.stem)),
        params=params,
        w=w,
        x0=x0,
        x1=x1,
        run=run,
        description=str(document.get('description', '')),
        source=str(path),
    )
    scenario = scenario.with_overrides(gamma=gamma, **overrides)
    logger.info("Loaded scenario %s from %s", scenario.name, path)
    return scenario
