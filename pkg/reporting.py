"""
Reporting Module
Check tables, plot-ready CSVs, manifests and plain-text summaries for every
CLI run; identical inputs give byte-identical files
"""

from __future__ import annotations

import json
import logging
import platform
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

import config
from errors import IoFailureError
from model_params import constants_table

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ['criterion', 'name', 'passed', 'value', 'reference', 'tolerance', 'detail']


@dataclass
class CheckResult:
    """One PASS/FAIL row of a verification run"""
    criterion: str
    name: str
    passed: bool
    value: float = float('nan')
    reference: float = float('nan')
    tolerance: float = float('nan')
    detail: str = ''

    def to_row(self):
        row = asdict(self)
        row['passed'] = bool(self.passed)
        return row

    @property
    def label(self):
        return 'PASS' if self.passed else 'FAIL'


def checks_frame(checks):
    """DataFrame with CHECK_COLUMNS in order; header only when there are no checks"""
    return pd.DataFrame([c.to_row() for c in checks], columns=CHECK_COLUMNS)


# ============================================================================
# FILE WRITERS
# ============================================================================

def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(payload):
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + '\n'


def _write_text(path, text):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
    except OSError as e:
        raise IoFailureError(f"cannot write {path}: {e}") from e
    logger.debug("Wrote %s", path)
    return path


def write_csv(frame, path, columns=None):
    """CSV with a fixed column order and CSV_FLOAT_FORMAT floats"""
    if columns is not None:
        frame = frame.reindex(columns=columns)
    text = frame.to_csv(index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator='\n')
    return _write_text(Path(path), text)


def write_json(payload, path):
    return _write_text(Path(path), dumps(payload))


# ============================================================================
# MANIFEST
# ============================================================================

def library_versions():
    return {
        config.APP_NAME: config.APP_VERSION,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'pandas': pd.__version__,
        'scipy': scipy.__version__,
    }


def build_manifest(command, scenario, consts=None, **resolved):
    """
    Resolved inputs of one run

    Args:
        command (str): CLI subcommand
        scenario (Scenario): Scenario after flag overrides
        consts (DerivedConstants): Derived constants, when the scenario validated
        **resolved: Extra resolved values (history source, gamma sweep, ...)

    Returns:
        dict
    """
    manifest = {
        'command': command,
        'scenario': scenario.to_dict(),
        'seed': scenario.run.seed,
        'dt': scenario.run.dt,
        'T': scenario.run.T,
        'n_paths': scenario.run.n_paths,
        'rng': {'generator': 'Philox', 'path_block': config.PATH_BLOCK},
        'versions': library_versions(),
    }
    if consts is not None:
        table = constants_table(consts)
        manifest['constants'] = dict(zip(table['name'], table['value'].astype(float)))
    manifest.update(resolved)
    return manifest


def run_info():
    """Kept apart from the manifest so the manifest stays byte-stable"""
    return {'finished_at': datetime.now(timezone.utc).isoformat(timespec='seconds')}


# ============================================================================
# TABLES
# ============================================================================

def fan_chart_frame(path, quantiles=config.FAN_QUANTILES):
    """
    Quantiles of total wealth and consumption at each recorded time

    Args:
        path (JointPath): Closed-loop simulation
        quantiles: Probability levels

    Returns:
        pd.DataFrame: t, Gamma_q05 ... Gamma_q95, c_q05 ... c_q95
    """
    frame = pd.DataFrame({'t': path.t})
    levels = np.asarray(quantiles, dtype=float)
    for name, values in (('Gamma', path.gamma), ('c', path.c)):
        table = np.quantile(values, levels, axis=1)
        for level, row in zip(levels, table):
            frame[f'{name}_q{int(round(level * 100)):02d}'] = row
    return frame


def text_summary(title, manifest, tables, checks=None, files=()):
    """
    Plain-text report: banner, run controls, tables and PASS/FAIL rows

    Args:
        title (str): Report heading
        manifest (dict): build_manifest output
        tables (dict): name -> DataFrame
        checks (list): CheckResult rows
        files: Names of tables written to disk only

    Returns:
        str
    """
    lines = ["=" * 60, title.upper(), "=" * 60]
    lines.append(f"Scenario: {manifest['scenario']['name']}")
    lines.append(
        f"Seed: {manifest['seed']} | dt: {manifest['dt']:g} | T: {manifest['T']:g} | "
        f"paths: {manifest['n_paths']}"
    )
    for name, frame in tables.items():
        lines += ["", f"[{name}]"]
        lines.append(frame.to_string(index=False) if len(frame) else "(empty)")
    if files:
        lines += ["", "Written to disk only: " + ", ".join(f"{name}.csv" for name in files)]
    if checks:
        lines += ["", "[checks]"]
        for check in checks:
            lines.append(f"  {check.label}  {check.criterion:>4}  {check.name}: {check.detail}")
        passed = sum(bool(c.passed) for c in checks)
        lines.append(f"\n{passed}/{len(checks)} checks passed")
    lines.append("=" * 60)
    return "\n".join(lines) + "\n"


def render(fmt, title, manifest, tables, checks=None, files=()):
    """Stdout rendering for --format"""
    if fmt == 'json':
        payload = {name: frame.to_dict(orient='records') for name, frame in tables.items()}
        if checks is not None:
            payload['checks'] = [c.to_row() for c in checks]
        return dumps(payload)
    if fmt == 'csv':
        parts = []
        for name, frame in tables.items():
            parts.append(f"# {name}\n" + frame.to_csv(index=False, float_format=config.CSV_FLOAT_FORMAT,
                                                       lineterminator='\n'))
        if checks is not None:
            parts.append("# checks\n" + checks_frame(checks).to_csv(
                index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator='\n'))
        return "".join(parts)
    return text_summary(title, manifest, tables, checks, files)


def emit_report(out_dir, title, manifest, tables=None, checks=None, fmt=config.DEFAULT_FORMAT,
                columns=None, display=None):
    """
    Write every artifact of one run and return the stdout rendering

    Files: <table>.csv for each table, checks.csv when checks are given,
    summary.txt, manifest.json and run_info.json.

    Args:
        out_dir: Output directory (created)
        title (str): Report heading
        manifest (dict): build_manifest output
        tables (dict): name -> DataFrame
        checks (list): CheckResult rows
        fmt (str): text | csv | json for the returned rendering
        columns (dict): name -> fixed column order for that table
        display: Tables shown in the summary and on stdout; default all

    Returns:
        tuple: (list of written paths, rendered text)

    Raises:
        IoFailureError: If any file cannot be written
    """
    out_dir = Path(out_dir)
    tables = tables or {}
    columns = columns or {}
    written = []
    for name, frame in tables.items():
        written.append(write_csv(frame, out_dir / f"{name}.csv", columns.get(name)))
    if checks is not None:
        written.append(write_csv(checks_frame(checks), out_dir / 'checks.csv', CHECK_COLUMNS))
    shown = {name: frame for name, frame in tables.items() if display is None or name in display}
    hidden = [name for name in tables if name not in shown]
    written.append(_write_text(out_dir / 'summary.txt', text_summary(title, manifest, shown, checks, hidden)))
    written.append(write_json(manifest, out_dir / config.MANIFEST_FILE))
    written.append(write_json(run_info(), out_dir / config.RUN_INFO_FILE))
    logger.info("Report written to %s (%d files)", out_dir, len(written))
    return written, render(fmt, title, manifest, shown, checks, hidden)
