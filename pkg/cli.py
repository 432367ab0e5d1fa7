"""
Command Line Module
Entry point of the verification harness: each subcommand loads a scenario,
runs one experiment and writes its report, manifest and CSVs
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import config
from acceptance import run_suite
from errors import (
    CheckFailedError,
    ConfigParseError,
    DelayMertonError,
    GridMismatchError,
    IoFailureError,
    StepIncompatibleError,
    ValidationFailedError,
)
from income_sdde import IncomeState, pathwise_max_difference, simulate_income, variation_of_constants_oracle
from model_params import ZeroKernel, constants_table, derive_constants
from objective_mc import value_check
from policy_engine import benchmark_wedges, simulate_closed_loop
from reporting import CheckResult, build_manifest, emit_report, fan_chart_frame
from scenario import load_scenario
from valuation import human_capital_components, human_capital_mc_oracle

logger = logging.getLogger(__name__)

VALUE_CHECK_COLUMNS = [
    'V', 'mean', 'stderr', 'truncation_bound', 'truncated_target', 'z', 'passed',
    'n_paths', 'T', 'dt', 'seed', 'gamma_crossings', 'income_crossings',
]
RUN_OVERRIDES = ('seed', 'dt', 'T', 'n_paths', 'out_dir', 'format', 'workers', 'sim_paths', 'record_every')


@dataclass
class Outcome:
    """What a subcommand produced, before it is written out"""
    title: str
    tables: dict = field(default_factory=dict)
    checks: list | None = None
    consts: object = None
    display: tuple | None = None
    columns: dict = field(default_factory=dict)
    report: object = None


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_validate(scenario, args):
    """Standing hypotheses and the derived-constants table"""
    report = scenario.check()
    if not report.ok:
        violations = pd.DataFrame(
            [(v.code, v.condition, v.detail) for v in report.violations],
            columns=['code', 'condition', 'detail'],
        )
        return Outcome('Scenario validation', {'violations': violations}, report=report)
    consts = derive_constants(scenario.params)
    return Outcome('Scenario validation', {'constants': constants_table(consts)}, consts=consts, report=report)


def cmd_simulate_income(scenario, args):
    """Income paths with the variation-of-constants cross-check"""
    run = scenario.run
    consts = derive_constants(scenario.params)
    path, brownian = simulate_income(scenario.params, scenario.x0, scenario.x1, run.T, run.dt,
                                     run.seed, n_paths=run.sim_paths)
    oracle = variation_of_constants_oracle(scenario.params, scenario.x0, scenario.x1, brownian)
    summary = pd.DataFrame([{
        'n_paths': path.n_paths,
        'T': run.T,
        'dt': run.dt,
        'seed': run.seed,
        'mean_y_T': float(np.mean(path.y[-1])),
        'sign_crossings': path.sign_crossings,
        'oracle_max_gap': pathwise_max_difference(path.y, oracle.y),
    }])
    tables = {
        'income_summary': summary,
        'income_paths': path.to_frame(brownian if args.with_increments else None),
    }
    return Outcome('Income simulation', tables, consts=consts, display=('income_summary',))


def cmd_human_capital(scenario, args):
    """Closed-form human capital against the discounted-income oracle"""
    run = scenario.run
    consts = derive_constants(scenario.params)
    state = IncomeState.initial(scenario.x0, scenario.x1, scenario.params.income)
    present, past = human_capital_components(state, consts)
    closed = present + past
    oracle = human_capital_mc_oracle(scenario.params, state, n_paths=run.n_paths,
                                     seed=run.seed, workers=run.workers)
    low, high = oracle.confidence_interval()
    table = pd.DataFrame([{
        'closed_form': closed,
        'present': present,
        'past': past,
        'mc_mean': oracle.mean,
        'stderr': oracle.stderr,
        'ci_low': low,
        'ci_high': high,
        'tail_bound': oracle.truncation_bound,
        'z': oracle.z_score(closed),
        'T': oracle.T,
        'dt': oracle.details['dt'],
        'n_paths': oracle.n_paths,
        'seed': run.seed,
    }])
    check = CheckResult('HC', 'closed form vs discounted-income oracle', oracle.agrees_with(closed),
                        value=oracle.mean, reference=closed, tolerance=oracle.tolerance())
    return Outcome('Human capital', {'human_capital': table}, [check], consts)


def cmd_policy_sim(scenario, args):
    """Closed-loop paths under the feedback policy, long format plus fan chart"""
    run = scenario.run
    consts = derive_constants(scenario.params)
    path = simulate_closed_loop(scenario.params, scenario.w, scenario.x0, scenario.x1, run.T, run.dt,
                                run.seed, n_paths=run.sim_paths, record_every=run.record_every,
                                consts=consts)
    summary = pd.DataFrame([{
        'n_paths': path.n_paths,
        'T': run.T,
        'dt': run.dt,
        'seed': run.seed,
        'mean_Gamma_T': float(np.mean(path.gamma[-1])),
        'boundary_starts': int(np.count_nonzero(path.boundary_start)),
        'boundary_excursion': path.boundary_excursion,
        'gamma_crossings': path.gamma_crossings,
        'income_crossings': path.income_crossings,
    }])
    tables = {
        'policy_summary': summary,
        'policy_paths': path.to_frame(),
        'fan_chart': fan_chart_frame(path),
    }
    return Outcome('Closed-loop simulation', tables, consts=consts, display=('policy_summary',))


def cmd_value_check(scenario, args):
    """Closed-form value function against the truncated Monte Carlo objective"""
    run = scenario.run
    consts = derive_constants(scenario.params)
    result = value_check(scenario.params, scenario.w, scenario.x0, scenario.x1, run.T, run.dt,
                         run.n_paths, run.seed, run.workers)
    check = CheckResult(
        'V', f'value function (gamma={consts.gamma:g})', result.passed,
        value=result.estimate.mean, reference=result.V, tolerance=result.estimate.tolerance(),
        detail=f"z vs truncated target {result.z:+.2f}",
    )
    table = pd.DataFrame([result.to_row()], columns=VALUE_CHECK_COLUMNS)
    return Outcome('Value check', {'value_check': table}, [check], consts,
                   columns={'value_check': VALUE_CHECK_COLUMNS})


def cmd_benchmark(scenario, args):
    """Wedges of the delayed model against the phi = 0 benchmark"""
    consts = derive_constants(scenario.params)
    zero = derive_constants(scenario.params.with_kernel(ZeroKernel()))
    state = IncomeState.initial(scenario.x0, scenario.x1, scenario.params.income)
    wedges = benchmark_wedges(scenario.w, state, consts, zero)
    rows = [('Gamma', wedges.gamma_wedge, wedges.gamma_direct, wedges.gamma_residual)]
    for i, (closed, direct) in enumerate(zip(wedges.theta_wedge, wedges.theta_direct), start=1):
        rows.append((f'theta_{i}', closed, direct, wedges.theta_residual))
    table = pd.DataFrame(rows, columns=['component', 'closed_form', 'direct', 'relative_residual'])
    worst = max(wedges.theta_residual, wedges.gamma_residual)
    check = CheckResult('W', 'closed-form wedges match direct differences', worst <= config.WEDGE_TOL,
                        value=worst, reference=0.0, tolerance=config.WEDGE_TOL)
    return Outcome('Benchmark wedges', {'wedges': table}, [check], consts)


def cmd_suite(scenario, args):
    """Every acceptance criterion"""
    consts = derive_constants(scenario.params)
    return Outcome('Acceptance suite', checks=run_suite(scenario, scenario.run.workers), consts=consts)


COMMANDS = {
    'validate': cmd_validate,
    'simulate-income': cmd_simulate_income,
    'human-capital': cmd_human_capital,
    'policy-sim': cmd_policy_sim,
    'value-check': cmd_value_check,
    'benchmark': cmd_benchmark,
    'suite': cmd_suite,
}


# ============================================================================
# ARGUMENTS
# ============================================================================

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('scenario', help="Scenario file (TOML or JSON)")
    common.add_argument('--seed', type=int, help=f"Run seed (default: {config.DEFAULT_SEED})")
    common.add_argument('--dt', type=float, help=f"Time step in years (default: {config.DEFAULT_DT:g})")
    common.add_argument('--horizon', dest='T', type=float,
                        help=f"Truncation horizon in years (default: {config.DEFAULT_HORIZON:g})")
    common.add_argument('--paths', dest='n_paths', type=int,
                        help=f"Monte Carlo paths (default: {config.DEFAULT_PATHS})")
    common.add_argument('--out-dir', help=f"Output directory (default: {config.DEFAULT_OUT_DIR})")
    common.add_argument('--format', choices=config.OUTPUT_FORMATS,
                        help=f"Stdout format (default: {config.DEFAULT_FORMAT})")
    common.add_argument('--workers', type=int, help="Worker processes for Monte Carlo blocks")
    common.add_argument('--gamma', type=float, help="Override the risk aversion of the scenario")
    common.add_argument('--history', help="Initial income history: a constant or a CSV of m+1 values")
    common.add_argument('--verbose', '-v', action='store_true', help="Debug logging")

    parser = argparse.ArgumentParser(
        prog='delay-merton',
        description="Closed-form Merton solution with delayed labor income and its Monte Carlo checks",
    )
    parser.add_argument('--version', action='version', version=f"{config.APP_NAME} {config.APP_VERSION}")
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('validate', parents=[common], help="Check hypotheses and print derived constants")
    income = sub.add_parser('simulate-income', parents=[common], help="Simulate income paths")
    income.add_argument('--sim-paths', type=int, help="Paths to write")
    income.add_argument('--with-increments', action='store_true', help="Include dZ columns in the CSV")
    sub.add_parser('human-capital', parents=[common], help="Human capital: closed form vs oracle")
    policy = sub.add_parser('policy-sim', parents=[common], help="Closed-loop policy simulation")
    policy.add_argument('--sim-paths', type=int, help="Paths to write")
    policy.add_argument('--record-every', type=int, help="Keep every k-th step")
    sub.add_parser('value-check', parents=[common], help="Value function vs Monte Carlo objective")
    sub.add_parser('benchmark', parents=[common], help="Wedges against the phi = 0 benchmark")
    sub.add_parser('suite', parents=[common], help="Run every acceptance criterion")
    return parser


def configure_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else config.LOG_LEVEL,
        format=config.LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


# ============================================================================
# RUN
# ============================================================================

def run(command, scenario_path, history=None, gamma=None, args=None, **overrides):
    """
    Run one subcommand and write its artifacts

    Args:
        command (str): Subcommand name
        scenario_path: Scenario file
        history: Initial history override (constant or CSV path)
        gamma (float): Risk-aversion override
        args (argparse.Namespace): Subcommand-specific flags
        **overrides: RunControls overrides; None leaves the file value

    Returns:
        int: Exit code
    """
    args = args or argparse.Namespace(with_increments=False)
    try:
        scenario = load_scenario(scenario_path, history=history, gamma=gamma, **overrides)
        outcome = COMMANDS[command](scenario, args)
        manifest = build_manifest(command, scenario, outcome.consts,
                                  history_source=history if history is not None else 'scenario')
        out_dir = Path(scenario.run.out_dir) / command
        _, text = emit_report(out_dir, outcome.title, manifest, outcome.tables, outcome.checks,
                              scenario.run.format, outcome.columns, outcome.display)
        print(text, end='')

        if outcome.report is not None and not outcome.report.ok:
            for line in outcome.report.lines():
                print(line, file=sys.stderr)
            return config.EXIT_VALIDATION
        failed = [c for c in outcome.checks or [] if not c.passed]
        if failed:
            raise CheckFailedError(f"{len(failed)} of {len(outcome.checks)} checks failed", failed)
    except (ConfigParseError, GridMismatchError, StepIncompatibleError, IoFailureError) as e:
        logger.error("%s", e)
        return config.EXIT_CONFIG
    except ValidationFailedError as e:
        logger.error("Scenario rejected: %s", e)
        return config.EXIT_VALIDATION
    except CheckFailedError as e:
        logger.error("%s", e)
        for check in e.failed:
            print(f"FAIL  {check.criterion}  {check.name}: {check.detail}", file=sys.stderr)
        return config.EXIT_CHECK_FAILED
    except DelayMertonError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return config.EXIT_CHECK_FAILED
    return config.EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    overrides = {name: getattr(args, name, None) for name in RUN_OVERRIDES}
    return run(args.command, args.scenario, history=args.history, gamma=args.gamma, args=args, **overrides)


if __name__ == "__main__":
    sys.exit(main())
