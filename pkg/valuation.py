"""
Valuation Module
Human capital and total wealth in closed form, the state-price density, and
the discounted-income Monte Carlo oracle that checks the closed form
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

import config
import quadrature
from income_sdde import DelayBuffer, IncomeState, n_time_steps, steps_per_cell
from model_params import compute_kappa, derive_constants
from montecarlo import BrownianStream, run_blocks, summarize

logger = logging.getLogger(__name__)

INTERIOR = 'interior'
BOUNDARY = 'boundary'
INADMISSIBLE = 'inadmissible'


@dataclass(frozen=True, eq=False)
class StatePriceDensityPath:
    """xi on the time grid of a BrownianPath, values shape (N+1, P)"""
    t: np.ndarray
    values: np.ndarray


def state_price_density(market, delta, brownian):
    """
    Pre-death state-price density along a Brownian path

    Uses the exact log-space update
        xi(t+dt) = xi(t) exp(-(r + delta + |kappa|^2 / 2) dt - kappa' dZ)

    Args:
        market (MarketParams): Market coefficients
        delta (float): Mortality intensity
        brownian (BrownianPath): Driving increments

    Returns:
        StatePriceDensityPath
    """
    kappa = compute_kappa(market)
    rate = market.r + delta + 0.5 * float(kappa @ kappa)
    log_xi = -rate * brownian.times[:, None] - brownian.cumulative() @ kappa
    return StatePriceDensityPath(brownian.times, np.exp(log_xi))


# ============================================================================
# CLOSED FORMS
# ============================================================================

def human_capital_components(state, consts):
    """
    Present and past components of human capital

    Returns:
        tuple: (g_inf * y, <h_inf, history>)
    """
    quadrature.check_grid(state.history, consts.m + 1, "history")
    return consts.g_inf * state.y, consts.hc_weights @ state.history


def human_capital(state, consts):
    """Market value of future labor income: g_inf y + <h_inf, x1>"""
    present, past = human_capital_components(state, consts)
    return present + past


def boundary_tolerance(w, hc, rel_tol=config.BOUNDARY_REL_TOL):
    """Absolute tolerance for |Gamma| scaled by max(1, |w|, |human capital|)"""
    return rel_tol * np.maximum(1.0, np.maximum(np.abs(w), np.abs(hc)))


@dataclass(frozen=True, eq=False)
class TotalWealth:
    gamma: float | np.ndarray
    human_capital: float | np.ndarray
    tolerance: float | np.ndarray
    status: str | np.ndarray

    @property
    def admissible(self):
        return bool(np.all(np.asarray(self.status) != INADMISSIBLE))


def classify(gamma, tolerance):
    """interior / boundary / inadmissible labels for Gamma against tolerance"""
    gamma = np.asarray(gamma, dtype=float)
    status = np.where(gamma > tolerance, INTERIOR,
                      np.where(gamma < -tolerance, INADMISSIBLE, BOUNDARY))
    return str(status) if status.ndim == 0 else status


def gamma_total(w, state, consts, rel_tol=config.BOUNDARY_REL_TOL):
    """
    Total wealth Gamma = w + human capital, with its admissibility class

    Args:
        w: Financial wealth (scalar or (P,))
        state (IncomeState): Income state
        consts (DerivedConstants): Scenario constants
        rel_tol (float): Relative boundary tolerance

    Returns:
        TotalWealth
    """
    hc = human_capital(state, consts)
    gamma = w + hc
    tolerance = boundary_tolerance(w, hc, rel_tol)
    return TotalWealth(gamma, hc, tolerance, classify(gamma, tolerance))


# ============================================================================
# MONTE CARLO ORACLE
# ============================================================================

def _discounted_income_block(consts, state, T, dt, seed, block, start, stop):
    """Integral of xi y over [0, T] for the paths of one block, plus window moments"""
    params = consts.params
    market, income = params.market, params.income
    rows = stop - start
    n_steps = n_time_steps(T, dt)
    p = steps_per_cell(income.ds, dt)
    window_start = max(0, n_steps - int(round(income.d / dt)))

    batch = IncomeState.initial(np.full(rows, state.y), state.history, income)
    buffer = DelayBuffer.from_state(batch, p)
    stream = BrownianStream(seed, block, rows, market.n, dt)

    rate = consts.discount + 0.5 * float(consts.kappa @ consts.kappa)
    y = np.array(batch.y, dtype=float)
    log_xi = np.zeros(rows)
    integral = np.zeros(rows)
    window_sum = np.zeros(n_steps + 1 - window_start)
    window_sumsq = np.zeros_like(window_sum)

    for k in range(n_steps + 1):
        discounted = np.exp(log_xi) * y
        if k >= window_start:
            window_sum[k - window_start] = discounted.sum()
            window_sumsq[k - window_start] = (discounted ** 2).sum()
        if k == n_steps:
            break
        integral += discounted * dt
        dZ = stream.next()
        delay = consts.conv_weights @ buffer.grid()
        y = y + (income.mu_y * y + delay) * dt + y * (dZ @ income.sigma_y)
        log_xi -= rate * dt + dZ @ consts.kappa
        buffer.push(y)

    return integral, window_sum, window_sumsq


def discounted_income_tail_bound(consts, window_mean, window_stderr, z=config.CONFIDENCE_Z):
    """
    Bound on int_T^inf E[xi y] du from the last delay window of the simulation

    m(u) = E[xi(u) y(u)] solves a linear delay equation with decay margin
    beta - beta_bar_inf, which gives
        (1 + beta_bar_inf d) max_{[T-d, T]} (|m| + z se) / (beta - beta_bar_inf)
    """
    if len(window_mean) == 0:
        return 0.0
    d = consts.params.income.d
    peak = float(np.max(np.abs(window_mean) + z * np.asarray(window_stderr)))
    return (1.0 + consts.beta_bar_inf * d) * peak / (consts.beta - consts.beta_bar_inf)


def human_capital_mc_oracle(params, state, T=None, n_paths=config.DEFAULT_PATHS, dt=None,
                            seed=config.DEFAULT_SEED, workers=1):
    """
    Monte Carlo value of E[int_0^T xi(u) y(u) du] on coupled (y, xi) paths

    Args:
        params (ModelParams): Scenario (validated here)
        state (IncomeState): Initial income state (single path)
        T (float): Truncation horizon; default makes the tail about 0.1%
        n_paths (int): Number of paths
        dt (float): Step, must divide ds; default ds / 2
        seed (int): Run seed
        workers (int): Worker processes

    Returns:
        MCEstimate: with the tail bound as truncation_bound
    """
    consts = derive_constants(params)
    if dt is None:
        dt = consts.ds / config.HC_ORACLE_STEPS_PER_CELL
    if T is None:
        T = config.hc_oracle_horizon(consts.beta, consts.beta_bar_inf)
    logger.info("Human-capital oracle: %d paths, T=%g, dt=%g, seed=%d", n_paths, T, dt, seed)

    task = functools.partial(_discounted_income_block, consts, state, T, dt, seed)
    results = run_blocks(task, n_paths, workers)

    integrals = np.concatenate([r[0] for r in results])
    window_sum = np.sum([r[1] for r in results], axis=0)
    window_sumsq = np.sum([r[2] for r in results], axis=0)
    window_mean = window_sum / n_paths
    if n_paths > 1:
        variance = np.maximum(window_sumsq / n_paths - window_mean ** 2, 0.0) * n_paths / (n_paths - 1)
        window_stderr = np.sqrt(variance / n_paths)
    else:
        window_stderr = np.zeros_like(window_mean)
    bound = discounted_income_tail_bound(consts, window_mean, window_stderr)

    estimate = summarize(integrals, T=T, truncation_bound=bound, dt=dt, seed=seed)
    logger.info("Human-capital oracle: mean=%.6g stderr=%.3g tail bound=%.3g",
                estimate.mean, estimate.stderr, bound)
    return estimate
