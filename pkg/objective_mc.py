"""
Objective Monte Carlo Module
Closed-form value function, the analytic objective of scaled-consumption
policies, and truncated Monte Carlo estimates of the objective along the
closed loop
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

import config
from errors import (
    FinitenessHypothesisError,
    InadmissibleStateError,
    NegativeControlError,
    SentinelEncounteredError,
)
from income_sdde import IncomeState, n_time_steps
from model_params import derive_constants
from montecarlo import BrownianStream, MCEstimate, run_blocks, summarize
from policy_engine import ClosedLoopSimulator, initial_batch
from valuation import BOUNDARY, INADMISSIBLE, INTERIOR, gamma_total

logger = logging.getLogger(__name__)

__all__ = [
    'MCEstimate', 'NEG_INF', 'utility_rate', 'value_function', 'policy_decay_rate',
    'policy_value', 'truncation_bound', 'simulate_objective', 'estimate_J',
    'value_check_passes', 'value_check', 'suboptimality_gap',
]


# ============================================================================
# MINUS INFINITY
# ============================================================================

class NegativeInfinity:
    """
    Tagged minus infinity for the power-utility pole

    Absorbing under addition and positive scaling; anything that would need
    +inf or an undefined form raises SentinelEncounteredError.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __sub__(self, other):
        if other is self:
            raise SentinelEncounteredError("(-inf) - (-inf) is undefined")
        return self

    def __rsub__(self, other):
        raise SentinelEncounteredError("x - (-inf) would be +inf")

    def __mul__(self, other):
        if other is self or not float(other) > 0:
            raise SentinelEncounteredError(f"-inf * {other!r} is not minus infinity")
        return self

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __neg__(self):
        raise SentinelEncounteredError("+inf is not representable")

    def __float__(self):
        return -math.inf

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash('NEG_INF')

    def __repr__(self):
        return 'NEG_INF'


NEG_INF = NegativeInfinity()


# ============================================================================
# CLOSED FORMS
# ============================================================================

def utility_rate(c, B, prefs):
    """
    Instantaneous utility c^(1-gamma)/(1-gamma) + delta (k B)^(1-gamma)/(1-gamma)

    Args:
        c: Consumption rate (scalar or array)
        B: Bequest target (same shape)
        prefs (Preferences): gamma, k, delta

    Returns:
        float, np.ndarray, or NEG_INF when gamma > 1 and a control is zero
    """
    c = np.asarray(c, dtype=float)
    B = np.asarray(B, dtype=float)
    if np.any(c < 0) or np.any(B < 0):
        raise NegativeControlError("consumption and bequest must be nonnegative")
    power = 1.0 - prefs.gamma
    if power < 0 and (np.any(c == 0) or (prefs.delta != 0 and np.any(B == 0))):
        return NEG_INF
    value = (c ** power + prefs.delta * (prefs.k * B) ** power) / power
    return float(value) if value.ndim == 0 else value


def value_function(w, state, consts):
    """
    V = f_inf^gamma Gamma^(1-gamma) / (1-gamma)

    Zero on the boundary for gamma < 1 and NEG_INF for gamma > 1.

    Raises:
        InadmissibleStateError: If Gamma < -tol
    """
    gamma = consts.gamma
    total = gamma_total(w, state, consts)
    status = np.asarray(total.status)
    if np.any(status == INADMISSIBLE):
        raise InadmissibleStateError(f"total wealth {np.min(total.gamma):.6g} is negative")
    if np.any(status == BOUNDARY):
        if gamma > 1:
            return NEG_INF
        if status.ndim == 0:
            return 0.0
    wealth = np.where(status == INTERIOR, total.gamma, 0.0)
    value = consts.f_inf ** gamma * wealth ** (1.0 - gamma) / (1.0 - gamma)
    return float(value) if np.ndim(value) == 0 else value


def policy_decay_rate(consts, consumption_scale=1.0):
    """
    Decay rate of e^{-(rho+delta)t} E[u(c, B)] when c = s Gamma / f_inf

        gamma/nu + (1 - gamma)(s + delta k^{-b}) / f_inf

    which is 1/nu for the optimal policy.
    """
    gamma = consts.gamma
    delta = consts.params.prefs.delta
    return gamma / consts.nu + (1.0 - gamma) * (consumption_scale + delta * consts.bequest_ratio) / consts.f_inf


def policy_value(consts, gamma0, consumption_scale=1.0):
    """
    Objective of the scaled-consumption policy from total wealth gamma0

        gamma0^(1-g) f_inf^(g-1) (s^(1-g) + delta k^{-b}) / ((1-g) decay_rate)

    Equals value_function at s = 1.
    """
    gamma = consts.gamma
    rate = policy_decay_rate(consts, consumption_scale)
    if not rate > 0:
        raise FinitenessHypothesisError(
            f"consumption scale {consumption_scale:g} gives a non-decaying objective (rate {rate:.6g})"
        )
    delta = consts.params.prefs.delta
    weight = consumption_scale ** (1.0 - gamma) + delta * consts.bequest_ratio
    gamma0 = np.asarray(gamma0, dtype=float)
    value = gamma0 ** (1.0 - gamma) * consts.f_inf ** (gamma - 1.0) * weight / ((1.0 - gamma) * rate)
    return float(value) if value.ndim == 0 else value


def truncation_bound(consts, gamma0, T, consumption_scale=1.0):
    """
    |E int_T^inf e^{-(rho+delta)s} u(c, B) ds| for the scaled-consumption policy

    For the optimal policy this is |V(gamma0)| e^{-T/nu}.
    """
    if gamma0 <= 0:
        return 0.0 if consts.gamma < 1 else math.inf
    rate = policy_decay_rate(consts, consumption_scale)
    return abs(policy_value(consts, gamma0, consumption_scale)) * math.exp(-rate * T)


# ============================================================================
# MONTE CARLO
# ============================================================================

class ObjectiveAccumulator:
    """Left-Riemann sum of the discounted utility along each path"""

    def __init__(self, rows, prefs, n_steps, dt):
        self.prefs = prefs
        self.n_steps = n_steps
        self.dt = dt
        self.discount_rate = prefs.rho + prefs.delta
        self.total = np.zeros(rows)
        self.min_income = np.full(rows, np.inf)
        self.terminal_gamma = np.zeros(rows)

    def record(self, k, t, W, y, gamma, c, B, theta, grid):
        self.min_income = np.minimum(self.min_income, y)
        if k == self.n_steps:
            self.terminal_gamma = np.array(gamma, dtype=float)
            return
        rate = utility_rate(c, B, self.prefs)
        if rate is NEG_INF:
            raise SentinelEncounteredError(f"zero consumption under gamma > 1 at t = {t:g}")
        self.total += math.exp(-self.discount_rate * t) * rate * self.dt


def _objective_block(consts, w, x0, x1, T, dt, seed, consumption_scale, block, start, stop):
    params = consts.params
    rows = stop - start
    n_steps = n_time_steps(T, dt)
    stream = BrownianStream(seed, block, rows, params.market.n, dt)
    accumulator = ObjectiveAccumulator(rows, params.prefs, n_steps, dt)
    simulator = ClosedLoopSimulator(consts, dt, consumption_scale)
    result = simulator.run(np.full(rows, float(w)), initial_batch(params, x0, x1, rows),
                           lambda k: stream.next(), n_steps, [accumulator])
    income_crossings = int(np.count_nonzero(accumulator.min_income <= 0)) if x0 > 0 else 0
    return accumulator.total, accumulator.terminal_gamma, result['gamma_crossings'], income_crossings


@dataclass
class ObjectiveSamples:
    """Per-path discounted utility on [0, T] and terminal total wealth"""
    values: np.ndarray
    terminal_gamma: np.ndarray
    gamma_crossings: int
    income_crossings: int
    T: float
    dt: float
    seed: int
    consumption_scale: float = 1.0


def simulate_objective(params, w, x0, x1, T, dt, n_paths, seed=config.DEFAULT_SEED,
                       consumption_scale=1.0, workers=1, consts=None):
    """
    Run the closed loop block by block and keep only what the objective needs

    Returns:
        ObjectiveSamples
    """
    consts = consts if consts is not None else derive_constants(params)
    logger.info("Objective run: %d paths, T=%g, dt=%g, seed=%d, consumption scale %g",
                n_paths, T, dt, seed, consumption_scale)
    task = functools.partial(_objective_block, consts, w, x0, x1, T, dt, seed, consumption_scale)
    results = run_blocks(task, n_paths, workers)
    samples = ObjectiveSamples(
        values=np.concatenate([r[0] for r in results]),
        terminal_gamma=np.concatenate([r[1] for r in results]),
        gamma_crossings=sum(r[2] for r in results),
        income_crossings=sum(r[3] for r in results),
        T=float(T),
        dt=float(dt),
        seed=int(seed),
        consumption_scale=float(consumption_scale),
    )
    if samples.gamma_crossings or samples.income_crossings:
        logger.warning("Sign crossings: %d total-wealth, %d income",
                       samples.gamma_crossings, samples.income_crossings)
    return samples


def _initial_gamma(params, consts, w, x0, x1):
    total = gamma_total(float(w), IncomeState.initial(float(x0), x1, params.income), consts)
    if total.status != INTERIOR:
        raise InadmissibleStateError(
            f"objective estimates need total wealth > 0 at t = 0, got {total.gamma:.6g}"
        )
    return float(total.gamma)


def estimate_J(params, w, x0, x1, T, dt, n_paths, seed=config.DEFAULT_SEED,
               consumption_scale=1.0, workers=1, samples=None):
    """
    Truncated Monte Carlo objective under the (scaled) feedback policy

    Args:
        params (ModelParams): Scenario
        w, x0, x1: Initial wealth, income and history spec
        T (float): Truncation horizon
        dt (float): Step
        n_paths (int): Paths
        seed (int): Run seed
        consumption_scale (float): 1 for the optimal policy
        workers (int): Worker processes
        samples (ObjectiveSamples): Reuse a finished run

    Returns:
        MCEstimate: truncation_bound is the analytic tail beyond T
    """
    consts = derive_constants(params)
    gamma0 = _initial_gamma(params, consts, w, x0, x1)
    if samples is None:
        samples = simulate_objective(params, w, x0, x1, T, dt, n_paths, seed,
                                     consumption_scale, workers, consts)
    bound = truncation_bound(consts, gamma0, T, consumption_scale)
    return summarize(
        samples.values, T=T, truncation_bound=bound, dt=dt, seed=seed,
        consumption_scale=consumption_scale, gamma0=gamma0,
        gamma_crossings=samples.gamma_crossings, income_crossings=samples.income_crossings,
    )


@dataclass
class ValueCheck:
    """Closed-form value against the truncated Monte Carlo objective"""
    V: float
    estimate: MCEstimate
    truncated_target: float
    z: float
    passed: bool
    samples: ObjectiveSamples | None = field(default=None, repr=False)

    def to_row(self):
        return {
            'V': self.V,
            'mean': self.estimate.mean,
            'stderr': self.estimate.stderr,
            'truncation_bound': self.estimate.truncation_bound,
            'truncated_target': self.truncated_target,
            'z': self.z,
            'passed': self.passed,
            'n_paths': self.estimate.n_paths,
            'T': self.estimate.T,
            'dt': self.estimate.details.get('dt'),
            'seed': self.estimate.details.get('seed'),
            'gamma_crossings': self.estimate.details.get('gamma_crossings'),
            'income_crossings': self.estimate.details.get('income_crossings'),
        }


def value_check_passes(estimate, V, target, z=config.CONFIDENCE_Z, bias_rel=config.VALUE_BIAS_REL):
    """
    Both gates of the value check

    |mean - V| <= z stderr + truncation bound, and the mean must also sit
    within z stderr + bias_rel |target| of the truncated target
    V (1 - e^{-T/nu}). The first alone is loose whenever the tail is a large
    share of V.
    """
    if not estimate.agrees_with(V, z):
        return False
    return abs(estimate.mean - target) <= z * estimate.stderr + bias_rel * abs(target)


def value_check(params, w, x0, x1, T, dt, n_paths, seed=config.DEFAULT_SEED, workers=1):
    """
    Compare estimate_J under the optimal policy with value_function

    PASS iff value_check_passes holds and no path crossed Gamma = 0. z is
    measured against the truncated target V (1 - e^{-T/nu}).
    """
    consts = derive_constants(params)
    gamma0 = _initial_gamma(params, consts, w, x0, x1)
    V = value_function(float(w), IncomeState.initial(float(x0), x1, params.income), consts)
    samples = simulate_objective(params, w, x0, x1, T, dt, n_paths, seed, 1.0, workers, consts)
    estimate = estimate_J(params, w, x0, x1, T, dt, n_paths, seed, samples=samples)
    target = V * -math.expm1(-T / consts.nu)
    passed = value_check_passes(estimate, V, target) and samples.gamma_crossings == 0
    logger.info("Value check gamma=%g: V=%.8g mean=%.8g stderr=%.3g bound=%.3g -> %s",
                consts.gamma, V, estimate.mean, estimate.stderr, estimate.truncation_bound,
                'PASS' if passed else 'FAIL')
    return ValueCheck(V, estimate, target, estimate.z_score(target), passed, samples)


def conditional_tail(consts, terminal_gamma, T, consumption_scale=1.0):
    """Exact E[objective beyond T | Gamma(T)] for each path"""
    terminal_gamma = np.asarray(terminal_gamma, dtype=float)
    if np.any(terminal_gamma <= 0):
        if consts.gamma > 1:
            raise SentinelEncounteredError("a path ended on the boundary under gamma > 1")
    alive = np.maximum(terminal_gamma, 0.0)
    discount = math.exp(-(consts.params.prefs.rho + consts.params.prefs.delta) * T)
    return discount * policy_value(consts, alive, consumption_scale)


def suboptimality_gap(params, w, x0, x1, T, dt, n_paths, seed=config.DEFAULT_SEED,
                      consumption_scale=1.0 + config.CONSUMPTION_PERTURBATION, workers=1,
                      baseline=None, perturbed=None):
    """
    Paired estimate of J(scaled policy) - J(optimal policy)

    Both policies run on the same increments; each path's objective is
    completed with its exact conditional tail beyond T.

    Args:
        baseline, perturbed (ObjectiveSamples): Reuse finished runs

    Returns:
        MCEstimate: details carry `passed` (mean + 3 stderr < 0) and the analytic gap
    """
    consts = derive_constants(params)
    gamma0 = _initial_gamma(params, consts, w, x0, x1)
    if baseline is None:
        baseline = simulate_objective(params, w, x0, x1, T, dt, n_paths, seed, 1.0, workers, consts)
    if perturbed is None:
        perturbed = simulate_objective(params, w, x0, x1, T, dt, n_paths, seed,
                                       consumption_scale, workers, consts)
    optimal_total = baseline.values + conditional_tail(consts, baseline.terminal_gamma, T)
    scaled_total = perturbed.values + conditional_tail(consts, perturbed.terminal_gamma, T,
                                                       consumption_scale)
    V = policy_value(consts, gamma0)
    analytic_gap = policy_value(consts, gamma0, consumption_scale) - V
    estimate = summarize(scaled_total - optimal_total, T=T, consumption_scale=consumption_scale,
                         V=V, analytic_gap=analytic_gap, seed=seed, dt=dt)
    estimate.details['passed'] = estimate.mean + config.CONFIDENCE_Z * estimate.stderr < 0
    logger.info("Suboptimality gap s=%g: %.6g +/- %.3g (analytic %.6g)",
                consumption_scale, estimate.mean, estimate.stderr, analytic_gap)
    return estimate
