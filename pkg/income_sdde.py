"""
Income SDDE Module
Euler-Maruyama simulation of the delayed labor-income equation

    dy = [mu_y y + int_{-d}^0 phi(s) y(t+s) ds] dt + y sigma_y' dZ

with a rolling history buffer, and the variation-of-constants oracle used to
cross-check it pathwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

import config
import quadrature
from errors import GridMismatchError, StepIncompatibleError
from montecarlo import BrownianStream, SeedRecord, iter_blocks

logger = logging.getLogger(__name__)


# ============================================================================
# STATE AND NOISE
# ============================================================================

@dataclass(frozen=True, eq=False)
class IncomeState:
    """
    Current income and its history on [t - d, t]

    y is a scalar for one path or shape (P,) for a batch; history is then
    (m+1,) or (m+1, P). history[m] is always y. `fine` is the same window at
    simulation resolution (m p + 1 rows) once the state has been stepped.
    """
    t: float
    y: float | np.ndarray
    history: np.ndarray
    ds: float
    fine: np.ndarray | None = None

    def __post_init__(self):
        history = np.asarray(self.history, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, 'history', history)
        object.__setattr__(self, 'y', float(y) if y.ndim == 0 else y)
        if not np.array_equal(history[-1], y):
            raise GridMismatchError("history[m] must equal the current income y")

    @classmethod
    def initial(cls, x0, x1, income, t=0.0):
        """
        Initial state from x0 and a history spec

        Args:
            x0: Current income (scalar, or (P,) for a batch)
            x1: Past income on the delay grid: a constant, m+1 values (the last
                one is replaced by x0) or m values on [-d, 0)
            income (IncomeParams): Supplies d and m

        Returns:
            IncomeState
        """
        m = income.m
        x0 = np.asarray(x0, dtype=float)
        past = np.asarray(x1, dtype=float)
        if past.ndim == 0:
            past = np.full(m + 1, float(past))
        elif past.shape[0] == m:
            past = np.concatenate([past, past[-1:]])
        quadrature.check_grid(past, m + 1, "initial history")
        if x0.ndim:
            history = np.repeat(past[:, None], x0.shape[0], axis=1) if past.ndim == 1 else past.copy()
        else:
            history = past.copy()
        history[-1] = x0
        return cls(t=float(t), y=x0, history=history, ds=income.ds)

    @property
    def m(self):
        return self.history.shape[0] - 1

    @property
    def d(self):
        return self.ds * self.m

    @property
    def n_paths(self):
        return 1 if self.history.ndim == 1 else self.history.shape[1]

    def scaled(self, a):
        """The state with income and history multiplied by a"""
        fine = None if self.fine is None else a * self.fine
        return IncomeState(self.t, a * self.y, a * self.history, self.ds, fine)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments of an n-dimensional Brownian motion, shape (N, P, n)"""
    dt: float
    increments: np.ndarray
    seed: SeedRecord | None = None

    @property
    def n_steps(self):
        return self.increments.shape[0]

    @property
    def n_paths(self):
        return self.increments.shape[1]

    @property
    def n(self):
        return self.increments.shape[2]

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def cumulative(self):
        """Z on the time grid, shape (N+1, P, n), Z(0) = 0"""
        out = np.zeros((self.n_steps + 1, self.n_paths, self.n))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def coarsen(self, factor):
        """The same Brownian path observed every `factor` steps"""
        factor = int(factor)
        if factor < 1 or self.n_steps % factor:
            raise StepIncompatibleError(f"cannot coarsen {self.n_steps} steps by {factor}")
        shape = (self.n_steps // factor, factor, self.n_paths, self.n)
        return BrownianPath(self.dt * factor, self.increments.reshape(shape).sum(axis=1), self.seed)

    def path(self, j):
        record = None if self.seed is None else self.seed.for_path(j)
        return BrownianPath(self.dt, self.increments[:, j:j + 1, :], record)


def brownian_path(seed, n_steps, dt, n_paths=1, n=1, block_size=config.PATH_BLOCK):
    """
    Draw the increments of paths 0..n_paths-1 of run `seed`

    Path j comes from block j // block_size, so it is identical whatever
    n_paths is.
    """
    pieces = []
    blocks = list(iter_blocks(n_paths, block_size))
    for block, start, stop in blocks:
        stream = BrownianStream(seed, block, stop - start, n, dt, block_size)
        pieces.append(stream.take(n_steps))
    increments = np.concatenate(pieces, axis=1) if pieces else np.empty((n_steps, 0, n))
    record = SeedRecord('Philox', int(seed), 0, len(blocks), int(block_size))
    return BrownianPath(float(dt), increments, record)


def steps_per_cell(ds, dt):
    """Integer p with dt = ds / p"""
    if dt <= 0:
        raise StepIncompatibleError(f"dt must be positive, got {dt}")
    ratio = ds / dt
    p = int(round(ratio))
    if p < 1 or abs(ratio - p) > config.STEP_RATIO_TOL * max(1.0, ratio):
        raise StepIncompatibleError(f"dt = {dt:g} does not divide ds = {ds:g} (ratio {ratio:.6g})")
    return p


def n_time_steps(T, dt):
    if T < 0:
        raise ValueError(f"horizon must be nonnegative, got {T}")
    steps = T / dt
    n = int(round(steps))
    if abs(steps - n) > 1e-6 * max(1.0, steps):
        logger.warning("T = %g is not a multiple of dt = %g; using %d steps", T, dt, n)
    return n


# ============================================================================
# DELAY TERM
# ============================================================================

def convolve(history, kernel, ds):
    """
    Trapezoid value of int_{-d}^0 phi(s) y(t+s) ds

    Args:
        history (np.ndarray): m+1 income values (or (m+1, P))
        kernel (np.ndarray): phi on the same grid
        ds (float): Grid step

    Returns:
        float or np.ndarray
    """
    history = np.asarray(history, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if history.shape[0] != kernel.shape[0]:
        raise GridMismatchError(
            f"history has {history.shape[0]} nodes but kernel has {kernel.shape[0]}"
        )
    return quadrature.inner_product(kernel, history, ds)


class DelayBuffer:
    """
    Ring buffer holding [t - d, t] at simulation resolution for a batch of paths

    Rows are time slices (oldest first once unrolled); grid() down-samples
    every p-th row to the delay grid.
    """

    def __init__(self, fine, p):
        self.data = np.array(fine, dtype=float, order='C')
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        self.length = self.data.shape[0]
        self.p = int(p)
        self.head = 0  # row holding the oldest value
        self.offsets = np.arange(0, self.length, self.p)

    @classmethod
    def from_state(cls, state, p):
        if state.fine is not None and state.fine.shape[0] == state.m * p + 1:
            return cls(state.fine, p)
        return cls(quadrature.interpolate_history(state.history, state.d, state.m * p), p)

    def grid(self):
        """History on the delay grid, shape (m+1, P)"""
        return self.data[(self.head + self.offsets) % self.length]

    def push(self, y):
        self.data[self.head] = y
        self.head = (self.head + 1) % self.length

    def unrolled(self):
        return np.roll(self.data, -self.head, axis=0)


def _kernel_weights(params):
    income = params.income
    nodes, ds = quadrature.delay_grid(income.d, income.m)
    return quadrature.trapezoid_weights(income.m, ds) * income.phi.sample(nodes)


# ============================================================================
# SIMULATION
# ============================================================================

def step(state, params, dZ, dt):
    """
    One Euler-Maruyama step of the income equation

    Args:
        state (IncomeState): Current state (single path or batch)
        params (ModelParams): Scenario
        dZ (np.ndarray): Brownian increment, (n,) or (P, n)
        dt (float): Step; must divide the grid step ds

    Returns:
        IncomeState: The state at t + dt
    """
    income = params.income
    quadrature.check_grid(state.history, income.m + 1, "history")
    p = steps_per_cell(state.ds, dt)
    if state.fine is not None and state.fine.shape[0] == state.m * p + 1:
        fine = state.fine
    else:
        fine = quadrature.interpolate_history(state.history, state.d, state.m * p)

    y = state.y
    delay = convolve(fine[::p], income.phi.sample(income.nodes), state.ds)
    y_next = y + (income.mu_y * y + delay) * dt + y * (np.asarray(dZ) @ income.sigma_y)

    fine_next = np.concatenate([fine[1:], np.asarray(y_next, dtype=float)[None, ...]])
    return IncomeState(state.t + dt, y_next, fine_next[::p].copy(), state.ds, fine_next)


@dataclass(frozen=True, eq=False)
class IncomePath:
    """Income on the simulation time grid, y has shape (N+1, P)"""
    t: np.ndarray
    y: np.ndarray
    sign_crossings: int = 0

    @property
    def n_paths(self):
        return self.y.shape[1]

    def to_frame(self, brownian=None):
        """Long-format table: path_id, t, y and optionally dZ_1..dZ_n"""
        n_times, n_paths = self.y.shape
        frame = pd.DataFrame({
            'path_id': np.repeat(np.arange(n_paths), n_times),
            't': np.tile(self.t, n_paths),
            'y': self.y.T.ravel(),
        })
        if brownian is not None:
            padded = np.concatenate([brownian.increments, np.full((1,) + brownian.increments.shape[1:], np.nan)])
            for i in range(brownian.n):
                frame[f'dZ_{i + 1}'] = padded[:, :, i].T.ravel()
        return frame


def count_sign_crossings(y, x0):
    """Paths that started positive and reached y <= 0 at some step"""
    started_positive = np.broadcast_to(np.asarray(x0) > 0, y.shape[1:])
    touched = np.any(y[1:] <= 0, axis=0) if y.shape[0] > 1 else np.zeros(y.shape[1:], bool)
    return int(np.count_nonzero(touched & started_positive))


def simulate_income(params, x0, x1, T, dt, seed=config.DEFAULT_SEED, n_paths=1, brownian=None):
    """
    Simulate income paths on [0, T]

    Args:
        params (ModelParams): Scenario (assumed validated)
        x0: Initial income (scalar, broadcast over paths)
        x1: Initial history spec (see IncomeState.initial)
        T (float): Horizon (years)
        dt (float): Step, must divide ds
        seed (int): Run seed; ignored when `brownian` is given
        n_paths (int): Number of paths
        brownian (BrownianPath): Reuse these increments instead of drawing

    Returns:
        tuple: (IncomePath, BrownianPath)
    """
    income = params.income
    if brownian is None:
        brownian = brownian_path(seed, n_time_steps(T, dt), dt, n_paths, params.market.n)
    dt = brownian.dt
    n_steps, n_paths = brownian.n_steps, brownian.n_paths
    p = steps_per_cell(income.ds, dt)

    state = IncomeState.initial(np.full(n_paths, float(x0)), x1, income)
    buffer = DelayBuffer.from_state(state, p)
    weights = _kernel_weights(params)

    y = np.empty((n_steps + 1, n_paths))
    y[0] = state.y
    for k in range(n_steps):
        current = y[k]
        delay = weights @ buffer.grid()
        noise = brownian.increments[k] @ income.sigma_y
        y[k + 1] = current + (income.mu_y * current + delay) * dt + current * noise
        buffer.push(y[k + 1])

    crossings = count_sign_crossings(y, x0)
    if crossings:
        logger.warning("%d of %d income paths crossed zero", crossings, n_paths)
    logger.debug("Simulated %d income paths over %d steps", n_paths, n_steps)
    return IncomePath(brownian.times, y, crossings), brownian


def variation_of_constants_oracle(params, x0, x1, brownian):
    """
    Income from the stochastic variation-of-constants formula

        y(t) = E(t) (x0 + I(t)),  E(t) = exp((mu_y - |sigma_y|^2 / 2) t + sigma_y' Z(t))

    with I accumulated by left Riemann sums of E^{-1}(u) times the delay term,
    on the increments of `brownian`.

    Returns:
        IncomePath
    """
    income = params.income
    dt = brownian.dt
    n_steps, n_paths = brownian.n_steps, brownian.n_paths
    p = steps_per_cell(income.ds, dt)

    state = IncomeState.initial(np.full(n_paths, float(x0)), x1, income)
    buffer = DelayBuffer.from_state(state, p)
    weights = _kernel_weights(params)

    compensator = income.mu_y - 0.5 * float(income.sigma_y @ income.sigma_y)
    log_growth = compensator * brownian.times[:, None] + brownian.cumulative() @ income.sigma_y

    y = np.empty((n_steps + 1, n_paths))
    y[0] = state.y
    accumulated = np.zeros(n_paths)
    start = np.asarray(state.y, dtype=float)
    for k in range(n_steps):
        accumulated += np.exp(-log_growth[k]) * (weights @ buffer.grid()) * dt
        y[k + 1] = np.exp(log_growth[k + 1]) * (start + accumulated)
        buffer.push(y[k + 1])

    return IncomePath(brownian.times, y, count_sign_crossings(y, x0))


def pathwise_max_difference(first, second):
    """Mean over paths of max_t |first - second|"""
    gaps = np.max(np.abs(np.asarray(first) - np.asarray(second)), axis=0)
    return float(np.mean(gaps)) if gaps.ndim else float(gaps)


def gbm_moments(x0, mu_y, sigma_y, T):
    """Mean and variance of x0 exp((mu_y - |s|^2/2) T + s'Z(T))"""
    s2 = float(np.dot(sigma_y, sigma_y))
    mean = x0 * math.exp(mu_y * T)
    return mean, mean ** 2 * math.expm1(s2 * T)
