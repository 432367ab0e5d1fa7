"""
Policy Engine Module
Optimal feedback map, closed-loop simulation of wealth and income, the exact
stochastic exponential for total wealth, and the wedges against the
no-delay benchmark
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

import config
from errors import InadmissibleStateError
from income_sdde import (
    DelayBuffer,
    IncomeState,
    brownian_path,
    count_sign_crossings,
    n_time_steps,
    steps_per_cell,
)
from model_params import derive_constants
from valuation import BOUNDARY, INADMISSIBLE, boundary_tolerance, gamma_total

logger = logging.getLogger(__name__)


# ============================================================================
# FEEDBACK MAP
# ============================================================================

@dataclass(frozen=True, eq=False)
class PolicyDecision:
    """
    Consumption c, bequest target B and risky allocations theta

    theta = merton + hedge: the Merton demand on total wealth plus the
    (negative) income hedging demand.
    """
    c: float | np.ndarray
    B: float | np.ndarray
    theta: np.ndarray
    merton: np.ndarray
    hedge: np.ndarray


def _decide(gamma, y, consts, consumption_scale=1.0):
    """Controls for total wealth gamma (already zeroed on the boundary) and income y"""
    gamma = np.asarray(gamma, dtype=float)
    y = np.asarray(y, dtype=float)
    c = consumption_scale * gamma / consts.f_inf
    B = consts.bequest_ratio * gamma / consts.f_inf
    merton = gamma[..., None] * consts.merton_direction
    hedge = -(consts.g_inf * y)[..., None] * consts.hedge_direction
    return c, B, merton + hedge, merton, hedge


def feedback(w, state, consts, rel_tol=config.BOUNDARY_REL_TOL, consumption_scale=1.0):
    """
    Evaluate the optimal feedback map at (w, state)

        c = Gamma / f_inf,  B = k^{-b} Gamma / f_inf,
        theta = (Gamma / gamma) (sigma')^{-1} kappa - g_inf y (sigma')^{-1} sigma_y

    On the boundary |Gamma| <= tol consumption and bequest are zero and only
    the hedging position is held.

    Args:
        w: Financial wealth (scalar or (P,))
        state (IncomeState): Income state
        consts (DerivedConstants): Scenario constants
        rel_tol (float): Relative boundary tolerance
        consumption_scale (float): Multiplies c (1 is optimal)

    Returns:
        PolicyDecision

    Raises:
        InadmissibleStateError: If Gamma < -tol
    """
    total = gamma_total(w, state, consts, rel_tol)
    if not total.admissible:
        raise InadmissibleStateError(
            f"total wealth {np.min(total.gamma):.6g} is below the admissible region"
        )
    gamma = np.where(np.asarray(total.status) == BOUNDARY, 0.0, total.gamma)
    c, B, theta, merton, hedge = _decide(gamma, state.y, consts, consumption_scale)
    if np.ndim(c) == 0:
        c, B = float(c), float(B)
    return PolicyDecision(c, B, theta, merton, hedge)


# ============================================================================
# CLOSED LOOP
# ============================================================================

@dataclass(frozen=True, eq=False)
class JointPath:
    """
    Closed-loop trajectory on the recorded time grid

    Arrays are time-major: W, y, gamma, c, B have shape (K, P), theta (K, P, n).
    history, when kept, is (K, m+1, P) and increments (N, P, n).
    """
    t: np.ndarray
    W: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    B: np.ndarray
    theta: np.ndarray
    ds: float
    increments: np.ndarray | None = None
    history: np.ndarray | None = None
    boundary_start: np.ndarray | None = None
    gamma_crossings: int = 0
    income_crossings: int = 0
    boundary_excursion: float = 0.0

    @property
    def n_paths(self):
        return self.W.shape[1]

    def state_at(self, i):
        """IncomeState batch at recorded index i (needs history)"""
        if self.history is None:
            raise ValueError("path was recorded without history snapshots")
        return IncomeState(self.t[i], self.y[i], self.history[i], self.ds)

    def to_frame(self):
        """Long format: path_id, t, W, y, Gamma, c, B, theta_1..theta_n"""
        n_times, n_paths = self.W.shape
        frame = pd.DataFrame({
            'path_id': np.repeat(np.arange(n_paths), n_times),
            't': np.tile(self.t, n_paths),
            'W': self.W.T.ravel(),
            'y': self.y.T.ravel(),
            'Gamma': self.gamma.T.ravel(),
            'c': self.c.T.ravel(),
            'B': self.B.T.ravel(),
        })
        for i in range(self.theta.shape[2]):
            frame[f'theta_{i + 1}'] = self.theta[:, :, i].T.ravel()
        return frame


class PathRecorder:
    """Logs closed-loop states every `every` steps"""

    def __init__(self, n_steps, rows, n, m, every=1, keep_history=False):
        self.every = max(1, int(every))
        indices = list(range(0, n_steps + 1, self.every))
        if indices[-1] != n_steps:
            indices.append(n_steps)
        self.slot = {k: i for i, k in enumerate(indices)}
        size = len(indices)
        self.t = np.empty(size)
        self.W = np.empty((size, rows))
        self.y = np.empty((size, rows))
        self.gamma = np.empty((size, rows))
        self.c = np.empty((size, rows))
        self.B = np.empty((size, rows))
        self.theta = np.empty((size, rows, n))
        self.history = np.empty((size, m + 1, rows)) if keep_history else None

    def record(self, k, t, W, y, gamma, c, B, theta, grid):
        i = self.slot.get(k)
        if i is None:
            return
        self.t[i] = t
        self.W[i], self.y[i], self.gamma[i] = W, y, gamma
        self.c[i], self.B[i], self.theta[i] = c, B, theta
        if self.history is not None:
            self.history[i] = grid


class ClosedLoopSimulator:
    """
    Euler-Maruyama integration of wealth under the feedback map, coupled with
    the income equation; the policy is re-evaluated from (W, state) each step.

    The wealth drift is kept in its raw form
        (r + delta) W + theta'(mu - r 1) + y - c - delta B
    with noise theta' sigma dZ. State is never rewritten. At |Gamma| <= tol the
    map holds only the hedge, whose noise cancels that of human capital, so a
    path started on the boundary stays there up to the quadrature error of
    the memory term. A path that starts inside and later falls below -tol is
    counted as a crossing and keeps the boundary controls while it is there.
    """

    def __init__(self, consts, dt, consumption_scale=1.0, rel_tol=config.BOUNDARY_REL_TOL):
        self.consts = consts
        self.dt = float(dt)
        self.consumption_scale = float(consumption_scale)
        self.rel_tol = rel_tol
        params = consts.params
        self.p = steps_per_cell(params.income.ds, self.dt)
        self.stacked_weights = np.vstack([consts.conv_weights, consts.hc_weights])

    def run(self, w0, state, next_increment, n_steps, observers=()):
        """
        Integrate a batch of paths

        Args:
            w0 (np.ndarray): Initial wealth, shape (P,)
            state (IncomeState): Batched initial income state
            next_increment (callable): k -> dZ of shape (P, n)
            n_steps (int): Number of steps
            observers: Objects with record(k, t, W, y, gamma, c, B, theta, grid)

        Returns:
            dict: final W, y, gamma, the boundary-start mask, crossing counts
            and the largest |Gamma| / max(1, |hc|) seen on boundary-start paths
        """
        consts = self.consts
        market, prefs, income = consts.params.market, consts.params.prefs, consts.params.income
        dt = self.dt
        carry = market.r + prefs.delta
        excess = market.excess_return

        buffer = DelayBuffer.from_state(state, self.p)
        W = np.array(w0, dtype=float)
        y = np.array(state.y, dtype=float)
        boundary_start = None
        crossed = np.zeros(W.shape[0], dtype=bool)
        excursion = 0.0

        for k in range(n_steps + 1):
            grid = buffer.grid()
            delay, past = self.stacked_weights @ grid
            hc = consts.g_inf * y + past
            gamma = W + hc
            tolerance = boundary_tolerance(W, hc, self.rel_tol)
            if boundary_start is None:
                if np.any(gamma < -tolerance):
                    raise InadmissibleStateError(
                        f"initial total wealth {np.min(gamma):.6g} is negative"
                    )
                boundary_start = np.abs(gamma) <= tolerance

            crossed |= (gamma < -tolerance) & ~boundary_start
            if np.any(boundary_start):
                scaled = np.abs(gamma[boundary_start]) / np.maximum(1.0, np.abs(hc[boundary_start]))
                excursion = max(excursion, float(np.max(scaled)))

            live = np.where(gamma > tolerance, gamma, 0.0)
            c, B, theta, _, _ = _decide(live, y, consts, self.consumption_scale)
            for observer in observers:
                observer.record(k, k * dt, W, y, gamma, c, B, theta, grid)
            if k == n_steps:
                break

            dZ = next_increment(k)
            drift = carry * W + theta @ excess + y - c - prefs.delta * B
            W = W + drift * dt + np.einsum('pi,ij,pj->p', theta, market.sigma, dZ)
            y = y + (income.mu_y * y + delay) * dt + y * (dZ @ income.sigma_y)
            buffer.push(y)

        crossings = int(np.count_nonzero(crossed))
        if crossings:
            logger.warning("%d paths crossed the total-wealth boundary", crossings)
        return {
            'W': W,
            'y': y,
            'gamma': gamma,
            'boundary_start': boundary_start,
            'gamma_crossings': crossings,
            'boundary_excursion': excursion,
        }


def initial_batch(params, x0, x1, n_paths):
    return IncomeState.initial(np.full(n_paths, float(x0)), x1, params.income)


def simulate_closed_loop(params, w, x0, x1, T, dt, seed=config.DEFAULT_SEED, n_paths=1,
                         brownian=None, consumption_scale=1.0, record_every=1,
                         keep_history=False, consts=None):
    """
    Simulate (W, y, Gamma, c, B, theta) under the feedback policy

    Args:
        params (ModelParams): Scenario
        w (float): Initial financial wealth
        x0 (float): Initial income
        x1: Initial income history spec
        T (float): Horizon (years)
        dt (float): Step, must divide ds
        seed (int): Run seed; ignored when `brownian` is given
        n_paths (int): Number of paths
        brownian (BrownianPath): Reuse these increments
        consumption_scale (float): Consumption multiplier (1 is optimal)
        record_every (int): Keep every k-th step (the last step is always kept)
        keep_history (bool): Store delay-grid history snapshots
        consts (DerivedConstants): Precomputed constants for params

    Returns:
        JointPath

    Raises:
        InadmissibleStateError: If total wealth is negative at t = 0
    """
    consts = consts if consts is not None else derive_constants(params)
    start = gamma_total(float(w), IncomeState.initial(float(x0), x1, params.income), consts)
    if start.status == INADMISSIBLE:
        raise InadmissibleStateError(f"initial total wealth {start.gamma:.6g} is negative")

    if brownian is None:
        brownian = brownian_path(seed, n_time_steps(T, dt), dt, n_paths, params.market.n)
    n_steps, n_paths = brownian.n_steps, brownian.n_paths

    state = initial_batch(params, x0, x1, n_paths)
    recorder = PathRecorder(n_steps, n_paths, params.market.n, params.income.m,
                            record_every, keep_history)
    simulator = ClosedLoopSimulator(consts, brownian.dt, consumption_scale)
    result = simulator.run(np.full(n_paths, float(w)), state,
                           lambda k: brownian.increments[k], n_steps, [recorder])

    y_rows = recorder.y
    return JointPath(
        t=recorder.t,
        W=recorder.W,
        y=y_rows,
        gamma=recorder.gamma,
        c=recorder.c,
        B=recorder.B,
        theta=recorder.theta,
        ds=params.income.ds,
        increments=brownian.increments,
        history=recorder.history,
        boundary_start=result['boundary_start'],
        gamma_crossings=result['gamma_crossings'],
        boundary_excursion=result['boundary_excursion'],
        income_crossings=count_sign_crossings(y_rows, x0),
    )


# ============================================================================
# EXACT TOTAL WEALTH AND CHECKS
# ============================================================================

def gamma_star_exact(consts, gamma0, brownian):
    """
    Optimal total wealth as an exact stochastic exponential

        Gamma(t) = Gamma(0) exp((drift - |kappa/gamma|^2 / 2) t + (kappa/gamma)' Z(t))

    Returns:
        np.ndarray: shape (N+1, P)
    """
    vol = consts.gamma_star_vol
    log_growth = ((consts.gamma_star_drift - 0.5 * float(vol @ vol)) * brownian.times[:, None]
                  + brownian.cumulative() @ vol)
    return np.asarray(gamma0, dtype=float) * np.exp(log_growth)


def drift_identity_residual(consts):
    """|(r + delta + kappa'kappa/gamma - 1/nu) - gamma_star_drift|"""
    market, prefs = consts.params.market, consts.params.prefs
    direct = market.r + prefs.delta + float(consts.kappa @ consts.kappa) / prefs.gamma - 1.0 / consts.nu
    return abs(direct - consts.gamma_star_drift)


@dataclass(frozen=True, eq=False)
class Wedges:
    """Closed-form differences against the no-delay benchmark and their cross-check residuals"""
    theta_wedge: np.ndarray
    gamma_wedge: float
    theta_residual: float
    gamma_residual: float
    theta_direct: np.ndarray
    gamma_direct: float


def _relative_gap(closed, direct, scale):
    gap = float(np.max(np.abs(np.asarray(closed) - np.asarray(direct))))
    if gap == 0.0:
        return 0.0
    return gap / max(float(scale), np.finfo(float).tiny)


def benchmark_wedges(w, state, consts_phi, consts_zero):
    """
    Allocation and total-wealth wedges of the delayed model against phi = 0

        theta wedge = (sigma')^{-1} [(g_inf - 1/beta) y (kappa/gamma - sigma_y) + <h_inf, x1> kappa/gamma]
        gamma wedge = (g_inf - 1/beta) y + <h_inf, x1>

    Residuals compare them with differences of two feedback / gamma_total
    evaluations, relative to the size of the terms being differenced.

    Returns:
        Wedges
    """
    params = consts_phi.params
    sigma_t = params.market.sigma.T
    y = state.y
    past = consts_phi.hc_weights @ state.history
    excess_capital = consts_phi.g_inf - consts_zero.g_inf
    kappa_over_gamma = consts_phi.kappa / consts_phi.gamma

    theta_wedge = np.linalg.solve(
        sigma_t, excess_capital * y * (kappa_over_gamma - params.income.sigma_y) + past * kappa_over_gamma
    )
    gamma_wedge = excess_capital * y + past

    with_delay = feedback(w, state, consts_phi)
    without_delay = feedback(w, state, consts_zero)
    theta_direct = with_delay.theta - without_delay.theta
    total_phi = gamma_total(w, state, consts_phi).gamma
    total_zero = gamma_total(w, state, consts_zero).gamma
    gamma_direct = total_phi - total_zero

    theta_scale = max(np.max(np.abs(with_delay.theta)), np.max(np.abs(without_delay.theta)))
    gamma_scale = max(abs(total_phi), abs(total_zero))
    return Wedges(
        theta_wedge=theta_wedge,
        gamma_wedge=float(gamma_wedge),
        theta_residual=_relative_gap(theta_wedge, theta_direct, theta_scale),
        gamma_residual=_relative_gap(gamma_wedge, gamma_direct, gamma_scale),
        theta_direct=theta_direct,
        gamma_direct=float(gamma_direct),
    )
