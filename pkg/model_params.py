"""
Model Parameters Module
Scenario parameters, the standing-hypothesis gate, and every derived constant
of the closed-form solution (kappa, beta, g_inf, h_inf, nu, f_inf, ...)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

import config
import quadrature
from errors import (
    DegenerateDiscountError,
    DiscountHypothesisError,
    FinitenessHypothesisError,
    GammaExcludedError,
    GridMismatchError,
    NonPositiveParameterError,
    SigmaSingularError,
    ValidationFailedError,
)

logger = logging.getLogger(__name__)


# ============================================================================
# PARAMETER GROUPS
# ============================================================================

@dataclass(frozen=True, eq=False)
class MarketParams:
    """Riskless rate r, drift vector mu and n x n volatility matrix sigma"""
    r: float
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'r', float(self.r))
        object.__setattr__(self, 'mu', np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, 'sigma', np.atleast_2d(np.asarray(self.sigma, dtype=float)))

    @property
    def n(self):
        return self.mu.shape[0]

    @property
    def excess_return(self):
        return self.mu - self.r

    def to_dict(self):
        return {'r': self.r, 'mu': self.mu.tolist(), 'sigma': self.sigma.tolist()}


@dataclass(frozen=True)
class Preferences:
    rho: float
    gamma: float
    k: float
    delta: float

    @property
    def b(self):
        return 1.0 - 1.0 / self.gamma

    def to_dict(self):
        return {'rho': self.rho, 'gamma': self.gamma, 'k': self.k, 'delta': self.delta}


# ============================================================================
# DELAY KERNELS
# ============================================================================

class DelayKernel:
    """
    Weight function phi on [-d, 0] driving the income drift

    Subclasses provide closed forms where they exist; everything is expressed
    on the shared delay grid.
    """

    kind = 'kernel'

    def sample(self, nodes):
        raise NotImplementedError

    def discounted_mass(self, rate, d, absolute=False):
        """int_{-d}^0 exp(rate s) phi(s) ds, or the same with |phi|"""
        raise NotImplementedError

    def memory_profile(self, nodes, rate, d):
        """int_{-d}^s exp(-rate (s - tau)) phi(tau) dtau at every node"""
        raise NotImplementedError

    def is_nonnegative(self, nodes):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


class ZeroKernel(DelayKernel):
    kind = 'zero'

    def sample(self, nodes):
        return np.zeros_like(nodes, dtype=float)

    def discounted_mass(self, rate, d, absolute=False):
        return 0.0

    def memory_profile(self, nodes, rate, d):
        return np.zeros_like(nodes, dtype=float)

    def is_nonnegative(self, nodes):
        return True

    def to_dict(self):
        return {'type': 'zero'}


class ExponentialKernel(DelayKernel):
    """phi(s) = scale * exp(rate * s)"""

    kind = 'exponential'

    def __init__(self, scale, rate):
        self.scale = float(scale)
        self.rate = float(rate)

    def sample(self, nodes):
        return self.scale * np.exp(self.rate * np.asarray(nodes, dtype=float))

    def discounted_mass(self, rate, d, absolute=False):
        c = rate + self.rate
        scale = abs(self.scale) if absolute else self.scale
        if abs(c) * d < 1e-14:
            return scale * d
        return scale * -np.expm1(-c * d) / c

    def memory_profile(self, nodes, rate, d):
        nodes = np.asarray(nodes, dtype=float)
        c = rate + self.rate
        elapsed = nodes + d
        elapsed[0] = 0.0
        if abs(c) * d < 1e-14:
            return self.scale * np.exp(self.rate * nodes) * elapsed
        return self.scale * np.exp(self.rate * nodes) * -np.expm1(-c * elapsed) / c

    def is_nonnegative(self, nodes):
        return self.scale >= 0

    def to_dict(self):
        return {'type': 'exponential', 'scale': self.scale, 'rate': self.rate}


class ConstantKernel(ExponentialKernel):
    """phi(s) = value"""

    kind = 'constant'

    def __init__(self, value):
        super().__init__(value, 0.0)

    @property
    def value(self):
        return self.scale

    def to_dict(self):
        return {'type': 'constant', 'value': self.scale}


class SampledKernel(DelayKernel):
    """phi given by its m+1 values on the delay grid"""

    kind = 'sampled'

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def _check(self, nodes):
        quadrature.check_grid(self.values, len(nodes), "sampled kernel")

    def sample(self, nodes):
        self._check(nodes)
        return self.values.copy()

    def discounted_mass(self, rate, d, absolute=False):
        m = self.values.shape[0] - 1
        nodes, ds = quadrature.delay_grid(d, m)
        values = np.abs(self.values) if absolute else self.values
        return float(quadrature.trapezoid(np.exp(rate * nodes) * values, ds))

    def memory_profile(self, nodes, rate, d):
        self._check(nodes)
        return quadrature.exponential_memory(self.values, rate, d / (len(nodes) - 1))

    def is_nonnegative(self, nodes):
        return bool(np.all(self.values >= 0))

    def to_dict(self):
        return {'type': 'sampled', 'values': self.values.tolist()}


def kernel_from_spec(spec, m=None):
    """
    Build a kernel from its scenario-file representation

    Args:
        spec: dict with a 'type' key (zero | constant | exponential | sampled),
            a bare number (constant) or a list of m+1 numbers (sampled)
        m (int): Grid resolution, used to check sampled kernels

    Returns:
        DelayKernel
    """
    if isinstance(spec, DelayKernel):
        return spec
    if spec is None:
        return ZeroKernel()
    if isinstance(spec, (int, float)):
        return ConstantKernel(spec)
    if isinstance(spec, (list, tuple, np.ndarray)):
        kernel = SampledKernel(spec)
    else:
        kind = str(spec.get('type', '')).lower()
        if kind == 'zero':
            return ZeroKernel()
        if kind == 'constant':
            return ConstantKernel(spec['value'])
        if kind == 'exponential':
            return ExponentialKernel(spec['scale'], spec['rate'])
        if kind == 'sampled':
            kernel = SampledKernel(spec['values'])
        else:
            raise ValueError(f"Unknown kernel type {spec.get('type')!r}")
    if m is not None and kernel.values.shape[0] != m + 1:
        raise GridMismatchError(
            f"sampled kernel has {kernel.values.shape[0]} values, expected m+1 = {m + 1}"
        )
    return kernel


@dataclass(frozen=True, eq=False)
class IncomeParams:
    """Income drift, volatility loading and delay kernel on [-d, 0]"""
    mu_y: float
    sigma_y: np.ndarray
    d: float
    phi: DelayKernel = field(default_factory=ZeroKernel)
    m: int = config.DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, 'mu_y', float(self.mu_y))
        object.__setattr__(self, 'sigma_y', np.atleast_1d(np.asarray(self.sigma_y, dtype=float)))
        object.__setattr__(self, 'd', float(self.d))
        object.__setattr__(self, 'm', int(self.m))
        object.__setattr__(self, 'phi', kernel_from_spec(self.phi))

    @property
    def ds(self):
        return self.d / self.m

    @property
    def nodes(self):
        return quadrature.delay_grid(self.d, self.m)[0]

    def to_dict(self):
        return {
            'mu_y': self.mu_y,
            'sigma_y': self.sigma_y.tolist(),
            'd': self.d,
            'm': self.m,
            'kernel': self.phi.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Single source of truth for one scenario"""
    market: MarketParams
    prefs: Preferences
    income: IncomeParams

    def with_kernel(self, kernel):
        return replace(self, income=replace(self.income, phi=kernel))

    def with_gamma(self, gamma):
        return replace(self, prefs=replace(self.prefs, gamma=float(gamma)))

    def with_grid(self, m):
        return replace(self, income=replace(self.income, m=int(m)))

    def to_dict(self):
        return {
            'market': self.market.to_dict(),
            'preferences': self.prefs.to_dict(),
            'income': self.income.to_dict(),
        }


# ============================================================================
# VALIDATION
# ============================================================================

@dataclass(frozen=True)
class Violation:
    code: str
    condition: str
    detail: str
    error: type = ValidationFailedError


@dataclass
class ValidationReport:
    """Every violated condition of one validate() call, in check order"""
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, code, condition, detail, error=ValidationFailedError):
        self.violations.append(Violation(code, condition, detail, error))

    def lines(self):
        return [f"[{v.code}] {v.condition} violated: {v.detail}" for v in self.violations]

    def raise_for_violations(self):
        """Raise the error class of the first violation; the message names all of them"""
        if self.ok:
            return
        first = self.violations[0]
        raise first.error("; ".join(self.lines()), self.violations)


def _sigma_problem(sigma, n):
    if sigma.shape != (n, n):
        return f"sigma has shape {sigma.shape}, expected ({n}, {n})"
    if not np.all(np.isfinite(sigma)):
        return "sigma has non-finite entries"
    condition = np.linalg.cond(sigma)
    if not np.isfinite(condition) or condition > config.SIGMA_CONDITION_MAX:
        return f"condition number {condition:.3g} exceeds {config.SIGMA_CONDITION_MAX:g}"
    return None


def validate(market, prefs, income, margin=config.VALIDATION_MARGIN):
    """
    Check the standing hypotheses of the model

    Never raises; the caller decides what to do with the report.

    Args:
        market (MarketParams): Market coefficients
        prefs (Preferences): Preference and mortality parameters
        income (IncomeParams): Income dynamics
        margin (float): Strict margin for the two hypothesis inequalities

    Returns:
        ValidationReport: Empty when the scenario is admissible
    """
    report = ValidationReport()
    n = market.n

    sigma_problem = _sigma_problem(market.sigma, n)
    if sigma_problem:
        report.add('sigma', 'sigma invertible', sigma_problem, SigmaSingularError)

    if abs(prefs.gamma - 1.0) < config.GAMMA_EXCLUSION:
        report.add('gamma', 'gamma != 1', f"gamma = {prefs.gamma:g}", GammaExcludedError)

    for name, value in (('rho', prefs.rho), ('k', prefs.k), ('delta', prefs.delta),
                        ('gamma', prefs.gamma), ('d', income.d)):
        if not value > 0:
            report.add('positive', f"{name} > 0", f"{name} = {value:g}", NonPositiveParameterError)
    if income.m < 2:
        report.add('positive', 'm >= 2', f"m = {income.m}", NonPositiveParameterError)
    if income.sigma_y.shape[0] != n:
        report.add('shape', 'sigma_y has n components',
                   f"{income.sigma_y.shape[0]} != {n}", ValidationFailedError)
    if isinstance(income.phi, SampledKernel) and income.phi.values.shape[0] != income.m + 1:
        report.add('shape', 'sampled kernel has m+1 values',
                   f"{income.phi.values.shape[0]} != {income.m + 1}", ValidationFailedError)

    if not report.ok:
        # the hypotheses below need kappa and a well-formed grid
        return report

    kappa = np.linalg.solve(market.sigma, market.excess_return)
    discount = market.r + prefs.delta
    beta = compute_beta(market, prefs, income, kappa)
    beta_inf, beta_bar_inf = compute_beta_infinity(income, market.r, prefs.delta)
    if not beta - beta_bar_inf > margin:
        report.add(
            'hypothesis-I', 'β − β̄∞ > 0',
            f"β = {beta:.6g}, β̄∞ = {beta_bar_inf:.6g}, gap = {beta - beta_bar_inf:.3g}",
            DiscountHypothesisError,
        )

    denominator = _nu_denominator(prefs, kappa, market.r)
    if not denominator > margin:
        report.add(
            'hypothesis-II', 'ρ + δ − (1−γ)(r + δ + κᵀκ/(2γ)) > 0',
            f"denominator = {denominator:.6g} (r + δ = {discount:g})",
            FinitenessHypothesisError,
        )
    return report


# ============================================================================
# DERIVED CONSTANTS
# ============================================================================

def compute_kappa(market):
    """
    Market price of risk kappa = sigma^{-1} (mu - r 1)

    Raises:
        SigmaSingularError: If sigma is not (numerically) invertible
    """
    problem = _sigma_problem(market.sigma, market.n)
    if problem:
        raise SigmaSingularError(problem)
    return np.linalg.solve(market.sigma, market.excess_return)


def compute_beta(market, prefs, income, kappa):
    """Effective discount rate for labor income, r + delta - mu_y + sigma_y' kappa"""
    return market.r + prefs.delta - income.mu_y + float(income.sigma_y @ kappa)


def compute_beta_infinity(income, r, delta):
    """
    Discounted kernel mass and its absolute counterpart

    Named kernels use their closed form, sampled kernels the trapezoid rule.

    Returns:
        tuple: (beta_inf, beta_bar_inf)
    """
    rate = r + delta
    beta_inf = float(income.phi.discounted_mass(rate, income.d))
    if income.phi.is_nonnegative(income.nodes):
        return beta_inf, beta_inf
    return beta_inf, float(income.phi.discounted_mass(rate, income.d, absolute=True))


def compute_g_h_infinity(income, r, delta, beta, beta_inf):
    """
    Capitalization factor g_inf = 1/(beta - beta_inf) and the memory weights h_inf

    Returns:
        tuple: (g_inf, h_inf) with h_inf sampled on the delay grid
    """
    gap = beta - beta_inf
    if not gap > 0:
        raise DegenerateDiscountError(f"β − β∞ = {gap:.6g} must be positive")
    g_inf = 1.0 / gap
    h_inf = g_inf * income.phi.memory_profile(income.nodes, r + delta, income.d)
    h_inf[0] = 0.0
    return g_inf, h_inf


def _nu_denominator(prefs, kappa, r):
    gamma = prefs.gamma
    sharpe = float(kappa @ kappa)
    return prefs.rho + prefs.delta - (1.0 - gamma) * (r + prefs.delta + sharpe / (2.0 * gamma))


def compute_nu_f(prefs, kappa, r):
    """
    Consumption horizon nu, wealth multiplier f_inf and the Gamma* coefficients

    Returns:
        tuple: (nu, f_inf, gamma_star_drift, gamma_star_vol)
    """
    denominator = _nu_denominator(prefs, kappa, r)
    if not denominator > 0:
        raise FinitenessHypothesisError(
            f"ρ + δ − (1−γ)(r + δ + κᵀκ/(2γ)) = {denominator:.6g} must be positive"
        )
    gamma = prefs.gamma
    nu = gamma / denominator
    bequest_ratio = prefs.k ** (-prefs.b)
    f_inf = (1.0 + prefs.delta * bequest_ratio) * nu
    drift = r + prefs.delta + float(kappa @ kappa) / gamma - (1.0 + prefs.delta * bequest_ratio) / f_inf
    return nu, f_inf, drift, kappa / gamma


@dataclass(frozen=True, eq=False)
class DerivedConstants:
    """Everything the optimal strategy needs, computed once per scenario"""
    params: ModelParams
    kappa: np.ndarray
    b: float
    beta: float
    beta_inf: float
    beta_bar_inf: float
    g_inf: float
    h_inf: np.ndarray
    nu: float
    f_inf: float
    gamma_star_drift: float
    gamma_star_vol: np.ndarray
    nodes: np.ndarray
    ds: float
    weights: np.ndarray
    phi_grid: np.ndarray
    bequest_ratio: float
    merton_direction: np.ndarray
    hedge_direction: np.ndarray

    @property
    def gamma(self):
        return self.params.prefs.gamma

    @property
    def discount(self):
        return self.params.market.r + self.params.prefs.delta

    @property
    def m(self):
        return self.nodes.shape[0] - 1

    @property
    def hc_weights(self):
        """Trapezoid weights times h_inf: human capital is g_inf y + hc_weights @ history"""
        return self.weights * self.h_inf

    @property
    def conv_weights(self):
        """Trapezoid weights times phi: the delay drift is conv_weights @ history"""
        return self.weights * self.phi_grid


def derive_constants(params, margin=config.VALIDATION_MARGIN):
    """
    Validate a scenario and compute all derived constants

    Args:
        params (ModelParams): Scenario parameters
        margin (float): Strict margin for the hypothesis checks

    Returns:
        DerivedConstants

    Raises:
        ValidationFailedError: (or a subclass) naming every violated condition
    """
    market, prefs, income = params.market, params.prefs, params.income
    validate(market, prefs, income, margin).raise_for_violations()

    kappa = compute_kappa(market)
    beta = compute_beta(market, prefs, income, kappa)
    beta_inf, beta_bar_inf = compute_beta_infinity(income, market.r, prefs.delta)
    g_inf, h_inf = compute_g_h_infinity(income, market.r, prefs.delta, beta, beta_inf)
    nu, f_inf, drift, vol = compute_nu_f(prefs, kappa, market.r)

    nodes, ds = quadrature.delay_grid(income.d, income.m)
    sigma_t = market.sigma.T
    consts = DerivedConstants(
        params=params,
        kappa=kappa,
        b=prefs.b,
        beta=beta,
        beta_inf=beta_inf,
        beta_bar_inf=beta_bar_inf,
        g_inf=g_inf,
        h_inf=h_inf,
        nu=nu,
        f_inf=f_inf,
        gamma_star_drift=drift,
        gamma_star_vol=vol,
        nodes=nodes,
        ds=ds,
        weights=quadrature.trapezoid_weights(income.m, ds),
        phi_grid=income.phi.sample(nodes),
        bequest_ratio=prefs.k ** (-prefs.b),
        merton_direction=np.linalg.solve(sigma_t, kappa) / prefs.gamma,
        hedge_direction=np.linalg.solve(sigma_t, income.sigma_y),
    )
    logger.debug(
        "Derived constants: beta=%.6g beta_inf=%.6g g_inf=%.6g nu=%.6g f_inf=%.6g",
        beta, beta_inf, g_inf, nu, f_inf,
    )
    return consts


def h_inf_ode_residual(consts):
    """Max forward-difference residual of h' = g_inf phi - (r + delta) h on the grid"""
    h = consts.h_inf
    slope = quadrature.forward_difference(h, consts.ds)
    rhs = consts.g_inf * consts.phi_grid[:-1] - consts.discount * h[:-1]
    return float(np.max(np.abs(slope - rhs)))


def boundary_defects(consts):
    """(|h_inf(-d)|, |h_inf(0) - (beta g_inf - 1)|)"""
    return abs(consts.h_inf[0]), abs(consts.h_inf[-1] - (consts.beta * consts.g_inf - 1.0))


def constants_table(consts):
    """
    Derived constants as a tidy table for the validate report

    Returns:
        pd.DataFrame: columns name, symbol, value, units
    """
    rows = []
    for i, value in enumerate(consts.kappa, start=1):
        rows.append(('kappa_%d' % i, 'κ', value, '1/sqrt(year)'))
    rows += [
        ('b', 'b', consts.b, ''),
        ('beta', 'β', consts.beta, '1/year'),
        ('beta_inf', 'β∞', consts.beta_inf, '1/year'),
        ('beta_bar_inf', 'β̄∞', consts.beta_bar_inf, '1/year'),
        ('hypothesis_gap', 'β − β̄∞', consts.beta - consts.beta_bar_inf, '1/year'),
        ('g_inf', 'g∞', consts.g_inf, 'year'),
        ('h_inf_at_0', 'h∞(0)', consts.h_inf[-1], ''),
        ('nu', 'ν', consts.nu, 'year'),
        ('f_inf', 'f∞', consts.f_inf, 'year'),
        ('bequest_ratio', 'k^(−b)', consts.bequest_ratio, ''),
        ('gamma_star_drift', 'Γ* drift', consts.gamma_star_drift, '1/year'),
    ]
    for i, value in enumerate(consts.gamma_star_vol, start=1):
        rows.append(('gamma_star_vol_%d' % i, 'Γ* vol', value, '1/sqrt(year)'))
    return pd.DataFrame(rows, columns=['name', 'symbol', 'value', 'units'])
