"""
Quadrature Module
Uniform delay grid on [-d, 0] and the trapezoid rules shared by kernels,
income histories and human-capital weights
"""

import logging

import numpy as np
from scipy import integrate

from errors import GridMismatchError

logger = logging.getLogger(__name__)


def delay_grid(d, m):
    """
    Uniform grid of m+1 nodes on [-d, 0]

    Node 0 sits at s = -d and node m at s = 0.

    Args:
        d (float): Delay window length (years)
        m (int): Number of subintervals

    Returns:
        tuple: (nodes, ds)
    """
    if m < 2:
        raise GridMismatchError(f"delay grid needs m >= 2 subintervals, got {m}")
    nodes = np.linspace(-d, 0.0, m + 1)
    nodes[-1] = 0.0
    return nodes, d / m


def trapezoid_weights(m, ds):
    """Composite trapezoid weights for m+1 equally spaced nodes"""
    weights = np.full(m + 1, ds)
    weights[0] = weights[-1] = 0.5 * ds
    return weights


def check_grid(values, expected, what="grid"):
    """Raise GridMismatchError unless values has `expected` rows"""
    length = np.shape(values)[0] if np.ndim(values) else 0
    if length != expected:
        raise GridMismatchError(f"{what} has {length} nodes, expected {expected}")


def trapezoid(values, ds):
    """Trapezoid integral along the first axis"""
    return integrate.trapezoid(np.asarray(values, dtype=float), dx=ds, axis=0)


def inner_product(f, g, ds):
    """
    Trapezoid inner product <f, g> on L2(-d, 0)

    g may carry a trailing path axis, shape (m+1, P).
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    check_grid(g, f.shape[0], "history")
    weights = trapezoid_weights(f.shape[0] - 1, ds) * f
    return weights @ g


def exponential_memory(values, rate, ds):
    """
    Discounted running integral on the grid

    Computes  int_{-d}^{s_j} exp(-rate (s_j - tau)) f(tau) dtau  for every node
    with the cumulative trapezoid rule applied to exp(rate tau) f(tau).

    Args:
        values (np.ndarray): f sampled on the delay grid (m+1 values)
        rate (float): Discount rate
        ds (float): Grid step

    Returns:
        np.ndarray: m+1 values, the first one exactly 0
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[0] - 1
    shift = np.arange(-m, 1) * ds  # node times relative to s = 0
    growth = np.exp(rate * shift)
    running = integrate.cumulative_trapezoid(growth * values, dx=ds, initial=0.0)
    return running / growth


def forward_difference(values, ds):
    """One-sided difference quotients (m values)"""
    return np.diff(np.asarray(values, dtype=float)) / ds


def interpolate_history(history, d, n_fine):
    """
    Linear interpolation of an m-grid history onto n_fine+1 equally spaced nodes

    Rows of the result are time slices; a trailing path axis is carried through.
    """
    history = np.asarray(history, dtype=float)
    coarse = np.linspace(-d, 0.0, history.shape[0])
    fine = np.linspace(-d, 0.0, n_fine + 1)
    if history.ndim == 1:
        return np.interp(fine, coarse, history)
    logger.debug("Interpolating %d histories onto %d fine nodes", history.shape[1], n_fine + 1)
    return np.column_stack([np.interp(fine, coarse, column) for column in history.T])
