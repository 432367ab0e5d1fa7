"""
Monte Carlo Module
Counter-based path streams, the block runner and order-insensitive reductions
shared by every estimator
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

import config

logger = logging.getLogger(__name__)


# ============================================================================
# RANDOM STREAMS
# ============================================================================

@dataclass(frozen=True)
class SeedRecord:
    """
    Enough to regenerate increments bit for bit: streams
    stream .. stream + n_streams - 1 of `seed`, each holding block_size paths
    """
    generator: str
    seed: int
    stream: int
    n_streams: int = 1
    block_size: int = config.PATH_BLOCK

    @property
    def streams(self):
        return range(self.stream, self.stream + self.n_streams)

    def for_path(self, j):
        """Record of the stream that holds path j of this run"""
        return SeedRecord(self.generator, self.seed, self.stream + j // self.block_size, 1, self.block_size)

    def to_dict(self):
        return {
            'generator': self.generator,
            'seed': self.seed,
            'streams': [self.stream, self.stream + self.n_streams - 1],
            'block_size': self.block_size,
        }


def block_generator(seed, block):
    """Philox generator for path block `block` of run `seed`"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(sequence))


class BrownianStream:
    """
    Brownian increments for the paths of one block, one time step at a time

    Every step draws a full (block_size, n) array and keeps the first `rows`
    rows, so a path's increments never depend on how many paths are run.
    """

    def __init__(self, seed, block, rows, n, dt, block_size=config.PATH_BLOCK):
        if rows > block_size:
            raise ValueError(f"block holds at most {block_size} paths, got {rows}")
        self.seed = int(seed)
        self.block = int(block)
        self.rows = int(rows)
        self.n = int(n)
        self.block_size = int(block_size)
        self.scale = math.sqrt(dt)
        self.rng = block_generator(seed, block)

    def next(self):
        """Increments for the next step, shape (rows, n)"""
        draws = self.rng.standard_normal((self.block_size, self.n))
        return self.scale * draws[:self.rows]

    def take(self, n_steps):
        """Increments for the next n_steps steps, shape (n_steps, rows, n)"""
        out = np.empty((n_steps, self.rows, self.n))
        for k in range(n_steps):
            out[k] = self.next()
        return out

    @property
    def record(self):
        return SeedRecord('Philox', self.seed, self.block, 1, self.block_size)


def iter_blocks(n_paths, block_size=config.PATH_BLOCK):
    """(block, start, stop) for every block covering n_paths paths"""
    return [
        (block, start, min(start + block_size, n_paths))
        for block, start in enumerate(range(0, n_paths, block_size))
    ]


def run_blocks(task, n_paths, workers=1, block_size=config.PATH_BLOCK):
    """
    Run task(block, start, stop) over all blocks and return results in block order

    Args:
        task (callable): Picklable when workers > 1
        n_paths (int): Total number of paths
        workers (int): Process count; 1 runs in-process
        block_size (int): Paths per block

    Returns:
        list: One result per block, ordered by block index
    """
    blocks = iter_blocks(n_paths, block_size)
    if workers <= 1 or len(blocks) == 1:
        results = []
        for block, start, stop in blocks:
            logger.debug("Block %d: paths %d-%d", block, start, stop - 1)
            results.append(task(block, start, stop))
        return results

    results = {}
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(task, *spec): spec[0] for spec in blocks}
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()
            logger.debug("Block %d finished", futures[future])
    return [results[block] for block in sorted(results)]


# ============================================================================
# ESTIMATES
# ============================================================================

def compensated_mean(values):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        return 0.0
    return math.fsum(values) / values.size


def standard_error(values, mean=None):
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        return 0.0
    if mean is None:
        mean = compensated_mean(values)
    variance = math.fsum((values - mean) ** 2) / (values.size - 1)
    return math.sqrt(variance / values.size)


@dataclass
class MCEstimate:
    """Mean, standard error and analytic truncation bound of one functional"""
    mean: float
    stderr: float
    n_paths: int
    truncation_bound: float = 0.0
    T: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0 or self.truncation_bound < 0:
            raise ValueError("stderr and truncation_bound must be nonnegative")

    def tolerance(self, z=config.CONFIDENCE_Z):
        return z * self.stderr + self.truncation_bound

    def agrees_with(self, reference, z=config.CONFIDENCE_Z):
        """|mean - reference| <= z stderr + truncation bound"""
        return abs(self.mean - reference) <= self.tolerance(z)

    def z_score(self, reference):
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.stderr

    def confidence_interval(self, level=config.CI_LEVEL):
        half = stats.norm.ppf(0.5 + level / 2.0) * self.stderr
        return self.mean - half, self.mean + half

    def to_dict(self):
        row = {
            'mean': self.mean,
            'stderr': self.stderr,
            'n_paths': self.n_paths,
            'truncation_bound': self.truncation_bound,
            'T': self.T,
        }
        row.update(self.details)
        return row


def summarize(samples, T=0.0, truncation_bound=0.0, **details):
    """MCEstimate from per-path samples with compensated summation"""
    samples = np.asarray(samples, dtype=float).ravel()
    mean = compensated_mean(samples)
    return MCEstimate(
        mean=mean,
        stderr=standard_error(samples, mean),
        n_paths=int(samples.size),
        truncation_bound=float(truncation_bound),
        T=float(T),
        details=details,
    )
