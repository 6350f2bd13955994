"""Gaussian vector sampling with reproducible counter-based streams.

Streams are Philox generators keyed by (master_seed, stream_index): the same
pair always reproduces the same draws, independent of scheduling, worker
counts, or how many other streams were consumed.  Monte-Carlo drivers give
each replication its own stream index.

Sampling plans are factored once per matrix: low-rank forms sample as
sqrt(a) * xi + B w in O(m k); everything else takes a dense Cholesky factor,
with a small jitter ladder for boundary-PSD matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .corrmodels import (
    CorrelationStructure,
    DenseRep,
    LowRankRep,
    ToeplitzRep,
    build_sample_corr,
    to_dense,
)
from .errors import NotPositiveSemidefiniteError, ParameterError

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

# Reserved stream indexes for experiment drivers: replication r uses stream r
# for data, and these bases keep auxiliary draws on disjoint keys.
LABEL_STREAM_BASE = 2**62
MATRIX_STREAM_BASE = 2**63


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream (counter-based, order-free)."""

    master_seed: int
    stream_index: int

    def __post_init__(self):
        for name, value in (("master_seed", self.master_seed), ("stream_index", self.stream_index)):
            if int(value) != value or not 0 <= value < 2**64:
                raise ParameterError(f"{name} must be an integer in [0, 2^64)")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class CholeskyPlan:
    factor: np.ndarray  # lower triangular
    jitter: float


@dataclass(frozen=True)
class LowRankPlan:
    diag_root: float  # sqrt(a)
    loadings: np.ndarray  # B


SamplingPlan = Union[CholeskyPlan, LowRankPlan]


def plan(c: CorrelationStructure) -> SamplingPlan:
    """Factor the matrix once for repeated sampling.

    Dense and Toeplitz representations get a Cholesky factor, retried along
    a jitter ladder (0, 1e-12, 1e-10, 1e-8 added to the diagonal) so that
    boundary-PSD matrices factor; if the ladder is exhausted the matrix is
    genuinely indefinite and the smallest eigenvalue is reported.
    """
    rep = c.rep
    if isinstance(rep, LowRankRep):
        if rep.diag < 0.0:
            raise ParameterError("low-rank diagonal must be non-negative")
        return LowRankPlan(diag_root=math.sqrt(rep.diag), loadings=rep.loadings)
    if isinstance(rep, (DenseRep, ToeplitzRep)):
        g = to_dense(c)
        for jitter in JITTER_LADDER:
            try:
                factor = np.linalg.cholesky(
                    g if jitter == 0.0 else g + jitter * np.eye(c.m)
                )
                return CholeskyPlan(factor=factor, jitter=jitter)
            except np.linalg.LinAlgError:
                continue
        raise NotPositiveSemidefiniteError(float(np.linalg.eigvalsh(g)[0]))
    raise TypeError(f"unknown representation {type(rep).__name__}")


def sample(pl: SamplingPlan, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw N(0, Gamma) vectors: shape (m,) or (size, m).

    Draw order is fixed and documented: low-rank plans consume the i.i.d.
    coordinate block xi first, then the factor block w; Cholesky plans
    consume a single standard-normal block.
    """
    if isinstance(pl, LowRankPlan):
        m, k = pl.loadings.shape
        if size is None:
            xi = rng.standard_normal(m)
            w = rng.standard_normal(k)
            return pl.diag_root * xi + pl.loadings @ w
        xi = rng.standard_normal((size, m))
        w = rng.standard_normal((size, k))
        return pl.diag_root * xi + w @ pl.loadings.T
    if isinstance(pl, CholeskyPlan):
        m = pl.factor.shape[0]
        if size is None:
            return pl.factor @ rng.standard_normal(m)
        return rng.standard_normal((size, m)) @ pl.factor.T
    raise TypeError(f"unknown plan {type(pl).__name__}")


def sample_two_level(
    m: int, n: int, matrix_stream: RngStream, noise_stream: RngStream
) -> tuple[CorrelationStructure, np.ndarray]:
    """Draw Gamma as a sample correlation matrix, then Y | Gamma.

    The matrix comes from ``matrix_stream`` and the Gaussian vector from
    ``noise_stream``, so experiments can hold Gamma fixed across
    replications (reuse one matrix stream) or redraw it per replication
    (advance both).
    """
    c = build_sample_corr(m, n, matrix_stream.generator())
    y = sample(plan(c), noise_stream.generator())
    return c, y
