"""Per-dimension gridding of the safe set.

Each dimension's projected interval is cut into half-open bins (the
last bin is closed) whose centers serve as representative points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import ProcessModel, SafeSet

ABSORBED = -1
"""Bin index standing for the absorbing outcome; also indexes the last CPD column."""


@dataclass(frozen=True, eq=False)
class DimensionPartition:
    edges: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        e = self.edges
        if e.ndim != 1 or e.size < 2 or not np.all(np.diff(e) > 0):
            raise ValidationError("edges must be a strictly increasing list of at least two values")
        if self.centers.shape != (e.size - 1,):
            raise ValidationError("need exactly one representative point per bin")
        if np.any(self.centers < e[:-1]) or np.any(self.centers > e[1:]):
            raise ValidationError("representative points must lie in their bins")
        e.setflags(write=False)
        self.centers.setflags(write=False)

    @property
    def count(self) -> int:
        return self.edges.size - 1

    @property
    def delta(self) -> float:
        return float(np.max(np.diff(self.edges)))

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def locate(self, s):
        """Vectorized abstraction map; ``ABSORBED`` outside the interval."""
        s = np.asarray(s, dtype=float)
        if np.any(np.isnan(s)):
            raise ValidationError("cannot abstract NaN")
        idx = np.searchsorted(self.edges, s, side="right") - 1
        idx = np.where(s == self.edges[-1], self.count - 1, idx)
        outside = (s < self.edges[0]) | (s > self.edges[-1])
        return np.where(outside, ABSORBED, idx)

    def __eq__(self, other):
        if not isinstance(other, DimensionPartition):
            return NotImplemented
        return np.array_equal(self.edges, other.edges) and np.array_equal(self.centers, other.centers)


@dataclass(frozen=True, eq=False)
class GridPartition:
    """Product of per-dimension partitions."""

    dims: tuple[DimensionPartition, ...]

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(d.count for d in self.dims)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([d.delta for d in self.dims])

    @property
    def safe_set(self) -> SafeSet:
        return SafeSet([d.edges[0] for d in self.dims], [d.edges[-1] for d in self.dims])

    def cell_of(self, s) -> tuple[int, ...]:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != self.n:
            raise ValidationError(f"state has length {s.size}, expected {self.n}")
        return tuple(int(d.locate(x)) for d, x in zip(self.dims, s))

    def __eq__(self, other):
        if not isinstance(other, GridPartition):
            return NotImplemented
        return self.dims == other.dims


def project_safe_set(A: SafeSet, i: int) -> tuple[float, float]:
    if not 0 <= i < A.n:
        raise ValidationError(f"dimension {i} out of range for n={A.n}")
    return float(A.lo[i]), float(A.hi[i])


def uniform_partition(interval, count: int) -> DimensionPartition:
    lo, hi = (float(x) for x in interval)
    if count < 1 or int(count) != count:
        raise ValidationError(f"bin count must be a positive integer, got {count}")
    if not lo < hi:
        raise ValidationError(f"empty interval [{lo}, {hi}]")
    edges = np.linspace(lo, hi, int(count) + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return DimensionPartition(edges, centers)


def grid_partition(A: SafeSet, counts) -> GridPartition:
    counts = tuple(int(c) for c in counts)
    if len(counts) != A.n:
        raise ValidationError(f"need {A.n} bin counts, got {len(counts)}")
    return GridPartition(tuple(uniform_partition(project_safe_set(A, i), c) for i, c in enumerate(counts)))


def abstraction_map(partition: GridPartition, i: int, s: float) -> int:
    return int(partition.dims[i].locate(s))


def refinement_map(partition: GridPartition, i: int, j: int) -> tuple[float, float]:
    dim = partition.dims[i]
    if not 0 <= j < dim.count:
        raise ValidationError(f"bin {j} out of range for dimension {i} with {dim.count} bins")
    return float(dim.edges[j]), float(dim.edges[j + 1])


def size_from_budget(
    model: ProcessModel,
    A: SafeSet,
    horizon: int,
    eps: float,
    set_term: float = 0.0,
) -> tuple[int, ...]:
    """Smallest common-width grid whose discretization bound fits ``eps``.

    ``set_term`` is the safe-set replacement error ``M N L(A sym-diff Abar)``,
    zero for box safe sets.
    """
    from .bounds import lipschitz_constants, weights

    if not eps > 0:
        raise ValidationError(f"error budget must be positive, got {eps}")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    budget = eps - set_term
    if budget <= 0:
        raise ValidationError(f"set term {set_term} already uses the whole budget {eps}")
    lip = weights(lipschitz_constants(model), A.lengths)
    rate = horizon * float(np.sum(lip.out_weights))
    if rate == 0:
        return (1,) * A.n
    h = budget / rate
    counts = [max(1, math.ceil(L / h)) for L in A.lengths]
    # ceil can land one short of the budget after rounding in the edges
    while True:
        deltas = grid_partition(A, counts).deltas
        if horizon * float(lip.out_weights @ deltas) <= budget:
            return tuple(counts)
        worst = int(np.argmax(lip.out_weights * deltas))
        counts[worst] += 1
