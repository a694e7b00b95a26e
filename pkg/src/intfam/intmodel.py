"""Integer exponential family core: parameters, sufficient statistics, exact probabilities.

The model family uses base-2 weights with parameters restricted to k-bit
nonnegative integers, so every unnormalized quantity is an exact (unbounded)
integer and probabilities are exact integer quotients. Parameters attach to
the edges of a tree structure, one block of ``arity(s) * arity(t)`` entries
per edge, laid out row-major (state of s major, state of t minor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .graph import StructureGraph, validate_tree


@dataclass(frozen=True, eq=False)
class Rational:
    """Exact nonnegative quotient num/den; not necessarily in lowest terms."""

    num: int
    den: int

    def __post_init__(self):
        if self.den <= 0:
            raise ValueError("denominator must be positive")
        if self.num < 0:
            raise ValueError("numerator must be nonnegative")

    def __eq__(self, other) -> bool:
        if isinstance(other, Rational):
            return self.num * other.den == other.num * self.den
        if isinstance(other, int):
            return self.num == other * self.den
        if isinstance(other, Fraction):
            return Fraction(self.num, self.den) == other
        return NotImplemented

    def __hash__(self):
        return hash(Fraction(self.num, self.den))

    def __float__(self) -> float:
        return self.num / self.den

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    def __repr__(self) -> str:
        return f"{self.num}/{self.den}"


@lru_cache(maxsize=None)
def edge_offsets(structure: StructureGraph) -> tuple[int, ...]:
    """Start index of each edge's parameter block in the flat vector."""
    offsets = []
    pos = 0
    for s, t in structure.edges:
        offsets.append(pos)
        pos += structure.arity(s) * structure.arity(t)
    return tuple(offsets)


def model_dimension(structure: StructureGraph) -> int:
    """Total parameter count: sum of arity(s)*arity(t) over edges."""
    problem = validate_tree(structure)
    if problem is not None:
        raise ValueError(f"structure is not a tree: {problem}")
    return sum(structure.arity(s) * structure.arity(t) for s, t in structure.edges)


@dataclass(frozen=True)
class SufficientStatistic:
    """Sparse one-hot encoding of an assignment: one active index per edge."""

    indices: tuple[int, ...]


def phi(x: Sequence[int], structure: StructureGraph) -> SufficientStatistic:
    """Active flat indices of the one-hot statistic for a full assignment."""
    offsets = edge_offsets(structure)
    active = []
    for e, (s, t) in enumerate(structure.edges):
        xs, xt = x[s], x[t]
        if not (0 <= xs < structure.arity(s)):
            raise ValueError(f"state {xs} out of range for vertex {s}")
        if not (0 <= xt < structure.arity(t)):
            raise ValueError(f"state {xt} out of range for vertex {t}")
        active.append(offsets[e] + xs * structure.arity(t) + xt)
    return SufficientStatistic(tuple(active))


@dataclass(frozen=True)
class IntParams:
    """k-bit nonnegative integer parameter vector over a tree structure."""

    structure: StructureGraph
    bits: int
    theta: tuple[int, ...]

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("word size must be at least 1 bit")
        object.__setattr__(self, "theta", tuple(int(v) for v in self.theta))
        d = model_dimension(self.structure)
        if len(self.theta) != d:
            raise ValueError(f"theta has length {len(self.theta)}, expected {d}")
        hi = (1 << self.bits) - 1
        for j, v in enumerate(self.theta):
            if not (0 <= v <= hi):
                raise ValueError(f"theta[{j}]={v} outside [0, {hi}]")

    @classmethod
    def zeros(cls, structure: StructureGraph, bits: int) -> "IntParams":
        return cls(structure, bits, (0,) * model_dimension(structure))

    def with_theta(self, theta: Sequence[int]) -> "IntParams":
        return IntParams(self.structure, self.bits, tuple(theta))

    @property
    def offsets(self) -> tuple[int, ...]:
        return edge_offsets(self.structure)

    @property
    def dim(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class DataSummary:
    """Integer sufficient-statistic counts plus the sample count they came from."""

    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.n < 0:
            raise ValueError("sample count must be nonnegative")
        for j, c in enumerate(self.counts):
            if c < 0:
                raise ValueError(f"counts[{j}] negative")
            if c > self.n:
                raise ValueError(f"counts[{j}] exceeds sample count {self.n}")

    @classmethod
    def zeros(cls, dim: int) -> "DataSummary":
        return cls((0,) * dim, 0)


def summary_blocks_consistent(summary: DataSummary, structure: StructureGraph) -> bool:
    """True iff every edge block of counts sums to the sample count."""
    offsets = edge_offsets(structure)
    for e, (s, t) in enumerate(structure.edges):
        size = structure.arity(s) * structure.arity(t)
        if sum(summary.counts[offsets[e] : offsets[e] + size]) != summary.n:
            return False
    return True


def score(params: IntParams, x: Sequence[int]) -> int:
    """Inner product of theta with the one-hot statistic of x."""
    return sum(params.theta[j] for j in phi(x, params.structure).indices)


def partition(params: IntParams) -> int:
    """Exact normalizer: sum over all assignments of 2**score(x).

    Computed by the tree sum-product pass; every weight is a power of two,
    so the result is an exact unbounded integer.
    """
    from .inference import sum_product

    return sum_product(params).z


def density(params: IntParams, x: Sequence[int]) -> Rational:
    """Exact model probability of a full assignment as an integer quotient."""
    return Rational(1 << score(params, x), partition(params))


def neg_avg_log_likelihood(params: IntParams, summary: DataSummary) -> float:
    """log2(Z) minus the average scored count; diagnostic metric in floats."""
    if summary.n <= 0:
        raise ValueError("summary has no samples")
    if len(summary.counts) != params.dim:
        raise ValueError("summary dimension does not match parameters")
    dot = sum(t * c for t, c in zip(params.theta, summary.counts))
    return math.log2(partition(params)) - dot / summary.n
