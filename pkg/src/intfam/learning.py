"""Local model fitting: integer sign-step updates and a float reference learner.

The integer learner never leaves integer arithmetic. Each iteration compares
exact model marginals against exact empirical counts by cross-multiplication,
takes a unit step against the gradient sign, and clamps the result back into
the k-bit parameter box. The float learner is the conventional real-valued
counterpart used as an accuracy yardstick; it shares the structure, the
sufficient statistics, and the max-sum predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .graph import StructureGraph
from .inference import Marginals, max_sum, sum_product, sum_product_float
from .intmodel import DataSummary, IntParams, model_dimension, phi


@dataclass(frozen=True)
class LearnerState:
    """One device's model parameters and accumulated data summary."""

    params: IntParams
    summary: DataSummary
    seen_rounds: int = 0

    @classmethod
    def fresh(cls, structure: StructureGraph, bits: int) -> "LearnerState":
        return cls(IntParams.zeros(structure, bits), DataSummary.zeros(model_dimension(structure)))


def accumulate(summary: DataSummary, batch: Sequence[Sequence[int]], structure: StructureGraph) -> DataSummary:
    """Fold a batch of full assignments into the running count vector."""
    counts = list(summary.counts)
    for row in batch:
        for j in phi(row, structure).indices:
            counts[j] += 1
    return DataSummary(tuple(counts), summary.n + len(batch))


def gradient_sign(marginals: Marginals, summary: DataSummary) -> tuple[int, ...]:
    """Signs of the likelihood gradient, computed without any division.

    Coordinate j of the gradient is model_marginal_j - counts_j / n; its sign
    equals the sign of num_j * n - counts_j * z, an exact integer test.
    """
    if summary.n <= 0:
        raise ValueError("summary has no samples")
    nums = marginals.flat_edge_numerators()
    if len(nums) != len(summary.counts):
        raise ValueError("summary dimension does not match marginals")
    signs = []
    for num, c in zip(nums, summary.counts):
        t = num * summary.n - c * marginals.z
        signs.append((t > 0) - (t < 0))
    return tuple(signs)


def int_prox_step(theta: Sequence[int], signs: Sequence[int], bits: int) -> tuple[int, ...]:
    """Unit step against each gradient sign, clamped to the k-bit box."""
    hi = (1 << bits) - 1
    return tuple(min(hi, max(0, v - s)) for v, s in zip(theta, signs))


def fit(state: LearnerState, budget: int) -> LearnerState:
    """Run up to `budget` sign-step iterations; stop early at a fixed point."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget == 0 or state.summary.n == 0:
        return state
    params = state.params
    for _ in range(budget):
        signs = gradient_sign(sum_product(params), state.summary)
        if not any(signs):
            break
        params = params.with_theta(int_prox_step(params.theta, signs, params.bits))
    return replace(state, params=params)


def _check_features(structure: StructureGraph, features: Mapping[int, int]) -> int:
    label = structure.label_index()
    if label in features:
        raise ValueError("label vertex must not be clamped for prediction")
    missing = [v for v in range(structure.n_vertices) if v != label and v not in features]
    if missing:
        raise ValueError(f"missing feature values for vertices {missing}")
    return label


def predict(params: IntParams, features: Mapping[int, int]) -> int:
    """Label state maximizing the model score with all features clamped."""
    label = _check_features(params.structure, features)
    return max_sum(params.structure, params.theta, features)[label]


@dataclass(frozen=True, eq=False)
class FloatLearnerState:
    """Real-valued counterpart of LearnerState with gradient-descent fitting."""

    structure: StructureGraph
    weights: np.ndarray
    summary: DataSummary
    learning_rate: float = 0.1
    seen_rounds: int = 0

    @classmethod
    def fresh(cls, structure: StructureGraph, learning_rate: float = 0.1) -> "FloatLearnerState":
        d = model_dimension(structure)
        return cls(structure, np.zeros(d), DataSummary.zeros(d), learning_rate)


def float_fit(state: FloatLearnerState, budget: int) -> FloatLearnerState:
    """Plain gradient descent on the average log-loss for `budget` iterations."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if budget == 0 or state.summary.n == 0:
        return state
    w = state.weights.copy()
    target = np.asarray(state.summary.counts, dtype=float) / state.summary.n
    for _ in range(budget):
        _, edge_m, _ = sum_product_float(state.structure, w)
        model_mu = np.concatenate([table.ravel() for table in edge_m])
        w = w - state.learning_rate * (model_mu - target)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights diverged to non-finite values")
    return replace(state, weights=w)


def float_predict(state: FloatLearnerState, features: Mapping[int, int]) -> int:
    """Label state maximizing the real-valued model score under the features."""
    label = _check_features(state.structure, features)
    return max_sum(state.structure, state.weights, features)[label]


def float_loss(state: FloatLearnerState) -> float:
    """Average log2-loss of the float model on its accumulated summary."""
    if state.summary.n <= 0:
        raise ValueError("summary has no samples")
    _, _, log2_z = sum_product_float(state.structure, state.weights)
    dot = float(np.dot(state.weights, np.asarray(state.summary.counts, dtype=float)))
    return log2_z - dot / state.summary.n
