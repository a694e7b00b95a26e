"""Prequential simulation of distributed training over a learner population.

Each round every learner first predicts the labels of its next batch, then
folds the batch into its summary and (except under the centralized protocol)
runs local fitting, and finally the population synchronizes according to the
configured protocol and schedule. All error, byte, and sync counters in the
emitted records are cumulative, so any row of the results stream describes
the run up to that round.

Seeding is hierarchical: every stochastic sub-process (partitioning, holdout
selection, dynamic group sampling, synthetic data) draws its own generator
from the master seed and a fixed tag, so runs are reproducible and the
sub-processes stay independent of each other.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from hashlib import sha256
from math import ceil
from typing import Callable, Sequence

import numpy as np

from .graph import StructureGraph, traversal
from .inference import sum_product
from .learning import (
    FloatLearnerState,
    LearnerState,
    accumulate,
    fit,
    float_fit,
    float_predict,
    predict,
)
from .intmodel import DataSummary, IntParams, model_dimension
from .sync import (
    CommLedger,
    CoordinatorState,
    SyncConfig,
    account,
    floored_mean,
    local_condition,
    merge_summaries,
    resolve_violation,
)


RESULTS_HEADER = (
    "t",
    "cum_errors",
    "cum_samples",
    "bytes_up",
    "bytes_down",
    "violations",
    "full_syncs",
    "partial_syncs",
)


def derive_seed(seed: int, tag: str) -> int:
    """Stable 64-bit sub-seed for one named stochastic sub-process."""
    digest = sha256(f"{seed}/{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated run; every field has a flat config key."""

    learners: int = 16
    bits: int = 3
    batch_size: int = 10
    sync_period: int = 1
    delta: int = 0
    budget: int = 1
    protocol: str = "none"
    schedule: str = "periodic"
    bins: int = 10
    holdout_size: int = 10000
    seed: int = 0
    rounds: int = 100
    model_kind: str = "integer"
    learning_rate: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.learners < 1:
            raise ValueError("learners must be at least 1")
        if self.bits < 1:
            raise ValueError("bits must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.holdout_size < 0:
            raise ValueError("holdout_size must be non-negative")
        if self.model_kind not in ("integer", "float"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.sync_config()

    def sync_config(self) -> SyncConfig:
        return SyncConfig(
            self.protocol,
            self.schedule,
            self.sync_period,
            self.delta,
            seed=derive_seed(self.seed, "sync"),
        )

    @classmethod
    def from_mapping(cls, mapping) -> "ExperimentConfig":
        kwargs = {}
        for key, raw in mapping.items():
            if key not in _CONFIG_CONVERTERS:
                raise ValueError(f"unknown config key {key!r}")
            try:
                kwargs[key] = _CONFIG_CONVERTERS[key](raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for config key {key!r}: {raw!r}") from exc
        return cls(**kwargs)


_CONFIG_CONVERTERS: dict[str, Callable] = {
    "learners": int,
    "bits": int,
    "batch_size": int,
    "sync_period": int,
    "delta": int,
    "budget": int,
    "protocol": str,
    "schedule": str,
    "bins": int,
    "holdout_size": int,
    "seed": int,
    "rounds": int,
    "model_kind": str,
    "learning_rate": float,
}


@dataclass(frozen=True)
class RoundRecord:
    """Cumulative counters as of the end of round t (t starts at 1).

    `cum_loss` is the running 0/1 prediction loss, which coincides with
    `cum_errors`; it is kept as its own field so the record type states the
    evaluation loss explicitly.
    """

    t: int
    cum_errors: int
    cum_samples: int
    cum_loss: int
    bytes_up: int
    bytes_down: int
    violations: int
    full_syncs: int
    partial_syncs: int

    @property
    def error_rate(self) -> float:
        return self.cum_errors / self.cum_samples if self.cum_samples else 0.0


@dataclass(frozen=True, eq=False)
class RunResult:
    """Everything a finished run leaves behind."""

    records: tuple[RoundRecord, ...]
    ledger: CommLedger
    learners: tuple
    coordinator: CoordinatorState | None
    global_model: object | None

    @property
    def final(self) -> RoundRecord:
        if not self.records:
            raise ValueError("run produced no rounds")
        return self.records[-1]


def _summary_delta(current: DataSummary, shipped: DataSummary) -> DataSummary:
    counts = tuple(a - b for a, b in zip(current.counts, shipped.counts, strict=True))
    return DataSummary(counts, current.n - shipped.n)


def run(
    config: ExperimentConfig,
    structure: StructureGraph,
    stream: Sequence[Sequence[int]],
    probe: Callable[[int, tuple, object], None] | None = None,
    threads: int = 1,
) -> RunResult:
    """Simulate the full prequential protocol over a labeled sample stream."""
    config.validate()
    if threads < 1:
        raise ValueError("threads must be at least 1")
    m = config.learners
    d = model_dimension(structure)
    label = structure.label_index()
    feature_ids = tuple(v for v in range(structure.n_vertices) if v != label)
    is_float = config.model_kind == "float"
    acct_bits = 32 if is_float else config.bits

    parts = partition_horizontal(stream, m, derive_seed(config.seed, "partition"))
    n_rounds = min(config.rounds, min(len(part) for part in parts) // config.batch_size)

    if is_float:
        states: list = [FloatLearnerState.fresh(structure, config.learning_rate) for _ in range(m)]
    else:
        states = [LearnerState.fresh(structure, config.bits) for _ in range(m)]
    snapshots = [DataSummary.zeros(d) for _ in range(m)]
    merged_pool = DataSummary.zeros(d)
    ledger = CommLedger(config.protocol)
    rng_sync = random.Random(config.sync_config().seed)

    coordinator: CoordinatorState | None = None
    global_model = None
    if config.protocol == "centralized":
        global_model = FloatLearnerState.fresh(structure, config.learning_rate) if is_float else LearnerState.fresh(structure, config.bits)
    elif config.schedule == "dynamic" and config.protocol != "none":
        coordinator = CoordinatorState(m, config.delta, (0,) * d)

    def get_theta(i: int):
        return tuple(states[i].weights) if is_float else states[i].params.theta

    def set_theta(i: int, theta) -> None:
        if is_float:
            states[i] = replace(states[i], weights=np.asarray(theta, dtype=float))
        else:
            states[i] = replace(states[i], params=states[i].params.with_theta(theta))

    def float_mean(vectors):
        return tuple(np.asarray(vectors, dtype=float).mean(axis=0))

    average = float_mean if is_float else floored_mean
    local_fit = float_fit if is_float else fit

    def local_step(i: int, batch) -> tuple[int, object]:
        st = states[i]
        errs = 0
        for row in batch:
            features = {v: row[v] for v in feature_ids}
            guess = float_predict(st, features) if is_float else predict(st.params, features)
            errs += int(guess != row[label])
        st = replace(st, summary=accumulate(st.summary, batch, structure), seen_rounds=st.seen_rounds + 1)
        if config.protocol != "centralized":
            st = local_fit(st, config.budget)
        return errs, st

    records: list[RoundRecord] = []
    cum_errors = cum_samples = violations_total = full_syncs = partial_syncs = 0
    bs = config.batch_size

    for t in range(1, n_rounds + 1):
        batches = [parts[i][(t - 1) * bs : t * bs] for i in range(m)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(local_step, range(m), batches))
        else:
            results = [local_step(i, batches[i]) for i in range(m)]
        for i, (errs, st) in enumerate(results):
            cum_errors += errs
            states[i] = st
        cum_samples += m * bs

        if config.protocol != "none" and t % config.sync_period == 0:
            if config.schedule == "periodic":
                if config.protocol == "centralized":
                    deltas = []
                    for i in range(m):
                        account(ledger, "summary", d, acct_bits)
                        deltas.append(_summary_delta(states[i].summary, snapshots[i]))
                        snapshots[i] = states[i].summary
                    global_model = replace(global_model, summary=merge_summaries([global_model.summary] + deltas))
                    global_model = local_fit(global_model, config.budget)
                    account(ledger, "broadcast", d, acct_bits, recipients=m)
                    g_theta = tuple(global_model.weights) if is_float else global_model.params.theta
                    for i in range(m):
                        set_theta(i, g_theta)
                else:
                    thetas = [get_theta(i) for i in range(m)]
                    for i in range(m):
                        account(ledger, "theta", d, acct_bits)
                    if config.protocol == "naive":
                        deltas = []
                        for i in range(m):
                            account(ledger, "summary", d, acct_bits)
                            deltas.append(_summary_delta(states[i].summary, snapshots[i]))
                        merged_pool = merge_summaries([merged_pool] + deltas)
                    theta_hat = average(thetas)
                    account(ledger, "broadcast", d, acct_bits, recipients=m)
                    for i in range(m):
                        set_theta(i, theta_hat)
                        if config.protocol == "naive":
                            states[i] = replace(states[i], summary=merged_pool)
                            snapshots[i] = merged_pool
                full_syncs += 1
            else:
                violators = [i for i in range(m) if local_condition(get_theta(i), coordinator.reference, config.delta)]
                violations_total += len(violators)
                if violators:
                    pending: dict[int, DataSummary] = {}

                    def fetch(i: int):
                        account(ledger, "theta", d, acct_bits)
                        if config.protocol == "naive":
                            account(ledger, "summary", d, acct_bits)
                            pending[i] = _summary_delta(states[i].summary, snapshots[i])
                        return get_theta(i)

                    outcome = resolve_violation(coordinator, violators, fetch, rng_sync, average=average)
                    if config.protocol == "naive":
                        merged_pool = merge_summaries([merged_pool] + [pending[i] for i in sorted(pending)])
                    account(ledger, "broadcast", d, acct_bits, recipients=len(outcome.members))
                    for i in outcome.members:
                        set_theta(i, outcome.theta_hat)
                        if config.protocol == "naive":
                            states[i] = replace(states[i], summary=merged_pool)
                            snapshots[i] = merged_pool
                    if outcome.full:
                        full_syncs += 1
                    else:
                        partial_syncs += 1

        records.append(
            RoundRecord(
                t,
                cum_errors,
                cum_samples,
                cum_errors,
                ledger.bytes_up,
                ledger.bytes_down,
                violations_total,
                full_syncs,
                partial_syncs,
            )
        )
        if probe is not None:
            probe(t, tuple(states), global_model if config.protocol == "centralized" else coordinator)

    return RunResult(tuple(records), ledger, tuple(states), coordinator, global_model)


@dataclass(frozen=True)
class DiscretizationMap:
    """Quantile bin boundaries for one numeric column.

    A value lands in the bin of the first boundary exceeding it; values above
    every boundary land in the last bin.
    """

    boundaries: tuple[float, ...]

    def bin(self, value: float) -> int:
        return bisect_right(self.boundaries, value)

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) + 1


def build_discretizer(values: Sequence[float], bins: int = 10) -> DiscretizationMap:
    """Type-1 quantile boundaries from observed values.

    Boundary i is the ceil(i*n/bins)-th order statistic. Duplicate boundaries
    collapse and boundaries at or below the minimum are dropped, so columns
    with few distinct values simply get fewer bins; a constant column gets a
    single bin.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("cannot discretize an empty column")
    n = len(vals)
    lo = vals[0]
    out: list[float] = []
    for i in range(1, bins):
        b = vals[ceil(i * n / bins) - 1]
        if b > lo and (not out or b > out[-1]):
            out.append(b)
    return DiscretizationMap(tuple(out))


def split_holdout(
    rows: Sequence, holdout_size: int, seed: int
) -> tuple[list, list]:
    """Uniform holdout sample without replacement; remainder keeps stream order."""
    rows = list(rows)
    if holdout_size < 0:
        raise ValueError("holdout_size must be non-negative")
    if len(rows) <= holdout_size:
        raise ValueError(f"dataset has {len(rows)} rows, needs more than holdout_size={holdout_size}")
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(rows)), holdout_size))
    picked_set = set(picked)
    holdout = [rows[i] for i in picked]
    rest = [row for i, row in enumerate(rows) if i not in picked_set]
    return holdout, rest


def partition_horizontal(stream: Sequence, m: int, seed: int) -> list[list]:
    """Shuffle the stream once, then deal rows round-robin to m learners."""
    if m < 1:
        raise ValueError("need at least one learner")
    rows = list(stream)
    random.Random(seed).shuffle(rows)
    return [rows[i::m] for i in range(m)]


def synth_tree_data(structure: StructureGraph, params: IntParams, n: int, seed: int) -> list[tuple[int, ...]]:
    """Draw n exact samples from the integer model by ancestral sampling.

    Root states are drawn from the exact vertex marginal and children from
    the exact edge conditionals, all with integer numerators, so the sample
    law matches the model law without float quantization anywhere.
    """
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    marg = sum_product(params)
    order, parent = traversal(structure)
    edge_of = {}
    for e, (s, t) in enumerate(structure.edges):
        edge_of[(s, t)] = e
        edge_of[(t, s)] = e
    vnum = [[cell.num for cell in row] for row in marg.vertex]
    rng = random.Random(seed)
    root = order[0]

    def draw(weights: Sequence[int], total: int) -> int:
        u = rng.randrange(total)
        acc = 0
        for state, w in enumerate(weights):
            acc += w
            if u < acc:
                return state
        raise AssertionError("weights do not sum to total")

    rows = []
    for _ in range(n):
        x = [0] * structure.n_vertices
        x[root] = draw(vnum[root], marg.z)
        for v in order[1:]:
            pv = parent[v]
            e = edge_of[(pv, v)]
            s, _ = structure.edges[e]
            xp = x[pv]
            if pv == s:
                weights = [marg.edge[e][xp][xc].num for xc in range(structure.arity(v))]
            else:
                weights = [marg.edge[e][xc][xp].num for xc in range(structure.arity(v))]
            x[v] = draw(weights, vnum[pv][xp])
        rows.append(tuple(x))
    return rows
