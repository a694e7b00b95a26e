"""Model averaging, sync scheduling, and communication accounting.

Averaging of integer parameter vectors uses the floored elementwise mean, so
synchronized models stay inside the k-bit parameter box without any float
round trip. The dynamic schedule keeps a reference vector per learner and
only escalates to the coordinator when the squared distance to it exceeds a
threshold; the coordinator then grows the sync group by doubling until the
group mean is back inside the threshold ball or everyone is involved.

Every transfer is booked through a ledger that also enforces which payload
kinds a protocol may ship; data summaries leaving a device under the
summary-free protocol is a privacy violation, not a silent cost.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .intmodel import DataSummary

PROTOCOLS = ("none", "centralized", "naive", "private")
SCHEDULES = ("periodic", "dynamic")

_UPLOADS_ALLOWED = {
    "none": frozenset(),
    "centralized": frozenset({"summary"}),
    "naive": frozenset({"theta", "summary"}),
    "private": frozenset({"theta"}),
}


@dataclass(frozen=True)
class SyncConfig:
    """How and when learners synchronize."""

    protocol: str = "none"
    schedule: str = "periodic"
    period: int = 1
    delta: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.period < 1:
            raise ValueError("sync period must be at least 1")
        if not isinstance(self.delta, int) or self.delta < 0:
            raise ValueError("delta must be a nonnegative integer")
        if self.protocol == "centralized" and self.schedule == "dynamic":
            # Centralized learners never fit locally, so no local model can
            # drift from a reference; there is nothing for the condition to
            # measure.
            raise ValueError("centralized protocol supports only the periodic schedule")


def floored_mean(vectors: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Elementwise floor of the mean of integer vectors."""
    if not vectors:
        raise ValueError("cannot average zero vectors")
    count = len(vectors)
    return tuple(sum(col) // count for col in zip(*vectors, strict=True))


def pair_average_bittrick(a: int, b: int) -> int:
    """Floored average of two machine words without overflowing their width."""
    return (a & b) + ((a ^ b) >> 1)


def squared_distance(a: Sequence[int], b: Sequence[int]) -> int:
    return sum((x - y) ** 2 for x, y in zip(a, b, strict=True))


def local_condition(theta: Sequence[int], reference: Sequence[int], delta: int) -> bool:
    """True when theta has drifted out of the delta-ball around the reference."""
    return squared_distance(theta, reference) > delta


def periodic_sync(thetas: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Full-population average used on the fixed schedule."""
    return floored_mean(thetas)


def merge_summaries(summaries: Sequence[DataSummary]) -> DataSummary:
    """Sum count vectors and sample counts across devices."""
    if not summaries:
        raise ValueError("cannot merge zero summaries")
    counts = tuple(sum(col) for col in zip(*(s.counts for s in summaries), strict=True))
    return DataSummary(counts, sum(s.n for s in summaries))


@dataclass
class CoordinatorState:
    """Coordinator bookkeeping for the dynamic schedule.

    `reference` is the vector the learners compare against, `violations`
    counts condition reports since the last full sync.
    """

    m: int
    delta: int
    reference: tuple[int, ...]
    violations: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one learner")
        self.reference = tuple(self.reference)


@dataclass(frozen=True)
class SyncOutcome:
    """Result of one violation resolution: who synced and to what."""

    members: tuple[int, ...]
    theta_hat: tuple[int, ...]
    full: bool


def resolve_violation(
    coord: CoordinatorState,
    violators: Sequence[int],
    fetch: Callable[[int], Sequence[int]],
    rng: random.Random,
    average: Callable[[Sequence[Sequence[int]]], tuple[int, ...]] = floored_mean,
) -> SyncOutcome:
    """Grow a sync group from the violators until its mean is back in the ball.

    `fetch(i)` must return learner i's current parameters and is the hook
    where transfer accounting happens; each member is fetched exactly once.
    Membership doubles by uniform sampling of non-members. Once the count of
    reported violations reaches the population size the resolution becomes a
    full sync and resets the reference and the counter.
    """
    members = sorted(set(violators))
    if not members:
        raise ValueError("no violators to resolve")
    for i in members:
        if not (0 <= i < coord.m):
            raise ValueError(f"violator index {i} out of range")

    coord.violations += len(members)
    cache: dict[int, tuple[int, ...]] = {}

    def get(i: int) -> tuple[int, ...]:
        if i not in cache:
            cache[i] = tuple(fetch(i))
        return cache[i]

    if coord.violations >= coord.m:
        members = list(range(coord.m))
    else:
        for i in members:
            get(i)
        while len(members) < coord.m:
            theta_hat = average([get(i) for i in members])
            if not local_condition(theta_hat, coord.reference, coord.delta):
                break
            pool = sorted(set(range(coord.m)) - set(members))
            add = rng.sample(pool, min(len(members), len(pool)))
            members = sorted(members + add)

    theta_hat = average([get(i) for i in members])
    full = len(members) == coord.m
    if full:
        coord.reference = tuple(theta_hat)
        coord.violations = 0
    return SyncOutcome(tuple(members), tuple(theta_hat), full)


class ProtocolViolation(ValueError):
    """A payload kind was sent that the active protocol does not permit."""


def theta_message_bytes(dim: int, bits: int) -> int:
    """Packed parameter payload: 8-byte header plus dim k-bit words."""
    return 8 + (dim * bits + 7) // 8


def summary_message_bytes(dim: int) -> int:
    """Count payload: 8-byte header, 4 bytes per count, 8 bytes for n."""
    return 8 + 4 * dim + 8


@dataclass
class CommLedger:
    """Running byte and message totals for one experiment."""

    protocol: str
    bytes_up: int = 0
    bytes_down: int = 0
    messages: dict[str, int] = field(default_factory=lambda: {"theta": 0, "summary": 0, "broadcast": 0})

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")

    @property
    def total_bytes(self) -> int:
        return self.bytes_up + self.bytes_down


def account(ledger: CommLedger, payload: str, dim: int, bits: int, recipients: int = 1) -> CommLedger:
    """Book one transfer, enforcing the protocol's payload permissions.

    Uploads (`theta`, `summary`) go to the coordinator and must have one
    recipient. A `broadcast` ships whatever the protocol sends downstream
    (parameters, plus the merged summary when summaries are shared) to each
    recipient separately.
    """
    if recipients < 1:
        raise ValueError("recipients must be at least 1")
    if payload in ("theta", "summary"):
        if recipients != 1:
            raise ValueError("uploads have a single recipient")
        if payload not in _UPLOADS_ALLOWED[ledger.protocol]:
            raise ProtocolViolation(
                f"privacy violation: {payload} upload not permitted under {ledger.protocol!r} protocol"
            )
        cost = theta_message_bytes(dim, bits) if payload == "theta" else summary_message_bytes(dim)
        ledger.bytes_up += cost
        ledger.messages[payload] += 1
    elif payload == "broadcast":
        if ledger.protocol == "none":
            raise ProtocolViolation("privacy violation: broadcast under the no-communication protocol")
        cost = theta_message_bytes(dim, bits)
        if ledger.protocol == "naive":
            cost += summary_message_bytes(dim)
        ledger.bytes_down += cost * recipients
        ledger.messages["broadcast"] += recipients
    else:
        raise ValueError(f"unknown payload kind {payload!r}")
    return ledger
