"""Back-of-envelope energy estimates: centralize the data vs train in place.

The centralized estimate charges one big processor for aggregating every
sample plus one training run, and the network for shipping all raw data. The
parallel estimate charges each low-power device for its local share plus one
model aggregation, and the network for shipping model-sized payloads only.
Compute terms are watts times seconds, divided by 3600 to express
everything in watt-hours; transfer terms are gigabytes times an energy-per-
gigabyte rate.

Published figures for the transfer rate of cellular links disagree by
orders of magnitude; both common readings ship as presets so the choice is
explicit rather than baked in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

BYTES_PER_GB = 1e9


def gb_from_bytes(n_bytes: int) -> float:
    return n_bytes / BYTES_PER_GB


@dataclass(frozen=True)
class EnergyParams:
    """Inputs of the estimate; times are seconds, powers watts, transfers GB."""

    wh_per_gb: float = 0.0029
    central_watts: float = 100.0
    local_watts: float = 1.0
    agg_seconds: float = 1e-12
    train_seconds: float = 1e-10
    learners: int = 16
    points_per_learner: int = 100
    central_gb: float = 0.0
    local_gb: float = 0.0

    def __post_init__(self):
        if self.learners < 1:
            raise ValueError("learners must be at least 1")
        for name in ("wh_per_gb", "central_watts", "local_watts", "agg_seconds", "train_seconds", "central_gb", "local_gb"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.points_per_learner < 0:
            raise ValueError("points_per_learner must be nonnegative")

    @classmethod
    def from_mapping(cls, mapping) -> "EnergyParams":
        kwargs = {}
        for key, raw in mapping.items():
            if key not in _PARAM_CONVERTERS:
                raise ValueError(f"unknown energy parameter {key!r}")
            try:
                kwargs[key] = _PARAM_CONVERTERS[key](raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for energy parameter {key!r}: {raw!r}") from exc
        return cls(**kwargs)


_PARAM_CONVERTERS: dict[str, Callable] = {
    "wh_per_gb": float,
    "central_watts": float,
    "local_watts": float,
    "agg_seconds": float,
    "train_seconds": float,
    "learners": int,
    "points_per_learner": int,
    "central_gb": float,
    "local_gb": float,
}

# The two circulating 3G transfer-energy readings (Wh/GB). They differ by a
# factor of 10^6; pick explicitly.
PRESETS = {
    "3g-low": EnergyParams(wh_per_gb=0.0029, central_gb=6200640 / BYTES_PER_GB, local_gb=34020 / BYTES_PER_GB),
    "3g-high": EnergyParams(wh_per_gb=2900.0, central_gb=6200640 / BYTES_PER_GB, local_gb=34020 / BYTES_PER_GB),
}


def central_energy(p: EnergyParams) -> float:
    """Wh to aggregate everything on one processor, train once, and ship raw data."""
    compute_ws = (p.learners * p.points_per_learner * p.agg_seconds + p.train_seconds) * p.central_watts
    return compute_ws / 3600.0 + p.central_gb * p.wh_per_gb


def parallel_energy(p: EnergyParams) -> float:
    """Wh for per-device aggregation and training plus one model aggregation."""
    local_ws = p.learners * (p.points_per_learner * p.agg_seconds + p.train_seconds) * p.local_watts
    aggregate_ws = p.learners * p.agg_seconds * p.local_watts
    return (local_ws + aggregate_ws) / 3600.0 + p.local_gb * p.wh_per_gb


def energy_ratio(e_central: float, e_parallel: float) -> float:
    if e_parallel > 0.0:
        return e_central / e_parallel
    return math.inf if e_central > 0.0 else math.nan


def scaling_curves(p: EnergyParams, m_range: Sequence[int]) -> list[tuple[int, float, float, float]]:
    """(m, central Wh, parallel Wh, ratio) rows across learner counts.

    Transfer volumes are scaled proportionally to m so that the central to
    parallel transfer ratio stays fixed; with that convention the ratio
    column is non-increasing in m and levels off at its transfer-only limit.
    """
    if not m_range:
        raise ValueError("m_range must be nonempty")
    rows = []
    for m in m_range:
        if m < 1:
            raise ValueError("learner counts must be at least 1")
        scale = m / p.learners
        q = replace(p, learners=m, central_gb=p.central_gb * scale, local_gb=p.local_gb * scale)
        e_c = central_energy(q)
        e_p = parallel_energy(q)
        rows.append((m, e_c, e_p, energy_ratio(e_c, e_p)))
    return rows
