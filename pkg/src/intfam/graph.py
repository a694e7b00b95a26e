"""Variable metadata, tree structures, and Chow-Liu structure learning.

A model structure is an undirected spanning tree over discrete variables.
Edge weights for structure learning are empirical mutual information values
(in bits) estimated from a holdout set; the tree is the maximum-weight
spanning tree with a fixed deterministic tie-break so that repeated runs
produce byte-identical structures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

ROLE_FEATURE = "feature"
ROLE_LABEL = "label"


@dataclass(frozen=True)
class VariableSpec:
    """A discrete variable: name, number of states, and feature/label role."""

    name: str
    arity: int
    role: str = ROLE_FEATURE

    def __post_init__(self):
        if self.arity < 2:
            raise ValueError(f"variable {self.name!r}: arity must be >= 2, got {self.arity}")
        if self.role not in (ROLE_FEATURE, ROLE_LABEL):
            raise ValueError(f"variable {self.name!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class StructureGraph:
    """Undirected graph over discrete variables; edges are (s, t) pairs with s < t."""

    variables: tuple[VariableSpec, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        p = len(self.variables)
        norm = []
        for s, t in self.edges:
            if s == t:
                raise ValueError(f"self-loop at vertex {s}")
            if not (0 <= s < p and 0 <= t < p):
                raise ValueError(f"edge ({s},{t}) out of range for {p} variables")
            norm.append((s, t) if s < t else (t, s))
        norm.sort()
        for a, b in zip(norm, norm[1:]):
            if a == b:
                raise ValueError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def n_vertices(self) -> int:
        return len(self.variables)

    def arity(self, v: int) -> int:
        return self.variables[v].arity

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(spec.arity for spec in self.variables)

    def label_index(self) -> int:
        """Index of the unique label variable; raises if there is not exactly one."""
        labels = [i for i, s in enumerate(self.variables) if s.role == ROLE_LABEL]
        if len(labels) != 1:
            raise ValueError(f"expected exactly one label variable, found {len(labels)}")
        return labels[0]


@lru_cache(maxsize=None)
def adjacency(g: StructureGraph) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Per vertex, the incident (neighbor, edge_index) pairs."""
    inc: list[list[tuple[int, int]]] = [[] for _ in range(g.n_vertices)]
    for e, (s, t) in enumerate(g.edges):
        inc[s].append((t, e))
        inc[t].append((s, e))
    return tuple(tuple(pairs) for pairs in inc)


@lru_cache(maxsize=None)
def traversal(g: StructureGraph, root: int = 0) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Root-first BFS order and parent array; raises if g is not a spanning tree."""
    problem = validate_tree(g)
    if problem is not None:
        raise ValueError(f"structure is not a tree: {problem}")
    inc = adjacency(g)
    parent = [-1] * g.n_vertices
    order = [root]
    seen = {root}
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v, _ in inc[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = u
                order.append(v)
    return tuple(order), tuple(parent)


def validate_tree(g: StructureGraph) -> str | None:
    """Return None if g is a spanning tree, else the first violated property."""
    p = g.n_vertices
    if p == 0:
        return "no vertices"
    root = list(range(p))

    def find(a: int) -> int:
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    for s, t in g.edges:
        rs, rt = find(s), find(t)
        if rs == rt:
            return "cycle"
        root[rs] = rt
    if len({find(v) for v in range(p)}) > 1:
        return "disconnected"
    return None


def mutual_information(joint_counts) -> float:
    """Empirical mutual information in bits from a joint count matrix.

    Uses maximum-likelihood plug-in probabilities; cells with zero joint
    count contribute nothing. Raises on an all-zero or negative matrix.
    """
    counts = [[int(c) for c in row] for row in joint_counts]
    total = 0
    for row in counts:
        for c in row:
            if c < 0:
                raise ValueError("negative count")
            total += c
    if total == 0:
        raise ValueError("empty counts")
    row_sums = [sum(row) for row in counts]
    col_sums = [sum(col) for col in zip(*counts)]
    mi = 0.0
    for i, row in enumerate(counts):
        for j, c in enumerate(row):
            if c > 0:
                mi += (c / total) * math.log2(c * total / (row_sums[i] * col_sums[j]))
    # MI is nonnegative in exact arithmetic; clamp rounding residue.
    return max(mi, 0.0)


def pairwise_counts(rows: Sequence[Sequence[int]], s: int, t: int, arity_s: int, arity_t: int) -> list[list[int]]:
    """Joint count matrix for columns s and t of a discrete dataset."""
    data = np.asarray(rows, dtype=np.int64)
    flat = np.bincount(data[:, s] * arity_t + data[:, t], minlength=arity_s * arity_t)
    return flat.reshape(arity_s, arity_t).tolist()


def chow_liu(holdout: Sequence[Sequence[int]], specs: Sequence[VariableSpec]) -> StructureGraph:
    """Maximum-mutual-information spanning tree over the holdout's variables.

    Candidate edges are sorted by (-MI, s, t) and greedily added while they
    join distinct components (Kruskal), which makes tie-breaking fully
    deterministic.
    """
    specs = tuple(specs)
    p = len(specs)
    if p < 2:
        raise ValueError("need at least 2 variables to build a tree")
    if len(holdout) == 0:
        raise ValueError("holdout must be nonempty")
    data = np.asarray(holdout, dtype=np.int64)
    if data.ndim != 2 or data.shape[1] != p:
        raise ValueError(f"holdout rows must have {p} columns")
    if data.min() < 0:
        raise ValueError("negative state in holdout")
    for i, spec in enumerate(specs):
        if data[:, i].max() >= spec.arity:
            raise ValueError(f"state out of range for variable {spec.name!r}")

    weighted = []
    for s in range(p):
        for t in range(s + 1, p):
            mi = mutual_information(pairwise_counts(data, s, t, specs[s].arity, specs[t].arity))
            weighted.append((-mi, s, t))
    weighted.sort()

    root = list(range(p))

    def find(a: int) -> int:
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    edges = []
    for _, s, t in weighted:
        rs, rt = find(s), find(t)
        if rs != rt:
            root[rs] = rt
            edges.append((s, t))
            if len(edges) == p - 1:
                break
    return StructureGraph(specs, tuple(edges))


def structure_to_text(g: StructureGraph) -> str:
    """Serialize to the plain text format: `name arity role` lines then `s t` lines."""
    lines = []
    for spec in g.variables:
        name = "_".join(spec.name.split()) or "_"
        lines.append(f"{name} {spec.arity} {spec.role}")
    for s, t in g.edges:
        lines.append(f"{s} {t}")
    return "\n".join(lines) + "\n"


def structure_from_text(text: str) -> StructureGraph:
    """Parse the text format produced by structure_to_text."""
    variables: list[VariableSpec] = []
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 3:
            if edges:
                raise ValueError(f"line {lineno}: variable line after edge lines")
            name, arity, role = parts
            variables.append(VariableSpec(name, int(arity), role))
        elif len(parts) == 2:
            edges.append((int(parts[0]), int(parts[1])))
        else:
            raise ValueError(f"line {lineno}: expected `name arity role` or `s t`")
    return StructureGraph(tuple(variables), tuple(edges))


def write_structure(g: StructureGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(structure_to_text(g))


def read_structure(path) -> StructureGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return structure_from_text(fh.read())
