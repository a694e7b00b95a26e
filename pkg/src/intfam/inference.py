"""Exact inference on tree models: sum-product, max-sum, and a brute-force check.

All integer-model routines work in exact unbounded-integer arithmetic. Edge
potentials are powers of two (1 << theta entry), so partition values and
marginal numerators are plain ints and marginals are exact quotients. The
float variants mirror the same passes in numpy for the real-valued reference
learner, tracking the log2 normalizer through per-vertex rescaling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .graph import StructureGraph, traversal
from .intmodel import IntParams, Rational, edge_offsets

Evidence = Mapping[int, int]

_STATE_SPACE_LIMIT = 1_000_000


@dataclass(frozen=True)
class Marginals:
    """Exact vertex and edge marginals plus the (evidence-restricted) normalizer.

    Every Rational shares the same denominator ``z``; edge tables are laid
    out like the parameter blocks, rows indexed by the lower-numbered
    endpoint's state.
    """

    vertex: tuple[tuple[Rational, ...], ...]
    edge: tuple[tuple[tuple[Rational, ...], ...], ...]
    z: int

    def flat_edge_numerators(self) -> tuple[int, ...]:
        """Edge-marginal numerators flattened in parameter-vector order."""
        out = []
        for table in self.edge:
            for row in table:
                out.extend(cell.num for cell in row)
        return tuple(out)


def _indicators(structure: StructureGraph, evidence: Evidence | None) -> list[list[int]]:
    """Per-vertex 0/1 state masks implementing clamping by evidence."""
    masks = [[1] * structure.arity(v) for v in range(structure.n_vertices)]
    if evidence:
        for v, state in evidence.items():
            if not (0 <= v < structure.n_vertices):
                raise ValueError(f"evidence for unknown vertex {v}")
            if not (0 <= state < structure.arity(v)):
                raise ValueError(f"evidence state {state} out of range for vertex {v}")
            masks[v] = [int(x == state) for x in range(structure.arity(v))]
    return masks


def _children(order: Sequence[int], parent: Sequence[int]) -> list[list[int]]:
    kids: list[list[int]] = [[] for _ in parent]
    for v in order[1:]:
        kids[parent[v]].append(v)
    return kids


def sum_product(params: IntParams, evidence: Evidence | None = None) -> Marginals:
    """Exact two-pass sum-product over the tree.

    Messages and beliefs are unbounded integers; the returned marginals are
    belief/z quotients. With evidence, z is the total weight of assignments
    consistent with the clamped states.
    """
    g = params.structure
    order, parent = traversal(g)
    kids = _children(order, parent)
    offsets = edge_offsets(g)
    ind = _indicators(g, evidence)

    pot: list[list[list[int]]] = []
    for e, (s, t) in enumerate(g.edges):
        at = g.arity(t)
        block = params.theta[offsets[e] : offsets[e] + g.arity(s) * at]
        pot.append([[1 << block[xs * at + xt] for xt in range(at)] for xs in range(g.arity(s))])

    edge_of = {}
    for e, (s, t) in enumerate(g.edges):
        edge_of[(s, t)] = e
        edge_of[(t, s)] = e

    # Up pass: partial[u] is the weight of u's subtree per state of u.
    partial: list[list[int]] = [[] for _ in order]
    msg_up: list[list[int]] = [[] for _ in order]
    for u in reversed(order):
        au = g.arity(u)
        vec = list(ind[u])
        for c in kids[u]:
            vec = [a * b for a, b in zip(vec, msg_up[c])]
        partial[u] = vec
        p = parent[u]
        if p < 0:
            continue
        e = edge_of[(p, u)]
        s, _ = g.edges[e]
        if p == s:
            msg_up[u] = [sum(pot[e][xp][xu] * vec[xu] for xu in range(au)) for xp in range(g.arity(p))]
        else:
            msg_up[u] = [sum(pot[e][xu][xp] * vec[xu] for xu in range(au)) for xp in range(g.arity(p))]

    root = order[0]
    z = sum(partial[root])

    # Down pass: cavity products exclude one child via prefix/suffix tables,
    # so no division is ever needed.
    down: list[list[int]] = [[] for _ in order]
    down[root] = [1] * g.arity(root)
    edge_tables: list[tuple[tuple[Rational, ...], ...] | None] = [None] * len(g.edges)
    for u in order:
        if not kids[u]:
            continue
        au = g.arity(u)
        base = [down[u][x] * ind[u][x] for x in range(au)]
        msgs = [msg_up[c] for c in kids[u]]
        k = len(msgs)
        pre = [[1] * au]
        for i in range(k):
            pre.append([pre[i][x] * msgs[i][x] for x in range(au)])
        suf = [[1] * au for _ in range(k + 1)]
        for i in range(k - 1, -1, -1):
            suf[i] = [suf[i + 1][x] * msgs[i][x] for x in range(au)]
        for i, c in enumerate(kids[u]):
            cav = [base[x] * pre[i][x] * suf[i + 1][x] for x in range(au)]
            ac = g.arity(c)
            e = edge_of[(u, c)]
            s, t = g.edges[e]
            if u == s:
                down[c] = [sum(pot[e][xu][xc] * cav[xu] for xu in range(au)) for xc in range(ac)]
                table = [[Rational(cav[xs] * pot[e][xs][xt] * partial[c][xt], z) for xt in range(ac)] for xs in range(au)]
            else:
                down[c] = [sum(pot[e][xc][xu] * cav[xu] for xu in range(au)) for xc in range(ac)]
                table = [[Rational(cav[xt] * pot[e][xs][xt] * partial[c][xs], z) for xt in range(au)] for xs in range(ac)]
            edge_tables[e] = tuple(tuple(row) for row in table)

    vertex = tuple(
        tuple(Rational(down[v][x] * partial[v][x], z) for x in range(g.arity(v)))
        for v in range(g.n_vertices)
    )
    return Marginals(vertex, tuple(edge_tables), z)


def brute_force(params: IntParams, evidence: Evidence | None = None) -> Marginals:
    """Enumerate all consistent assignments; reference for small models only."""
    g = params.structure
    space = math.prod(g.arities)
    if space > _STATE_SPACE_LIMIT:
        raise ValueError(f"state space too large for enumeration ({space} states)")
    ind = _indicators(g, evidence)
    offsets = edge_offsets(g)

    z = 0
    vnum = [[0] * g.arity(v) for v in range(g.n_vertices)]
    enum = [[[0] * g.arity(t) for _ in range(g.arity(s))] for s, t in g.edges]
    allowed = [[x for x in range(g.arity(v)) if ind[v][x]] for v in range(g.n_vertices)]
    for x in itertools.product(*allowed):
        sc = 0
        for e, (s, t) in enumerate(g.edges):
            sc += params.theta[offsets[e] + x[s] * g.arity(t) + x[t]]
        w = 1 << sc
        z += w
        for v in range(g.n_vertices):
            vnum[v][x[v]] += w
        for e, (s, t) in enumerate(g.edges):
            enum[e][x[s]][x[t]] += w

    vertex = tuple(tuple(Rational(c, z) for c in row) for row in vnum)
    edge = tuple(tuple(tuple(Rational(c, z) for c in row) for row in table) for table in enum)
    return Marginals(vertex, edge, z)


def max_sum(structure: StructureGraph, theta: Sequence, evidence: Evidence | None = None) -> tuple[int, ...]:
    """Highest-scoring assignment consistent with evidence.

    Works for integer and float parameter vectors alike since only addition
    and comparison are used. Ties resolve to the lowest state index, decided
    root-first along the traversal.
    """
    g = structure
    order, parent = traversal(g)
    kids = _children(order, parent)
    offsets = edge_offsets(g)
    ind = _indicators(g, evidence)
    allowed = [[x for x in range(g.arity(v)) if ind[v][x]] for v in range(g.n_vertices)]

    edge_of = {}
    for e, (s, t) in enumerate(g.edges):
        edge_of[(s, t)] = e
        edge_of[(t, s)] = e

    msg: list[list] = [[] for _ in order]
    back: list[list[int]] = [[] for _ in order]
    for u in reversed(order):
        subtotal = [0] * g.arity(u)
        for c in kids[u]:
            subtotal = [a + b for a, b in zip(subtotal, msg[c])]
        p = parent[u]
        if p < 0:
            root_scores = subtotal
            continue
        e = edge_of[(p, u)]
        s, t = g.edges[e]
        at = g.arity(t)
        m = []
        b = []
        for xp in range(g.arity(p)):
            best_val = None
            best_x = -1
            for xu in allowed[u]:
                j = offsets[e] + (xp * at + xu if p == s else xu * at + xp)
                val = theta[j] + subtotal[xu]
                if best_val is None or val > best_val:
                    best_val, best_x = val, xu
            m.append(best_val)
            b.append(best_x)
        msg[u] = m
        back[u] = b

    root = order[0]
    best_val = None
    best_x = -1
    for x in allowed[root]:
        if best_val is None or root_scores[x] > best_val:
            best_val, best_x = root_scores[x], x

    assign = [0] * g.n_vertices
    assign[root] = best_x
    for v in order[1:]:
        assign[v] = back[v][assign[parent[v]]]
    return tuple(assign)


def map_assignment(params: IntParams, evidence: Evidence | None = None) -> tuple[int, ...]:
    """MAP assignment of the integer model under evidence."""
    return max_sum(params.structure, params.theta, evidence)


def sum_product_float(
    structure: StructureGraph, theta: Sequence[float], evidence: Evidence | None = None
) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...], float]:
    """Float sum-product with per-vertex rescaling; returns log2 of the normalizer.

    Each subtree partial is normalized to sum 1 and the log2 of the discarded
    scale accumulated, which keeps message magnitudes bounded while the exact
    log2 partition value is recovered as the sum of all scales.
    """
    g = structure
    order, parent = traversal(g)
    kids = _children(order, parent)
    offsets = edge_offsets(g)
    ind_int = _indicators(g, evidence)
    ind = [np.asarray(m, dtype=float) for m in ind_int]
    theta = np.asarray(theta, dtype=float)

    pot: list[np.ndarray] = []
    for e, (s, t) in enumerate(g.edges):
        block = theta[offsets[e] : offsets[e] + g.arity(s) * g.arity(t)]
        pot.append(np.power(2.0, block.reshape(g.arity(s), g.arity(t))))

    edge_of = {}
    for e, (s, t) in enumerate(g.edges):
        edge_of[(s, t)] = e
        edge_of[(t, s)] = e

    partial: list[np.ndarray] = [np.empty(0)] * g.n_vertices
    msg_up: list[np.ndarray] = [np.empty(0)] * g.n_vertices
    log2_z = 0.0
    for u in reversed(order):
        vec = ind[u].copy()
        for c in kids[u]:
            vec *= msg_up[c]
        scale = vec.sum()
        if not (scale > 0.0 and np.isfinite(scale)):
            raise ValueError(f"degenerate subtree weight at vertex {u}")
        log2_z += math.log2(scale)
        vec /= scale
        partial[u] = vec
        p = parent[u]
        if p < 0:
            continue
        e = edge_of[(p, u)]
        s, _ = g.edges[e]
        msg_up[u] = pot[e] @ vec if p == s else pot[e].T @ vec

    root = order[0]
    down: list[np.ndarray] = [np.empty(0)] * g.n_vertices
    down[root] = np.ones(g.arity(root))
    edge_tables: list[np.ndarray | None] = [None] * len(g.edges)
    for u in order:
        if not kids[u]:
            continue
        base = down[u] * ind[u]
        msgs = [msg_up[c] for c in kids[u]]
        k = len(msgs)
        pre = [np.ones(g.arity(u))]
        for i in range(k):
            pre.append(pre[i] * msgs[i])
        suf = [np.ones(g.arity(u)) for _ in range(k + 1)]
        for i in range(k - 1, -1, -1):
            suf[i] = suf[i + 1] * msgs[i]
        for i, c in enumerate(kids[u]):
            cav = base * pre[i] * suf[i + 1]
            e = edge_of[(u, c)]
            s, t = g.edges[e]
            if u == s:
                down[c] = pot[e].T @ cav
                table = cav[:, None] * pot[e] * partial[c][None, :]
            else:
                down[c] = pot[e] @ cav
                table = cav[None, :] * pot[e] * partial[c][:, None]
            down[c] /= down[c].sum()
            edge_tables[e] = table / table.sum()

    vertex = []
    for v in range(g.n_vertices):
        b = down[v] * partial[v]
        vertex.append(b / b.sum())
    return tuple(vertex), tuple(edge_tables), log2_z  # type: ignore[arg-type]
