"""Shared builders for structures, parameters, and random tree instances."""

import bisect
import random

import pytest

from intfam.graph import StructureGraph, VariableSpec
from intfam.intmodel import IntParams, model_dimension


def make_chain(arities, label=None):
    """Path graph 0-1-...-(n-1); the last vertex is the label by default."""
    label = len(arities) - 1 if label is None else label
    specs = tuple(
        VariableSpec(f"v{i}", a, role="label" if i == label else "feature")
        for i, a in enumerate(arities)
    )
    edges = tuple((i, i + 1) for i in range(len(arities) - 1))
    return StructureGraph(specs, edges)


def make_star(arities, label=None):
    """Star with vertex 0 at the center; the last leaf is the label by default."""
    label = len(arities) - 1 if label is None else label
    specs = tuple(
        VariableSpec(f"v{i}", a, role="label" if i == label else "feature")
        for i, a in enumerate(arities)
    )
    edges = tuple((0, i) for i in range(1, len(arities)))
    return StructureGraph(specs, edges)


def single_edge(arity_a=2, arity_b=2):
    return make_chain((arity_a, arity_b))


def prufer_tree(sequence, n):
    """Decode a Prufer sequence into the edge set of a labeled tree on n vertices."""
    degree = [1] * n
    for v in sequence:
        degree[v] += 1
    edges = []
    pool = sorted(v for v in range(n) if degree[v] == 1)
    for v in sequence:
        leaf = pool.pop(0)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            bisect.insort(pool, v)
    a, b = pool
    edges.append((min(a, b), max(a, b)))
    return tuple(edges)


def random_tree(rng: random.Random, max_vertices=6, max_arity=4):
    """Random labeled tree with random arities; single-vertex trees excluded."""
    n = rng.randint(2, max_vertices)
    if n == 2:
        edges = ((0, 1),)
    else:
        edges = prufer_tree([rng.randrange(n) for _ in range(n - 2)], n)
    label = rng.randrange(n)
    specs = tuple(
        VariableSpec(f"v{i}", rng.randint(2, max_arity), role="label" if i == label else "feature")
        for i in range(n)
    )
    return StructureGraph(specs, edges)


def random_params(rng: random.Random, structure, bits):
    d = model_dimension(structure)
    hi = (1 << bits) - 1
    return IntParams(structure, bits, tuple(rng.randint(0, hi) for _ in range(d)))


def random_evidence(rng: random.Random, structure, p_clamp=0.4):
    ev = {}
    for v in range(structure.n_vertices):
        if rng.random() < p_clamp:
            ev[v] = rng.randrange(structure.arity(v))
    return ev


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
