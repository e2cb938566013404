"""Deterministic fixture generators: clique, dumbbell, random, grid.

Every generator routes a seeded random feasible flow to produce balanced
demands, so the emitted instances are always solvable.  Same (kind, params,
seed) yields a byte-identical DIMACS file.
"""

from __future__ import annotations

import numpy as np

from .graph import WeightedDigraph


class GeneratorError(ValueError):
    pass


def _with_random_demands(n, edges, cap, cost, rng) -> WeightedDigraph:
    f = rng.integers(0, np.asarray(cap) + 1)
    d = np.zeros(n, dtype=np.int64)
    for e, (a, b) in enumerate(edges):
        d[a] += f[e]
        d[b] -= f[e]
    return WeightedDigraph.build(n, edges, cap, cost, d)


def gen_clique(k: int, seed: int = 0, umax: int = 1, cmax: int = 8) -> WeightedDigraph:
    """Directed K_k: one arc per ordered pair, unit capacities by default."""
    if k < 2:
        raise GeneratorError("clique needs k >= 2")
    rng = np.random.default_rng(seed)
    edges = [(a, b) for a in range(k) for b in range(k) if a != b]
    m = len(edges)
    cap = np.full(m, umax, dtype=np.int64)
    cost = rng.integers(-cmax, cmax + 1, m)
    return _with_random_demands(k, edges, cap, cost, rng)


def gen_dumbbell(k: int, seed: int = 0, umax: int = 4, cmax: int = 8) -> WeightedDigraph:
    """Two directed K_k blocks joined by a single two-way bridge."""
    if k < 2:
        raise GeneratorError("dumbbell needs k >= 2")
    rng = np.random.default_rng(seed)
    edges = [(a, b) for a in range(k) for b in range(k) if a != b]
    edges += [(k + a, k + b) for a in range(k) for b in range(k) if a != b]
    edges += [(k - 1, k), (k, k - 1)]
    m = len(edges)
    cap = rng.integers(1, umax + 1, m)
    cost = rng.integers(-cmax, cmax + 1, m)
    return _with_random_demands(2 * k, edges, cap, cost, rng)


def gen_random(n: int, m: int, seed: int = 0, umax: int = 8,
               cmax: int = 8) -> WeightedDigraph:
    """Connected-ish random multigraph: a path backbone plus random arcs."""
    if n < 2 or m < n - 1:
        raise GeneratorError("random graph needs n >= 2 and m >= n - 1")
    rng = np.random.default_rng(seed)
    edges = [(v - 1, v) for v in range(1, n)]
    while len(edges) < m:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.append((int(a), int(b)))
    cap = rng.integers(1, umax + 1, m)
    cost = rng.integers(-cmax, cmax + 1, m)
    return _with_random_demands(n, edges, cap, cost, rng)


def gen_grid(rows: int, cols: int, seed: int = 0, umax: int = 8,
             cmax: int = 8) -> WeightedDigraph:
    """Directed grid: right and down arcs, plus a return arc corner-to-corner."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GeneratorError("grid needs at least two cells")
    rng = np.random.default_rng(seed)
    n = rows * cols
    vid = lambda r, c: r * cols + c  # noqa: E731
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < rows:
                edges.append((vid(r, c), vid(r + 1, c)))
    edges.append((n - 1, 0))
    m = len(edges)
    cap = rng.integers(1, umax + 1, m)
    cost = rng.integers(-cmax, cmax + 1, m)
    return _with_random_demands(n, edges, cap, cost, rng)


GENERATORS = {
    "clique": gen_clique,
    "dumbbell": gen_dumbbell,
    "random": gen_random,
    "grid": gen_grid,
}


def generate(kind: str, seed: int = 0, **params) -> WeightedDigraph:
    if kind not in GENERATORS:
        raise GeneratorError(f"unknown generator kind {kind!r}")
    return GENERATORS[kind](seed=seed, **params)
