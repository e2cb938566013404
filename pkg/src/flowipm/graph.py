"""Directed graphs with integer capacities/costs/demands, and their incidence matrices.

Everything downstream (expander decomposition, the IPM, the exact oracle) shares
these representations.  Graphs are immutable after construction; vertex and edge
ids are dense 0-based integers and parallel edges are kept distinct by edge id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    pass


class DimacsParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class WeightedDigraph:
    """A directed multigraph with integer edge capacities, costs and vertex demands.

    Invariants: no self-loops, cap >= 0, and (for min-cost-flow instances)
    demands summing to zero.  ``validate()`` checks these.
    """

    n: int
    edges: list[tuple[int, int]]
    cap: np.ndarray
    cost: np.ndarray
    demand: np.ndarray
    # filled lazily
    _out: list[list[int]] | None = field(default=None, repr=False)
    _in: list[list[int]] | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    @classmethod
    def build(cls, n, edges, cap, cost, demand=None) -> "WeightedDigraph":
        edges = [(int(a), int(b)) for a, b in edges]
        cap = np.asarray(cap, dtype=np.int64)
        cost = np.asarray(cost, dtype=np.int64)
        if demand is None:
            demand = np.zeros(n, dtype=np.int64)
        demand = np.asarray(demand, dtype=np.int64)
        g = cls(n=n, edges=edges, cap=cap, cost=cost, demand=demand)
        g.validate()
        return g

    def validate(self, require_balanced: bool = True) -> None:
        if len(self.cap) != self.m or len(self.cost) != self.m:
            raise GraphError("cap/cost length mismatch with edge list")
        if len(self.demand) != self.n:
            raise GraphError("demand length mismatch with vertex count")
        for e, (a, b) in enumerate(self.edges):
            if a == b:
                raise GraphError(f"self-loop at edge {e}: ({a},{b})")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise GraphError(f"edge {e} references vertex out of range: ({a},{b})")
        if np.any(self.cap < 0):
            raise GraphError("negative capacity")
        if require_balanced and int(self.demand.sum()) != 0:
            raise GraphError(f"demands sum to {int(self.demand.sum())}, expected 0")

    def out_edges(self, v: int) -> list[int]:
        self._build_adj()
        return self._out[v]

    def in_edges(self, v: int) -> list[int]:
        self._build_adj()
        return self._in[v]

    def _build_adj(self) -> None:
        if self._out is None:
            out = [[] for _ in range(self.n)]
            inn = [[] for _ in range(self.n)]
            for e, (a, b) in enumerate(self.edges):
                out[a].append(e)
                inn[b].append(e)
            self._out, self._in = out, inn

    def tails(self) -> np.ndarray:
        return np.fromiter((a for a, _ in self.edges), dtype=np.int64, count=self.m)

    def heads(self) -> np.ndarray:
        return np.fromiter((b for _, b in self.edges), dtype=np.int64, count=self.m)

    def to_json(self) -> str:
        """Debug dump of the full instance."""
        return json.dumps(
            {
                "n": self.n,
                "m": self.m,
                "edges": [list(e) for e in self.edges],
                "cap": self.cap.tolist(),
                "cost": self.cost.tolist(),
                "demand": self.demand.tolist(),
            }
        )


@dataclass(frozen=True)
class ProblemBounds:
    """Magnitude bounds of an instance; W = max(||c||_inf, ||d||_inf, ||u||_inf)."""

    W: int
    cost_scale: int = 1

    def __post_init__(self):
        if self.W < 1 or self.cost_scale < 1:
            raise GraphError("ProblemBounds requires W >= 1 and cost_scale >= 1")

    @classmethod
    def of(cls, g: WeightedDigraph, cost_scale: int = 1) -> "ProblemBounds":
        W = max(
            1,
            int(np.abs(g.cost).max(initial=0)),
            int(np.abs(g.demand).max(initial=0)),
            int(g.cap.max(initial=0)),
        )
        return cls(W=W, cost_scale=cost_scale)


class IncidenceMatrix:
    """Edge-vertex incidence matrix with one column removed to force full rank.

    Row e has -1 at tail(e) and +1 at head(e); the column of ``removed`` is
    dropped.  Columns are re-indexed densely: vertex v maps to column v if
    v < removed, else v - 1.
    """

    def __init__(self, g: WeightedDigraph, removed: int | None = None):
        if removed is None:
            removed = g.n - 1
        if not (0 <= removed < g.n):
            raise GraphError(f"removed column {removed} out of range")
        self.graph = g
        self.removed = removed
        self.ncols = g.n - 1
        rows, cols, vals = [], [], []
        for e, (a, b) in enumerate(g.edges):
            if a != removed:
                rows.append(e)
                cols.append(self.col_of(a))
                vals.append(-1.0)
            if b != removed:
                rows.append(e)
                cols.append(self.col_of(b))
                vals.append(1.0)
        self._csr = sp.csr_matrix(
            (vals, (rows, cols)), shape=(g.m, self.ncols), dtype=np.float64
        )
        self._csc = self._csr.tocsc()

    def col_of(self, v: int) -> int:
        if v == self.removed:
            raise GraphError("removed vertex has no column")
        return v if v < self.removed else v - 1

    def vertex_of(self, col: int) -> int:
        return col if col < self.removed else col + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.graph.m, self.ncols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A @ x: maps a reduced vertex vector to an edge vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise GraphError(f"matvec dimension mismatch: {x.shape} vs {(self.ncols,)}")
        return self._csr @ x

    def apply_t(self, y: np.ndarray) -> np.ndarray:
        """A^T @ y: maps an edge vector to a reduced vertex vector."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.graph.m,):
            raise GraphError(f"matvec dimension mismatch: {y.shape} vs {(self.graph.m,)}")
        return self._csc.T @ y

    def row_entries(self, e: int) -> list[tuple[int, float]]:
        """The <= 2 nonzeros of edge row e as (column, value) pairs."""
        a, b = self.graph.edges[e]
        out = []
        if a != self.removed:
            out.append((self.col_of(a), -1.0))
        if b != self.removed:
            out.append((self.col_of(b), 1.0))
        return out

    def special_rows(self) -> list[int]:
        """Edges incident to the removed vertex (rows with a single nonzero)."""
        r = self.removed
        return [e for e, (a, b) in enumerate(self.graph.edges) if a == r or b == r]

    def dense(self) -> np.ndarray:
        return self._csr.toarray()

    def sparse(self) -> sp.csr_matrix:
        return self._csr


def incidence(g: WeightedDigraph, removed: int | None = None) -> IncidenceMatrix:
    return IncidenceMatrix(g, removed)


# ---------------------------------------------------------------------------
# DIMACS "min" format
# ---------------------------------------------------------------------------

def load_dimacs(path) -> WeightedDigraph:
    """Parse a DIMACS min-cost-flow file.

    Recognised lines: ``c`` comments, ``p min N M``, ``n ID FLOW`` (demand;
    DIMACS supplies > 0, demands < 0), ``a SRC DST LOW CAP COST``.  Node ids
    are 1-based in the file.  Lower bounds must be 0.
    """
    n = None
    m_declared = None
    edges: list[tuple[int, int]] = []
    caps: list[int] = []
    costs: list[int] = []
    demand = None

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            parts = line.split()
            kind = parts[0]
            if kind == "p":
                if len(parts) != 4 or parts[1] != "min":
                    raise DimacsParseError(lineno, f"bad problem line: {line!r}")
                n, m_declared = int(parts[2]), int(parts[3])
                demand = np.zeros(n, dtype=np.int64)
            elif kind == "n":
                if demand is None:
                    raise DimacsParseError(lineno, "node line before problem line")
                if len(parts) != 3:
                    raise DimacsParseError(lineno, f"bad node line: {line!r}")
                v = int(parts[1]) - 1
                if not (0 <= v < n):
                    raise DimacsParseError(lineno, f"node id {v + 1} out of range")
                # DIMACS convention: positive supply means flow leaves the node.
                demand[v] += int(parts[2])
            elif kind == "a":
                if demand is None:
                    raise DimacsParseError(lineno, "arc line before problem line")
                if len(parts) != 6:
                    raise DimacsParseError(lineno, f"bad arc line: {line!r}")
                a, b = int(parts[1]) - 1, int(parts[2]) - 1
                low, cap, cost = int(parts[3]), int(parts[4]), int(parts[5])
                if low != 0:
                    raise DimacsParseError(lineno, "nonzero lower bounds unsupported")
                if not (0 <= a < n and 0 <= b < n):
                    raise DimacsParseError(lineno, "arc references unknown node id")
                edges.append((a, b))
                caps.append(cap)
                costs.append(cost)
            else:
                raise DimacsParseError(lineno, f"unknown line kind {kind!r}")

    if n is None:
        raise DimacsParseError(0, "missing problem line")
    if m_declared is not None and m_declared != len(edges):
        raise DimacsParseError(0, f"declared {m_declared} arcs, found {len(edges)}")
    if int(demand.sum()) != 0:
        raise GraphError(f"demand imbalance: demands sum to {int(demand.sum())}")
    g = WeightedDigraph(
        n=n,
        edges=edges,
        cap=np.asarray(caps, dtype=np.int64),
        cost=np.asarray(costs, dtype=np.int64),
        demand=demand,
    )
    g.validate()
    return g


def save_dimacs(g: WeightedDigraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"p min {g.n} {g.m}\n")
        for v in range(g.n):
            if g.demand[v] != 0:
                fh.write(f"n {v + 1} {int(g.demand[v])}\n")
        for e, (a, b) in enumerate(g.edges):
            fh.write(f"a {a + 1} {b + 1} 0 {int(g.cap[e])} {int(g.cost[e])}\n")
