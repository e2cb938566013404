"""Bounded-height parallel push-relabel on undirected flow instances.

The driver runs a fixed number of phases (8 * ceil(log2 n)); each phase grants
every vertex a fresh sink budget of sink/(8 ceil(log2 n)) and repeats
push-then-relabel sweeps until the non-settled excess has at least halved.

All flow arithmetic is exact: inputs are integers, and the driver rescales
them once by the phase count so per-phase sink budgets stay integral.  The
output reports the scale factor alongside the scaled flow values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def phase_count(n: int) -> int:
    """Number of outer phases for an n-vertex instance."""
    return 8 * max(1, math.ceil(math.log2(max(2, n))))


@dataclass
class FlowInstance:
    """An undirected residual flow instance.

    ``edges`` lists undirected edges (u, v); capacities are directional
    residual capacities (cap_fwd along u->v, cap_bwd along v->u).  ``source``
    and ``sink`` are per-vertex integers; ``h`` is the height cap.
    """

    n: int
    edges: list[tuple[int, int]]
    cap_fwd: np.ndarray
    cap_bwd: np.ndarray
    source: np.ndarray
    sink: np.ndarray
    h: int

    def __post_init__(self):
        self.cap_fwd = np.asarray(self.cap_fwd, dtype=object)
        self.cap_bwd = np.asarray(self.cap_bwd, dtype=object)
        self.source = np.asarray(self.source, dtype=object)
        self.sink = np.asarray(self.sink, dtype=object)
        for name in ("cap_fwd", "cap_bwd", "source", "sink"):
            arr = getattr(self, name)
            if any(int(x) != x for x in arr.flat):
                raise ValueError(f"{name} must be integral")
            if any(x < 0 for x in arr.flat):
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def uniform(cls, n, edges, cap, source, sink, h) -> "FlowInstance":
        m = len(edges)
        return cls(
            n=n,
            edges=list(edges),
            cap_fwd=np.full(m, int(cap), dtype=object),
            cap_bwd=np.full(m, int(cap), dtype=object),
            source=np.asarray(source, dtype=object),
            sink=np.asarray(sink, dtype=object),
            h=int(h),
        )

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


@dataclass
class UnitFlowState:
    """Result of a run: scaled flow, labels, absorbed amounts and excess.

    ``flow[e] / scale`` is the flow pushed along edge e in the u->v direction
    (negative means v->u).  ``absorbed`` and ``excess`` share the scale.
    """

    inst: FlowInstance
    scale: int
    flow: list
    labels: np.ndarray
    absorbed: list
    excess: list
    source_units: list = field(default_factory=list)  # initial excess, in scale units
    sink_units: list = field(default_factory=list)  # total sink capacity, in scale units
    cap_fwd_units: list = field(default_factory=list)
    cap_bwd_units: list = field(default_factory=list)
    phases_run: int = 0
    while_iterations: list[int] = field(default_factory=list)
    touched_edges: int = 0

    def flow_value(self, e: int) -> float:
        return self.flow[e] / self.scale

    def to_json(self) -> str:
        return json.dumps(
            {
                "scale": self.scale,
                "flow": [int(f) for f in self.flow],
                "labels": self.labels.tolist(),
                "excess": [int(x) for x in self.excess],
                "absorbed": [int(a) for a in self.absorbed],
            }
        )


class _Run:
    """Mutable state for one ParallelUnitFlow execution."""

    def __init__(self, inst: FlowInstance, prescaled_by: int | None = None):
        self.inst = inst
        self.P = phase_count(inst.n)
        if prescaled_by is None:
            self.scale = self.P
            mult = self.P
        else:
            # caller already works in finer units; sink must divide evenly
            if prescaled_by % self.P != 0:
                raise ValueError("prescale factor must be a multiple of the phase count")
            self.scale = prescaled_by
            mult = 1
        n, m = inst.n, len(inst.edges)
        self.cap_fwd = [int(c) * mult for c in inst.cap_fwd]
        self.cap_bwd = [int(c) * mult for c in inst.cap_bwd]
        self.sink_total = [int(s) * mult for s in inst.sink]
        self.ex = [int(d) * mult for d in inst.source]
        self.source_units = list(self.ex)
        self.flow = [0] * m
        self.labels = np.zeros(n, dtype=np.int64)
        self.absorbed = [0] * n
        self.phase_avail = [0] * n
        # adjacency: vertex -> list of (edge id, direction) with direction +1
        # meaning the vertex is the tail (pushes add to flow)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e, (u, v) in enumerate(inst.edges):
            self.adj[u].append((e, +1))
            self.adj[v].append((e, -1))
        for a in self.adj:
            a.sort()  # ascending edge id: deterministic push order
        self.phases_run = 0
        self.while_iterations: list[int] = []
        self.touched = 0

    # -- helpers ----------------------------------------------------------

    def residual(self, e: int, direction: int):
        if direction > 0:
            return self.cap_fwd[e] - self.flow[e]
        return self.cap_bwd[e] + self.flow[e]

    def _absorb(self, v: int) -> None:
        take = min(self.phase_avail[v], self.ex[v])
        if take > 0:
            self.absorbed[v] += take
            self.phase_avail[v] -= take
            self.ex[v] -= take

    def nonsettled_excess(self):
        h = self.inst.h
        return sum(x for v, x in enumerate(self.ex) if x > 0 and self.labels[v] != h + 1)

    # -- one push-then-relabel sweep --------------------------------------

    def push_then_relabel(self) -> None:
        h = self.inst.h
        labels = self.labels
        active_levels = sorted(
            {int(labels[v]) for v in range(self.inst.n) if self.ex[v] > 0 and 1 <= labels[v] <= h},
            reverse=True,
        )
        for j in active_levels:
            for v in range(self.inst.n):
                if labels[v] != j or self.ex[v] <= 0:
                    continue
                for e, direction in self.adj[v]:
                    if self.ex[v] <= 0:
                        break
                    u, w = self.inst.edges[e]
                    other = w if direction > 0 else u
                    if labels[other] != j - 1:
                        continue
                    res = self.residual(e, direction)
                    if res <= 0:
                        continue
                    amt = min(self.ex[v], res)
                    self.flow[e] += direction * amt
                    self.ex[v] -= amt
                    self.ex[other] += amt
                    self._absorb(other)
                    self.touched += 1
        # relabel: stuck vertices with no sink budget rise one level
        for v in range(self.inst.n):
            if self.ex[v] <= 0 or self.phase_avail[v] > 0 or labels[v] > h:
                continue
            lv = int(labels[v])
            blocked = True
            if lv >= 1:
                for e, direction in self.adj[v]:
                    u, w = self.inst.edges[e]
                    other = w if direction > 0 else u
                    if labels[other] == lv - 1 and self.residual(e, direction) > 0:
                        blocked = False
                        break
            if blocked:
                labels[v] = min(lv + 1, h + 1)

    # -- driver ------------------------------------------------------------

    def run(self) -> UnitFlowState:
        h = self.inst.h
        for _ in range(self.P):
            self.phases_run += 1
            # a vertex may spend its whole remaining sink capacity in any
            # phase; it only relabels once that capacity is exhausted, so
            # labelled vertices always satisfy the per-phase absorption bound
            self.phase_avail = [s - a for s, a in zip(self.sink_total, self.absorbed)]
            for v in range(self.inst.n):
                if self.ex[v] > 0:
                    self._absorb(v)
            x_i = self.nonsettled_excess()
            iters = 0
            if x_i > 0:
                while 2 * self.nonsettled_excess() >= x_i:
                    self.push_then_relabel()
                    iters += 1
                    if iters > 10_000_000:  # pragma: no cover
                        raise RuntimeError("push-relabel failed to make progress")
            self.while_iterations.append(iters)
        # settled vertices are reported at level h
        self.labels[self.labels == h + 1] = h
        return UnitFlowState(
            inst=self.inst,
            scale=self.scale,
            flow=self.flow,
            labels=self.labels,
            absorbed=self.absorbed,
            excess=self.ex,
            source_units=self.source_units,
            sink_units=self.sink_total,
            cap_fwd_units=self.cap_fwd,
            cap_bwd_units=self.cap_bwd,
            phases_run=self.phases_run,
            while_iterations=self.while_iterations,
            touched_edges=self.touched,
        )


def parallel_unit_flow(inst: FlowInstance, prescaled_by: int | None = None) -> UnitFlowState:
    """Run the full bounded-height routine; see module docstring."""
    return _Run(inst, prescaled_by=prescaled_by).run()


def audit_state(st: UnitFlowState) -> None:
    """Assert the output contract: saturation across level gaps, near-saturated
    sinks on labelled vertices, no excess below the top level, exact
    conservation, and capacity feasibility."""
    inst = st.inst
    h = inst.h
    n = inst.n
    labels = st.labels
    inflow = [0] * n
    outflow = [0] * n
    for e, (u, v) in enumerate(inst.edges):
        f = st.flow[e]
        assert -st.cap_bwd_units[e] <= f <= st.cap_fwd_units[e], f"capacity violated on edge {e}"
        if f > 0:
            outflow[u] += f
            inflow[v] += f
        elif f < 0:
            outflow[v] += -f
            inflow[u] += -f
        # (i) a level gap > 1 forces saturation in the downhill direction
        lu, lv = int(labels[u]), int(labels[v])
        if lu > lv + 1:
            assert f == st.cap_fwd_units[e], f"edge {e} not saturated across level gap"
        if lv > lu + 1:
            assert -f == st.cap_bwd_units[e], f"edge {e} not saturated across level gap"
    P = phase_count(inst.n)
    for v in range(n):
        # conservation
        assert st.source_units[v] + inflow[v] == outflow[v] + st.absorbed[v] + st.excess[v], (
            f"conservation violated at vertex {v}"
        )
        assert st.absorbed[v] <= st.sink_units[v]
        assert st.excess[v] >= 0
        # (ii) labelled vertices nearly saturated their sink
        if labels[v] >= 1:
            assert st.absorbed[v] >= st.sink_units[v] // P, (
                f"vertex {v} labelled but sink not nearly saturated"
            )
        # (iii) no excess strictly below the top level
        if labels[v] < h:
            assert st.excess[v] == 0, f"excess at low-level vertex {v}"
