"""Certify-or-cut trimming of a nearly expanding vertex set.

Given an ambient graph G and a vertex set A whose induced subgraph is close to
an expander, repeated bounded-height flow rounds either route the boundary
demand (2/phi units per boundary edge) into degree-proportional sinks --
certifying A -- or expose a level cut of weakly attached vertices, which is
removed before the next round.

Flow values are rationals with denominator dividing a fixed per-call scale
(a power of two times the denominator of phi), stored as scaled integers so
every invariant check is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .unitflow import FlowInstance, parallel_unit_flow, phase_count


def _log2_ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(max(2, n))))


@dataclass(frozen=True)
class TrimConfig:
    """Derived constants for one trimming call on an n-vertex, m-edge graph."""

    phi: float
    n: int
    m: int
    h_cap: int | None = None
    height_const: float = 5120.0
    sink_div: int | None = None  # per-round sink = deg / sink_div; default log2 n

    @property
    def ln(self) -> int:
        return _log2_ceil(self.n)

    @property
    def h(self) -> int:
        full = math.ceil(
            self.height_const / self.phi * self.ln**3 * max(1.0, math.log(max(2, self.m)))
        )
        if self.h_cap is not None:
            return min(full, int(self.h_cap))
        return full

    @property
    def phi_frac(self) -> Fraction:
        return Fraction(self.phi).limit_denominator(10**6)

    @property
    def eff_sink_div(self) -> int:
        return self.sink_div if self.sink_div is not None else self.ln

    @property
    def scale(self) -> int:
        # fine units: 8 * ln^3 * sink_div * numerator(phi) makes capacities
        # (1/phi per edge), sources (2/phi per boundary edge) and per-round
        # sinks (deg/sink_div, split across 8*ln phases) all integral
        return 8 * self.ln**3 * self.eff_sink_div * self.phi_frac.numerator

    @property
    def cap_units(self) -> int:
        return 8 * self.ln**3 * self.eff_sink_div * self.phi_frac.denominator

    def source_units(self, boundary_deg: int) -> int:
        return 2 * self.cap_units * boundary_deg

    def round_sink_units(self, deg: int) -> int:
        # deg / sink_div per round, in fine units
        return deg * 8 * self.ln**3 * self.phi_frac.numerator

    @classmethod
    def desk(cls, phi: float, n: int, m: int) -> "TrimConfig":
        # generous sink budgets and a modest height cap keep small instances
        # routable and fast; the formula-faithful values are for large sparse
        # graphs where phi is polylogarithmically small
        ln = _log2_ceil(n)
        return cls(phi=phi, n=n, m=m, h_cap=8 * ln * ln, sink_div=max(1, ln // 2))


@dataclass
class TrimResult:
    removed: set
    kept: set
    flow: dict  # edge index (into the ambient edge list) -> scaled flow value
    scale: int
    rounds: int
    cut_trace: list = field(default_factory=list)
    while_iterations: int = 0

    def trace_json(self) -> str:
        return "\n".join(
            json.dumps({"round": r, "cut_level": lvl, "cut": sorted(cut)})
            for r, lvl, cut in self.cut_trace
        )


def trimming(n: int, edges: list, A, phi: float, cfg: TrimConfig | None = None) -> TrimResult:
    """Trim A inside the ambient graph (n, edges); see module docstring.

    ``edges`` are undirected pairs (parallel edges allowed).  Returns the
    removed vertices A minus A', the kept set A', and the certifying flow on
    the kept part.
    """
    A0 = set(A)
    cfg = cfg or TrimConfig.desk(phi, n, len(edges))
    if not A0:
        return TrimResult(removed=set(), kept=set(), flow={}, scale=cfg.scale, rounds=0)
    F = cfg.scale
    h = cfg.h
    P = phase_count(n)
    assert F % P == 0
    deg_G = [0] * n
    for u, v in edges:
        deg_G[u] += 1
        deg_G[v] += 1

    cur = set(A0)
    flow: dict[int, int] = {}
    absorbed = [0] * n
    rounds = 0
    cut_trace: list = []
    while_total = 0

    def inner_edges():
        return [e for e, (u, v) in enumerate(edges) if u in cur and v in cur]

    def net_flux():
        """(inflow - outflow) per vertex from the retained flow inside cur."""
        net = [0] * n
        for e, f in flow.items():
            u, v = edges[e]
            net[u] -= f
            net[v] += f
        return net

    def demand(v):
        # 2/phi per boundary edge of the current set
        bdeg = sum(
            1
            for e, _ in _incident(v)
            if (edges[e][0] not in cur or edges[e][1] not in cur)
        )
        return cfg.source_units(bdeg)

    incident: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edges):
        incident[u].append((e, +1))
        incident[v].append((e, -1))

    def _incident(v):
        return incident[v]

    def restore_preflow():
        """Drop flow on edges leaving cur, then cancel any overdrafts so every
        vertex's excess is nonnegative again."""
        for e in list(flow):
            u, v = edges[e]
            if u not in cur or v not in cur:
                del flow[e]
        changed = True
        while changed:
            changed = False
            net = net_flux()
            for v in cur:
                ex = demand(v) + net[v] - absorbed[v]
                if ex >= 0:
                    continue
                give_back = min(absorbed[v], -ex)
                absorbed[v] -= give_back
                ex += give_back
                if ex >= 0:
                    continue
                deficit = -ex
                for e, sgn in incident[v]:
                    if deficit == 0:
                        break
                    f = flow.get(e, 0)
                    outgoing = sgn * f < 0  # flow leaves v along this edge
                    if not outgoing:
                        continue
                    take = min(deficit, abs(f))
                    flow[e] = f + sgn * take
                    if flow[e] == 0:
                        del flow[e]
                    deficit -= take
                    changed = True
                assert deficit == 0, "could not restore preflow"

    while cur:
        rounds += 1
        if rounds > n + 5:  # pragma: no cover
            raise RuntimeError("trimming failed to terminate")
        net = net_flux()
        source = [0] * n
        sink = [0] * n
        for v in cur:
            ex = demand(v) + net[v] - absorbed[v]
            assert ex >= 0
            source[v] = ex
            sink[v] = cfg.round_sink_units(deg_G[v])
        sub = inner_edges()
        cap_fwd = [cfg.cap_units - flow.get(e, 0) for e in sub]
        cap_bwd = [cfg.cap_units + flow.get(e, 0) for e in sub]
        inst = FlowInstance(
            n=n,
            edges=[edges[e] for e in sub],
            cap_fwd=np.asarray(cap_fwd, dtype=object),
            cap_bwd=np.asarray(cap_bwd, dtype=object),
            source=np.asarray(source, dtype=object),
            sink=np.asarray(sink, dtype=object),
            h=h,
        )
        st = parallel_unit_flow(inst, prescaled_by=F)
        while_total += sum(st.while_iterations)
        for k, e in enumerate(sub):
            f = flow.get(e, 0) + st.flow[k]
            if f:
                flow[e] = f
            elif e in flow:
                del flow[e]
        for v in cur:
            absorbed[v] += st.absorbed[v]
        if sum(st.excess[v] for v in cur) == 0:
            break
        # level cut: grow S downward from the top label until the residual
        # edges leaving S fall below (5 ln m / h) * deg_G(S)
        labels = st.labels
        residual_fwd = {e: cfg.cap_units - flow.get(e, 0) for e in sub}
        residual_bwd = {e: cfg.cap_units + flow.get(e, 0) for e in sub}
        order = sorted(cur, key=lambda v: -int(labels[v]))
        S: set = set()
        degS = 0
        best = None
        thresh = 5.0 * math.log(max(2, len(edges))) / h
        idx = 0
        lvl = h
        while lvl >= 0:
            while idx < len(order) and int(labels[order[idx]]) >= lvl:
                S.add(order[idx])
                degS += deg_G[order[idx]]
                idx += 1
            if S:
                crossing = 0
                for e in sub:
                    u, v = edges[e]
                    if u in S and v not in S and residual_fwd[e] > 0:
                        crossing += 1
                    elif v in S and u not in S and residual_bwd[e] > 0:
                        crossing += 1
                if crossing < thresh * degS:
                    best = (h - lvl, set(S))
                    break
            if idx >= len(order):
                break
            lvl = int(labels[order[idx]])
        assert best is not None, "level cut scan found no admissible cut"
        cut_level, cut = best
        cut_trace.append((rounds, cut_level, cut))
        cur -= cut
        restore_preflow()

    return TrimResult(
        removed=A0 - cur,
        kept=cur,
        flow=dict(flow),
        scale=F,
        rounds=rounds,
        cut_trace=cut_trace,
        while_iterations=while_total,
    )


def certificate_check(n: int, edges: list, kept, flow: dict, scale: int, phi: float) -> bool:
    """Verify that ``flow`` (scaled by ``scale``) certifies ``kept``: it routes
    2/phi units per lost incident edge into sinks of at most deg_G(v), within
    per-edge capacity 2*log2(n)/phi."""
    kept = set(kept)
    deg_G = [0] * n
    deg_in = [0] * n
    for u, v in edges:
        deg_G[u] += 1
        deg_G[v] += 1
        if u in kept and v in kept:
            deg_in[u] += 1
            deg_in[v] += 1
    inv_phi = Fraction(phi).limit_denominator(10**6) ** -1
    cap = 2 * _log2_ceil(n) * inv_phi * scale
    net = [0] * n
    for e, f in flow.items():
        u, v = edges[e]
        if u not in kept or v not in kept:
            return False
        if abs(f) > cap:
            return False
        net[u] -= f
        net[v] += f
    for v in kept:
        demand = 2 * inv_phi * (deg_G[v] - deg_in[v]) * scale
        absorbed = demand + net[v]
        if absorbed < 0 or absorbed > deg_G[v] * scale:
            return False
    return True
