"""Edge-partitioned expander decomposition: a static recursive sweep-cut
partitioner and a fully dynamic tiered wrapper.

Static: split each connected piece that fails the conductance certification
along its best spectral sweep cut; edges crossing the cut are deferred to the
next round.  Each round resolves at least half of its edges, so the number of
rounds stays logarithmic.

Dynamic: tier i holds at most 2^i edges.  A batch insert merges the batch and
all tiers up to the smallest one with room, and rebuilds that tier's
decomposition statically.  A batch delete routes per-cluster sub-batches to
each cluster's pruning structure; edges torn off pruned vertices re-enter at
tier 1.

Certification policy (recorded in audits): exhaustive cut enumeration for
clusters of at most 14 vertices; the spectral bound lambda_2/2 (the easy
Cheeger direction) for larger ones.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .pruning import BoostWrapper

EXHAUSTIVE_LIMIT = 14


class DecompositionError(RuntimeError):
    pass


# -- conductance certification ----------------------------------------------


def conductance_exhaustive(vertices, edges) -> float:
    verts = list(vertices)
    k = len(verts)
    if k < 2 or not edges:
        return math.inf
    idx = {v: i for i, v in enumerate(verts)}
    deg = np.zeros(k, dtype=np.int64)
    ue = np.array([idx[u] for u, _ in edges], dtype=np.int64)
    ve = np.array([idx[v] for _, v in edges], dtype=np.int64)
    np.add.at(deg, ue, 1)
    np.add.at(deg, ve, 1)
    vol_all = int(deg.sum())
    # vertex 0 stays outside S: each cut is enumerated once
    bits = np.arange(1, 1 << (k - 1), dtype=np.uint64)
    member = (bits[:, None] >> np.arange(k - 1, dtype=np.uint64)) & 1  # mask x vertex 1..k-1
    member = member.astype(bool)
    vol = member @ deg[1:]
    full = np.concatenate([np.zeros((len(bits), 1), dtype=bool), member], axis=1)
    cut = (full[:, ue] ^ full[:, ve]).sum(axis=1)
    denom = np.minimum(vol, vol_all - vol)
    ok = denom > 0
    if not np.any(ok):
        return math.inf
    return float(np.min(cut[ok] / denom[ok]))


def lambda2_normalized(vertices, edges) -> float:
    verts = list(vertices)
    k = len(verts)
    if k < 2:
        return math.inf
    idx = {v: i for i, v in enumerate(verts)}
    adj = np.zeros((k, k))
    for u, v in edges:
        adj[idx[u], idx[v]] += 1
        adj[idx[v], idx[u]] += 1
    deg = adj.sum(axis=1)
    if np.any(deg == 0):
        return 0.0
    dinv = 1.0 / np.sqrt(deg)
    L = np.eye(k) - dinv[:, None] * adj * dinv[None, :]
    return float(np.sort(np.linalg.eigvalsh(L))[1])


# conductance/eigen results only depend on the (multi)graph, not on the
# threshold, and identical clusters recur across tier rebuilds; memoize them
_CERT_CACHE: dict = {}
_SWEEP_CACHE: dict = {}
_CACHE_MAX = 1 << 18


def _cluster_key(verts, edges):
    return (tuple(verts), tuple(sorted(edges)))


def certify(vertices, edges, threshold: float) -> tuple[bool, str, float]:
    """(passes, policy name, measured value) for one cluster."""
    verts = sorted(vertices)
    if len(verts) <= 1 or not edges:
        return True, "trivial", math.inf
    key = _cluster_key(verts, edges)
    hit = _CERT_CACHE.get(key)
    if hit is None:
        if len(verts) <= EXHAUSTIVE_LIMIT:
            hit = ("exhaustive", conductance_exhaustive(verts, edges))
        else:
            hit = ("spectral", lambda2_normalized(verts, edges) / 2.0)
        if len(_CERT_CACHE) >= _CACHE_MAX:
            _CERT_CACHE.clear()
        _CERT_CACHE[key] = hit
    policy, val = hit
    return val >= threshold, policy, val


def sweep_cut(vertices, edges):
    """Best-conductance prefix cut along the Fiedler order; returns the side
    containing the first prefix."""
    verts = sorted(vertices)
    key = _cluster_key(verts, edges)
    hit = _SWEEP_CACHE.get(key)
    if hit is not None:
        return set(hit)
    k = len(verts)
    idx = {v: i for i, v in enumerate(verts)}
    adj = np.zeros((k, k))
    deg = np.zeros(k)
    for u, v in edges:
        adj[idx[u], idx[v]] += 1
        adj[idx[v], idx[u]] += 1
        deg[idx[u]] += 1
        deg[idx[v]] += 1
    dinv = 1.0 / np.sqrt(np.maximum(deg, 1e-12))
    L = np.eye(k) - dinv[:, None] * adj * dinv[None, :]
    w, V = np.linalg.eigh(L)
    fiedler = dinv * V[:, np.argsort(w)[1]]
    order = np.argsort(fiedler)
    vol_all = deg.sum()
    best, best_cut = None, math.inf
    inside = set()
    vol = 0.0
    cut = 0.0
    for t in range(k - 1):
        i = int(order[t])
        vol += deg[i]
        cut += adj[i].sum() - 2 * adj[i, list(inside)].sum() if inside else adj[i].sum()
        inside.add(i)
        denom = min(vol, vol_all - vol)
        if denom <= 0:
            continue
        phi = cut / denom
        if phi < best_cut:
            best_cut = phi
            best = set(inside)
    assert best is not None
    side = frozenset(verts[i] for i in best)
    if len(_SWEEP_CACHE) >= _CACHE_MAX:
        _SWEEP_CACHE.clear()
    _SWEEP_CACHE[key] = side
    return set(side)


# -- static decomposition ----------------------------------------------------


@dataclass
class Cluster:
    """One certified piece: its vertices, edge ids, and a pruning structure."""

    vertices: set
    edge_ids: list
    endpoints: dict  # edge id -> (u, v)
    phi: float
    policy: str = ""
    measured: float = math.inf
    _wrapper: BoostWrapper | None = None

    def edges(self):
        return [self.endpoints[e] for e in self.edge_ids]

    def wrapper(self) -> BoostWrapper:
        if self._wrapper is None:
            # pruning works on a compact local vertex space
            local = {v: i for i, v in enumerate(sorted(self.vertices))}
            self._back = {i: v for v, i in local.items()}
            base = [(local[u], local[v]) for u, v in self.edges()]
            self._wrapper = BoostWrapper(len(local), base, self.phi)
            self._local = local
        return self._wrapper

    def live_edge_ids(self) -> list:
        if self._wrapper is None:
            return list(self.edge_ids)
        keep = self._wrapper.remaining_edges()
        return [self.edge_ids[i] for i in keep]

    def live_vertices(self) -> set:
        if self._wrapper is None:
            return set(self.vertices)
        return {self._back[i] for i in self._wrapper.vertices if i in self._back}


def _components(edge_items):
    """Split (eid, (u, v)) items into connected components."""
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, (u, v) in edge_items:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    comps: dict = {}
    for eid, (u, v) in edge_items:
        comps.setdefault(find(u), []).append((eid, (u, v)))
    return list(comps.values())


def static_decompose(edge_items, phi: float, threshold: float | None = None,
                     max_rounds: int | None = None) -> list[Cluster]:
    """Partition edges (list of (eid, (u, v))) into certified clusters."""
    if not (0 < phi <= 0.5):
        raise ValueError("phi must be in (0, 1/2]")
    if not edge_items:
        return []
    thr = threshold if threshold is not None else phi
    m0 = len(edge_items)
    cap = max_rounds if max_rounds is not None else 4 * math.ceil(math.log2(m0 + 1)) + 8
    clusters: list[Cluster] = []
    pending = list(edge_items)
    rounds = 0
    while pending:
        rounds += 1
        if rounds > cap:
            raise DecompositionError(
                f"decomposition did not certify after {cap} rounds "
                f"({len(pending)} edges left)"
            )
        leftover: list = []
        work = _components(pending)
        while work:
            comp = work.pop()
            verts = sorted({v for _, e in comp for v in e})
            ok, policy, val = certify(verts, [e for _, e in comp], thr)
            if ok:
                clusters.append(
                    Cluster(
                        vertices=set(verts),
                        edge_ids=[eid for eid, _ in comp],
                        endpoints={eid: e for eid, e in comp},
                        phi=phi,
                        policy=policy,
                        measured=val,
                    )
                )
                continue
            side = sweep_cut(verts, [e for _, e in comp])
            inside = [(eid, e) for eid, e in comp if e[0] in side and e[1] in side]
            outside = [(eid, e) for eid, e in comp if e[0] not in side and e[1] not in side]
            crossing = [
                (eid, e) for eid, e in comp if (e[0] in side) != (e[1] in side)
            ]
            assert crossing, "sweep cut produced no crossing edges"
            leftover.extend(crossing)
            for part in (inside, outside):
                if part:
                    work.extend(_components(part))
        if leftover:
            assert len(leftover) <= max(1, len(pending)) , "leftover grew"
        pending = leftover
    return clusters


# -- dynamic wrapper ---------------------------------------------------------


@dataclass
class TierState:
    index: int
    clusters: list = field(default_factory=list)
    rebuilds: int = 0
    last_insert_tick: int = -1

    def live_size(self) -> int:
        return sum(len(c.live_edge_ids()) for c in self.clusters)

    @property
    def capacity(self) -> int:
        return 2**self.index


class DynamicDecomposition:
    """Tiered dynamic expander decomposition over a multigraph on n vertices."""

    def __init__(self, n: int, phi: float):
        self.n = n
        self.phi = phi
        self.tiers: dict[int, TierState] = {}
        self.endpoints: dict[int, tuple] = {}  # live edge id -> (u, v)
        self._next_eid = 0
        self.tick = 0
        self.lifetime_log: list = []

    # certification threshold for maintained (possibly pruned) clusters
    def cert_threshold(self) -> float:
        return self.phi / (6 * math.log2(max(4, self.n)))

    def live_edges(self) -> dict:
        out = {}
        for tier in self.tiers.values():
            for c in tier.clusters:
                for eid in c.live_edge_ids():
                    out[eid] = c.endpoints[eid]
        return out

    # -- updates --------------------------------------------------------

    def insert(self, batch) -> list[int]:
        """Insert edges (u, v); returns their assigned edge ids."""
        self.tick += 1
        items = []
        for u, v in batch:
            if u == v:
                raise ValueError("self-loops are not supported")
            eid = self._next_eid
            self._next_eid += 1
            self.endpoints[eid] = (u, v)
            items.append((eid, (u, v)))
        if items:
            self._cascade_insert(items)
        return [eid for eid, _ in items]

    def _cascade_insert(self, items) -> None:
        merged = list(items)
        i = 1
        while True:
            lower = sum(
                self.tiers[j].live_size() for j in self.tiers if j <= i
            )
            if 2**i > len(items) + lower:
                break
            i += 1
        for j in list(self.tiers):
            if j <= i:
                for c in self.tiers[j].clusters:
                    merged.extend((eid, c.endpoints[eid]) for eid in c.live_edge_ids())
                del self.tiers[j]
        tier = TierState(index=i)
        tier.clusters = static_decompose(merged, self.phi)
        tier.rebuilds += 1
        if tier.last_insert_tick >= 0:
            self.lifetime_log.append((i, self.tick - tier.last_insert_tick))
        tier.last_insert_tick = self.tick
        self.tiers[i] = tier
        assert tier.live_size() <= tier.capacity

    def delete(self, eids) -> list[int]:
        """Delete edges by id; returns ids of edges recycled into tier 1."""
        self.tick += 1
        eids = set(eids)
        for eid in eids:
            if eid not in self.endpoints:
                raise KeyError(f"edge {eid} not present")
        recycled: list = []
        for tier in list(self.tiers.values()):
            for c in tier.clusters:
                local_hits = [
                    k for k, eid in enumerate(c.edge_ids) if eid in eids
                ]
                if not local_hits:
                    continue
                w = c.wrapper()
                live_before = set(c.live_edge_ids())
                w.prune_batch(local_hits)
                live_after = set(c.live_edge_ids())
                torn = live_before - live_after - eids
                ok, _, _ = certify(
                    c.live_vertices(), [c.endpoints[e] for e in live_after],
                    self.cert_threshold(),
                )
                if not ok:
                    torn |= live_after
                    # cluster failed certification: recycle everything
                    c.edge_ids = []
                    c._wrapper = None
                    c.vertices = set()
                recycled.extend(sorted(torn))
        for eid in eids:
            del self.endpoints[eid]
        if recycled:
            items = [(eid, self.endpoints[eid]) for eid in recycled]
            self._drop_edges(set(recycled))
            self._cascade_insert(items)
        return recycled

    def _drop_edges(self, eids: set) -> None:
        for tier in self.tiers.values():
            for c in tier.clusters:
                if any(e in eids for e in c.edge_ids):
                    keep = [
                        (e, c.endpoints[e])
                        for e in c.live_edge_ids()
                        if e not in eids
                    ]
                    c.edge_ids = [e for e, _ in keep]
                    c.endpoints = dict(keep)
                    c.vertices = {v for _, (a, b) in keep for v in (a, b)}
                    c._wrapper = None

    # -- inspection ------------------------------------------------------

    def audit(self) -> dict:
        report = {
            "tiers": {},
            "sum_cluster_vertices": 0,
            "vertex_multiplicity": {},
            "all_certified": True,
        }
        mult: dict = {}
        for i, tier in sorted(self.tiers.items()):
            certs = []
            for c in tier.clusters:
                lv = c.live_vertices()
                le = [c.endpoints[e] for e in c.live_edge_ids()]
                ok, policy, val = certify(lv, le, self.cert_threshold())
                certs.append(
                    {"vertices": len(lv), "edges": len(le), "policy": policy,
                     "value": None if val == math.inf else val, "ok": ok}
                )
                report["all_certified"] &= ok
                report["sum_cluster_vertices"] += len(lv)
                for v in lv:
                    mult[v] = mult.get(v, 0) + 1
            report["tiers"][i] = {
                "size": tier.live_size(),
                "capacity": tier.capacity,
                "clusters": certs,
            }
        hist: dict = {}
        for v, k in mult.items():
            hist[k] = hist.get(k, 0) + 1
        report["vertex_multiplicity"] = hist
        return report

    def snapshot_json(self) -> str:
        return json.dumps(
            {
                str(i): [
                    {"edges": sorted(c.live_edge_ids())} for c in tier.clusters
                ]
                for i, tier in sorted(self.tiers.items())
            }
        )
