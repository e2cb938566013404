"""Batched pruning of a decaying expander.

A PruneState wraps one base expander H.  Each deletion batch is turned into a
virtual graph where every deleted edge is split by a midpoint vertex; trimming
the real vertices against those midpoints either certifies the remainder or
prunes weakly attached vertices.  The pruned set P only grows; once the
cumulative deletions exceed phi*m/log n the whole vertex set is pruned
(the structure has earned a rebuild).

The low-batch pruner tolerates at most (log n)/2 batches.  BoostWrapper lifts
that to an arbitrary batch count by journaling updates and periodically
rolling the inner state back and replaying merged batches, so the inner
structure never sees more than the allowed number of batches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .trimming import TrimConfig, TrimResult, _log2_ceil, trimming


class PruneError(ValueError):
    pass


@dataclass
class PruneState:
    """Pruning state for one base expander (n vertices, undirected edges)."""

    n: int
    base_edges: list
    phi: float
    trim_cfg_factory: object = None  # callable (phi, n, m) -> TrimConfig
    pruned: set = field(default_factory=set)
    alive: set = field(init=False)  # edge indices still present
    deleted_total: int = 0
    batches: int = 0
    flows: list = field(default_factory=list)  # retained TrimResults
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.alive = set(range(len(self.base_edges)))
        if self.trim_cfg_factory is None:
            self.trim_cfg_factory = TrimConfig.desk

    # -- views -------------------------------------------------------------

    @property
    def vertices(self) -> set:
        return set(range(self.n)) - self.pruned

    def remaining_edges(self) -> list:
        """Edge indices currently in the maintained graph G_i[V_i]."""
        keep = self.vertices
        return [
            e
            for e in sorted(self.alive)
            if self.base_edges[e][0] in keep and self.base_edges[e][1] in keep
        ]

    def batch_budget(self) -> int:
        return max(1, _log2_ceil(self.n) // 2)

    def pruned_degree(self) -> int:
        deg = 0
        for u, v in self.base_edges:
            deg += (u in self.pruned) + (v in self.pruned)
        return deg

    def kappa(self) -> float:
        """Measured constant in deg(P) <= kappa * (deletions) / phi."""
        if self.deleted_total == 0:
            return 0.0
        return self.pruned_degree() * self.phi / self.deleted_total

    # -- updates -----------------------------------------------------------

    def prune_batch_low(self, batch) -> set:
        """Delete a batch of edges (by index into base_edges); returns the
        newly pruned vertices."""
        self.batches += 1
        if self.batches > self.batch_budget():
            raise PruneError(f"batch budget {self.batch_budget()} exhausted; use the boosted wrapper")
        batch = sorted(set(batch))
        for e in batch:
            if e not in self.alive:
                raise PruneError(f"edge {e} not present")
        if not batch:
            self.trace.append({"batch": self.batches, "deleted": 0, "pruned": []})
            return set()
        split = [e for e in batch if self.base_edges[e][0] in self.vertices
                 and self.base_edges[e][1] in self.vertices]
        self.alive -= set(batch)
        self.deleted_total += len(batch)
        m = len(self.base_edges)
        ln = _log2_ceil(self.n)
        if self.deleted_total > self.phi * m / ln:
            newly = self.vertices
            self.pruned = set(range(self.n))
            self.trace.append(
                {"batch": self.batches, "deleted": len(batch), "pruned": sorted(newly),
                 "early_out": True}
            )
            return newly

        # virtual graph: remaining real graph plus a midpoint vertex per edge
        # deleted this batch, keeping the half-edges as explicit boundary
        real = self.vertices
        vedges = [self.base_edges[e] for e in self.remaining_edges()]
        vn = self.n
        for e in split:
            u, v = self.base_edges[e]
            mid = vn
            vn += 1
            vedges.append((u, mid))
            vedges.append((mid, v))
        cfg = self.trim_cfg_factory(self.phi, vn, max(1, len(vedges)))
        res: TrimResult = trimming(vn, vedges, real, self.phi, cfg=cfg)
        newly = res.removed & real  # midpoints are never part of A
        self.pruned |= newly
        self.flows.append(res)
        self.trace.append(
            {"batch": self.batches, "deleted": len(batch), "pruned": sorted(newly),
             "kappa": self.kappa()}
        )
        return newly

    def trace_json(self) -> str:
        return "\n".join(json.dumps(entry) for entry in self.trace)


class BoostWrapper:
    """Arbitrary-batch pruning on top of the low-batch structure.

    Batches are journaled; a carry-merge schedule (chunk sizes grow
    geometrically, at most the inner budget of chunks at any time) decides
    when to roll the inner state back and replay merged batches.  The public
    pruned set is the union over replays, so it is monotone by construction.
    """

    def __init__(self, n: int, base_edges: list, phi: float, trim_cfg_factory=None):
        self.n = n
        self.base_edges = list(base_edges)
        self.phi = phi
        self.trim_cfg_factory = trim_cfg_factory
        self.journal: list[list[int]] = []  # all batches ever seen
        self.chunks: list[list[int]] = []  # partition of journal indices
        self.inner = self._fresh()
        self.pruned: set = set()
        self.rollbacks = 0

    def _fresh(self) -> PruneState:
        return PruneState(self.n, self.base_edges, self.phi,
                          trim_cfg_factory=self.trim_cfg_factory)

    def _replay(self) -> None:
        self.rollbacks += 1
        self.inner = self._fresh()
        for chunk in self.chunks:
            merged = sorted({e for bi in chunk for e in self.journal[bi]})
            self.inner.prune_batch_low(merged)

    def prune_batch(self, batch) -> set:
        batch = sorted(set(batch))
        before = set(self.pruned)
        self.journal.append(batch)
        self.chunks.append([len(self.journal) - 1])
        budget = self.inner.batch_budget()
        merged_something = False
        while len(self.chunks) > 1 and (
            len(self.chunks) > budget or len(self.chunks[-1]) >= len(self.chunks[-2])
        ):
            last = self.chunks.pop()
            self.chunks[-1].extend(last)
            merged_something = True
        if merged_something:
            self._replay()
        else:
            self.inner.prune_batch_low(batch)
        self.pruned |= self.inner.pruned
        return self.pruned - before

    @property
    def vertices(self) -> set:
        return set(range(self.n)) - self.pruned

    def remaining_edges(self) -> list:
        keep = self.vertices
        deleted = {e for b in self.journal for e in b}
        return [
            e
            for e in range(len(self.base_edges))
            if e not in deleted
            and self.base_edges[e][0] in keep
            and self.base_edges[e][1] in keep
        ]

    def kappa(self) -> float:
        deleted = sum(len(b) for b in self.journal)
        if deleted == 0:
            return 0.0
        deg = 0
        for u, v in self.base_edges:
            deg += (u in self.pruned) + (v in self.pruned)
        return deg * self.phi / deleted
