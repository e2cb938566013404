"""Shared low-level building blocks: seeded RNG streams, a batch-ordered list,
and the tau-proportional sampler used by the step sparsifier."""

from __future__ import annotations

import bisect
import math

import numpy as np

WEIGHT_FLOOR = 2.0 ** -60  # smallest accepted sampler weight; bounds the bucket count


class Rng:
    """Seeded random stream.  Identical (seed, stream) pairs reproduce draws."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.gen = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream,)))

    def spawn(self, stream: int) -> "Rng":
        return Rng(self.seed, stream)


class BatchList:
    """An always-sorted duplicate-free list with batched search/insert/delete.

    Batches are applied atomically: the whole batch is merged in one pass, so
    internal work can be split over disjoint ranges.
    """

    def __init__(self, items=()):
        self._items = sorted(set(items))

    def __len__(self):
        return len(self._items)

    def __contains__(self, x):
        i = bisect.bisect_left(self._items, x)
        return i < len(self._items) and self._items[i] == x

    def search(self, items) -> list[bool]:
        return [x in self for x in items]

    def insert(self, items) -> None:
        incoming = sorted(set(items))
        if not incoming:
            return
        merged = []
        a, b = self._items, incoming
        i = j = 0
        while i < len(a) and j < len(b):
            if a[i] < b[j]:
                merged.append(a[i]); i += 1
            elif b[j] < a[i]:
                merged.append(b[j]); j += 1
            else:
                merged.append(a[i]); i += 1; j += 1
        merged.extend(a[i:])
        merged.extend(b[j:])
        self._items = merged

    def delete(self, items) -> None:
        # idempotent: deleting absent items is a no-op
        drop = set(items)
        if drop:
            self._items = [x for x in self._items if x not in drop]

    def retrieve_all(self) -> list:
        return list(self._items)


def _bucket_of(w: float) -> int:
    # j with w in [2^j, 2^{j+1})
    return math.floor(math.log2(w))


class TauSampler:
    """Samples indices with probability proportional to (a power-of-two rounding
    of) their weight.

    Weights live in power-of-two buckets; Sample(K) includes bucket-j members
    independently with probability min(1, K * n * 2^(j+1) / ||tau||_1), which
    dominates the target K * n * tau_i / ||tau||_1.  Within a bucket we draw a
    binomial count and then pick that many members uniformly, so work tracks
    output size.
    """

    def __init__(self, tau, n: int, rng: Rng | None = None):
        self.n = int(n)
        self.rng = rng or Rng(0)
        tau = np.asarray(tau, dtype=np.float64)
        self._check_weights(tau)
        self.tau = tau.copy()
        self.m = len(tau)
        self.bucket_of = np.array([_bucket_of(w) for w in tau], dtype=np.int64)
        self.buckets: dict[int, set[int]] = {}
        for i, j in enumerate(self.bucket_of):
            self.buckets.setdefault(int(j), set()).add(i)
        self.norm1 = float(tau.sum())

    @staticmethod
    def _check_weights(w):
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("sampler weights must be positive and finite")
        if np.any(w < WEIGHT_FLOOR):
            raise ValueError(f"sampler weight below floor {WEIGHT_FLOOR:g}")

    def rebuild_norm(self) -> None:
        self.norm1 = float(self.tau.sum())

    def scale(self, I, a) -> None:
        I = np.asarray(I, dtype=np.int64)
        a = np.asarray(a, dtype=np.float64)
        self._check_weights(a)
        for i, w in zip(I, a):
            i = int(i)
            old_j = int(self.bucket_of[i])
            new_j = _bucket_of(w)
            if new_j != old_j:
                self.buckets[old_j].discard(i)
                if not self.buckets[old_j]:
                    del self.buckets[old_j]
                self.buckets.setdefault(new_j, set()).add(i)
                self.bucket_of[i] = new_j
            self.norm1 += float(w - self.tau[i])
            self.tau[i] = w

    def _bucket_prob(self, j: int, K: float) -> float:
        return min(1.0, K * self.n * 2.0 ** (j + 1) / self.norm1)

    def probability(self, I, K: float) -> np.ndarray:
        return np.array([self._bucket_prob(int(self.bucket_of[i]), K) for i in I])

    def sample(self, K: float) -> np.ndarray:
        """Independent inclusion per index; returns sorted index array."""
        if K <= 0:
            raise ValueError("K must be positive")
        out = []
        for j, members in self.buckets.items():
            p = self._bucket_prob(j, K)
            if p <= 0:
                continue
            k = len(members)
            cnt = int(self.rng.gen.binomial(k, p))
            if cnt == 0:
                continue
            if cnt >= k:
                out.extend(members)
            else:
                arr = np.fromiter(members, dtype=np.int64, count=k)
                out.extend(self.rng.gen.choice(arr, size=cnt, replace=False).tolist())
        return np.array(sorted(out), dtype=np.int64)

    def audit(self) -> None:
        """Walk the bucket structure and verify its invariants."""
        seen = set()
        for j, members in self.buckets.items():
            for i in members:
                assert _bucket_of(self.tau[i]) == j, f"index {i} in wrong bucket"
                assert int(self.bucket_of[i]) == j
                seen.add(i)
        assert seen == set(range(self.m)), "buckets do not partition the index set"
        assert abs(self.norm1 - self.tau.sum()) <= 1e-9 * max(1.0, abs(self.norm1))
