"""Random diagonal rescaling for sparsified primal steps.

Combines three independent candidate draws — energy-proportional (via the
heavy-entry sampler), a uniform floor, and weight-proportional (via the
bucketed index sampler) — each drawn with tripled constants, then thinned so
an index survives with probability min(1, u_i + v_i + w_i).  Surviving
entries carry value 1/p_i, making the diagonal unbiased: E[R_ii] = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .heavyhitter import HeavyHitter
from .primitives import Rng, TauSampler


@dataclass
class SampleScaling:
    """Sparse diagonal matrix: entries maps index -> 1/p_i."""

    m: int
    entries: dict[int, float]

    def support(self) -> list[int]:
        return sorted(self.entries)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.m)
        for i, val in self.entries.items():
            out[i] = val * vec[i]
        return out


class HeavySampler:
    def __init__(self, A, g, tau, rng: Rng | None = None, phi: float = 1 / 16):
        self.rng = rng or Rng(0)
        self.hh = HeavyHitter(A, g, phi=phi, rng=self.rng.spawn(1))
        self.tau_sampler = TauSampler(tau, A.graph.n, rng=self.rng.spawn(2))
        self.graph = A.graph
        self.g = np.asarray(g, dtype=np.float64).copy()
        self.tau = np.asarray(tau, dtype=np.float64).copy()

    # -- maintenance -----------------------------------------------------

    def hs_scale(self, I, a, b) -> None:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if np.any(a <= 0) or np.any(b <= 0):
            raise ValueError("scales must be positive")
        self.hh.hh_scale(I, a)
        self.tau_sampler.scale(I, b)
        for i, (av, bv) in zip(I, zip(a, b)):
            self.g[int(i)] = av
            self.tau[int(i)] = bv

    # -- probabilities ---------------------------------------------------

    def _energy_budget(self, c1: float) -> float:
        n = self.graph.n
        ln = max(2.0, math.log2(n))
        return 3 * c1 * (self.graph.m / math.sqrt(n)) * 16 * ln**8

    def _terms(self, h, c1, c2, c3):
        """Single-constant lower-bound terms (u, v, w) per index."""
        m, n = self.graph.m, self.graph.n
        entries = np.array([self.hh.entry(e, h) for e in range(m)])
        norm_sq = float(np.dot(entries, entries))
        if c1 > 0 and norm_sq > 0:
            u = np.minimum(1.0, c1 * (m / math.sqrt(n)) * entries**2 / norm_sq)
        else:
            u = np.zeros(m)
        v = np.full(m, min(1.0, c2 / math.sqrt(n)))
        w = np.minimum(1.0, c3 * n * self.tau / self.tau_sampler.norm1)
        return u, v, w, norm_sq

    def _candidate_marginals(self, h, c1, c2, c3, norm_sq):
        """Exact inclusion probabilities of the three tripled-constant draws."""
        m, n = self.graph.m, self.graph.n
        if c1 > 0 and norm_sq > 0:
            U = self.hh.hh_probability(range(m), h, self._energy_budget(c1))
        else:
            U = np.zeros(m)
        V = np.full(m, min(1.0, 3 * c2 / math.sqrt(n)))
        W = self.tau_sampler.probability(range(m), 3 * c3) if c3 > 0 else np.zeros(m)
        return U, V, W

    def hs_probability(self, h, c1, c2, c3) -> np.ndarray:
        """The exact per-index inclusion probability hs_sample realizes."""
        u, v, w, norm_sq = self._terms(h, c1, c2, c3)
        U, V, W = self._candidate_marginals(h, c1, c2, c3, norm_sq)
        union = 1.0 - (1.0 - U) * (1.0 - V) * (1.0 - W)
        return np.minimum(np.minimum(1.0, u + v + w), union)

    # -- sampling --------------------------------------------------------

    def hs_sample(self, h, c1, c2, c3) -> SampleScaling:
        if min(c1, c2, c3) < 0:
            raise ValueError("sampler constants must be nonnegative")
        h = np.asarray(h, dtype=np.float64)
        m, n = self.graph.m, self.graph.n
        u, v, w, norm_sq = self._terms(h, c1, c2, c3)
        U, V, W = self._candidate_marginals(h, c1, c2, c3, norm_sq)
        gen = self.rng.gen
        cand = set()
        if c1 > 0 and norm_sq > 0:
            cand.update(self.hh.hh_sample(h, self._energy_budget(c1)))
        p_unif = min(1.0, 3 * c2 / math.sqrt(n))
        if p_unif > 0:
            cand.update(int(i) for i in np.nonzero(gen.random(m) < p_unif)[0])
        if c3 > 0:
            cand.update(int(i) for i in self.tau_sampler.sample(3 * c3))
        entries = {}
        for i in sorted(cand):
            union = 1.0 - (1.0 - U[i]) * (1.0 - V[i]) * (1.0 - W[i])
            target = min(1.0, u[i] + v[i] + w[i])
            if union <= 0 or target <= 0:
                continue
            # thin the union draw down to the target probability (clamped:
            # if the candidate union undershoots, keep everything we drew)
            if gen.random() < min(1.0, target / union):
                entries[i] = 1.0 / min(target, union)
        return SampleScaling(m=m, entries=entries)
