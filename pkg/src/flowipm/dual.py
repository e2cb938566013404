"""Maintenance of the slack vector under additive column-space steps.

Tracks v^(t) = v_init + A * (h^(1) + ... + h^(t)) and publishes an
approximation vbar with per-coordinate accuracy w_i * eps.  Change
detection is tiered: level j accumulates the last (t mod 2^j) steps into a
partial sum f^(j), and whenever 2^j divides t a heavy-entry query over
(1/w)-scaled rows flags coordinates whose window drift crossed
0.2 eps / log n.  Flagged coordinates are verified against a sparse exact
recomputation, rewritten when off by 0.2 w_i eps / log n, and temporarily
dropped (weight zeroed) from every level until that level next flushes.
"""

from __future__ import annotations

import math

import numpy as np

from .graph import IncidenceMatrix
from .heavyhitter import HeavyHitter
from .primitives import Rng


class DualMaint:
    def __init__(self, A: IncidenceMatrix, v_init, w_init, eps: float,
                 rng: Rng | None = None):
        self.A = A
        self.m = A.graph.m
        self.n = A.graph.n
        self.rng = rng or Rng(0)
        self.eps = float(eps)
        if not (0 < self.eps <= 1):
            raise ValueError("eps must lie in (0, 1]")
        w_init = np.asarray(w_init, dtype=np.float64)
        if np.any(w_init <= 0) or np.any(w_init > 1):
            raise ValueError("accuracy weights must lie in (0, 1]")
        self.w = w_init.copy()
        self.v_init = np.asarray(v_init, dtype=np.float64).copy()
        self.T = max(2, math.ceil(math.sqrt(self.n)))
        self.levels = int(math.floor(math.log2(self.T)))
        self.logn = max(2.0, math.log2(self.n))
        self.work = {"add": 0, "set_accuracy": 0}
        self._from_setacc: set[int] = set()
        self._initialize()

    def _initialize(self) -> None:
        self.t = 0
        self.vbar = self.v_init.copy()
        self.fhat = np.zeros(self.A.ncols)
        self.D: list[HeavyHitter] = []
        self.f: list[np.ndarray] = []
        self.F: list[set[int]] = []
        for j in range(self.levels + 1):
            self.D.append(HeavyHitter(self.A, 1.0 / self.w, rng=self.rng.spawn(300 + j)))
            self.f.append(np.zeros(self.A.ncols))
            self.F.append(set())
        self._from_setacc = set()

    # -- exact values ----------------------------------------------------

    def _exact_at(self, i: int) -> float:
        val = self.v_init[i]
        for col, a in self.A.row_entries(i):
            val += a * self.fhat[col]
        return float(val)

    def dm_exact(self) -> np.ndarray:
        return self.v_init + self.A.apply(self.fhat)

    # -- change detection ------------------------------------------------

    def _find_indices(self, h: np.ndarray) -> set[int]:
        found: set[int] = set()
        thr = 0.2 * self.eps / self.logn
        for j in range(self.levels, -1, -1):
            self.f[j] += h
            if self.t % 2**j == 0:
                found.update(self.D[j].heavy_query(self.f[j], thr))
                self.f[j][:] = 0.0
        return found

    def _verify_index(self, I) -> set[int]:
        J: set[int] = set()
        for i in sorted(I):
            if i in self._from_setacc:
                self.work["set_accuracy"] += 1
            else:
                self.work["add"] += 1
            exact = self._exact_at(i)
            if abs(self.vbar[i] - exact) >= 0.2 * self.w[i] * self.eps / self.logn:
                self.vbar[i] = exact
                J.add(i)
        if J:
            Js = sorted(J)
            for j in range(self.levels + 1):
                self.F[j].update(J)
                self.D[j].hh_scale(Js, np.zeros(len(Js)))
        return J

    # -- operations ------------------------------------------------------

    def dm_set_accuracy(self, I, delta) -> None:
        I = [int(i) for i in I]
        delta = np.asarray(delta, dtype=np.float64)
        if np.any(delta <= 0) or np.any(delta > 1):
            raise ValueError("accuracies must lie in (0, 1]")
        self.w[I] = delta
        self._from_setacc.update(I)
        for j in range(self.levels + 1):
            self.F[j].update(I)
            self.D[j].hh_scale(I, np.zeros(len(I)))

    def dm_add(self, h) -> tuple[set[int], np.ndarray]:
        h = np.asarray(h, dtype=np.float64)
        if self.t >= self.T:
            old = self.vbar
            self.v_init = self.v_init + self.A.apply(self.fhat + h)
            self._initialize()
            changed = {i for i in range(self.m) if self.vbar[i] != old[i]}
            return changed, self.vbar
        self.t += 1
        self.fhat += h
        changed = self._verify_index(self._find_indices(h))
        for j in range(self.levels + 1):
            if self.t % 2**j == 0:
                changed |= self._verify_index(self.F[j])
        for j in range(self.levels + 1):
            if self.t % 2**j == 0:
                back = sorted(changed | self.F[j])
                if back:
                    self.D[j].hh_scale(back, 1.0 / self.w[back])
                self.F[j] = set()
        still_pending: set[int] = set()
        for Fj in self.F:
            still_pending |= Fj
        self._from_setacc &= still_pending
        return changed, self.vbar
