"""Maintenance of leverage scores and regularized Lewis weights under row
rescaling.

The leverage structure keeps sigma_bar ~ sigma(VA) + z over an epoch of
T = ceil(eps^2 sqrt(n)) queries.  Directly rescaled rows are always
re-verified (they sit in the level-0 pending set, which flushes every query);
indirect drift of other rows is detected by sketched difference solves pushed
through per-level heavy-entry structures, and every candidate is verified
against a freshly solved value before sigma_bar is rewritten.

The Lewis structure chains L leverage structures so that iterating
v^(j+1) = ((v^(j))^(2/p-1) sigma^(j))^(p/2) contracts to the regularized
fixed point tau = sigma(tau^(1/2-1/p) G A) + z.
"""

from __future__ import annotations

import math

import numpy as np

from .graph import IncidenceMatrix
from .heavyhitter import HeavyHitter
from .primitives import Rng

DENSE_LIMIT = 80  # vertex count up to which Gram inverses are formed densely


def _within(a, b, eps: float) -> bool:
    """a ~ b within a factor of exp(+-eps)."""
    if a <= 0 or b <= 0:
        return a == b
    return abs(math.log(a / b)) <= eps


def dense_gram_inverse(A_dense: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(A_dense.T @ (v[:, None] ** 2 * A_dense))


def dense_leverage(A_dense: np.ndarray, v: np.ndarray) -> np.ndarray:
    Minv = dense_gram_inverse(A_dense, v)
    VA = v[:, None] * A_dense
    return np.einsum("ij,jk,ik->i", VA, Minv, VA)


class LeverageMaint:
    """sigma_bar ~_eps sigma(VA) + z maintained under Scale/Query epochs."""

    def __init__(self, A: IncidenceMatrix, v, z, eps: float, rng: Rng | None = None,
                 jl_dim: int | None = None, sample_const: float = 32.0):
        if A.graph.n > DENSE_LIMIT:
            raise ValueError(f"maintained path requires n <= {DENSE_LIMIT}")
        self.A = A
        self.Ad = A.dense()
        self.m, self.ncols = self.Ad.shape
        self.n = A.graph.n
        self.rng = rng or Rng(0)
        self.eps = float(eps)
        if not (0 < self.eps < 1):
            raise ValueError("eps must be in (0, 1)")
        self.z = np.asarray(z, dtype=np.float64).copy()
        if np.any(self.z < 3 * self.n / self.m - 1e-12):
            raise ValueError("regularizer must satisfy z_i >= 3n/m")
        self.v = np.asarray(v, dtype=np.float64).copy()
        self.sample_const = sample_const
        logn = max(2.0, math.log2(self.n))
        self.r = jl_dim if jl_dim is not None else min(self.m, int(64 * math.ceil(logn)))
        self._initialize_epoch()

    # -- epoch setup -----------------------------------------------------

    def _initialize_epoch(self) -> None:
        self.t = 0
        self.T = max(1, math.ceil(self.eps**2 * math.sqrt(self.n)))
        self.sigma_bar = dense_leverage(self.Ad, self.v) + self.z
        self.levels = max(1, math.ceil(math.log2(self.T + 1)))
        self.D: list[HeavyHitter] = []
        self.S: list[set[int]] = []
        self.C: list[set[int]] = []
        self.delta: list[np.ndarray] = []
        w0 = self.v * self.z**-0.5
        for j in range(self.levels + 1):
            self.D.append(HeavyHitter(self.A, w0, rng=self.rng.spawn(100 + j)))
            self.S.append(set())
            self.C.append(set())
            self.delta.append(np.zeros(self.m))

    # -- operations ------------------------------------------------------

    def ls_scale(self, I, c) -> None:
        I = [int(i) for i in I]
        c = np.asarray(c, dtype=np.float64)
        for i, ci in zip(I, c):
            if not _within(ci, self.v[i], 0.25):
                raise ValueError(f"scale of row {i} outside the 0.25 drift band")
        for j in range(self.levels + 1):
            self.S[j].update(I)
            self.D[j].hh_scale(I, np.zeros(len(I)))
            self.delta[j][I] += c - self.v[I]
        self.v[I] = c

    def _sample_matrix(self, power: float) -> np.ndarray:
        logn = max(2.0, math.log(self.n))
        p = np.minimum(
            1.0, self.sample_const * self.sigma_bar / self.eps**2 * logn * math.log(logn)
        )
        keep = self.rng.gen.random(self.m) < p
        s = np.zeros(self.m)
        s[keep] = p[keep] ** -power
        return s

    def _jl(self) -> np.ndarray:
        return self.rng.gen.choice([-1.0, 1.0], size=(self.m, self.r)) / math.sqrt(self.r)

    def _find_indices(self) -> set[int]:
        found: set[int] = set()
        logn = max(2.0, math.log2(self.n))
        thr = self.eps / (48 * self.r * logn)
        for j in range(self.levels, -1, -1):
            if self.t % 2**j != 0:
                continue
            s = self._sample_matrix(power=1.0)
            R = self._jl()
            v_old = self.v - self.delta[j]
            Mp = dense_gram_inverse(self.Ad, np.abs(v_old) * s)
            M = dense_gram_inverse(self.Ad, self.v * s)
            sketch_old = self.Ad.T @ (v_old * s * R.T).T
            sketch_new = self.Ad.T @ (self.v * s * R.T).T
            H = Mp @ sketch_old - M @ sketch_new
            found.update(self.D[j].heavy_query_many(H, thr))
            self.delta[j][:] = 0.0
            restore = sorted(self.S[j])
            if restore:
                self.D[j].hh_scale(restore, self.v[restore] * self.z[restore] ** -0.5)
            found.update(self.S[j])
            self.S[j] = set()
            self.C[j] = set()
        return found

    def _exact_sigma(self, I) -> np.ndarray:
        Minv = dense_gram_inverse(self.Ad, self.v)
        out = np.empty(len(I))
        for k, i in enumerate(I):
            a = self.Ad[i]
            out[k] = self.v[i] ** 2 * (a @ Minv @ a)
        return out

    def _update_indices(self, I) -> set[int]:
        I = sorted(I)
        if not I:
            return set()
        cand = self._exact_sigma(I) + self.z[I]
        changed: set[int] = set()
        for i, val in zip(I, cand):
            if not _within(self.sigma_bar[i], val, 3 * self.eps / 8):
                self.sigma_bar[i] = val
                for j in range(self.levels + 1):
                    self.C[j].add(i)
                changed.add(i)
        return changed

    def ls_query(self) -> tuple[set[int], np.ndarray]:
        if self.t >= self.T:
            self._initialize_epoch()
            return set(range(self.m)), self.sigma_bar
        self.t += 1
        found = self._find_indices()
        changed = self._update_indices(found)
        return changed, self.sigma_bar


class LewisMaint:
    """tau_bar ~_eps sigma(tau_bar^(1/2-1/p) G A) + z via a contraction chain."""

    def __init__(self, A: IncidenceMatrix, g, z, p: float, delta: float, eps: float,
                 rng: Rng | None = None, jl_dim: int | None = None,
                 chain_len: int | None = None):
        if not (0.5 <= p < 2):
            raise ValueError("p must be in [1/2, 2)")
        if delta <= 1:
            raise ValueError("delta must exceed 1")
        self.A = A
        self.Ad = A.dense()
        self.m = A.graph.m
        self.p = p
        self.delta = delta
        self.eps = float(eps)
        self.rng = rng or Rng(0)
        self.jl_dim = jl_dim
        self.z = np.asarray(z, dtype=np.float64).copy()
        self.g = np.asarray(g, dtype=np.float64).copy()
        self.g_last_query = self.g.copy()
        self.L = chain_len if chain_len is not None else math.ceil(
            math.log(200 * delta, 4 / 3) + 1
        )
        self.expo = 0.5 - 1.0 / p  # row-scaling exponent tau^(1/2-1/p)
        self._initialize()

    def _fixed_point(self, g: np.ndarray) -> np.ndarray:
        v = np.full(self.m, 1.0)
        for _ in range(200):
            nxt = dense_leverage(self.Ad, np.abs(v) ** self.expo * g) + self.z
            if np.max(np.abs(np.log(nxt / v))) < 1e-13:
                return nxt
            v = nxt
        return v

    def _initialize(self) -> None:
        self.vbar = [self._fixed_point(self.g)]
        self.D: list[LeverageMaint] = []
        inner_eps = self.eps / (40 * self.L)
        for j in range(self.L):
            vj = self.vbar[j]
            Dj = LeverageMaint(
                self.A, vj**self.expo * self.g, self.z, inner_eps,
                rng=self.rng.spawn(200 + j), jl_dim=self.jl_dim,
            )
            self.D.append(Dj)
            _, sig = Dj.ls_query()
            self.vbar.append((vj ** (2 / self.p - 1) * sig) ** (self.p / 2))
        # vbar[0] is the published tau_bar; vbar[L] the most contracted iterate

    def lw_scale(self, I, b) -> None:
        I = [int(i) for i in I]
        b = np.asarray(b, dtype=np.float64)
        if np.any(b < 0):
            raise ValueError("scalings must be nonnegative")
        band = self.delta * self.eps
        for i, bi in zip(I, b):
            base = self.g_last_query[i]
            if base > 0 and abs(math.log(max(bi, 1e-300) / base)) > band + 1e-12:
                raise ValueError(
                    f"scaling drift of row {i} exceeds the per-round budget {band:g}"
                )
        self.g[I] = b
        for j in range(self.L):
            target = self.vbar[j][I] ** self.expo * b
            # the leverage structures enforce a 0.25 per-call band; walk
            # larger rescalings there in geometric chunks
            while True:
                cur = self.D[j].v[I]
                steps = np.log(np.maximum(target, 1e-300) / np.maximum(cur, 1e-300))
                if np.all(np.abs(steps) <= 0.25 - 1e-9):
                    self.D[j].ls_scale(I, target)
                    break
                self.D[j].ls_scale(I, cur * np.exp(np.clip(steps, -0.22, 0.22)))

    def lw_query(self) -> tuple[set[int], np.ndarray]:
        self.g_last_query = self.g.copy()
        last_changed: set[int] = set()
        for j in range(self.L):
            I, sig = self.D[j].ls_query()
            I = sorted(I)
            if I:
                self.vbar[j + 1][I] = (
                    self.vbar[j][I] ** (2 / self.p - 1) * sig[I]
                ) ** (self.p / 2)
                if j + 1 < self.L:
                    self.D[j + 1].ls_scale(
                        I, self.vbar[j + 1][I] ** self.expo * self.g[I]
                    )
            last_changed = set(I)
        writeback: set[int] = set()
        for i in last_changed:
            if not _within(self.vbar[self.L][i], self.vbar[0][i], self.eps / 10):
                self.vbar[0][i] = self.vbar[self.L][i]
                self.D[0].ls_scale([i], [self.vbar[0][i] ** self.expo * self.g[i]])
                writeback.add(i)
        return writeback, self.vbar[0]
