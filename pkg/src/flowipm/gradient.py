"""Bucketed maintenance of the soft-max gradient and its accumulated sum.

Three pieces cooperate here:

* ``flat_maximize`` solves max <a, x> over the mixed ball
  ||x||_2 + ||l^-1 x||_inf <= 1 by splitting the budget between the two
  norms and water-filling the capped l2 subproblem.
* ``GradientReduction`` groups indices into buckets keyed by a geometric
  weight class and an arithmetic argument class, maintains per-bucket
  column aggregates w^(k,l) = A^T G 1_I, and answers queries with a
  bucket-level mixed-norm maximizer, so the returned direction is constant
  on each bucket.  Buckets are addressed sparsely by (k, l) key: at tight
  accuracies the conceptual bucket grid is astronomically large while at
  most m cells are ever occupied.
* ``GradientAccumulator`` materializes the running sum x^(t) lazily: each
  coordinate stores trigger thresholds around the cumulative per-bucket
  step sum and is only rewritten when the sum escapes its band, keeping
  |xbar_i - x_i| <= eps_i at all times.

``GradientMaint`` wires the two structures together: the product query
produces the bucket direction s, and the sum query folds g_i * s_{k_i}
plus an explicit sparse correction into the lazy accumulator.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from .graph import IncidenceMatrix

_COSH_CAP = 700.0  # beyond this, exp overflows; switch to scaled arithmetic
_REVERIFY_PERIOD = 1024  # full aggregate recomputation cadence


_W_INF = 1e18  # finite stand-in for an unbounded ratio interval


def flat_maximize(a, l) -> np.ndarray:
    """argmax of <a, x> over the ball ||x||_2 + ||l^-1 x||_inf <= 1.

    Writing t = ||l^-1 x||_inf, the optimum is x_i = min(theta*a_i, t*l_i)
    with ||x||_2 = 1 - t; coordinates are capped in increasing order of
    r_i = l_i/a_i.  For each candidate capped prefix the objective reduces to
    V = (sqrt(S2) sqrt(w^2 - L2) + L1) / (1 + w) in w = (1-t)/t, where L1, L2
    aggregate the capped prefix and S2 the free suffix; the stationary w
    solves a quadratic, clamped to the interval where that prefix is the one
    actually capped.  This sweeps every prefix and takes the best.
    """
    a = np.asarray(a, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if np.any(l <= 0):
        raise ValueError("cap vector must be positive")
    a_abs = np.abs(a)
    sup = np.nonzero(a_abs)[0]
    if len(sup) == 0:
        return np.zeros_like(a)
    a_s, l_s = a_abs[sup], l[sup]
    k = len(sup)
    order = np.argsort(l_s / a_s, kind="stable")
    aa, ll = a_s[order], l_s[order]
    r = ll / aa
    # prefix k' capped: L1/L2 over it, S2 over the rest
    L1 = np.concatenate([[0.0], np.cumsum(aa * ll)])
    L2 = np.concatenate([[0.0], np.cumsum(ll * ll)])
    S2 = np.concatenate([np.cumsum((aa * aa)[::-1])[::-1], [0.0]])
    r_lo = np.concatenate([[0.0], r])
    r_hi = np.concatenate([r, [_W_INF]])
    with np.errstate(over="ignore"):
        w_lo = np.minimum(
            np.maximum(np.sqrt(S2 * np.minimum(r_lo, _W_INF) ** 2 + L2), np.sqrt(L2)),
            _W_INF,
        )
        w_hi = np.minimum(np.sqrt(S2 * np.minimum(r_hi, _W_INF) ** 2 + L2), _W_INF)
    # stationary points of V(w): (L1^2 - S2) w^2 - 2 S2 L2 w - L2(S2 L2 + L1^2) = 0
    A = L1**2 - S2
    B = -2.0 * S2 * L2
    C = -L2 * (S2 * L2 + L1**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(B * B - 4.0 * A * C, 0.0))
        root1 = np.where(A != 0, (-B + disc) / (2.0 * A), np.where(B != 0, -C / B, 0.0))
        root2 = np.where(A != 0, (-B - disc) / (2.0 * A), root1)
    cands = np.stack([
        np.clip(root1, w_lo, w_hi),
        np.clip(root2, w_lo, w_hi),
        w_lo,
        w_hi,
    ])
    cands = np.nan_to_num(cands, nan=0.0, posinf=_W_INF, neginf=0.0)
    vals = (np.sqrt(S2) * np.sqrt(np.maximum(cands**2 - L2, 0.0)) + L1) / (1.0 + cands)
    flat = int(np.argmax(vals))
    w = float(cands.ravel()[flat])
    kp = flat % (k + 1)
    t = 1.0 / (1.0 + w)
    if S2[kp] > 0:
        rho = math.sqrt(max(w * w - L2[kp], 0.0) / S2[kp])
    else:
        rho = _W_INF
    x = np.zeros_like(a)
    x[sup] = np.minimum(rho * t * a_s, t * l_s)
    return np.sign(a) * x


class GradientReduction:
    """Sparse bucket partition with column aggregates and the potential."""

    def __init__(self, A: IncidenceMatrix, g, tau, z, eps: float, lam: float,
                 cnorm: float, z_offset: float = 0.0, tau_max: float = 2.0):
        if not (0 < eps <= 1):
            raise ValueError("eps must lie in (0, 1]")
        self.A = A
        self.m = A.graph.m
        self.ncols = A.ncols
        self.eps = float(eps)
        self.lam = float(lam)
        self.cnorm = float(cnorm)
        self.z_offset = float(z_offset)
        self.tau_max = float(tau_max)
        self.ratio = A.graph.n / A.graph.m  # lower end of the weight domain
        g = np.asarray(g, dtype=np.float64)
        tau = np.asarray(tau, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        self._check_domain(z, tau)
        self.g = g.copy()
        self.tau = tau.copy()
        self.z = z.copy()
        self.bucket: list[tuple[int, int]] = [
            self._classes(z[i], tau[i]) for i in range(self.m)
        ]
        self.members: dict[tuple[int, int], set[int]] = defaultdict(set)
        for i in range(self.m):
            self.members[self.bucket[i]].add(i)
        self._updates_since_rebuild = 0
        self._rebuild_aggregates()
        self.p = self._full_potential()

    # -- keying ----------------------------------------------------------

    def _check_domain(self, z, tau) -> None:
        if np.any(z < 0.5 - 1e-12) or np.any(z > 2.0 + 1e-12):
            raise ValueError("argument outside the supported [0.5, 2] domain")
        if np.any(tau < self.ratio - 1e-12) or np.any(tau > self.tau_max + 1e-12):
            raise ValueError(
                f"weight outside the supported [n/m, {self.tau_max:g}] domain"
            )

    def _classes(self, z: float, tau: float) -> tuple[int, int]:
        y = math.log(tau) / math.log1p(-self.eps)
        k = math.ceil(y - 1e-9) - 1  # ties resolve to the smaller class
        ell = math.floor((z - 0.5) / (self.eps / 2) + 1e-9)
        return int(k), int(ell)

    def _bucket_reps(self, key: tuple[int, int]) -> tuple[float, float]:
        k, ell = key
        return 0.5 + ell * self.eps / 2, math.exp((k + 1) * math.log1p(-self.eps))

    # -- aggregates and potential ----------------------------------------

    def _rebuild_aggregates(self) -> None:
        self.w: dict[tuple[int, int], np.ndarray] = {}
        for key, idxs in self.members.items():
            if not idxs:
                continue
            acc = np.zeros(self.ncols)
            for i in idxs:
                for col, val in self.A.row_entries(i):
                    acc[col] += self.g[i] * val
            self.w[key] = acc
        self._updates_since_rebuild = 0

    def _row_add(self, key: tuple[int, int], i: int, sign: float) -> None:
        acc = self.w.get(key)
        if acc is None:
            acc = self.w[key] = np.zeros(self.ncols)
        for col, val in self.A.row_entries(i):
            acc[col] += sign * self.g[i] * val

    def _cosh(self, x: float) -> float:
        return math.cosh(x) if abs(x) < _COSH_CAP else math.inf

    def _full_potential(self) -> float:
        off = self.z_offset
        return float(sum(self._cosh(self.lam * (zi - off)) for zi in self.z))

    def gr_potential(self) -> float:
        if not math.isfinite(self.p):
            self.p = self._full_potential()
        return self.p

    # -- operations ------------------------------------------------------

    def gr_update(self, M, b, c, d) -> list[tuple[int, int]]:
        """Move indices M to weight b, weight class c, argument d."""
        M = [int(i) for i in M]
        b = np.asarray(b, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        self._check_domain(d, c)
        off = self.z_offset
        out = []
        for i, gi, ti, zi in zip(M, b, c, d):
            old = self.bucket[i]
            self._row_add(old, i, -1.0)
            self.members[old].discard(i)
            if not self.members[old]:
                del self.members[old]
                self.w.pop(old, None)
            self.p += self._cosh(self.lam * (zi - off)) - self._cosh(
                self.lam * (self.z[i] - off)
            )
            self.g[i], self.tau[i], self.z[i] = gi, ti, zi
            new = self._classes(zi, ti)
            self.bucket[i] = new
            self.members[new].add(i)
            self._row_add(new, i, +1.0)
            out.append(new)
        self._updates_since_rebuild += len(M)
        if self._updates_since_rebuild >= _REVERIFY_PERIOD:
            self._rebuild_aggregates()
            self.p = self._full_potential()
        return out

    def _bucket_objective(self):
        keys = sorted(self.members)
        reps = np.array([self._bucket_reps(k)[0] for k in keys]) - self.z_offset
        taus = np.array([self._bucket_reps(k)[1] for k in keys])
        cnt = np.array([len(self.members[k]) for k in keys], dtype=np.float64)
        amax = float(np.max(self.lam * np.abs(reps), initial=0.0))
        if amax < _COSH_CAP:
            x = cnt * self.lam * np.sinh(self.lam * reps)
        else:
            # the maximizer is invariant under positive rescaling of the
            # objective, so work with sinh scaled by exp(-lam * amax)
            x = cnt * self.lam * 0.5 * (
                np.exp(self.lam * reps - amax) - np.exp(-self.lam * reps - amax)
            )
        v = self.cnorm * np.sqrt(cnt * taus)
        return keys, x, v

    def gr_query(self):
        keys, x, v = self._bucket_objective()
        s: dict[tuple[int, int], float] = {}
        vbar = np.zeros(self.ncols)
        if keys:
            y = flat_maximize(x / v, v)
            for key, si in zip(keys, y / v):
                if si != 0.0:
                    s[key] = float(si)
                    vbar += si * self.w[key]
        return vbar, s


class GradientAccumulator:
    """Lazy per-coordinate materialization of x^(t) within accuracy bands."""

    def __init__(self, bucket, g, acc, x_init):
        self.bucket = list(bucket)
        self.m = len(self.bucket)
        self.g = np.asarray(g, dtype=np.float64).copy()
        self.acc = np.asarray(acc, dtype=np.float64).copy()
        if np.any(self.acc <= 0):
            raise ValueError("accuracies must be positive")
        self.xbar = np.asarray(x_init, dtype=np.float64).copy()
        self.t = 0
        self.f: dict = defaultdict(float)
        self.d_high = np.zeros(self.m)
        self.d_low = np.zeros(self.m)
        self.J: set[int] = set()
        self._update_delta(range(self.m))

    def _band(self, i: int) -> float:
        gi = self.g[i]
        return abs(self.acc[i] / (10 * gi)) if gi != 0 else math.inf

    def _compute_x(self, M, h=None) -> None:
        for i in M:
            i = int(i)
            f_old = 0.5 * (self.d_high[i] + self.d_low[i])
            self.xbar[i] += self.g[i] * (self.f[self.bucket[i]] - f_old)
            if h is not None:
                self.xbar[i] += h.get(i, 0.0)
            self.J.add(i)

    def _update_delta(self, M) -> None:
        for i in M:
            i = int(i)
            mid = self.f[self.bucket[i]]
            band = self._band(i)
            self.d_high[i] = mid + band
            self.d_low[i] = mid - band

    def ga_move(self, I, buckets) -> None:
        I = [int(i) for i in I]
        self._compute_x(I)
        for i, k in zip(I, buckets):
            self.bucket[i] = k
        self._update_delta(I)

    def ga_scale(self, I, b) -> None:
        I = [int(i) for i in I]
        self._compute_x(I)
        self.g[I] = np.asarray(b, dtype=np.float64)
        self._update_delta(I)

    def ga_set_accuracy(self, I, eps_new) -> None:
        I = [int(i) for i in I]
        eps_new = np.asarray(eps_new, dtype=np.float64)
        if np.any(eps_new <= 0):
            raise ValueError("accuracies must be positive")
        self._compute_x(I)
        self.acc[I] = eps_new
        self._update_delta(I)

    def ga_query(self, s: dict, h: dict[int, float] | None = None):
        h = dict(h) if h else {}
        self.t += 1
        self.J = set()
        for key, step in s.items():
            self.f[key] += step
        touched = sorted(h)
        self._compute_x(touched, h)
        self._update_delta(touched)
        fi = np.array([self.f[b] for b in self.bucket])
        trig = np.nonzero((fi > self.d_high) | (fi < self.d_low))[0]
        self._compute_x(trig)
        self._update_delta(trig)
        return self.xbar, set(self.J)

    def ga_exact(self) -> np.ndarray:
        allidx = range(self.m)
        self._compute_x(allidx)
        self._update_delta(allidx)
        return self.xbar


class GradientMaint:
    """Product/sum gradient queries over the shared bucket partition."""

    def __init__(self, A: IncidenceMatrix, x_init, g, tau, z, w, eps: float,
                 lam: float, cnorm: float, z_offset: float = 0.0,
                 tau_max: float = 2.0):
        w = np.asarray(w, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("accuracy weights must be positive")
        self.eps = float(eps)
        self.reduction = GradientReduction(
            A, g, tau, z, eps, lam, cnorm, z_offset=z_offset, tau_max=tau_max
        )
        self.accumulator = GradientAccumulator(
            self.reduction.bucket, g, w * eps, x_init
        )
        self._s: dict = {}

    def update(self, I, b, c, d) -> list[tuple[int, int]]:
        ids = self.reduction.gr_update(I, b, c, d)
        self.accumulator.ga_scale(I, b)
        self.accumulator.ga_move(I, ids)
        return ids

    def set_accuracy(self, I, delta) -> None:
        delta = np.asarray(delta, dtype=np.float64)
        self.accumulator.ga_set_accuracy(I, delta * self.eps)

    def query_product(self) -> np.ndarray:
        vbar, s = self.reduction.gr_query()
        self._s = s
        return vbar

    def query_sum(self, h: dict[int, float] | None = None):
        s, self._s = self._s, {}  # each product step is accumulated once
        return self.accumulator.ga_query(s, h)

    def compute_exact_sum(self) -> np.ndarray:
        return self.accumulator.ga_exact()

    def potential(self) -> float:
        return self.reduction.gr_potential()
