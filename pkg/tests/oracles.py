"""Independent dense/brute-force reference implementations used by the tests.

These are deliberately simple and slow: each one recomputes the quantity a
production structure maintains, from scratch, using dense linear algebra or
exhaustive enumeration.  They were written (and frozen) before the structures
they check.
"""

from __future__ import annotations

import itertools

import numpy as np


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def dense_incidence(n, edges, removed):
    """Edge-vertex incidence matrix with the given column dropped."""
    A = np.zeros((len(edges), n))
    for e, (a, b) in enumerate(edges):
        A[e, a] = -1.0
        A[e, b] = 1.0
    keep = [v for v in range(n) if v != removed]
    return A[:, keep]


def solve_gram_dense(A, d, b):
    """Minimum-norm solution of (A^T diag(d) A) x = b via pseudo-inverse."""
    M = A.T @ (d[:, None] * A)
    return np.linalg.pinv(M) @ b


def leverage_scores(B):
    """sigma_i = b_i^T (B^T B)^+ b_i for each row b_i of B."""
    P = B @ np.linalg.pinv(B.T @ B) @ B.T
    return np.diag(P).copy()


def lewis_weights_fixed_point(A, g, z, p, iters=2000, tol=1e-13):
    """Regularized lp Lewis weights: w = sigma(W^{1/2-1/p} G A) + z, by fixed-point
    iteration run to convergence."""
    m = A.shape[0]
    w = np.ones(m)
    for _ in range(iters):
        B = (w ** (0.5 - 1.0 / p) * g)[:, None] * A
        w_new = leverage_scores(B) + z
        if np.max(np.abs(np.log(w_new / w))) < tol:
            return w_new
        w = w_new
    return w


# ---------------------------------------------------------------------------
# graph cuts / conductance
# ---------------------------------------------------------------------------

def conductance_of_cut(adj_deg, cut_edges, side_deg, other_deg):
    denom = min(side_deg, other_deg)
    if denom == 0:
        return np.inf
    return cut_edges / denom


def min_conductance_exhaustive(vertices, edges):
    """Minimum conductance over all cuts of a small undirected multigraph.

    ``edges`` is a list of (u, v) pairs among ``vertices``.  Degrees are edge
    counts.  Returns inf for graphs with < 2 vertices or no edges.
    """
    verts = list(vertices)
    k = len(verts)
    if k < 2 or not edges:
        return np.inf
    idx = {v: i for i, v in enumerate(verts)}
    deg = np.zeros(k)
    for u, v in edges:
        deg[idx[u]] += 1
        deg[idx[v]] += 1
    total = deg.sum()
    best = np.inf
    # enumerate nonempty proper subsets; fix vertex 0 out of S to halve work
    for mask in range(1, 1 << (k - 1)):
        side = np.array([(mask >> i) & 1 for i in range(k - 1)] + [0], dtype=bool)
        vol = deg[side].sum()
        cut = sum(1 for u, v in edges if side[idx[u]] != side[idx[v]])
        c = conductance_of_cut(deg, cut, vol, total - vol)
        best = min(best, c)
    return best


def spectral_lambda2(vertices, edges):
    """Second-smallest eigenvalue of the normalized Laplacian of a multigraph."""
    verts = list(vertices)
    k = len(verts)
    idx = {v: i for i, v in enumerate(verts)}
    Adj = np.zeros((k, k))
    for u, v in edges:
        Adj[idx[u], idx[v]] += 1
        Adj[idx[v], idx[u]] += 1
    deg = Adj.sum(axis=1)
    if np.any(deg == 0):
        return 0.0
    Dinv = 1.0 / np.sqrt(deg)
    L = np.eye(k) - Dinv[:, None] * Adj * Dinv[None, :]
    vals = np.linalg.eigvalsh(L)
    return float(vals[1]) if k >= 2 else np.inf


# ---------------------------------------------------------------------------
# exact min-cost flow by successive shortest paths (integer arithmetic)
# ---------------------------------------------------------------------------

def ssp_min_cost_flow(n, edges, cap, cost, demand):
    """Exact integral min-cost flow via successive shortest paths with potentials.

    Returns (flow per edge, total cost) or raises ValueError if infeasible.
    All arithmetic on Python ints.  Bellman-Ford bootstraps potentials so
    negative costs (without negative cycles) are fine.  demand follows the
    package convention: demand[v] is the net outflow required at v.
    """
    m = len(edges)
    cap = [int(c) for c in cap]
    cost = [int(c) for c in cost]
    demand = [-int(d) for d in demand]  # internally: net inflow owed
    if sum(demand) != 0:
        raise ValueError("unbalanced demands")

    # residual arcs: 2*e forward, 2*e+1 backward
    head = [0] * (2 * m)
    res = [0] * (2 * m)
    rcost = [0] * (2 * m)
    out = [[] for _ in range(n)]
    for e, (a, b) in enumerate(edges):
        head[2 * e] = b
        res[2 * e] = cap[e]
        rcost[2 * e] = cost[e]
        head[2 * e + 1] = a
        res[2 * e + 1] = 0
        rcost[2 * e + 1] = -cost[e]
        out[a].append(2 * e)
        out[b].append(2 * e + 1)

    INF = float("inf")

    # initial potentials via Bellman-Ford over forward arcs only
    pot = [0] * n
    for _ in range(n):
        changed = False
        for e, (a, b) in enumerate(edges):
            if cap[e] > 0 and pot[a] + cost[e] < pot[b]:
                pot[b] = pot[a] + cost[e]
                changed = True
        if not changed:
            break
    else:
        raise ValueError("negative cycle in input")

    excess = [-d for d in demand]  # supply > 0 means flow must leave

    import heapq

    def dijkstra(src):
        dist = [INF] * n
        par = [-1] * n
        dist[src] = 0
        pq = [(0, src)]
        while pq:
            d, v = heapq.heappop(pq)
            if d > dist[v]:
                continue
            for a in out[v]:
                if res[a] <= 0:
                    continue
                w = rcost[a] + pot[v] - pot[head[a]]
                assert w >= -1e-9
                nd = d + w
                if nd < dist[head[a]]:
                    dist[head[a]] = nd
                    par[head[a]] = a
                    heapq.heappush(pq, (nd, head[a]))
        return dist, par

    total = 0
    while True:
        try:
            s = next(v for v in range(n) if excess[v] > 0)
        except StopIteration:
            break
        dist, par = dijkstra(s)
        sinks = [v for v in range(n) if excess[v] < 0 and dist[v] < INF]
        if not sinks:
            raise ValueError("infeasible instance")
        t = min(sinks, key=lambda v: dist[v])
        # update potentials, capped at dist[t] so vertices beyond the sink
        # (or unreached) keep valid reduced costs
        for v in range(n):
            pot[v] += min(dist[v], dist[t])
        # bottleneck along path
        push = min(excess[s], -excess[t])
        v = t
        while v != s:
            a = par[v]
            push = min(push, res[a])
            v = head[a ^ 1]
        v = t
        while v != s:
            a = par[v]
            res[a] -= push
            res[a ^ 1] += push
            v = head[a ^ 1]
        excess[s] -= push
        excess[t] += push

    flow = [cap[e] - res[2 * e] for e in range(len(edges))]
    total = sum(f * c for f, c in zip(flow, cost))
    return flow, total


def enumerate_optimal_flows(n, edges, cap, cost, demand, limit=10):
    """All optimal integral flows of a tiny instance by brute force."""
    m = len(edges)
    best_cost = None
    best = []
    ranges = [range(int(c) + 1) for c in cap]
    for combo in itertools.product(*ranges):
        bal = [0] * n
        for e, (a, b) in enumerate(edges):
            bal[a] += combo[e]
            bal[b] -= combo[e]
        if any(bal[v] != demand[v] for v in range(n)):
            continue
        c = sum(f * w for f, w in zip(combo, cost))
        if best_cost is None or c < best_cost:
            best_cost = c
            best = [combo]
        elif c == best_cost and len(best) < limit:
            best.append(combo)
    if best_cost is None:
        raise ValueError("infeasible")
    return best, best_cost


def bellman_ford(n, arcs, src):
    """Shortest distances from src over (u, v, w) arcs; None entries unreachable.

    Raises ValueError on a negative cycle reachable from src.
    """
    INF = float("inf")
    dist = [INF] * n
    dist[src] = 0
    for i in range(n):
        changed = False
        for u, v, w in arcs:
            if dist[u] < INF and dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return [None if d == INF else d for d in dist]
    raise ValueError("negative cycle")


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------

def flat_maximize_grid(a, l, iters=4000, seed=0):
    """Maximize <a, x> over ||x||_2 + ||l^{-1} x||_inf <= 1 by projected search.

    Exploits the structure: for a fixed split t in [0,1], the optimum uses an
    l2 budget (1 - t) and per-coordinate caps t * l, so we line-search t and
    solve the capped-l2 subproblem exactly.
    """
    a = np.asarray(a, float)
    l = np.asarray(l, float)

    def capped_value(t):
        # maximize <a,x> s.t. ||x||_2 <= 1 - t, |x_i| <= t * l_i
        r = 1.0 - t
        cap = t * l
        # water-filling on |a| direction: x_i = min(lam * |a_i|, cap_i) * sign
        lo, hi = 0.0, 1e12
        for _ in range(200):
            lam = 0.5 * (lo + hi)
            x = np.minimum(lam * np.abs(a), cap)
            if np.linalg.norm(x) > r:
                hi = lam
            else:
                lo = lam
        x = np.minimum(lo * np.abs(a), cap)
        return float(np.abs(a) @ x)

    ts = np.linspace(0.0, 1.0, 2001)
    return max(capped_value(t) for t in ts)
