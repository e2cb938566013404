"""Min-cost-flow front end for the central-path solver.

Pipeline: isolate the optimum by a tiny random cost perturbation (implemented
as integer scaling so all certificates stay exact), build a strictly interior
initial point by adding an auxiliary hub vertex with expensive two-way star
edges, run path following, repair feasibility with one weighted Laplacian
projection, and round to the nearest integral flow.  A successive-shortest-path
oracle (exact integer arithmetic) is provided for verification, plus standard
reductions from max-flow / bipartite matching / SSSP / reachability.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError, IncidenceMatrix, ProblemBounds, WeightedDigraph, incidence
from .ipm import Ipm, IpmError, IpmOptions, IpmParams
from .sdd import SddSystem

INT_GUARD = 2**62  # scaled-cost magnitudes must stay below this


class McfError(RuntimeError):
    pass


# -- perturbation ------------------------------------------------------------


def perturb_costs(g: WeightedDigraph, seed: int) -> tuple[np.ndarray, int]:
    """Scale costs by 4 m^2 W^3 and add integer jitter in {1..2mW}.

    The jitter keeps the relative perturbation below 1/(2W^2) in total, so
    every optimum of the perturbed instance is an optimum of the original,
    while making the perturbed optimum unique with high probability.
    """
    m = g.m
    W = ProblemBounds.of(g).W
    scale = 4 * m * m * W**3
    top = int(np.abs(g.cost).max(initial=0))
    if scale * (top + 1) + 2 * m * W >= INT_GUARD:
        raise McfError("perturbed costs would overflow 62-bit integers")
    rng = np.random.default_rng(seed)
    jitter = rng.integers(1, 2 * m * W + 1, size=m, dtype=np.int64)
    return g.cost.astype(np.int64) * scale + jitter, scale


# -- modified instance -------------------------------------------------------


@dataclass
class McfInstance:
    base: WeightedDigraph  # input minus zero-capacity edges
    graph: WeightedDigraph  # with the auxiliary hub and star edges
    A: IncidenceMatrix
    hub: int
    m_orig: int
    edge_map: list[int]  # base edge -> input edge index
    cost_scale: int
    cost: np.ndarray  # float LP costs (scaled integers; star edges larger)
    cap: np.ndarray  # float LP capacities (star: twice the initial flow)
    b: np.ndarray  # reduced right-hand side (inflow convention)
    x_init: np.ndarray
    s_init: np.ndarray
    mu_init: float
    mu_target: float


def build_initial(g: WeightedDigraph, seed: int = 0,
                  eps: float = 1.0 / 80.0) -> McfInstance:
    g.validate()
    keep = [e for e in range(g.m) if g.cap[e] > 0]
    base = WeightedDigraph.build(
        g.n, [g.edges[e] for e in keep], g.cap[keep], g.cost[keep], g.demand,
    )
    if base.m == 0:
        raise McfError("instance has no usable (positive-capacity) edges")
    n, m = base.n, base.m
    W = ProblemBounds.of(base).W
    pert, scale = perturb_costs(base, seed)

    hub = n
    edges = list(base.edges) + [(v, hub) for v in range(n)] + [(hub, v) for v in range(n)]
    m_tot = m + 2 * n

    # interior start: half capacity on real edges, demand imbalance routed
    # through the star on top of a base unit in both directions
    x_init = np.empty(m_tot)
    x_init[:m] = base.cap / 2.0
    net_out = np.zeros(n)
    for e, (a, bb) in enumerate(base.edges):
        net_out[a] += x_init[e]
        net_out[bb] -= x_init[e]
    excess = base.demand - net_out  # extra outflow each vertex still owes
    x_init[m:m + n] = 1.0 + np.maximum(excess, 0.0)  # (v, hub)
    x_init[m + n:] = 1.0 + np.maximum(-excess, 0.0)  # (hub, v)

    cap = np.empty(m_tot)
    cap[:m] = base.cap.astype(np.float64)
    cap[m:] = 2.0 * x_init[m:]

    cost = np.empty(m_tot)
    cost[:m] = pert.astype(np.float64)
    unscaled_norm = float(np.abs(pert).max()) / scale
    cost[m:] = 50.0 * m_tot * float(base.cap.max()) * float(np.abs(pert).max())

    demand = np.concatenate([base.demand.astype(np.int64), [0]])
    graph = WeightedDigraph.build(
        n + 1, edges, np.maximum(np.ceil(cap), 1).astype(np.int64),
        np.zeros(m_tot, dtype=np.int64), demand,
    )
    A = incidence(graph)  # removes the hub column (last vertex)
    b = np.zeros(A.ncols)
    for v in range(n):
        b[A.col_of(v)] = -float(base.demand[v])  # rows carry -1 at tails

    mu_init = scale * 100.0 * m_tot**2 * max(float(base.cap.max()), unscaled_norm) ** 3 / eps
    mu_target = scale / (12.0 * m_tot**3 * W**4)

    inst = McfInstance(
        base=base, graph=graph, A=A, hub=hub, m_orig=m,
        edge_map=keep, cost_scale=scale, cost=cost, cap=cap, b=b,
        x_init=x_init, s_init=cost.copy(), mu_init=mu_init, mu_target=mu_target,
    )
    if np.max(np.abs(A.apply_t(x_init) - b)) > 1e-9 * max(1.0, np.abs(b).max()):
        raise McfError("initial point violates conservation")
    return inst


# -- optimality certificate --------------------------------------------------


def _residual_has_negative_cycle(n, edges, cap, cost, flow) -> bool:
    """Bellman-Ford negative-cycle test on the residual graph, all integers."""
    arcs = []
    for e, (a, b) in enumerate(edges):
        if flow[e] < cap[e]:
            arcs.append((a, b, int(cost[e])))
        if flow[e] > 0:
            arcs.append((b, a, -int(cost[e])))
    dist = [0] * n
    for it in range(n):
        changed = False
        for a, b, w in arcs:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
                changed = True
        if not changed:
            return False
    return True


def _candidate_flow(inst: McfInstance, x: np.ndarray) -> np.ndarray | None:
    """Round the real-edge coordinates; None unless a feasible flow results."""
    base = inst.base
    f = np.rint(x[:inst.m_orig]).astype(np.int64)
    if np.any(f < 0) or np.any(f > base.cap):
        return None
    net = np.zeros(base.n, dtype=np.int64)
    for e, (a, b) in enumerate(base.edges):
        net[a] += f[e]
        net[b] -= f[e]
    if np.any(net != base.demand):
        return None
    return f


def certify_optimal(inst: McfInstance, f: np.ndarray) -> bool:
    """Exact optimality of a feasible integral flow for the perturbed costs."""
    pert = inst.cost[:inst.m_orig].astype(np.int64)
    return not _residual_has_negative_cycle(
        inst.base.n, inst.base.edges, inst.base.cap, pert, f)


# -- solve -------------------------------------------------------------------


@dataclass
class McfConfig:
    seed: int = 0
    mode: str = "fast"  # "fast" (desk step sizes) or "paper"
    audit: bool = False
    step_scale: float | None = None
    constants: dict = field(default_factory=dict)  # C/eps/lam/gamma overrides
    max_steps: int | None = None
    check_every: int = 20
    early_exit: bool = True
    trace: list | None = None
    phi: float | None = None  # sampler expander conductance override


# desk profile: aggressive step sizes that the acceptance corpus converges
# under; the theory-grade profile keeps every derived constant
FAST_DEFAULTS = dict(C=1.0, eps=1.0 / 80.0, lam=8.0, gamma=3.0)
FAST_STEP_SCALE = 0.28


@dataclass
class McfResult:
    flow: np.ndarray  # on the input edge ids
    cost: int  # against the original integer costs
    iterations: int
    early_exit: bool
    clamps: int
    rounds: int = 0  # sequential batch phases (depth proxy)
    solver_retries: int = 0
    audits: list = field(default_factory=list)


def _make_ipm(inst: McfInstance, cfg: McfConfig) -> Ipm:
    m_tot, n_tot = inst.graph.m, inst.graph.n
    cons = dict(cfg.constants)
    if cfg.mode == "fast":
        merged = dict(FAST_DEFAULTS)
        merged.update(cons)
        params = IpmParams.derive(
            m_tot, n_tot,
            C=merged.get("C", 1.0),
            step_scale=cfg.step_scale if cfg.step_scale is not None else FAST_STEP_SCALE,
            eps=merged.get("eps"), lam=merged.get("lam"), gamma=merged.get("gamma"),
        )
        options = IpmOptions(
            audit=cfg.audit, identity_r=True, gradient_eps=0.01,
            lewis_eps=0.05, lewis_delta=None, lewis_chain=2, dual_eps=0.01,
            solver_eps=1e-8, seed=cfg.seed, trace=cfg.trace, phi=cfg.phi,
        )
    elif cfg.mode == "paper":
        params = IpmParams.derive(
            m_tot, n_tot, C=cons.get("C", 8.0), step_scale=cfg.step_scale,
            eps=cons.get("eps"), lam=cons.get("lam"), gamma=cons.get("gamma"),
        )
        options = IpmOptions(audit=cfg.audit, seed=cfg.seed, trace=cfg.trace,
                             phi=cfg.phi)
    else:
        raise McfError(f"unknown mode {cfg.mode!r}")
    return Ipm(inst.A, inst.b, inst.cost, inst.cap, inst.x_init, inst.s_init,
               inst.mu_init, params, options)


def repair_feasibility(inst: McfInstance, ipm: Ipm, x: np.ndarray,
                       accuracy: float) -> np.ndarray:
    """One weighted Laplacian projection back onto conservation."""
    tau = ipm.taubar  # maintained weights are accurate enough here
    p2 = ipm.phi2(np.clip(x, 1e-9 * inst.cap, (1 - 1e-9) * inst.cap))
    d = 1.0 / (tau * p2)
    sys = SddSystem(inst.A, d, eps=accuracy)
    y = sys.solve(inst.b - inst.A.apply_t(x))
    return x + d * inst.A.apply(y)


# retry profile when the primary run fails to certify: shorter steps, milder
# recentering, and a fresh perturbation (any perturbed optimum is an optimum
# of the original costs, so switching seeds is sound)
SAFE_RETRY = dict(step_scale=0.12, gamma=1.3, lam=10.0)


def check_feasible(g: WeightedDigraph) -> bool:
    """Max-flow feasibility check: can every demand be met within capacity?"""
    excess = [int(d) for d in g.demand]
    src, snk = g.n, g.n + 1
    cap: dict[tuple[int, int], int] = {}
    for e in range(g.m):
        a, b = g.edges[e]
        cap[(a, b)] = cap.get((a, b), 0) + int(g.cap[e])
    need = 0
    for v, ex in enumerate(excess):
        if ex > 0:
            cap[(src, v)] = cap.get((src, v), 0) + ex
            need += ex
        elif ex < 0:
            cap[(v, snk)] = cap.get((v, snk), 0) - ex
    if need == 0:
        return True
    import networkx as nx
    H = nx.DiGraph()
    H.add_nodes_from(range(g.n + 2))
    for (a, b), u in cap.items():
        H.add_edge(a, b, capacity=u)
    return nx.maximum_flow_value(H, src, snk) >= need


def solve_mcf(g: WeightedDigraph, cfg: McfConfig | None = None) -> McfResult:
    cfg = cfg or McfConfig()
    if not check_feasible(g):
        raise McfError("instance is infeasible: demands cannot be routed "
                       "within the given capacities")
    try:
        return _solve_once(g, cfg)
    except (McfError, IpmError, ValueError) as first:
        if isinstance(first, McfError) and "overflow" in str(first):
            raise
        import dataclasses
        retry = dataclasses.replace(
            cfg, seed=cfg.seed + 1000, step_scale=SAFE_RETRY["step_scale"],
            constants={**cfg.constants,
                       "gamma": SAFE_RETRY["gamma"], "lam": SAFE_RETRY["lam"]},
        )
        return _solve_once(g, retry)


def _solve_once(g: WeightedDigraph, cfg: McfConfig) -> McfResult:
    inst = build_initial(g, seed=cfg.seed)
    ipm = _make_ipm(inst, cfg)

    hit = {"flow": None}

    def early(state: Ipm) -> bool:
        f = _candidate_flow(inst, state.exact_x())
        if f is not None and certify_optimal(inst, f):
            hit["flow"] = f
            return True
        return False

    callback = early if cfg.early_exit else None
    x, _s = ipm.path_following(inst.mu_target, callback=callback,
                               check_every=cfg.check_every,
                               max_steps=cfg.max_steps)

    f = hit["flow"]
    if f is None:
        W = ProblemBounds.of(inst.base).W
        acc = 1.0 / (inst.graph.m**4 * W**4)
        for attempt in range(2):
            xr = repair_feasibility(inst, ipm, x, acc)
            f = _candidate_flow(inst, xr)
            if f is not None:
                break
            acc *= 1e-6  # tighter retry tier
        if f is None:
            f = _candidate_flow(inst, x)
        if f is None:
            raise McfError(
                "rounded point is not a flow (conservation or capacity "
                "violated); accuracy budget insufficient")
        if not certify_optimal(inst, f):
            raise McfError("rounded flow failed the exact optimality certificate")

    flow = np.zeros(g.m, dtype=np.int64)
    flow[inst.edge_map] = f
    cost = int(np.dot(flow.astype(object), g.cost.astype(object)))
    return McfResult(flow=flow, cost=cost, iterations=ipm.iterations,
                     early_exit=hit["flow"] is not None, clamps=ipm.clamps,
                     rounds=ipm.rounds, solver_retries=ipm.solver_retries)


# -- exact oracle ------------------------------------------------------------


def oracle_solve(g: WeightedDigraph, flow_limit: int = 10**6):
    """Optimal integral min-cost flow by successive shortest paths.

    Negative-cost edges are pre-saturated (shifting demands), after which
    augmentation uses Dijkstra with Johnson potentials.  Exact integers.
    """
    g.validate()
    n, m = g.n, g.m
    excess = [int(d) for d in g.demand]  # net outflow each vertex still owes
    flow = [0] * m
    arcs = []  # (to, cap, cost, partner-index) adjacency, paired residuals
    adj: list[list[int]] = [[] for _ in range(n)]

    def add_arc(a, b, cap, cost):
        adj[a].append(len(arcs))
        arcs.append([b, cap, cost])
        adj[b].append(len(arcs))
        arcs.append([a, 0, -cost])

    for e, (a, b) in enumerate(g.edges):
        c, u = int(g.cost[e]), int(g.cap[e])
        if c < 0:  # saturate, keep the reverse arc only
            flow[e] = u
            excess[a] -= u
            excess[b] += u
            add_arc(b, a, u, -c)
        else:
            add_arc(a, b, u, c)
            # remember mapping by construction: arc 2e (forward) belongs to e
    # rebuild mapping arc index -> edge for extraction
    arc_of_edge = {}
    idx = 0
    for e in range(m):
        arc_of_edge[e] = 2 * e
        idx += 2

    total = sum(x for x in excess if x > 0)
    if total > flow_limit:
        raise McfError("oracle guarded: flow volume too large")
    S, T = n, n + 1
    adj.append([])
    adj.append([])
    for v in range(n):
        if excess[v] > 0:
            adj[S].append(len(arcs))
            arcs.append([v, excess[v], 0])
            adj[v].append(len(arcs))
            arcs.append([S, 0, 0])
        elif excess[v] < 0:
            adj[v].append(len(arcs))
            arcs.append([T, -excess[v], 0])
            adj[T].append(len(arcs))
            arcs.append([v, 0, 0])

    nn = n + 2
    # Bellman-Ford initial potentials (graph may have been all-nonnegative,
    # but supersource arcs are free so this stays cheap)
    pot = [0] * nn
    for _ in range(nn):
        changed = False
        for v in range(nn):
            for ai in adj[v]:
                to, cap, cost = arcs[ai]
                if cap > 0 and pot[v] + cost < pot[to]:
                    pot[to] = pot[v] + cost
                    changed = True
        if not changed:
            break
    else:
        raise McfError("negative cycle in residual network")

    INF = float("inf")
    sent = 0
    while sent < total:
        dist = [INF] * nn
        prev = [-1] * nn
        dist[S] = 0
        pq = [(0, S)]
        while pq:
            d, v = heapq.heappop(pq)
            if d > dist[v]:
                continue
            for ai in adj[v]:
                to, cap, cost = arcs[ai]
                if cap <= 0:
                    continue
                nd = d + cost + pot[v] - pot[to]
                if nd < dist[to]:
                    dist[to] = nd
                    prev[to] = ai
                    heapq.heappush(pq, (nd, to))
        if dist[T] == INF:
            raise McfError("infeasible instance: demands cannot be routed")
        for v in range(nn):
            if dist[v] < INF:
                pot[v] += dist[v]
        # bottleneck along the path
        push = total - sent
        v = T
        while prev[v] != -1:
            ai = prev[v]
            push = min(push, arcs[ai][1])
            v = arcs[ai ^ 1][0]
        v = T
        while prev[v] != -1:
            ai = prev[v]
            arcs[ai][1] -= push
            arcs[ai ^ 1][1] += push
            v = arcs[ai ^ 1][0]
        sent += push

    for e in range(m):
        ai = arc_of_edge[e]
        if int(g.cost[e]) < 0:
            # stored arc runs b->a with cap u; its used amount = units undone
            undone = int(g.cap[e]) - arcs[ai][1]
            flow[e] = int(g.cap[e]) - undone
        else:
            flow[e] = int(g.cap[e]) - arcs[ai][1]

    cost = sum(int(f) * int(c) for f, c in zip(flow, g.cost))
    return np.array(flow, dtype=np.int64), cost


# -- reductions --------------------------------------------------------------


@dataclass
class Reduction:
    graph: WeightedDigraph
    extract: object  # callable(flow on reduction graph) -> answer


def reduce_maxflow(g: WeightedDigraph, s: int, t: int) -> Reduction:
    if not (0 <= s < g.n and 0 <= t < g.n) or s == t:
        raise GraphError("bad terminals")
    edges = list(g.edges) + [(t, s)]
    back_cap = int(g.cap.sum()) + 1
    cap = np.concatenate([g.cap, [back_cap]])
    cost = np.concatenate([np.zeros(g.m, dtype=np.int64), [-1]])
    red = WeightedDigraph.build(g.n, edges, cap, cost)

    def extract(flow):
        return int(flow[-1])

    return Reduction(graph=red, extract=extract)


def reduce_matching(n_left: int, n_right: int, pairs: list) -> Reduction:
    for a, b in pairs:
        if not (0 <= a < n_left and 0 <= b < n_right):
            raise GraphError("pair references an unknown vertex")
    s = n_left + n_right
    t = s + 1
    edges = [(s, a) for a in range(n_left)]
    edges += [(a, n_left + b) for a, b in pairs]
    edges += [(n_left + b, t) for b in range(n_right)]
    edges.append((t, s))
    m = len(edges)
    cap = np.ones(m, dtype=np.int64)
    cap[-1] = max(n_left, n_right) + 1
    cost = np.zeros(m, dtype=np.int64)
    cost[-1] = -1
    red = WeightedDigraph.build(n_left + n_right + 2, edges, cap, cost)
    first_pair = n_left

    def extract(flow):
        matched = []
        for k, (a, b) in enumerate(pairs):
            if flow[first_pair + k] > 0:
                matched.append((a, b))
        return matched

    return Reduction(graph=red, extract=extract)


def reduce_sssp(g: WeightedDigraph, src: int) -> Reduction:
    if not (0 <= src < g.n):
        raise GraphError("source out of range")
    n = g.n
    big = int(n * (np.abs(g.cost).max(initial=0) + 1) + 1)
    edges = list(g.edges) + [(src, v) for v in range(n) if v != src]
    cap = np.concatenate([np.full(g.m, n, dtype=np.int64),
                          np.ones(n - 1, dtype=np.int64)])
    cost = np.concatenate([g.cost, np.full(n - 1, big, dtype=np.int64)])
    demand = np.full(n, -1, dtype=np.int64)
    demand[src] = n - 1
    red = WeightedDigraph.build(n, edges, cap, cost, demand)

    def extract(flow):
        # distances = shortest paths in the residual graph of the optimum
        arcs = []
        for e, (a, b) in enumerate(red.edges):
            if flow[e] < red.cap[e]:
                arcs.append((a, b, int(red.cost[e])))
            if flow[e] > 0:
                arcs.append((b, a, -int(red.cost[e])))
        dist = [math.inf] * n
        dist[src] = 0
        for _ in range(n):
            changed = False
            for a, b, w in arcs:
                if dist[a] + w < dist[b]:
                    dist[b] = dist[a] + w
                    changed = True
            if not changed:
                break
        return [d if d < big else math.inf for d in dist]

    return Reduction(graph=red, extract=extract)


def reduce_reachability(g: WeightedDigraph, src: int) -> Reduction:
    if not (0 <= src < g.n):
        raise GraphError("source out of range")
    n = g.n
    edges = list(g.edges) + [(src, v) for v in range(n) if v != src]
    cap = np.concatenate([np.full(g.m, n, dtype=np.int64),
                          np.ones(n - 1, dtype=np.int64)])
    cost = np.concatenate([np.zeros(g.m, dtype=np.int64),
                           np.ones(n - 1, dtype=np.int64)])
    demand = np.full(n, -1, dtype=np.int64)
    demand[src] = n - 1
    red = WeightedDigraph.build(n, edges, cap, cost, demand)
    fallback = {e: v for e, v in zip(range(g.m, red.m),
                                     [v for v in range(n) if v != src])}

    def extract(flow):
        reach = [False] * n
        reach[src] = True
        for e, v in fallback.items():
            reach[v] = flow[e] == 0
        return reach

    return Reduction(graph=red, extract=extract)
