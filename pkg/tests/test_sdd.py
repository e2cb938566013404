import numpy as np
import pytest

from flowipm.graph import WeightedDigraph, incidence
from flowipm.sdd import SddSystem, SolverError, solve, solve_gram

from oracles import dense_incidence, solve_gram_dense


def random_connected_graph(rng, n, extra=2.0):
    """Random connected digraph with ~extra*n edges."""
    edges = [(int(v), int(rng.integers(0, v))) for v in range(1, n)]
    target = int(extra * n)
    while len(edges) < target:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.append((int(a), int(b)))
    m = len(edges)
    return WeightedDigraph.build(n, edges, np.ones(m), np.zeros(m))


def test_single_edge_exact():
    g = WeightedDigraph.build(2, [(0, 1)], [1], [0])
    A = incidence(g, removed=0)
    x = solve(A, np.array([2.0]), np.array([2.0]))
    assert x == pytest.approx([1.0])


def test_zero_rhs():
    g = WeightedDigraph.build(2, [(0, 1)], [1], [0])
    A = incidence(g)
    assert np.all(solve(A, np.array([2.0]), np.array([0.0])) == 0)


def test_matches_dense_oracle_anorm():
    rng = np.random.default_rng(0)
    for trial in range(15):
        g = random_connected_graph(rng, 10)
        A = incidence(g)
        d = rng.uniform(0.1, 10.0, size=g.m)
        Ad = dense_incidence(g.n, g.edges, A.removed)
        xstar_free = rng.normal(size=g.n - 1)
        b = Ad.T @ (d[:, None] * Ad) @ xstar_free
        x = solve(A, d, b, eps=1e-8)
        xstar = solve_gram_dense(Ad, d, b)
        L = Ad.T @ (d[:, None] * Ad)
        err = x - xstar
        anorm = lambda v: np.sqrt(max(v @ L @ v, 0.0))
        assert anorm(err) <= 1e-8 * anorm(xstar) + 1e-10


def test_linearity():
    rng = np.random.default_rng(1)
    g = random_connected_graph(rng, 8)
    A = incidence(g)
    d = rng.uniform(0.5, 2.0, size=g.m)
    b = A.apply_t(rng.normal(size=g.m))
    x1 = solve(A, d, b, eps=1e-10)
    x2 = solve(A, d, 3.5 * b, eps=1e-10)
    assert np.allclose(3.5 * x1, x2, atol=1e-7)


def test_solve_gram_sparse_weights_match_dense_call():
    rng = np.random.default_rng(2)
    g = random_connected_graph(rng, 9, extra=3.0)
    A = incidence(g)
    v = rng.uniform(0.5, 2.0, size=g.m)
    v[rng.random(g.m) < 0.5] = 0.0
    Ad = dense_incidence(g.n, g.edges, A.removed)
    b = Ad.T @ (v[:, None] * Ad) @ rng.normal(size=g.n - 1)
    x = solve_gram(A, v, b, eps=1e-9)
    xstar = solve_gram_dense(Ad, v, b)
    L = Ad.T @ (v[:, None] * Ad)
    resid = L @ x - b
    # compare in the quotient space: residuals must match to tolerance
    assert np.linalg.norm(resid) <= 1e-6 * max(np.linalg.norm(b), 1.0)
    assert np.linalg.norm(L @ xstar - b) <= 1e-8 * max(np.linalg.norm(b), 1.0)


def test_triangle_gram_matches_oracle():
    g = WeightedDigraph.build(3, [(0, 1), (1, 2), (2, 0)], [1, 1, 1], [0, 0, 0])
    A = incidence(g)
    Ad = dense_incidence(3, g.edges, A.removed)
    v = np.ones(3)
    b = Ad.T @ (v[:, None] * Ad) @ np.array([1.0, -2.0])
    x = solve_gram(A, v, b, eps=1e-10)
    assert np.allclose(x, solve_gram_dense(Ad, v, b), atol=1e-8)


def test_residual_consistent_with_contract():
    rng = np.random.default_rng(3)
    g = random_connected_graph(rng, 12)
    A = incidence(g)
    d = rng.uniform(0.01, 100.0, size=g.m)
    b = A.apply_t(rng.normal(size=g.m))
    sys = SddSystem(A, d, eps=1e-9)
    x = sys.solve(b)
    bp = sys.project(b)
    assert np.linalg.norm(sys.L @ x - bp) <= 1e-6 * np.linalg.norm(bp)


def test_nonconvergence_is_loud():
    rng = np.random.default_rng(4)
    g = random_connected_graph(rng, 12)
    A = incidence(g)
    d = rng.uniform(1e-6, 1e6, size=g.m)
    b = A.apply_t(rng.normal(size=g.m))
    with pytest.raises(SolverError):
        solve(A, d, b, eps=1e-12, itcap=2)
