import numpy as np
import pytest

from flowipm.generators import (
    GeneratorError,
    gen_clique,
    gen_dumbbell,
    gen_grid,
    gen_random,
    generate,
)
from flowipm.graph import load_dimacs, save_dimacs
from flowipm.mcf import oracle_solve


def _dimacs_bytes(g, tmp_path, name):
    path = tmp_path / name
    save_dimacs(g, str(path))
    return path.read_bytes()


@pytest.mark.parametrize("kind,params", [
    ("clique", {"k": 6}),
    ("dumbbell", {"k": 5}),
    ("random", {"n": 30, "m": 120}),
    ("grid", {"rows": 4, "cols": 5}),
])
def test_same_seed_byte_identical(tmp_path, kind, params):
    a = _dimacs_bytes(generate(kind, seed=7, **params), tmp_path, "a")
    b = _dimacs_bytes(generate(kind, seed=7, **params), tmp_path, "b")
    assert a == b
    c = _dimacs_bytes(generate(kind, seed=8, **params), tmp_path, "c")
    assert a != c


def test_clique_shape():
    g = gen_clique(6)
    assert g.n == 6
    assert g.m == 30  # one arc per ordered pair
    assert np.all(g.cap == 1)
    assert sorted(g.edges) == sorted((a, b) for a in range(6)
                                     for b in range(6) if a != b)


def test_dumbbell_shape():
    g = gen_dumbbell(5)
    assert g.n == 10
    assert g.m == 2 * 20 + 2
    cross = [(a, b) for a, b in g.edges if (a < 5) != (b < 5)]
    assert sorted(cross) == [(4, 5), (5, 4)]


def test_random_shape():
    g = gen_random(30, 120, seed=3)
    assert (g.n, g.m) == (30, 120)
    # path backbone keeps the instance weakly connected
    assert all((v - 1, v) in set(map(tuple, g.edges)) for v in range(1, 30))


def test_grid_shape():
    g = gen_grid(3, 4)
    assert g.n == 12
    assert g.m == 3 * 3 + 2 * 4 + 1  # right arcs + down arcs + return arc
    assert (11, 0) in set(map(tuple, g.edges))


def test_generated_instances_are_feasible():
    for seed in range(5):
        g = gen_random(12, 36, seed=seed)
        _, cost = oracle_solve(g)  # raises if infeasible
        assert isinstance(cost, int)


def test_roundtrip_through_dimacs(tmp_path):
    g = gen_dumbbell(4, seed=2)
    path = tmp_path / "d.dimacs"
    save_dimacs(g, str(path))
    h = load_dimacs(str(path))
    assert h.n == g.n and h.m == g.m
    assert np.array_equal(h.cap, g.cap)
    assert np.array_equal(h.cost, g.cost)
    assert np.array_equal(h.demand, g.demand)


@pytest.mark.parametrize("call", [
    lambda: gen_clique(1),
    lambda: gen_dumbbell(1),
    lambda: gen_random(5, 2),
    lambda: gen_grid(1, 1),
    lambda: generate("torus", n=4),
])
def test_rejects_bad_parameters(call):
    with pytest.raises(GeneratorError):
        call()
