import math

import numpy as np
import pytest

from flowipm.graph import WeightedDigraph, incidence
from flowipm.leverage import LeverageMaint, LewisMaint, dense_leverage
from flowipm.primitives import Rng

from oracles import dense_incidence, leverage_scores, lewis_weights_fixed_point


def random_graph(seed, n=10, m=24):
    rng = np.random.default_rng(seed)
    edges = []
    # spanning path keeps the column-reduced incidence full rank
    for v in range(1, n):
        edges.append((v - 1, v))
    while len(edges) < m:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.append((int(a), int(b)))
    G = WeightedDigraph.build(n, edges, np.ones(m, dtype=np.int64), np.zeros(m, dtype=np.int64))
    return G, rng


def test_dense_leverage_matches_oracle_and_trace():
    G, rng = random_graph(50)
    A = incidence(G)
    Ad = dense_incidence(G.n, G.edges, A.removed)
    v = np.exp(rng.normal(0, 0.5, G.m))
    sig = dense_leverage(Ad, v)
    np.testing.assert_allclose(sig, leverage_scores(v[:, None] * Ad), atol=1e-10)
    assert abs(sig.sum() - (G.n - 1)) < 1e-8  # trace = rank of the reduced incidence


def band_ok(sigma_bar, sigma_true, eps):
    return np.all(np.abs(np.log(sigma_bar / sigma_true)) <= eps + 1e-12)


class TestLeverageMaint:
    def make(self, seed=51, eps=0.3, n=10, m=24):
        G, rng = random_graph(seed, n, m)
        A = incidence(G)
        v = np.exp(rng.normal(0, 0.3, G.m))
        z = np.full(G.m, 3 * G.n / G.m)
        return G, A, v, z, LeverageMaint(A, v, z, eps, rng=Rng(seed)), rng

    def test_init_within_band(self):
        G, A, v, z, D, _ = self.make()
        true = dense_leverage(D.Ad, v) + z
        assert band_ok(D.sigma_bar, true, D.eps)

    def test_query_without_scales_keeps_band(self):
        G, A, v, z, D, _ = self.make()
        for _ in range(4):
            changed, sig = D.ls_query()
            true = dense_leverage(D.Ad, D.v) + z
            assert band_ok(sig, true, D.eps)

    def test_scale_then_query_tracks(self):
        G, A, v, z, D, rng = self.make()
        for step in range(6):
            k = int(rng.integers(1, 4))
            I = rng.choice(G.m, size=k, replace=False)
            c = D.v[I] * np.exp(rng.uniform(-0.2, 0.2, k))
            D.ls_scale(I, c)
            changed, sig = D.ls_query()
            true = dense_leverage(D.Ad, D.v) + z
            assert band_ok(sig, true, D.eps), f"band broken at step {step}"

    def test_scale_outside_drift_band_rejected(self):
        G, A, v, z, D, _ = self.make()
        with pytest.raises(ValueError, match="drift"):
            D.ls_scale([0], [D.v[0] * 2.0])

    def test_epoch_restart_reports_full_change(self):
        G, A, v, z, D, _ = self.make(eps=0.9, n=10)
        # T = ceil(eps^2 sqrt(n)) is small; drive past it
        for _ in range(D.T):
            D.ls_query()
        changed, sig = D.ls_query()
        assert changed == set(range(G.m))
        true = dense_leverage(D.Ad, D.v) + z
        assert band_ok(sig, true, D.eps)

    def test_regularizer_floor_enforced(self):
        G, rng = random_graph(52)
        A = incidence(G)
        with pytest.raises(ValueError, match="3n/m"):
            LeverageMaint(A, np.ones(G.m), np.zeros(G.m), 0.3)


class TestLewisMaint:
    def make(self, seed=53, n=10, m=24, p=None, eps=0.05, chain_len=6):
        G, rng = random_graph(seed, n, m)
        A = incidence(G)
        if p is None:
            p = 1 - 1 / (4 * math.log2(4 * m / n))
        g = np.exp(rng.normal(0, 0.3, G.m))
        z = np.full(G.m, 3 * G.n / G.m)
        lm = LewisMaint(A, g, z, p, delta=2.0, eps=eps, rng=Rng(seed), chain_len=chain_len)
        return G, A, g, z, p, lm, rng

    def fixed_point_residual(self, lm, tau):
        sig = dense_leverage(lm.Ad, tau**lm.expo * lm.g) + lm.z
        return float(np.max(np.abs(np.log(tau / sig))))

    def test_init_matches_fixed_point_oracle(self):
        G, A, g, z, p, lm, _ = self.make()
        oracle = lewis_weights_fixed_point(lm.Ad, g, z, p)
        assert np.max(np.abs(np.log(lm.vbar[0] / oracle))) <= lm.eps + 1e-9

    def test_query_fixed_point_band(self):
        G, A, g, z, p, lm, rng = self.make()
        for step in range(5):
            k = int(rng.integers(1, 4))
            I = rng.choice(G.m, size=k, replace=False)
            b = lm.g[I] * np.exp(rng.uniform(-0.05, 0.05, k))
            lm.lw_scale(I, b)
            changed, tau = lm.lw_query()
            assert self.fixed_point_residual(lm, tau) <= lm.eps + 1e-9, f"step {step}"
            assert np.all(tau >= lm.z * math.exp(-lm.eps) - 1e-12)

    def test_drift_precondition_enforced(self):
        G, A, g, z, p, lm, _ = self.make()
        with pytest.raises(ValueError, match="drift"):
            lm.lw_scale([0], [lm.g[0] * 5.0])

    def test_p_near_two_degenerates_to_leverage(self):
        G, A, g, z, _, _, rng = self.make()
        lm = LewisMaint(A, g, z, 1.999999, delta=2.0, eps=0.05, rng=Rng(1), chain_len=3)
        sig = dense_leverage(lm.Ad, g) + z
        assert np.max(np.abs(np.log(lm.vbar[0] / sig))) < 1e-3

    def test_parameter_validation(self):
        G, A, g, z, p, lm, _ = self.make()
        with pytest.raises(ValueError):
            LewisMaint(A, g, z, 2.5, delta=2.0, eps=0.05)
        with pytest.raises(ValueError):
            LewisMaint(A, g, z, 1.0, delta=0.5, eps=0.05)
