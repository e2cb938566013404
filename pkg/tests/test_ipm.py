import math

import numpy as np
import pytest

from flowipm.gradient import flat_maximize
from flowipm.graph import WeightedDigraph
from flowipm.ipm import (
    TAU_MAX,
    Z_LIMIT,
    Z_OFFSET,
    Ipm,
    IpmError,
    IpmOptions,
    IpmParams,
)
from flowipm.mcf import McfConfig, _make_ipm, build_initial


def random_instance(seed, n=5, extra=4, umax=8, cmax=8):
    rng = np.random.default_rng(seed)
    edges = [(v - 1, v) for v in range(1, n)]
    while len(edges) < n - 1 + extra:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.append((int(a), int(b)))
    m = len(edges)
    cap = rng.integers(1, umax + 1, m)
    cost = rng.integers(-cmax, cmax + 1, m)
    f = rng.integers(0, cap + 1)
    d = np.zeros(n, dtype=np.int64)
    for e, (a, b) in enumerate(edges):
        d[a] += f[e]
        d[b] -= f[e]
    return WeightedDigraph.build(n, edges, cap, cost, d)


def make_ipm(seed=0, n=5, mode="paper", audit=False, identity_r=True, **cfg_kw):
    g = random_instance(seed, n=n)
    inst = build_initial(g, seed=seed)
    ipm = _make_ipm(inst, McfConfig(seed=seed, mode=mode, audit=audit, **cfg_kw))
    ipm.opt.identity_r = identity_r
    return inst, ipm


# -- parameter derivation ----------------------------------------------------


def test_params_formulas():
    p = IpmParams.derive(1024, 64, C=8.0)
    logmn = math.log2(4 * 1024 / 64)
    assert p.cnorm == pytest.approx(8 * logmn)
    assert p.alpha == pytest.approx(1 / (4 * logmn))
    assert p.eps == pytest.approx(min(p.alpha / 8, 1 / 80))
    assert p.lam == pytest.approx(8 * math.log2(8 * 1024 / p.eps**2) / p.eps)
    assert p.gamma == pytest.approx(p.eps / (8 * p.lam))
    assert p.r == pytest.approx(p.eps * p.gamma / (p.cnorm * math.sqrt(64)))


def test_params_log_ratio_floor():
    # m close to n: the log ratio floors at 2 instead of going to ~1
    dense = IpmParams.derive(8, 8, C=1.0)
    assert dense.cnorm == pytest.approx(2.0)
    assert dense.alpha == pytest.approx(1 / 8)


def test_params_eps_cap():
    # small C would push alpha/C above the centering cap
    p = IpmParams.derive(64, 8, C=1.0)
    assert p.eps == pytest.approx(1 / 80)


def test_params_step_scale_override():
    p = IpmParams.derive(100, 25, step_scale=0.3)
    assert p.r == pytest.approx(0.3 / 5)


def test_params_rejects_bad_eps():
    with pytest.raises(IpmError):
        IpmParams.derive(100, 25, eps=0.5)


def test_params_rejects_tiny_graph():
    with pytest.raises(IpmError):
        IpmParams.derive(0, 5)


# -- construction ------------------------------------------------------------


def test_initial_views_consistent():
    inst, ipm = make_ipm(seed=1)
    assert np.allclose(ipm.exact_x(), inst.x_init)
    assert np.allclose(ipm.exact_s(), inst.s_init)
    # published weights solve the regularized fixed point at the initial x
    ref = ipm.true_tau(inst.x_init)
    assert np.max(np.abs(np.log(ipm.taubar / ref))) < 1e-9
    assert np.all(ipm.taubar <= TAU_MAX + 1e-9)
    assert np.allclose(ipm.Delta, 0.0, atol=1e-9)


def test_initial_point_is_centered():
    for seed in range(4):
        inst, ipm = make_ipm(seed=seed)
        z = ipm.centrality(ipm.exact_x(), ipm.exact_s(),
                           ipm.true_tau(ipm.exact_x()), ipm.mu)
        assert np.max(np.abs(z)) < ipm.params.eps


def test_interior_validation():
    inst, ipm = make_ipm(seed=2)
    bad = inst.x_init.copy()
    bad[0] = -1.0
    with pytest.raises(IpmError):
        Ipm(inst.A, inst.b, inst.cost, inst.cap, bad, inst.s_init,
            inst.mu_init, ipm.params)


# -- notification wiring -----------------------------------------------------


def test_empty_update_touches_nothing(monkeypatch):
    _, ipm = make_ipm(seed=3)
    journal = []
    for obj, name in [(ipm.gradient, "update"), (ipm.gradient, "set_accuracy"),
                      (ipm.lewis, "lw_scale"), (ipm.sampler, "hs_scale"),
                      (ipm.dual, "dm_set_accuracy")]:
        orig = getattr(obj, name)
        monkeypatch.setattr(
            obj, name,
            lambda *a, _n=name, _o=orig, **k: journal.append(_n) or _o(*a, **k))
    ipm.update_for_x([])
    ipm.update_for_tau([])
    assert journal == []
    ipm.update_for_x([0])
    assert set(journal) == {"update", "set_accuracy", "lw_scale", "hs_scale",
                            "dm_set_accuracy"}


def test_centrality_clamp_counted():
    _, ipm = make_ipm(seed=4)
    ipm.sbar = ipm.sbar + 10.0 * ipm.mubar * ipm.taubar * np.sqrt(ipm.phi2(ipm.xbar))
    before = ipm.clamps
    zc = ipm._zc()
    assert np.max(zc) <= Z_LIMIT
    assert ipm.clamps > before


# -- stepping ----------------------------------------------------------------


def test_threshold_filtering_invariants():
    # coordinates are rewritten only when the scaled move crosses the
    # threshold, and unwritten coordinates stay inside the coupling band
    _, ipm = make_ipm(seed=5)
    gamma = ipm.params.gamma
    for _ in range(5):
        xbar0 = ipm.xbar.copy()
        step = ipm.short_step(ipm.mu)
        x = ipm.exact_x()
        changed = ipm.xbar != xbar0
        if changed.any():
            moved = np.abs(np.sqrt(ipm.phi2(ipm.xbar)) * (ipm.xbar - xbar0))
            assert np.all(moved[changed] > gamma / 2**12 * 0.5)
        stale = ~changed
        band = np.abs(np.sqrt(ipm.phi2(x)) * (x - ipm.xbar))
        assert np.all(band[stale] <= gamma / 2**12 + 2 * ipm.eps_gr + 1e-15)
        ipm.mu *= 1 - ipm.params.r
    # the exact mirror moves even when nothing is republished
    assert not np.array_equal(ipm.exact_x(), ipm.xbar)


def test_delta_matches_dense_recomputation():
    _, ipm = make_ipm(seed=6, mode="fast")
    for _ in range(8):
        ipm.short_step(ipm.mu)
        ipm.mu *= 1 - ipm.params.r
    v = ipm.A.apply_t(ipm.exact_x()) - ipm.b
    assert np.allclose(ipm.Delta, v, atol=1e-7 * max(1.0, np.abs(v).max()))


def test_trace_records_steps():
    trace = []
    _, ipm = make_ipm(seed=7, mode="fast", trace=trace)
    ipm.short_step(ipm.mu)
    ipm.short_step(ipm.mu)
    assert len(trace) == 2
    assert {"mu", "psi", "rounds", "changed_x"} <= set(trace[0])
    assert trace[0]["rounds"] > 0


def test_audit_passes_along_short_run():
    _, ipm = make_ipm(seed=8, audit=True)
    for _ in range(25):
        ipm.short_step(ipm.mu)
        ipm.mu *= 1 - ipm.params.r
        rep = ipm.audit_step()
        assert rep["centrality"] <= ipm.params.eps * 1.1


def test_audit_detects_displaced_point():
    from flowipm.ipm import IpmAuditError
    _, ipm = make_ipm(seed=9)
    ipm.x = ipm.x * 1.5  # wreck conservation and centering
    with pytest.raises(IpmAuditError):
        ipm.audit_step()


# -- dense twin --------------------------------------------------------------


class DenseTwin:
    """Unsparsified reference of the robust step, exact arithmetic throughout.

    Works from exact state (no lazy views, no sampling, no bucketing) and
    mirrors the same update equations; with the identity rescaling and tight
    accuracies the maintained solver must track it to floating-point noise.
    """

    def __init__(self, ipm):
        self.A = ipm.A.dense()
        self.Aop = ipm.A
        self.b = ipm.b.copy()
        self.u = ipm.u.copy()
        self.p = ipm.params
        self.x = ipm.exact_x()
        self.s = ipm.exact_s()
        self.mu = ipm.mu
        self.Delta = self.A.T @ self.x - self.b
        self.lewis_z = ipm.lewis.z.copy()
        self.lewis_p = ipm.lewis.p
        self._tau_seed = np.full(len(self.x), 1.0)

    def phi1(self, x):
        return -1.0 / x + 1.0 / (self.u - x)

    def phi2(self, x):
        return 1.0 / x**2 + 1.0 / (self.u - x) ** 2

    def tau(self, x):
        g = self.phi2(x) ** -0.5
        expo = 0.5 - 1.0 / self.lewis_p
        v = self._tau_seed
        for _ in range(500):
            w = np.abs(v) ** expo * g
            B = w[:, None] * self.A
            M = np.linalg.pinv(B.T @ B)
            nxt = np.einsum("ij,jk,ik->i", B, M, B) + self.lewis_z
            if np.max(np.abs(np.log(nxt / v))) < 1e-14:
                break
            v = nxt
        self._tau_seed = v
        return v

    def step(self, mu_new):
        p = self.p
        x, s = self.x, self.s
        p2 = self.phi2(x)
        tau = self.tau(x)
        z = (s + mu_new * tau * self.phi1(x)) / (mu_new * tau * np.sqrt(p2))
        zc = np.clip(z, -Z_LIMIT, Z_LIMIT)
        obj = p.lam * np.sinh(p.lam * zc)
        ball = p.cnorm * np.sqrt(tau)
        y = flat_maximize(obj / ball, ball)
        vflat = y / ball
        g = -p.gamma * p2**-0.5
        hprime = self.A.T @ (g * vflat)
        H = self.A.T @ ((1.0 / (tau * p2))[:, None] * self.A)
        hpp = np.linalg.lstsq(H, hprime + self.Delta, rcond=None)[0]
        rd = (1.0 / (tau * p2)) * (self.A @ hpp)
        self.x = x + g * vflat - rd
        self.Delta = self.Delta + hprime - self.A.T @ rd
        h2 = np.linalg.lstsq(H, hprime, rcond=None)[0]
        self.s = s + mu_new * (self.A @ h2)
        self.mu = mu_new


def test_dense_twin_one_step():
    _, ipm = make_ipm(seed=10)
    twin = DenseTwin(ipm)
    ipm.short_step(ipm.mu)
    twin.step(ipm.mu)
    scale = max(1.0, float(np.abs(twin.x).max()))
    assert np.max(np.abs(ipm.exact_x() - twin.x)) <= 1e-8 * scale
    sscale = max(1.0, float(np.abs(twin.s).max()))
    assert np.max(np.abs(ipm.exact_s() - twin.s)) <= 1e-8 * sscale


def test_dense_twin_divergence_bounded():
    _, ipm = make_ipm(seed=11)
    twin = DenseTwin(ipm)
    for _ in range(60):
        ipm.short_step(ipm.mu)
        twin.step(ipm.mu)
        ipm.mu *= 1 - ipm.params.r
        twin.mu = ipm.mu
    xs = max(1.0, float(np.abs(twin.x).max()))
    ss = max(1.0, float(np.abs(twin.s).max()))
    assert np.max(np.abs(ipm.exact_x() - twin.x)) <= 1e-6 * xs
    assert np.max(np.abs(ipm.exact_s() - twin.s)) <= 1e-6 * ss


# -- outer loop --------------------------------------------------------------


def test_path_following_max_steps_and_callback():
    _, ipm = make_ipm(seed=12, mode="fast")
    seen = []
    ipm.path_following(0.0, callback=lambda st: seen.append(st.iterations) or False,
                       check_every=5, max_steps=17)
    assert ipm.iterations == 17
    assert seen == [5, 10, 15]


def test_path_following_stops_at_target():
    _, ipm = make_ipm(seed=13, mode="fast")
    target = ipm.mu * (1 - ipm.params.r) ** 10 * 1.0001
    ipm.path_following(target, max_steps=1000)
    assert ipm.mu <= target
    assert ipm.iterations <= 11
