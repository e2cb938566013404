"""Robust central-path loop for the box-constrained flow LP.

Solves min c.x over {0 < x < u, A.T x = b} by path following: an outer loop
shrinks mu geometrically while an inner step keeps the point centered.  Every
step works against maintained approximations (xbar, sbar, taubar, mubar) held
by the five supporting structures -- bucketed gradient/primal accumulator,
slack (dual) maintenance, regularized Lewis weights, heavy-entry sampler, and
a Laplacian solver -- and only coordinates whose scaled change crosses the
listed gamma-thresholds are rewritten.

The barrier is logarithmic on both sides of the box; centrality of a point is
z = (s + mu tau phi'(x)) / (mu tau sqrt(phi''(x))), driven toward zero through
the flat (tau+inf-norm dual) gradient of the potential sum_e cosh(lam z_e).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import DualMaint
from .gradient import GradientMaint
from .graph import IncidenceMatrix
from .leverage import LewisMaint
from .primitives import Rng
from .sampler import HeavySampler
from .sdd import SddSystem, SolverError

# the gradient structure accepts arguments in [0.5, 2]; centrality values are
# shifted by this offset so the centered band sits mid-domain
Z_OFFSET = 1.25
Z_LIMIT = 0.745  # centrality magnitude beyond which we clamp (and count)
TAU_MAX = 4.0  # regularized weights stay below 1 + 3n/m <= 4
Z_REG = lambda n, m: 3.0 * n / m  # noqa: E731  (weight regularizer floor)


class IpmError(RuntimeError):
    pass


class IpmAuditError(IpmError):
    def __init__(self, message: str, state: dict):
        super().__init__(message + "\n" + json.dumps(state, default=str))
        self.state = state


@dataclass(frozen=True)
class IpmParams:
    """Step-size and potential constants, all derived from (C, m, n).

    alpha = 1/(4 log2(4m/n)); eps = alpha/C capped at 1/80; lam =
    C log2(C m / eps^2)/eps; gamma = eps/(C lam); cnorm = C log2(4m/n);
    r = eps gamma / (cnorm sqrt(n)).  Any of (eps, lam, gamma, step_scale)
    may be overridden for desk-scale runs; step_scale s sets r = s/sqrt(n).
    """

    m: int
    n: int
    C: float
    alpha: float
    eps: float
    lam: float
    gamma: float
    cnorm: float
    r: float

    @classmethod
    def derive(cls, m: int, n: int, C: float = 8.0, step_scale: float | None = None,
               eps: float | None = None, lam: float | None = None,
               gamma: float | None = None) -> "IpmParams":
        if m < 1 or n < 2:
            raise IpmError("need at least one edge and two vertices")
        logmn = max(2.0, math.log2(4.0 * m / n))
        cnorm = C * logmn
        alpha = 1.0 / (4.0 * logmn)
        e = float(eps) if eps is not None else min(alpha / C, 1.0 / 80.0)
        if not (0 < e <= 1.0 / 80.0):
            raise IpmError("centering requires eps in (0, 1/80]")
        l = float(lam) if lam is not None else C * math.log2(C * m / e**2) / e
        g = float(gamma) if gamma is not None else e / (C * l)
        if step_scale is not None:
            r = float(step_scale) / math.sqrt(n)
        else:
            r = e * g / (cnorm * math.sqrt(n))
        if not (0 < r < 1):
            raise IpmError(f"step rate r={r:g} outside (0, 1)")
        return cls(m=m, n=n, C=C, alpha=alpha, eps=e, lam=l, gamma=g,
                   cnorm=cnorm, r=r)


@dataclass
class IpmOptions:
    audit: bool = False
    identity_r: bool = False  # replace the sampled rescaling R by the identity
    sampler_c: tuple = (1.0, 1.0, 1.0)
    gradient_eps: float | None = None  # bucket width; default gamma / 2^16
    lewis_eps: float | None = None  # weight band; default gamma / 2^16
    lewis_delta: float | None = None  # per-round drift budget factor; default 2^32
    lewis_chain: int = 4
    dual_eps: float | None = None  # slack band; default gamma / 2^16
    seed: int = 0
    trace: list | None = None  # appended one dict per step when set
    solver_eps: float | None = None  # Laplacian accuracy; default gamma / 2
    phi: float | None = None  # conductance target for the sampler's expanders


class Ipm:
    """State of one path-following run over a fixed LP (A, b, c, u)."""

    def __init__(self, A: IncidenceMatrix, b, c, u, x_init, s_init,
                 mu_init: float, params: IpmParams,
                 options: IpmOptions | None = None):
        self.A = A
        self.m = A.graph.m
        self.n = A.graph.n
        self.params = params
        self.opt = options or IpmOptions()
        self.rng = Rng(self.opt.seed, 7)
        self.b = np.asarray(b, dtype=np.float64).copy()
        self.c = np.asarray(c, dtype=np.float64).copy()
        self.u = np.asarray(u, dtype=np.float64).copy()
        if np.any(self.u <= 0):
            raise IpmError("upper bounds must be positive")
        x_init = np.asarray(x_init, dtype=np.float64)
        if np.any(x_init <= 0) or np.any(x_init >= self.u):
            raise IpmError("initial point must be strictly inside the box")

        p = params
        self.eps_gr = self.opt.gradient_eps if self.opt.gradient_eps is not None \
            else p.gamma / 2**16
        self.eps_lw = self.opt.lewis_eps if self.opt.lewis_eps is not None \
            else p.gamma / 2**16
        self.delta_lw = self.opt.lewis_delta if self.opt.lewis_delta is not None \
            else 2.0**32
        self.eps_dual = min(1.0, self.opt.dual_eps if self.opt.dual_eps is not None
                            else p.gamma / 2**16)
        self.solver_eps = self.opt.solver_eps if self.opt.solver_eps is not None \
            else p.gamma / 2
        self.log2n = max(2.0, math.log2(self.n))

        self.iterations = 0
        self.rounds = 0  # sequential-phase count (depth proxy)
        self.clamps = 0  # barrier-domain and centrality clamps applied
        self.solver_retries = 0

        # exact references and published approximations
        self.x = x_init.copy()
        self.mu = float(mu_init)
        self.xbar = x_init.copy()
        self.sbar = np.asarray(s_init, dtype=np.float64).copy()
        self.mubar = float(mu_init)
        self.Delta = A.apply_t(self.x) - self.b

        p2 = self.phi2(self.xbar)
        root = p2**-0.5
        self.lewis = LewisMaint(
            A, root, np.full(self.m, Z_REG(self.n, self.m)), 1.0 - p.alpha,
            delta=self.delta_lw, eps=self.eps_lw, rng=self.rng.spawn(11),
            chain_len=self.opt.lewis_chain,
        )
        self.taubar = self.lewis.vbar[0].copy()
        self.gradient = GradientMaint(
            A, self.x, -p.gamma * root, self.taubar, self._zc() + Z_OFFSET,
            w=root, eps=self.eps_gr, lam=p.lam, cnorm=p.cnorm,
            z_offset=Z_OFFSET, tau_max=TAU_MAX,
        )
        self.dual = DualMaint(A, self.sbar, self._dual_w(self.taubar, p2),
                              self.eps_dual, rng=self.rng.spawn(12))
        sampler_kw = {} if self.opt.phi is None else {"phi": self.opt.phi}
        self.sampler = HeavySampler(A, 1.0 / (self.taubar * np.sqrt(p2)),
                                    self.taubar, rng=self.rng.spawn(13),
                                    **sampler_kw)

    # -- barrier ----------------------------------------------------------

    def phi1(self, x: np.ndarray) -> np.ndarray:
        return -1.0 / x + 1.0 / (self.u - x)

    def phi2(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / x**2 + 1.0 / (self.u - x) ** 2

    def centrality(self, x, s, tau, mu) -> np.ndarray:
        return (s + mu * tau * self.phi1(x)) / (mu * tau * np.sqrt(self.phi2(x)))

    def _zc(self) -> np.ndarray:
        z = self.centrality(self.xbar, self.sbar, self.taubar, self.mubar)
        clipped = np.clip(z, -Z_LIMIT, Z_LIMIT)
        self.clamps += int(np.count_nonzero(clipped != z))
        return clipped

    def _dual_w(self, tau, p2) -> np.ndarray:
        # the slack structure takes weights in (0, 1]; larger requested bands
        # are clamped to 1 (conservative: never looser than asked)
        return np.clip(self.mubar * tau * np.sqrt(p2), 1e-280, 1.0)

    # -- notification glue -------------------------------------------------

    def update_for_x(self, I) -> None:
        I = sorted(int(i) for i in I)
        if not I:
            return
        p2 = self.phi2(self.xbar)
        root = p2**-0.5
        zc = self._zc() + Z_OFFSET
        self.gradient.update(I, -self.params.gamma * root[I], self.taubar[I], zc[I])
        self.gradient.set_accuracy(I, root[I])
        self.lewis.lw_scale(I, root[I])
        self.sampler.hs_scale(I, 1.0 / (self.taubar[I] * np.sqrt(p2[I])),
                              self.taubar[I])
        self.dual.dm_set_accuracy(I, self._dual_w(self.taubar, p2)[I])

    def update_for_tau(self, I) -> None:
        I = sorted(int(i) for i in I)
        if not I:
            return
        p2 = self.phi2(self.xbar)
        root = p2**-0.5
        zc = self._zc() + Z_OFFSET
        self.gradient.update(I, -self.params.gamma * root[I], self.taubar[I], zc[I])
        self.sampler.hs_scale(I, 1.0 / (self.taubar[I] * np.sqrt(p2[I])),
                              self.taubar[I])
        self.dual.dm_set_accuracy(I, self._dual_w(self.taubar, p2)[I])

    # -- one step ----------------------------------------------------------

    def _solve(self, system: SddSystem, rhs: np.ndarray) -> np.ndarray:
        try:
            return system.solve(rhs)
        except SolverError:
            self.solver_retries += 1
            retry = SddSystem(self.A, system.d, eps=system.eps,
                              itcap=4 * system.iteration_cap())
            try:
                return retry.solve(rhs)
            except SolverError:
                # iterative stagnation under extreme weight spread (edges
                # pinned against the box); fall back to a dense pseudoinverse
                self.solver_retries += 1
                Ad = self.A.dense()
                L = Ad.T @ (system.d[:, None] * Ad)
                return np.linalg.lstsq(L, system.project(rhs), rcond=None)[0]

    def _mult_far(self, a: float, b: float, band: float) -> bool:
        if a <= 0 or b <= 0:
            return True
        return abs(math.log(a / b)) > band

    def short_step(self, mu_new: float) -> dict:
        p = self.params
        gamma = p.gamma
        rounds0 = self.rounds

        # mubar refresh
        if self._mult_far(self.mubar, mu_new, gamma / 2**12):
            self.mubar = float(mu_new)
            allm = list(range(self.m))
            p2 = self.phi2(self.xbar)
            root = p2**-0.5
            self.gradient.update(allm, -gamma * root, self.taubar,
                                 self._zc() + Z_OFFSET)
            self.dual.dm_set_accuracy(allm, self._dual_w(self.taubar, p2))
            self.rounds += 1

        # gradient product and sparsified Laplacian
        hprime = self.gradient.query_product()
        s_lift = dict(self.gradient._s)
        p2 = self.phi2(self.xbar)
        target = 1.0 / (self.taubar * p2)
        prob = np.minimum(1.0, 100.0 * self.taubar * self.log2n / gamma**2)
        keep = self.rng.gen.random(self.m) < prob
        wbar = np.where(keep, target / prob, 0.0)
        system = SddSystem(self.A, wbar, eps=self.solver_eps)
        hpp = self._solve(system, hprime + self.Delta)
        self.rounds += 3

        # sampled primal correction and infeasibility bookkeeping
        d_flow = target * self.A.apply(hpp)
        if self.opt.identity_r:
            rd = d_flow.copy()
            support = np.nonzero(rd)[0]
        else:
            R = self.sampler.hs_sample(hpp, *self.opt.sampler_c)
            rd = R.apply(d_flow)
            support = np.array(R.support(), dtype=np.int64)
        self.Delta = self.Delta + hprime - self.A.apply_t(rd)
        self.rounds += 2

        # exact primal move: gradient part (per-bucket lift) plus correction
        red = self.gradient.reduction
        lift = np.fromiter(
            (s_lift.get(red.bucket[i], 0.0) for i in range(self.m)),
            dtype=np.float64, count=self.m)
        self.x = self.x + red.g * lift - rd

        # xbar block
        h_dict = {int(i): -float(rd[i]) for i in support if rd[i] != 0.0}
        x_tmp, I_x = self.gradient.query_sum(h_dict)
        keep_x = []
        for i in I_x:
            xi = min(max(x_tmp[i], 1e-14 * self.u[i]), (1 - 1e-14) * self.u[i])
            if xi != x_tmp[i]:
                self.clamps += 1
            p2i = 1.0 / xi**2 + 1.0 / (self.u[i] - xi) ** 2
            if abs(math.sqrt(p2i) * (xi - self.xbar[i])) > gamma / 2**12:
                self.xbar[i] = xi
                keep_x.append(i)
        self.update_for_x(keep_x)
        self.rounds += 2

        # taubar block
        I_tau_raw, tau_full = self.lewis.lw_query()
        keep_tau = [i for i in I_tau_raw
                    if self._mult_far(tau_full[i], self.taubar[i], gamma / 2**10)]
        self.taubar[keep_tau] = tau_full[keep_tau]
        self.update_for_tau(keep_tau)
        self.rounds += 2

        # sbar block (second solve against the plain gradient)
        h2 = self._solve(system, hprime)
        I_s_raw, s_vec = self.dual.dm_add(mu_new * h2)
        p2 = self.phi2(self.xbar)
        scale = 1.0 / (self.mubar * self.taubar * np.sqrt(p2))
        keep_s = [i for i in I_s_raw
                  if abs(scale[i] * (s_vec[i] - self.sbar[i])) > gamma / 2**10]
        self.sbar[keep_s] = s_vec[keep_s]
        if keep_s:
            root = p2**-0.5
            zc = self._zc() + Z_OFFSET
            ks = sorted(keep_s)
            self.gradient.update(ks, -gamma * root[ks], self.taubar[ks], zc[ks])
        self.rounds += 2

        step = {
            "mu": mu_new,
            "mu_bar": self.mubar,
            "psi": self.gradient.potential(),
            "delta_norm": float(np.linalg.norm(self.Delta)),
            "changed_x": len(keep_x),
            "changed_tau": len(keep_tau),
            "changed_s": len(keep_s),
            "clamps": self.clamps,
            "rounds": self.rounds - rounds0,
        }
        if self.opt.trace is not None:
            self.opt.trace.append(step)
        return step

    # -- exact views --------------------------------------------------------

    def exact_x(self) -> np.ndarray:
        return self.x.copy()

    def exact_s(self) -> np.ndarray:
        return self.dual.dm_exact()

    # -- auditing -----------------------------------------------------------

    def _state_dump(self) -> dict:
        return {
            "iterations": self.iterations,
            "mu": self.mu,
            "mu_bar": self.mubar,
            "delta_norm": float(np.linalg.norm(self.Delta)),
            "clamps": self.clamps,
        }

    def true_tau(self, x: np.ndarray) -> np.ndarray:
        """Dense regularized-Lewis-weight fixed point at the point x."""
        return self.lewis._fixed_point(self.phi2(x) ** -0.5)

    def audit_step(self, tol_scale: float = 1.1) -> dict:
        """Check centering of the exact point and the approximation bands."""
        p = self.params
        x, s = self.exact_x(), self.exact_s()
        report: dict = {}
        if np.any(x <= 0) or np.any(x >= self.u):
            raise IpmAuditError("exact point left the box", self._state_dump())
        tau = self.true_tau(x)
        z = self.centrality(x, s, tau, self.mu)
        report["centrality"] = float(np.max(np.abs(z)))
        if report["centrality"] > p.eps * tol_scale:
            raise IpmAuditError(
                f"centrality {report['centrality']:.3e} exceeds eps={p.eps:.3e}",
                self._state_dump())
        # dual feasibility: s - c must lie in the column space of A
        resid = self.c - s
        y, *_ = np.linalg.lstsq(self.A.dense(), resid, rcond=None)
        gap = float(np.max(np.abs(self.A.apply(y) - resid)))
        report["dual_residual"] = gap
        if gap > 1e-6 * max(1.0, float(np.max(np.abs(self.c)))):
            raise IpmAuditError(f"dual infeasibility {gap:.3e}", self._state_dump())
        # infeasibility in the inverse-Gram norm
        v = self.A.apply_t(x) - self.b
        if not np.allclose(v, self.Delta, atol=1e-7 * max(1.0, np.abs(v).max())):
            raise IpmAuditError("Delta bookkeeping drifted", self._state_dump())
        Ad = self.A.dense()
        H = Ad.T @ ((1.0 / (tau * self.phi2(x)))[:, None] * Ad)
        val = float(math.sqrt(max(0.0, v @ np.linalg.lstsq(H, v, rcond=None)[0])))
        report["infeasibility"] = val
        if val > tol_scale * p.eps * p.gamma / p.cnorm:
            raise IpmAuditError(
                f"infeasibility {val:.3e} exceeds eps*gamma/cnorm", self._state_dump())
        # approximation coupling bands
        band_x = float(np.max(np.abs(np.sqrt(self.phi2(self.xbar)) * (self.xbar - x))))
        report["x_band"] = band_x
        if band_x > tol_scale * (p.gamma / 2**12 + 2 * self.eps_gr):
            raise IpmAuditError(f"xbar band {band_x:.3e}", self._state_dump())
        sc = 1.0 / (self.mubar * self.taubar * np.sqrt(self.phi2(self.xbar)))
        band_s = float(np.max(np.abs(sc * (self.sbar - s))))
        report["s_band"] = band_s
        if band_s > tol_scale * (p.gamma / 2**10 + 2 * self.eps_dual):
            raise IpmAuditError(f"sbar band {band_s:.3e}", self._state_dump())
        tau_bar_ref = self.true_tau(self.xbar)
        band_tau = float(np.max(np.abs(np.log(self.taubar / tau_bar_ref))))
        report["tau_band"] = band_tau
        if band_tau > tol_scale * (p.gamma / 2**10 + 2 * self.eps_lw):
            raise IpmAuditError(f"taubar band {band_tau:.3e}", self._state_dump())
        return report

    # -- outer loop ---------------------------------------------------------

    def path_following(self, mu_target: float, callback=None,
                       check_every: int = 25,
                       max_steps: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        while self.mu > mu_target:
            self.short_step(self.mu)
            self.mu *= 1.0 - self.params.r
            self.iterations += 1
            if self.opt.audit:
                self.audit_step()
            if callback is not None and self.iterations % check_every == 0:
                if callback(self):
                    break
            if max_steps is not None and self.iterations >= max_steps:
                break
        return self.exact_x(), self.exact_s()


def path_following(A: IncidenceMatrix, b, c, u, x_init, s_init, mu_init,
                   mu_target, params: IpmParams | None = None,
                   options: IpmOptions | None = None, **kwargs):
    """Convenience wrapper: build the state and run the outer loop."""
    if params is None:
        params = IpmParams.derive(A.graph.m, A.graph.n)
    ipm = Ipm(A, b, c, u, x_init, s_init, mu_init, params, options)
    x, s = ipm.path_following(mu_target, **kwargs)
    return x, s, ipm
