"""Approximate solver for (A^T D A) x = b where A is a column-removed incidence
matrix and D a nonnegative diagonal.

The production contract is an eps-approximate solution in the matrix norm:
||x_out - x*||_{A^T D A} <= eps * ||x*||_{A^T D A}.  We realize it with
preconditioned conjugate gradient (Jacobi preconditioner); at this scale the
CG residual is driven far below what the A-norm bound requires.  Failure to
converge within the iteration cap raises -- never a silent bad answer.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import IncidenceMatrix

EPS_FLOOR = 1e-12


class SolverError(RuntimeError):
    pass


class SddSystem:
    """A weighted graph Laplacian system (A^T D A) x = b.

    Zero-weight edges are dropped.  Components of the weighted graph that do
    not touch the removed (grounded) vertex have a one-dimensional nullspace;
    right-hand sides are projected onto the range before solving.
    """

    def __init__(self, A: IncidenceMatrix, d, eps: float = 1e-10, itcap: int | None = None):
        d = np.asarray(d, dtype=np.float64)
        if d.shape != (A.graph.m,):
            raise ValueError("diagonal length mismatch")
        if np.any(d < 0) or np.any(~np.isfinite(d)):
            raise ValueError("diagonal weights must be nonnegative and finite")
        self.A = A
        self.d = d
        self.eps = max(float(eps), EPS_FLOOR)
        S = A.sparse()
        self.L = (S.T @ sp.diags(d) @ S).tocsr()
        self.diag = self.L.diagonal()
        self._itcap = itcap
        self._null_masks = self._nullspace_masks()

    def _nullspace_masks(self) -> list[np.ndarray]:
        """Indicator vectors (over columns) of components not containing the
        grounded vertex, restricted to edges with positive weight."""
        g, A = self.A.graph, self.A
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e, (a, b) in enumerate(g.edges):
            if self.d[e] > 0:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
        grounded = find(A.removed)
        comps: dict[int, list[int]] = {}
        for v in range(g.n):
            if v == A.removed:
                continue
            r = find(v)
            if r != grounded:
                comps.setdefault(r, []).append(A.col_of(v))
        masks = []
        for cols in comps.values():
            mask = np.zeros(A.ncols)
            mask[cols] = 1.0
            masks.append(mask / np.sqrt(len(cols)))
        return masks

    def project(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64).copy()
        for mask in self._null_masks:
            b -= (mask @ b) * mask
        return b

    def iteration_cap(self) -> int:
        if self._itcap is not None:
            return self._itcap
        pos = self.d[self.d > 0]
        ratio = float(pos.max() / pos.min()) if len(pos) else 1.0
        kappa_hat = ratio * max(1, self.A.ncols) ** 2
        return int(10 * np.sqrt(kappa_hat) * np.log(1.0 / self.eps)) + 20

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = self.project(b)
        nb = np.linalg.norm(b)
        if nb == 0:
            return np.zeros(self.A.ncols)
        # residual tolerance conservative enough for the A-norm contract
        tol = max(self.eps * 1e-3, 1e-14) * nb
        x = np.zeros(self.A.ncols)
        r = b.copy()
        Minv = np.where(self.diag > 0, 1.0 / np.where(self.diag > 0, self.diag, 1.0), 0.0)
        z = Minv * r
        p = z.copy()
        rz = r @ z
        cap = self.iteration_cap()
        for _ in range(cap):
            if np.linalg.norm(r) <= tol:
                return x
            Lp = self.L @ p
            pLp = p @ Lp
            if pLp <= 0:
                # direction in the nullspace: deflate and restart
                p = self.project(p)
                Lp = self.L @ p
                pLp = p @ Lp
                if pLp <= 0:
                    break
            alpha = rz / pLp
            x += alpha * p
            r -= alpha * Lp
            z = Minv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if np.linalg.norm(r) <= tol:
            return x
        raise SolverError(
            f"PCG did not converge in {cap} iterations "
            f"(residual {np.linalg.norm(r):.3e}, target {tol:.3e})"
        )


def solve(A: IncidenceMatrix, d, b, eps: float = 1e-10, itcap: int | None = None) -> np.ndarray:
    return SddSystem(A, d, eps=eps, itcap=itcap).solve(b)


def solve_gram(A: IncidenceMatrix, v, b, eps: float = 1e-10, itcap: int | None = None) -> np.ndarray:
    """Solve (A^T V A) x = b for a (possibly sparse) nonnegative diagonal v."""
    return SddSystem(A, v, eps=eps, itcap=itcap).solve(b)
