"""HTTP facade over the solver pipeline.

Every endpoint takes the instance as DIMACS text plus run options, and
returns a deterministic JSON report embedding the effective configuration and
a content hash of the input.  The CLI is a thin client of this app.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .generators import GeneratorError, generate
from .graph import DimacsParseError, GraphError, WeightedDigraph, load_dimacs, save_dimacs
from .ipm import IpmAuditError, IpmError
from .ledger import WorkLedger
from .mcf import (
    McfConfig,
    McfError,
    _make_ipm,
    build_initial,
    oracle_solve,
    reduce_matching,
    reduce_maxflow,
    reduce_reachability,
    reduce_sssp,
    solve_mcf,
)

app = FastAPI(title="flowipm", version=__version__)


class RunOptions(BaseModel):
    seed: int = 0
    phi: float | None = Field(default=None, gt=0, le=1)
    audit: bool = False
    threads: int = 1
    constants: dict[str, float] = Field(default_factory=dict)
    max_steps: int | None = None
    mode: str = "fast"


class InstanceRequest(BaseModel):
    dimacs: str
    options: RunOptions = Field(default_factory=RunOptions)


class TerminalRequest(InstanceRequest):
    source: int = 0
    target: int | None = None


class MatchingRequest(BaseModel):
    n_left: int
    n_right: int
    pairs: list[tuple[int, int]]
    options: RunOptions = Field(default_factory=RunOptions)


class AuditRequest(InstanceRequest):
    steps: int = 40


class BenchRequest(BaseModel):
    sizes: list[int] = Field(default_factory=lambda: [16, 32])
    seeds: list[int] = Field(default_factory=lambda: [0])
    kind: str = "random"
    options: RunOptions = Field(default_factory=RunOptions)


class GenRequest(BaseModel):
    kind: str
    params: dict[str, int] = Field(default_factory=dict)
    seed: int = 0


def _hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _parse(text: str) -> WeightedDigraph:
    with tempfile.NamedTemporaryFile("w", suffix=".dimacs", delete=False) as fh:
        fh.write(text)
        path = fh.name
    try:
        return load_dimacs(path)
    finally:
        os.unlink(path)


def _to_text(g: WeightedDigraph) -> str:
    with tempfile.NamedTemporaryFile("w", suffix=".dimacs", delete=False) as fh:
        path = fh.name
    try:
        save_dimacs(g, path)
        with open(path) as fh:
            return fh.read()
    finally:
        os.unlink(path)


def _cfg(opt: RunOptions, **extra) -> McfConfig:
    known = {"C", "eps", "lam", "gamma"}
    constants = {k: v for k, v in opt.constants.items() if k in known}
    step_scale = opt.constants.get("step_scale")
    return McfConfig(seed=opt.seed, mode=opt.mode, audit=opt.audit,
                     constants=constants, step_scale=step_scale,
                     max_steps=opt.max_steps, check_every=10, phi=opt.phi,
                     **extra)


def _report(opt: RunOptions, input_text: str, command: str, result: dict,
            ledger: WorkLedger) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": opt.model_dump(),
        "input_sha256": _hash(input_text),
        "result": result,
        "ledger": ledger.as_dict(),
    }


def _run_solve(g: WeightedDigraph, opt: RunOptions, ledger: WorkLedger):
    with ledger.timed("solve"):
        res = solve_mcf(g, _cfg(opt))
    ledger.set_floor("iterations", res.iterations)
    ledger.set_floor("rounds", res.rounds)
    ledger.set_floor("clamps", res.clamps)
    ledger.set_floor("solver_retries", res.solver_retries)
    return res


def _wrap_errors(fn):
    try:
        return fn()
    except DimacsParseError as ex:
        raise HTTPException(status_code=400, detail=f"parse error: {ex}")
    except (GraphError, GeneratorError, ValueError) as ex:
        raise HTTPException(status_code=400, detail=str(ex))
    except McfError as ex:
        raise HTTPException(status_code=422, detail=f"unsolvable: {ex}")
    except IpmAuditError as ex:
        raise HTTPException(status_code=500, detail=f"audit failure: {ex}")
    except IpmError as ex:
        raise HTTPException(status_code=500, detail=f"solver failure: {ex}")


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/solve")
def solve(req: InstanceRequest):
    def run():
        g = _parse(req.dimacs)
        ledger = WorkLedger()
        res = _run_solve(g, req.options, ledger)
        result = {
            "cost": res.cost,
            "flow": [int(f) for f in res.flow],
            "iterations": res.iterations,
            "early_exit": res.early_exit,
        }
        return _report(req.options, req.dimacs, "solve", result, ledger)
    return _wrap_errors(run)


@app.post("/maxflow")
def maxflow(req: TerminalRequest):
    def run():
        g = _parse(req.dimacs)
        if req.target is None:
            raise HTTPException(status_code=400, detail="target required")
        red = reduce_maxflow(g, req.source, req.target)
        ledger = WorkLedger()
        res = _run_solve(red.graph, req.options, ledger)
        result = {"value": red.extract(res.flow), "iterations": res.iterations}
        return _report(req.options, req.dimacs, "maxflow", result, ledger)
    return _wrap_errors(run)


@app.post("/matching")
def matching(req: MatchingRequest):
    def run():
        red = reduce_matching(req.n_left, req.n_right, req.pairs)
        ledger = WorkLedger()
        res = _run_solve(red.graph, req.options, ledger)
        matched = red.extract(res.flow)
        result = {"size": len(matched),
                  "pairs": [[int(a), int(b)] for a, b in matched],
                  "iterations": res.iterations}
        key = f"{req.n_left}/{req.n_right}/{sorted(req.pairs)}"
        return _report(req.options, key, "matching", result, ledger)
    return _wrap_errors(run)


@app.post("/sssp")
def sssp(req: TerminalRequest):
    def run():
        g = _parse(req.dimacs)
        red = reduce_sssp(g, req.source)
        ledger = WorkLedger()
        res = _run_solve(red.graph, req.options, ledger)
        dist = red.extract(res.flow)
        result = {"distances": [None if math.isinf(d) else int(d) for d in dist],
                  "iterations": res.iterations}
        return _report(req.options, req.dimacs, "sssp", result, ledger)
    return _wrap_errors(run)


@app.post("/reach")
def reach(req: TerminalRequest):
    def run():
        g = _parse(req.dimacs)
        red = reduce_reachability(g, req.source)
        ledger = WorkLedger()
        res = _run_solve(red.graph, req.options, ledger)
        result = {"reachable": [bool(b) for b in red.extract(res.flow)],
                  "iterations": res.iterations}
        return _report(req.options, req.dimacs, "reach", result, ledger)
    return _wrap_errors(run)


@app.post("/audit")
def audit(req: AuditRequest):
    def run():
        g = _parse(req.dimacs)
        opt = req.options.model_copy(update={"mode": "paper", "audit": True})
        inst = build_initial(g, seed=opt.seed)
        ipm = _make_ipm(inst, _cfg(opt))
        ipm.opt.identity_r = True
        ledger = WorkLedger()
        reports = []
        with ledger.timed("audit"):
            reports.append({"step": 0, **{k: float(v) for k, v in
                                          ipm.audit_step().items()}})
            for step in range(1, req.steps + 1):
                ipm.short_step(ipm.mu)
                ipm.mu *= 1.0 - ipm.params.r
                ipm.iterations += 1
                rep = ipm.audit_step()
                reports.append({"step": step,
                                **{k: float(v) for k, v in rep.items()}})
        ledger.set_floor("iterations", ipm.iterations)
        ledger.set_floor("rounds", ipm.rounds)
        result = {"passed": len(reports), "audits": reports}
        return _report(opt, req.dimacs, "audit", result, ledger)
    return _wrap_errors(run)


@app.post("/bench")
def bench(req: BenchRequest):
    def run():
        rows = []
        for n in req.sizes:
            for seed in req.seeds:
                g = generate(req.kind, seed=seed, n=n, m=3 * n) \
                    if req.kind == "random" else generate(req.kind, seed=seed, k=n)
                opt = req.options.model_copy(update={"seed": seed})
                ledger = WorkLedger()
                t0 = time.perf_counter()
                res = _run_solve(g, opt, ledger)
                rows.append({"n": g.n, "m": g.m, "seed": seed,
                             "iterations": res.iterations, "rounds": res.rounds,
                             "wall_time": round(time.perf_counter() - t0, 6)})
        result = {"rows": rows}
        key = f"{req.kind}/{req.sizes}/{req.seeds}"
        return _report(req.options, key, "bench", result, ledger=WorkLedger())
    return _wrap_errors(run)


@app.post("/gen")
def gen(req: GenRequest):
    def run():
        g = generate(req.kind, seed=req.seed, **req.params)
        text = _to_text(g)
        return {"command": "gen", "kind": req.kind, "seed": req.seed,
                "params": req.params, "n": g.n, "m": g.m,
                "dimacs": text, "sha256": _hash(text)}
    return _wrap_errors(run)


@app.post("/oracle")
def oracle(req: InstanceRequest):
    """Reference answer from the successive-shortest-path solver."""
    def run():
        g = _parse(req.dimacs)
        flow, cost = oracle_solve(g)
        return {"command": "oracle", "cost": int(cost),
                "flow": [int(f) for f in flow],
                "input_sha256": _hash(req.dimacs)}
    return _wrap_errors(run)
