"""Command line front end.

Thin client over the HTTP service: every command builds a request, sends it
through an in-process test client, and prints the JSON report (or CSV for
`bench`).  Exit codes: 0 success, 1 bad/infeasible input, 2 internal audit
or solver failure.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys

import click
from fastapi.testclient import TestClient

from .service import app

THREADS_ENV = "FLOWIPM_THREADS"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


def _client() -> TestClient:
    return TestClient(app, raise_server_exceptions=False)


def _parse_constants(pairs: tuple[str, ...]) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"expected KEY=VAL, got {pair!r}")
        key, _, val = pair.partition("=")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise click.BadParameter(f"constant {key!r} has non-numeric value {val!r}")
    return out


def _emit(payload: str, out: str | None) -> None:
    if out is None:
        click.echo(payload)
    else:
        with open(out, "w") as fh:
            fh.write(payload if payload.endswith("\n") else payload + "\n")


def _finish(resp, out: str | None) -> None:
    if resp.status_code == 200:
        _emit(json.dumps(resp.json(), sort_keys=True), out)
        sys.exit(EXIT_OK)
    detail = resp.json().get("detail", resp.text)
    click.echo(f"error: {detail}", err=True)
    sys.exit(EXIT_INPUT if resp.status_code < 500 else EXIT_INTERNAL)


def run_options(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--phi", type=float, default=None,
                      help="Override the decomposition conductance target.")(fn)
    fn = click.option("--audit/--no-audit", default=False,
                      help="Verify internal invariants after every step.")(fn)
    fn = click.option("--threads", type=int,
                      default=lambda: int(os.environ.get(THREADS_ENV, "1")),
                      help=f"Worker count recorded in the report "
                           f"(default from ${THREADS_ENV}).")(fn)
    fn = click.option("--constants", multiple=True, metavar="KEY=VAL",
                      help="Override tuning constants, e.g. --constants lam=8.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Write the report here instead of stdout.")(fn)
    return fn


def _options_payload(seed, phi, audit, threads, constants) -> dict:
    return {
        "seed": seed,
        "phi": phi,
        "audit": audit,
        "threads": threads,
        "constants": _parse_constants(constants),
    }


@click.group()
def main():
    """Exact minimum-cost flow via a parallel interior-point solver."""


def _read_input(path: str) -> str:
    with open(path) as fh:
        return fh.read()


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@run_options
def solve(input_, seed, phi, audit, threads, constants, out):
    """Solve the instance and report the exact optimal cost and flow."""
    resp = _client().post("/solve", json={
        "dimacs": _read_input(input_),
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    _finish(resp, out)


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--source", type=int, default=0, show_default=True)
@click.option("--target", type=int, required=True)
@run_options
def maxflow(input_, source, target, seed, phi, audit, threads, constants, out):
    """Maximum s-t flow via the cost-flow reduction."""
    resp = _client().post("/maxflow", json={
        "dimacs": _read_input(input_), "source": source, "target": target,
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    _finish(resp, out)


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON file: {n_left, n_right, pairs: [[l, r], ...]}.")
@run_options
def matching(input_, seed, phi, audit, threads, constants, out):
    """Maximum bipartite matching via the flow reduction."""
    try:
        spec = json.loads(_read_input(input_))
        body = {"n_left": spec["n_left"], "n_right": spec["n_right"],
                "pairs": spec["pairs"]}
    except (json.JSONDecodeError, KeyError, TypeError) as ex:
        click.echo(f"error: bad matching input: {ex}", err=True)
        sys.exit(EXIT_INPUT)
    body["options"] = _options_payload(seed, phi, audit, threads, constants)
    _finish(_client().post("/matching", json=body), out)


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--source", type=int, default=0, show_default=True)
@run_options
def sssp(input_, source, seed, phi, audit, threads, constants, out):
    """Single-source shortest paths (negative edge costs allowed)."""
    resp = _client().post("/sssp", json={
        "dimacs": _read_input(input_), "source": source,
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    _finish(resp, out)


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--source", type=int, default=0, show_default=True)
@run_options
def reach(input_, source, seed, phi, audit, threads, constants, out):
    """Vertices reachable from the source."""
    resp = _client().post("/reach", json={
        "dimacs": _read_input(input_), "source": source,
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    _finish(resp, out)


@main.command()
@click.option("--input", "input_", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--steps", type=int, default=40, show_default=True)
@run_options
def audit(input_, steps, seed, phi, audit, threads, constants, out):
    """Run verified centering steps and list every invariant check."""
    resp = _client().post("/audit", json={
        "dimacs": _read_input(input_), "steps": steps,
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    _finish(resp, out)


@main.command()
@click.option("--sizes", default="16,32", show_default=True,
              help="Comma-separated instance sizes.")
@click.option("--seeds", default="0", show_default=True,
              help="Comma-separated seeds.")
@click.option("--kind", default="random", show_default=True,
              type=click.Choice(["random", "clique", "dumbbell"]))
@run_options
def bench(sizes, seeds, kind, seed, phi, audit, threads, constants, out):
    """Benchmark sweep; emits CSV with n, iterations, rounds, wall time."""
    try:
        size_list = [int(s) for s in sizes.split(",") if s]
        seed_list = [int(s) for s in seeds.split(",") if s]
    except ValueError:
        click.echo("error: --sizes/--seeds must be comma-separated integers",
                   err=True)
        sys.exit(EXIT_INPUT)
    resp = _client().post("/bench", json={
        "sizes": size_list, "seeds": seed_list, "kind": kind,
        "options": _options_payload(seed, phi, audit, threads, constants),
    })
    if resp.status_code != 200:
        _finish(resp, out)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n", "m", "seed", "iterations", "rounds", "wall_time"])
    for row in resp.json()["result"]["rows"]:
        writer.writerow([row["n"], row["m"], row["seed"], row["iterations"],
                         row["rounds"], row["wall_time"]])
    _emit(buf.getvalue().rstrip("\n"), out)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("kind", type=click.Choice(["clique", "dumbbell", "random", "grid"]))
@click.argument("params", nargs=-1, metavar="[KEY=VAL]...")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def gen(kind, params, seed, out):
    """Emit a deterministic DIMACS fixture (e.g. `gen clique k=6`)."""
    kv: dict[str, int] = {}
    for pair in params:
        key, _, val = pair.partition("=")
        try:
            kv[key] = int(val)
        except ValueError:
            click.echo(f"error: expected KEY=INT, got {pair!r}", err=True)
            sys.exit(EXIT_INPUT)
    resp = _client().post("/gen", json={"kind": kind, "seed": seed, "params": kv})
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text)
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(resp.json()["dimacs"].rstrip("\n"), out)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
