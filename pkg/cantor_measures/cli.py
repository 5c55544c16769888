"""Command line: build chains, run witnesses and decisions, print canonical JSON envelopes.

Exit codes: 0 success, 1 a mathematically negative answer, 2 invalid input,
3 an I/O failure.
"""

import sys
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Optional

import typer
from loguru import logger
from rich.console import Console
from rich.markup import escape
from tqdm import tqdm

from cantor_measures import codec
from cantor_measures.chain import MORPHISM, OBJECT, ClopenSet, new_chain, object_challenges
from cantor_measures.composite import decompose_value, maximality_refute, member, weighted_sum
from cantor_measures.config import (
    CLOSURE_SAMPLES,
    DEFAULT_BUDGET,
    DEFAULT_EFFORT,
    MAXIMALITY_SAMPLE,
    SWEEP_MAX_CELLS,
    WORKSPACE_ENV,
)
from cantor_measures.cycles import (
    closure_divisors,
    dichotomy_analyze,
    divisibility_closure_check,
    find_tuple_morphism,
    qlike_amalgamate,
    ring_product_lift,
    rokhlin_decide,
)
from cantor_measures.errors import CantorError, InvariantViolation, PreconditionFailed, WorkspaceError
from cantor_measures.logs import configure_logging
from cantor_measures.matrices import compatible, compatible_witness, cycle_decompose, mass_matrix
from cantor_measures.values import Verdict, enumerate_values, scale_value_set
from cantor_measures.workspace import Workspace

# ---------------- Exit codes ----------------
EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INVALID = 2
EXIT_IO = 3

app = typer.Typer(add_completion=False, no_args_is_help=True, help="Exact finite approximations of good measures.")
composite_app = typer.Typer(no_args_is_help=True, help="Weighted sums of chains.")
app.add_typer(composite_app, name="composite")
console = Console(stderr=True)


class OutputFormat(str, Enum):
    json = "json"


@dataclass
class Outcome:
    result: object
    certificate: object = None
    negative: bool = False
    summary: str = ""


@app.callback()
def main(
    ctx: typer.Context,
    workspace: Optional[Path] = typer.Option(None, "--workspace", envvar=WORKSPACE_ENV, help="Workspace root."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr."),
    output_format: OutputFormat = typer.Option(OutputFormat.json, "--format", help="Result format."),
):
    configure_logging(verbose)
    ctx.obj = Workspace(workspace)
    logger.debug("Workspace {} ({} output)", ctx.obj.root, output_format.value)


def _run(ctx, op, body, out=None):
    """Run one command body and turn its outcome or failure into an envelope and an exit code."""
    ws = ctx.obj
    inputs = {}
    digest = None
    logger.info("{} started", op)
    try:
        outcome = body(ws, inputs)
        digest = codec.input_hash(inputs)
        envelope = {
            "op": op,
            "input_hash": digest,
            "result": codec.plain(outcome.result),
            "certificate": codec.plain(outcome.certificate),
        }
        if out:
            ws.write_json(out, envelope, kind="result")
        else:
            typer.echo(codec.dumps(envelope).decode(), nl=False)
        code = EXIT_NEGATIVE if outcome.negative else EXIT_OK
        console.print(f"[bold]{op}[/bold]", escape(outcome.summary or ("no" if outcome.negative else "ok")))
    except InvariantViolation:
        raise
    except (WorkspaceError, OSError) as e:
        logger.error("{} failed: {}", op, e)
        console.print(f"[bold red]{op}[/bold red] I/O error:", escape(str(e)))
        code = EXIT_IO
    except CantorError as e:
        logger.warning("{} rejected its input: {}", op, e)
        console.print(f"[bold red]{op}[/bold red] invalid input:", escape(str(e)))
        code = EXIT_INVALID
    ws.log_run(op, digest, code)
    logger.info("{} finished with exit code {}", op, code)
    raise typer.Exit(code)


# ---------------- Inputs ----------------

def _descriptor(ws, inputs, name):
    doc = ws.read_json(name, "descriptor")
    inputs["descriptor"] = doc
    return codec.descriptor_from_json(doc)


def _snapshot(ws, inputs, name):
    doc = ws.read_json(name, "snapshot")
    inputs["snapshot"] = doc
    return codec.snapshot_from_json(doc)


def _document(ws, inputs, key, name, schema=None):
    doc = ws.read_json(name)
    inputs[key] = doc
    if schema is not None:
        codec.validate(doc, schema, key)
    return doc


def _symbols(ws, inputs, descriptor):
    return _descriptor(ws, inputs, descriptor).symbols if descriptor else {}


def _ledger_summary(chain):
    kinds = [e.kind for e in chain.ledger]
    return {OBJECT: kinds.count(OBJECT), MORPHISM: kinds.count(MORPHISM)}


# ---------------- Chains ----------------

@app.command("build-chain")
def build_chain(
    ctx: typer.Context,
    descriptor: str = typer.Option(..., "--descriptor", "-d", help="Value set descriptor file."),
    budget: int = typer.Option(DEFAULT_BUDGET, "--budget", "-b", help="Challenge schedule height."),
    out: str = typer.Option("chain.json", "--out", "-o", help="Snapshot file to write."),
):
    """Run the challenge schedule and save the chain snapshot."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        inputs["budget"] = budget
        chain = new_chain(V).run_schedule(budget)
        path = ws.save_snapshot(out, chain)
        result = {
            "snapshot": str(path),
            "levels": chain.depth + 1,
            "top_cells": len(chain.top),
            "ledger": _ledger_summary(chain),
        }
        return Outcome(result, summary=f"{chain.depth + 1} levels, {len(chain.ledger)} challenges absorbed")

    _run(ctx, "build-chain", body)


def _sweep_sets(chain, level):
    """Every nonempty clopen set of a small level; single cells and their complements otherwise."""
    cells = chain.levels[level].cells
    if len(cells) <= SWEEP_MAX_CELLS:
        return [ClopenSet(level, s) for k in range(1, len(cells) + 1) for s in combinations(cells, k)]
    everything = frozenset(cells)
    picked = {frozenset({c}) for c in cells} | {everything - {c} for c in cells}
    return [ClopenSet(level, s) for s in sorted(picked, key=lambda s: (len(s), sorted(s)))]


def _subset_sweep(chain, depth):
    jobs, sampled = [], []
    for level in range(depth + 1):
        size = len(chain.levels[level])
        if size > SWEEP_MAX_CELLS:
            logger.warning("Level {} has {} cells, only single cells and complements swept", level, size)
            sampled.append(level)
        subsets = _sweep_sets(chain, level)
        jobs.extend((U, W) for U in subsets for W in subsets if chain.measure(U) < chain.measure(W))
    pairs = []
    for U, W in tqdm(jobs, desc="subset witnesses", file=sys.stderr, disable=None):
        trial = chain.fork()
        found = trial.subset_witness(U, W)
        inside = found.cells <= trial.lift_set(W, found.level).cells
        ok = inside and trial.measure(found) == chain.measure(U)
        pairs.append({"small": U, "large": W, "witness": found, "ok": ok})
    return pairs, sampled


def _maximality_sample(chain, depth):
    pool = enumerate_values(chain.V, depth + 1)
    out = []
    for targets in object_challenges(pool, depth + 2)[:MAXIMALITY_SAMPLE]:
        sets = chain.realize_partition(targets)
        disjoint = sum(len(U) for U in sets) == len(set().union(*(U.cells for U in sets)))
        ok = disjoint and [chain.measure(U) for U in sets] == list(targets)
        out.append({"targets": targets, "ok": ok})
    return out


@app.command("check-good")
def check_good(
    ctx: typer.Context,
    snapshot: str = typer.Option(..., "--snapshot", "-s", help="Chain snapshot file."),
    depth: int = typer.Option(2, "--depth", help="Deepest level swept."),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Write the envelope here instead of stdout."),
):
    """Sweep subset witnesses over every clopen pair up to a depth and sample maximality."""

    def body(ws, inputs):
        chain = _snapshot(ws, inputs, snapshot)
        inputs["depth"] = depth
        if depth < 0:
            raise PreconditionFailed("depth >= 0", f"got {depth}")
        extended = chain.deepen(depth)
        pairs, sampled = _subset_sweep(chain, depth)
        maximality = _maximality_sample(chain, depth)
        failed = sum(not p["ok"] for p in pairs) + sum(not m["ok"] for m in maximality)
        result = {
            "depth": depth,
            "extended_by": extended,
            "pairs": pairs,
            "maximality": maximality,
            "sampled_levels": sampled,
            "complete": not sampled,
            "passed": failed == 0 and not sampled,
        }
        summary = f"{len(pairs)} pairs, {len(maximality)} partitions, {failed} failures"
        if sampled:
            summary += f", levels {sampled} only sampled"
        return Outcome(result, negative=not result["passed"], summary=summary)

    _run(ctx, "check-good", body, out)


# ---------------- Decisions ----------------

@app.command("decide-rokhlin")
def decide_rokhlin(
    ctx: typer.Context,
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    samples: int = typer.Option(CLOSURE_SAMPLES, "--samples", help="Closure samples attached to a negative answer."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Decide the Rokhlin and strong Rokhlin properties of the automorphism group."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        verdict = rokhlin_decide(V)
        certificate = dict(verdict.certificate)
        negative = verdict.rokhlin is Verdict.NO
        if negative:
            inputs["samples"] = samples
            certificate["closure_violations"] = divisibility_closure_check(V, samples)[:5]
        result = {"strong_rokhlin": verdict.strong_rokhlin, "rokhlin": verdict.rokhlin}
        summary = f"rokhlin={verdict.rokhlin.value} strong={verdict.strong_rokhlin.value} ({certificate['reason']})"
        return Outcome(result, certificate, negative, summary)

    _run(ctx, "decide-rokhlin", body, out)


@app.command("check-closure")
def check_closure(
    ctx: typer.Context,
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    samples: int = typer.Option(CLOSURE_SAMPLES, "--samples"),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Sample the divisibility closure of the reciprocal semigroup."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        inputs["samples"] = samples
        violations = divisibility_closure_check(V, samples)
        result = {"divisors": closure_divisors(V, samples), "violations": violations}
        return Outcome(result, negative=bool(violations), summary=f"{len(violations)} violations")

    _run(ctx, "check-closure", body, out)


@app.command("dichotomy")
def dichotomy(
    ctx: typer.Context,
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    b: str = typer.Option(..., "--b", help="A value of V whose quotient by n leaves V."),
    n: int = typer.Option(..., "--n"),
    c: str = typer.Option(..., "--c"),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Classify the subset measures obtained by restricting to a set of a given measure."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        inputs.update({"b": b, "n": n, "c": c})
        verdict = dichotomy_analyze(V, codec.parse_value(b, V.symbols), n, codec.parse_value(c, V.symbols))
        negative = verdict.verdict == "no-rokhlin"
        return Outcome(verdict, verdict.violation, negative, verdict.verdict)

    _run(ctx, "dichotomy", body, out)


@app.command("scale")
def scale(
    ctx: typer.Context,
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    a: str = typer.Option(..., "--a", help="Positive rational value of V."),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Also save the scaled descriptor here."),
):
    """Descriptor of the value set of a measure restricted to a set of measure a."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        inputs["a"] = a
        scaled = scale_value_set(V, codec.parse_value(a))
        if out:
            ws.write_json(out, codec.descriptor_to_json(scaled), kind="descriptor")
        return Outcome(scaled, summary="scaled descriptor")

    _run(ctx, "scale", body)


# ---------------- Matrices ----------------

@app.command("decompose")
def decompose(
    ctx: typer.Context,
    matrix: str = typer.Option(..., "--matrix", "-m", help="Matrix file."),
    descriptor: Optional[str] = typer.Option(None, "--descriptor", "-d", help="Descriptor naming the symbols."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Write an equi-summed matrix as a sum of cycle matrices."""

    def body(ws, inputs):
        symbols = _symbols(ws, inputs, descriptor)
        A = codec.matrix_from_json(_document(ws, inputs, "matrix", matrix), symbols)
        cycles = cycle_decompose(A)
        return Outcome({"cycles": cycles, "count": len(cycles)}, summary=f"{len(cycles)} cycles")

    _run(ctx, "decompose", body, out)


@app.command("witness")
def witness(
    ctx: typer.Context,
    matrix: str = typer.Option(..., "--matrix", "-m"),
    snapshot: str = typer.Option(..., "--snapshot", "-s"),
    update: bool = typer.Option(False, "--update", help="Save the deepened chain back to the snapshot."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Find an automorphism prefix compatible with a balanced matrix."""

    def body(ws, inputs):
        chain = _snapshot(ws, inputs, snapshot)
        A = codec.matrix_from_json(_document(ws, inputs, "matrix", matrix), chain.V.symbols)
        sigma = compatible_witness(chain, A)
        if update:
            ws.save_snapshot(ws.resolve(snapshot, "snapshot").resolve(), chain)
        result = {"prefix": sigma, "depth": sigma.depth}
        return Outcome(result, {"mass_matrix": mass_matrix(sigma, A.level)}, summary=f"prefix of depth {sigma.depth}")

    _run(ctx, "witness", body, out)


@app.command("check-compat")
def check_compat(
    ctx: typer.Context,
    snapshot: str = typer.Option(..., "--snapshot", "-s"),
    query: str = typer.Option(..., "--input", "-i", help="File with a matrix and a prefix."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Check whether a prefix lies in the neighbourhood of a matrix."""

    def body(ws, inputs):
        chain = _snapshot(ws, inputs, snapshot)
        doc = _document(ws, inputs, "query", query, codec.COMPATIBILITY)
        A = codec.matrix_from_json(doc["matrix"], chain.V.symbols)
        sigma = codec.prefix_from_json(doc["prefix"], chain)
        ok = compatible(sigma, A)
        certificate = {"mass_matrix": mass_matrix(sigma, A.level)}
        return Outcome({"compatible": ok}, certificate, not ok, "compatible" if ok else "not compatible")

    _run(ctx, "check-compat", body, out)


# ---------------- Cycle tuples ----------------

def _tuples(doc, keys, V=None):
    symbols = V.symbols if V is not None else {}
    out = [codec.tuple_from_json(doc[k], symbols) for k in keys]
    return [t.check(V) for t in out] if V is not None else out


@app.command("amalgamate-tuples")
def amalgamate_tuples(
    ctx: typer.Context,
    cospan: str = typer.Option(..., "--input", "-i", help="File with a target, two sources and two morphisms."),
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Amalgamate two tuple morphisms with a common target over a ℚ-like value set."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        doc = _document(ws, inputs, "cospan", cospan, codec.AMALGAMATION)
        target = _tuples(doc, ["target"], V)[0]
        sources = [codec.tuple_from_json(t, V.symbols).check(V) for t in doc["sources"]]
        p0, p1 = (codec.tuple_morphism_from_json(m, s, target) for m, s in zip(doc["morphisms"], sources))
        C, q0, q1 = qlike_amalgamate(p0, p1, V)
        return Outcome({"amalgam": C, "legs": [q0, q1]}, summary=f"amalgam with {len(C)} cycles")

    _run(ctx, "amalgamate-tuples", body, out)


@app.command("product-lift")
def product_lift(
    ctx: typer.Context,
    pair: str = typer.Option(..., "--input", "-i", help="File with a left and a right tuple."),
    descriptor: str = typer.Option(..., "--descriptor", "-d"),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Common lift of two mass-one tuples over a ring-like value set."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor)
        doc = _document(ws, inputs, "pair", pair, codec.TUPLE_PAIR)
        left, right = _tuples(doc, ["left", "right"], V)
        u, mc, md = ring_product_lift(left, right, V)
        return Outcome({"lift": u, "legs": [mc, md]}, summary=f"lift with {len(u)} cycles")

    _run(ctx, "product-lift", body, out)


@app.command("find-morphism")
def find_morphism(
    ctx: typer.Context,
    query: str = typer.Option(..., "--input", "-i", help="File with a source and a target tuple."),
    descriptor: Optional[str] = typer.Option(None, "--descriptor", "-d"),
    effort: int = typer.Option(DEFAULT_EFFORT, "--effort", help="Search node budget."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Search for a morphism between two cycle tuples."""

    def body(ws, inputs):
        V = _descriptor(ws, inputs, descriptor) if descriptor else None
        doc = _document(ws, inputs, "query", query, codec.MORPHISM_QUERY)
        inputs["effort"] = effort
        src, tgt = _tuples(doc, ["source", "target"], V)
        search = find_tuple_morphism(src, tgt, effort)
        summary = "found" if search.morphism else ("bound hit" if search.bound_hit else "none exists")
        return Outcome(search, negative=search.morphism is None, summary=f"{summary} after {search.nodes} nodes")

    _run(ctx, "find-morphism", body, out)


# ---------------- Composites ----------------

def _composite(ws, inputs, name):
    doc = ws.read_json(name, "snapshot")
    inputs["composite"] = doc
    return codec.composite_from_json(doc)


def _composite_symbols(m):
    symbols = {}
    for chain in m.chains:
        symbols.update(chain.V.symbols)
    return symbols


@composite_app.command("build")
def composite_build(
    ctx: typer.Context,
    spec: str = typer.Option(..., "--spec", help="File listing component descriptors and scales."),
    out: str = typer.Option("composite.json", "--out", "-o", help="Composite file to write."),
):
    """Build one chain per component and save the weighted sum."""

    def body(ws, inputs):
        doc = _document(ws, inputs, "spec", spec, codec.COMPOSITE_SPEC)
        parts = []
        for item in doc["components"]:
            V = codec.descriptor_from_json(item["descriptor"])
            chain = new_chain(V).run_schedule(item.get("budget", DEFAULT_BUDGET))
            parts.append((chain, codec.rational_from_json(item["scale"])))
        m = weighted_sum(parts)
        path = ws.write_json(out, codec.composite_to_json(m), kind="snapshot")
        result = {
            "composite": str(path),
            "components": [
                {"scale": scale, "levels": chain.depth + 1, "symbols": sorted(chain.V.symbols)}
                for chain, scale in m.components
            ],
        }
        return Outcome(result, summary=f"{len(m.components)} components")

    _run(ctx, "composite-build", body)


@composite_app.command("member")
def composite_member(
    ctx: typer.Context,
    composite: str = typer.Option(..., "--composite", "-c"),
    value: str = typer.Option(..., "--value"),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Whether a value is a clopen value of the composite."""

    def body(ws, inputs):
        m = _composite(ws, inputs, composite)
        inputs["value"] = value
        v = codec.parse_value(value, _composite_symbols(m))
        found = decompose_value(m, v) if member(m, v) else []
        return Outcome({"member": bool(found), "decompositions": found}, negative=not found)

    _run(ctx, "composite-member", body, out)


@composite_app.command("refute-maximality")
def composite_refute_maximality(
    ctx: typer.Context,
    composite: str = typer.Option(..., "--composite", "-c"),
    targets: str = typer.Option(..., "--targets", help="Comma-separated values summing to 1."),
    out: Optional[str] = typer.Option(None, "--out", "-o"),
):
    """Realize target values as a clopen partition or certify that none exists."""

    def body(ws, inputs):
        m = _composite(ws, inputs, composite)
        inputs["targets"] = targets
        found = maximality_refute(m, codec.parse_values(targets, _composite_symbols(m)))
        result = {"feasible": found.feasible, "partition": found.partition}
        summary = "realized" if found.feasible else found.certificate["reason"]
        return Outcome(result, found.certificate, not found.feasible, summary)

    _run(ctx, "composite-refute-maximality", body, out)
