import orjson
import pytest
from conftest import SQRT2_MINUS_1, dyadic, rational_set, rationals, triadic, write_json
from typer.testing import CliRunner

from cantor_measures import cli, codec
from cantor_measures.cli import app

runner = CliRunner(mix_stderr=False)


def invoke(ws, *args):
    return runner.invoke(app, ["--workspace", str(ws), *args])


def envelope(result):
    return orjson.loads(result.stdout)


def put_descriptor(ws, name, V):
    return write_json(ws / "descriptors" / f"{name}.json", codec.descriptor_to_json(V))


@pytest.fixture
def built(workspace):
    put_descriptor(workspace, "dyadic", dyadic())
    result = invoke(workspace, "build-chain", "--descriptor", "dyadic")
    assert result.exit_code == 0, result.stderr
    return workspace


def level_cells(ws, level, name="chain.json"):
    snap = orjson.loads((ws / "snapshots" / name).read_bytes())
    return [cell["id"] for cell in snap["levels"][level]["cells"]]


def two_cycle(a, b, level=1):
    return {"level": level, "entries": [{"from": a, "to": b, "w": "1/2"}, {"from": b, "to": a, "w": "1/2"}]}


# ---------------- Chains ----------------

def test_build_chain_writes_an_envelope_and_a_snapshot(built):
    snap = built / "snapshots" / "chain.json"
    assert snap.exists()
    first = snap.read_bytes()
    result = invoke(built, "build-chain", "--descriptor", "dyadic")
    assert result.exit_code == 0
    env = envelope(result)
    assert set(env) == {"op", "input_hash", "result", "certificate"}
    assert env["op"] == "build-chain"
    assert env["result"]["levels"] >= 3
    assert snap.read_bytes() == first


def test_build_chain_is_reproducible(workspace):
    put_descriptor(workspace, "triadic", triadic())
    runs = [invoke(workspace, "build-chain", "-d", "triadic", "-b", "2", "-o", name) for name in ("a.json", "b.json")]
    assert all(r.exit_code == 0 for r in runs)
    hashes = {envelope(r)["input_hash"] for r in runs}
    assert len(hashes) == 1
    assert (workspace / "snapshots" / "a.json").read_bytes() == (workspace / "snapshots" / "b.json").read_bytes()


def test_zero_budget_is_invalid(workspace):
    put_descriptor(workspace, "dyadic", dyadic())
    result = invoke(workspace, "build-chain", "--descriptor", "dyadic", "--budget", "0")
    assert result.exit_code == 2
    assert result.stdout == ""


def test_missing_descriptor_is_an_io_error(workspace):
    result = invoke(workspace, "build-chain", "--descriptor", "nowhere")
    assert result.exit_code == 3


def test_check_good(built):
    result = invoke(built, "check-good", "--snapshot", "chain", "--depth", "1")
    assert result.exit_code == 0, result.stderr
    env = envelope(result)
    assert env["result"]["passed"]
    assert env["result"]["pairs"]
    assert all(p["ok"] for p in env["result"]["pairs"])
    assert env["result"]["sampled_levels"] == []


def test_sampled_levels_are_not_a_pass(built, monkeypatch):
    monkeypatch.setattr(cli, "SWEEP_MAX_CELLS", 1)
    result = invoke(built, "check-good", "--snapshot", "chain", "--depth", "1")
    assert result.exit_code == 1, result.stderr
    env = envelope(result)
    assert env["result"]["sampled_levels"] == [1]
    assert env["result"]["complete"] is False
    assert env["result"]["passed"] is False


def test_corrupted_snapshot_is_invalid(built):
    path = built / "snapshots" / "chain.json"
    snap = orjson.loads(path.read_bytes())
    snap["levels"][1]["cells"][0]["w"] = "1/4"
    write_json(path, snap)
    result = invoke(built, "check-good", "--snapshot", "chain")
    assert result.exit_code == 2


def test_runs_are_logged(built):
    invoke(built, "build-chain", "--descriptor", "missing")
    lines = (built / "runs" / "run_log.jsonl").read_bytes().splitlines()
    records = [orjson.loads(line) for line in lines]
    assert [(r["op"], r["exit"]) for r in records] == [("build-chain", 0), ("build-chain", 3)]
    assert records[0]["input_hash"] and records[1]["input_hash"] is None


def test_envelope_can_go_to_a_file(built):
    result = invoke(built, "check-good", "-s", "chain", "--depth", "0", "--out", "good.json")
    assert result.exit_code == 0
    assert result.stdout == ""
    assert orjson.loads((built / "good.json").read_bytes())["op"] == "check-good"


def test_verbose_logs_stay_off_stdout(built):
    result = runner.invoke(app, ["--workspace", str(built), "-v", "check-good", "-s", "chain", "--depth", "0"])
    assert result.exit_code == 0
    assert envelope(result)["op"] == "check-good"
    assert "[DEBUG]" in result.stderr


# ---------------- Decisions ----------------

def test_rokhlin_yes(workspace):
    put_descriptor(workspace, "dyadic", dyadic())
    result = invoke(workspace, "decide-rokhlin", "--descriptor", "dyadic")
    assert result.exit_code == 0
    assert envelope(result)["result"] == {"strong_rokhlin": "yes", "rokhlin": "yes"}


def test_rokhlin_no_carries_a_certificate(workspace):
    put_descriptor(workspace, "bounded", rational_set(p2=3))
    result = invoke(workspace, "decide-rokhlin", "--descriptor", "bounded")
    assert result.exit_code == 1
    cert = envelope(result)["certificate"]
    assert (cert["reason"], cert["prime"], cert["exponent"]) == ("finite-exponent", 2, 3)
    assert cert["closure_violations"]


def test_check_closure(workspace):
    put_descriptor(workspace, "v", rational_set(p2="inf", p3=1))
    result = invoke(workspace, "check-closure", "-d", "v", "--samples", "6")
    assert result.exit_code == 1
    violations = envelope(result)["result"]["violations"]
    assert {"kind": "product", "left": "3", "right": 3} in violations


def test_dichotomy(workspace):
    put_descriptor(workspace, "v", rational_set(p2="inf", p3=1))
    result = invoke(workspace, "dichotomy", "-d", "v", "--b", "1/3", "--n", "9", "--c", "1/12")
    assert result.exit_code == 1
    env = envelope(result)
    assert env["result"]["verdict"] == "no-rokhlin"
    assert env["result"]["a"] == "3/4"
    bad = invoke(workspace, "dichotomy", "-d", "v", "--b", "1/2", "--n", "2", "--c", "1/4")
    assert bad.exit_code == 2


def test_scale_saves_a_descriptor(workspace):
    put_descriptor(workspace, "v", rational_set(p2="inf", p3=1))
    result = invoke(workspace, "scale", "-d", "v", "--a", "1/3", "--out", "scaled.json")
    assert result.exit_code == 0
    saved = orjson.loads((workspace / "descriptors" / "scaled.json").read_bytes())
    assert saved == {"rational": {"default": "0", "exceptions": {"2": "inf"}}}
    assert envelope(result)["result"] == saved


# ---------------- Matrices ----------------

def test_decompose(workspace):
    write_json(workspace / "m.json", two_cycle("x", "y", level=0))
    result = invoke(workspace, "decompose", "--matrix", "m.json")
    assert result.exit_code == 0
    assert envelope(result)["result"] == {"count": 1, "cycles": [{"vertices": ["x", "y"], "weight": "1/2"}]}
    write_json(workspace / "bad.json", {"level": 0, "entries": [{"from": "x", "to": "y", "w": "1/2"}]})
    assert invoke(workspace, "decompose", "--matrix", "bad.json").exit_code == 2


def test_witness(built):
    a, b = level_cells(built, 1)
    write_json(built / "swap.json", two_cycle(a, b))
    result = invoke(built, "witness", "--matrix", "swap.json", "--snapshot", "chain")
    assert result.exit_code == 0, result.stderr
    env = envelope(result)
    assert env["certificate"]["mass_matrix"] == two_cycle(*sorted((a, b)))
    assert env["result"]["prefix"]["maps"][-1]


def test_check_compat(built):
    a, b = level_cells(built, 1)
    query = {"matrix": two_cycle(a, b), "prefix": {"levels": [1], "maps": [{a: a, b: b}]}}
    write_json(built / "q.json", query)
    result = invoke(built, "check-compat", "--snapshot", "chain", "--input", "q.json")
    assert result.exit_code == 1
    assert envelope(result)["result"] == {"compatible": False}
    query["prefix"]["maps"] = [{a: b, b: a}]
    write_json(built / "q.json", query)
    assert invoke(built, "check-compat", "--snapshot", "chain", "--input", "q.json").exit_code == 0


# ---------------- Cycle tuples ----------------

def tuple_doc(*entries):
    return {"entries": [{"w": w, "n": n} for w, n in entries]}


def test_find_morphism(workspace):
    write_json(workspace / "q.json", {"source": tuple_doc(("1/3", 3)), "target": tuple_doc(("1/2", 2))})
    result = invoke(workspace, "find-morphism", "--input", "q.json")
    assert result.exit_code == 1
    found = envelope(result)["result"]
    assert found["morphism"] is None and found["bound_hit"] is False
    write_json(workspace / "q.json", {"source": tuple_doc(("1/4", 2), ("1/4", 2)), "target": tuple_doc(("1/2", 2))})
    result = invoke(workspace, "find-morphism", "--input", "q.json")
    assert result.exit_code == 0
    assert envelope(result)["result"]["morphism"] == {"blocks": [[0, 1]]}


def test_product_lift(workspace):
    put_descriptor(workspace, "dyadic", dyadic())
    write_json(workspace / "pair.json", {"left": tuple_doc(("1/2", 2)), "right": tuple_doc(("1/2", 2))})
    result = invoke(workspace, "product-lift", "--input", "pair.json", "-d", "dyadic")
    assert result.exit_code == 0
    assert envelope(result)["result"]["lift"] == {"entries": [{"w": "1/4", "n": 4}], "mass": "1"}
    put_descriptor(workspace, "bounded", rational_set(p2=3))
    assert invoke(workspace, "product-lift", "--input", "pair.json", "-d", "bounded").exit_code == 2


def test_amalgamate_tuples(workspace):
    put_descriptor(workspace, "q", rationals())
    cospan = {
        "target": tuple_doc(("1", 1)),
        "sources": [tuple_doc(("1/2", 1), ("1/2", 1)), tuple_doc(("1/4", 1), ("3/4", 1))],
        "morphisms": [{"blocks": [[0, 1]]}, {"blocks": [[0, 1]]}],
    }
    write_json(workspace / "cospan.json", cospan)
    result = invoke(workspace, "amalgamate-tuples", "--input", "cospan.json", "-d", "q")
    assert result.exit_code == 0
    amalgam = envelope(result)["result"]["amalgam"]
    assert [(e["w"], e["n"]) for e in amalgam["entries"]] == [("1/4", 1), ("1/4", 1), ("1/2", 1)]
    put_descriptor(workspace, "dyadic", dyadic())
    assert invoke(workspace, "amalgamate-tuples", "--input", "cospan.json", "-d", "dyadic").exit_code == 2


# ---------------- Composites ----------------

@pytest.fixture
def composite(workspace):
    sqrt_module = {
        "rational": {"default": "0"},
        "irrationals": [{"name": "alpha", "enclosure": SQRT2_MINUS_1, "group": {"default": "0"}}],
    }
    spec = {
        "components": [
            {"descriptor": codec.descriptor_to_json(triadic()), "scale": "1/3", "budget": 2},
            {"descriptor": sqrt_module, "scale": "2/3", "budget": 1},
        ]
    }
    write_json(workspace / "spec.json", spec)
    result = invoke(workspace, "composite", "build", "--spec", "spec.json")
    assert result.exit_code == 0, result.stderr
    return workspace


def test_composite_membership(composite):
    result = invoke(composite, "composite", "member", "--composite", "composite", "--value", "1/3")
    assert result.exit_code == 0
    assert envelope(result)["result"]["member"] is True
    result = invoke(composite, "composite", "member", "-c", "composite", "--value", "1/3*alpha")
    assert result.exit_code == 1


def test_composite_thirds_are_refuted(composite):
    result = invoke(composite, "composite", "refute-maximality", "-c", "composite", "--targets", "1/3,1/3,1/3")
    assert result.exit_code == 1
    env = envelope(result)
    assert env["result"] == {"feasible": False, "partition": None}
    assert env["certificate"]["reason"] == "component-total-unreachable"


def test_composite_targets_are_realized(composite):
    result = invoke(
        composite, "composite", "refute-maximality", "-c", "composite", "--targets", "2/3*alpha,1-2/3*alpha"
    )
    assert result.exit_code == 0, result.stderr
    assert envelope(result)["result"]["feasible"] is True
