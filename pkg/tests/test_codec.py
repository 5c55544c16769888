from fractions import Fraction as F

import pytest
from conftest import SQRT2_MINUS_1, rational_set, sqrt2_module, triadic

from cantor_measures import codec
from cantor_measures.chain import AutomorphismPrefix, new_chain
from cantor_measures.composite import weighted_sum
from cantor_measures.cycles import CycleTuple, rokhlin_decide
from cantor_measures.errors import InvalidInput
from cantor_measures.values import INF, ExactValue, Verdict


def snapshot_bytes(chain):
    return codec.dumps(codec.snapshot_to_json(chain))


def test_snapshots_are_deterministic():
    first = new_chain(triadic()).run_schedule(2)
    second = new_chain(triadic()).run_schedule(2)
    assert snapshot_bytes(first) == snapshot_bytes(second)


@pytest.mark.parametrize("fixture", ["dyadic_chain", "triadic_chain"])
def test_snapshot_reload_is_byte_identical(fixture, request):
    chain = request.getfixturevalue(fixture)
    data = snapshot_bytes(chain)
    again = codec.snapshot_from_json(codec.loads(data))
    assert snapshot_bytes(again) == data
    assert again.depth == chain.depth
    assert len(again.ledger) == len(chain.ledger)


def test_irrational_snapshot_reloads():
    chain = new_chain(sqrt2_module()).run_schedule(1)
    data = snapshot_bytes(chain)
    again = codec.snapshot_from_json(codec.loads(data))
    assert again.V == chain.V
    assert snapshot_bytes(again) == data


def test_corrupted_link_is_rejected(dyadic_chain):
    obj = codec.snapshot_to_json(dyadic_chain)
    link = obj["links"][1]["map"]
    first = next(iter(link))
    link[first] = next(c for c in dyadic_chain.levels[1].cells if c != link[first])
    with pytest.raises(InvalidInput):
        codec.snapshot_from_json(obj)


def test_wrong_total_is_rejected(dyadic_chain):
    obj = codec.snapshot_to_json(dyadic_chain)
    obj["levels"][1]["cells"][0]["w"] = "1/4"
    with pytest.raises(InvalidInput):
        codec.snapshot_from_json(obj)


def test_schema_errors_name_their_place():
    with pytest.raises(InvalidInput, match="rational/default"):
        codec.descriptor_from_json({"rational": {"default": "2"}})
    with pytest.raises(InvalidInput):
        codec.descriptor_from_json({"rational": {"default": "0"}, "extra": 1})
    with pytest.raises(InvalidInput):
        codec.tuple_from_json({"entries": [{"w": "1/2", "n": 0}]})


def test_floats_never_enter_or_leave():
    with pytest.raises(InvalidInput):
        codec.dumps({"w": 0.5})
    with pytest.raises(InvalidInput):
        codec.loads(b'{"w": 0.5}')
    with pytest.raises(InvalidInput):
        codec.loads(b"{not json")
    with pytest.raises(InvalidInput):
        codec.plain(0.25)
    assert codec.plain(INF) == "inf"


def test_descriptor_round_trip():
    V = rational_set(p2="inf", p3=1)
    obj = codec.descriptor_to_json(V)
    assert obj == {"rational": {"default": "0", "exceptions": {"2": "inf", "3": 1}}}
    assert codec.descriptor_from_json(obj) == V
    W = sqrt2_module()
    obj = codec.descriptor_to_json(W)
    assert obj["irrationals"][0]["enclosure"] == SQRT2_MINUS_1
    assert codec.descriptor_from_json(obj) == W


def test_values_to_json():
    V = sqrt2_module()
    a = ExactValue(0, {V.symbols["alpha"]: 2})
    assert codec.value_to_json(F(3, 4)) == "3/4"
    assert codec.value_to_json(a) == {"q": "0", "irr": {"alpha": "2"}}
    assert codec.value_from_json({"q": "0", "irr": {"alpha": "2"}}, V.symbols) == a
    with pytest.raises(InvalidInput):
        codec.value_from_json({"q": "0", "irr": {"beta": "1"}}, V.symbols)


def test_parse_value():
    symbols = sqrt2_module().symbols
    alpha = ExactValue(0, {symbols["alpha"]: 1})
    assert codec.parse_value("1/3") == F(1, 3)
    assert codec.parse_value("1/2+alpha", symbols) == F(1, 2) + alpha
    assert codec.parse_value("-alpha", symbols) == -alpha
    assert codec.parse_value("2*alpha-1", symbols) == 2 * alpha - 1
    assert codec.parse_value("-1/3*alpha", symbols) == -alpha / 3
    assert codec.parse_values("1/4, 3/4") == [F(1, 4), F(3, 4)]
    with pytest.raises(InvalidInput):
        codec.parse_value("alpha")
    with pytest.raises(InvalidInput):
        codec.parse_value("")
    with pytest.raises(InvalidInput):
        codec.parse_value("1/0")


def test_matrix_entries_are_unique():
    obj = {"level": 0, "entries": [{"from": "0", "to": "0", "w": "1/2"}] * 2}
    with pytest.raises(InvalidInput, match="duplicate"):
        codec.matrix_from_json(obj)


def test_tuple_round_trip():
    c = CycleTuple([(F(1, 4), 2), (F(1, 2), 1)])
    obj = codec.tuple_to_json(c)
    assert obj == {"entries": [{"w": "1/4", "n": 2}, {"w": "1/2", "n": 1}], "mass": "1"}
    assert codec.tuple_from_json(obj) == c


def test_prefixes_must_be_bijections(dyadic_chain):
    a, b = dyadic_chain.levels[1].cells
    obj = codec.prefix_to_json(AutomorphismPrefix(dyadic_chain, (1,), ({a: b, b: a},)))
    assert codec.prefix_from_json(obj, dyadic_chain).top_map == {a: b, b: a}
    obj["maps"][0][b] = b
    with pytest.raises(InvalidInput):
        codec.prefix_from_json(obj, dyadic_chain)


def test_composite_round_trip(triadic_chain):
    chain = new_chain(sqrt2_module()).run_schedule(1)
    m = weighted_sum([(triadic_chain, F(1, 3)), (chain, F(2, 3))])
    obj = codec.loads(codec.dumps(codec.composite_to_json(m)))
    again = codec.composite_from_json(obj)
    assert again.scales == m.scales
    assert [c.levels for c in again.chains] == [c.levels for c in m.chains]


def test_input_hash_ignores_key_order():
    assert codec.input_hash({"a": "1", "b": [1, 2]}) == codec.input_hash({"b": [1, 2], "a": "1"})
    assert codec.input_hash({"a": "1"}) != codec.input_hash({"a": "2"})
    assert len(codec.input_hash({})) == 64


def test_results_become_plain_json():
    out = codec.plain(rokhlin_decide(rational_set(p2=3)))
    assert out == {
        "strong_rokhlin": "no",
        "rokhlin": "no",
        "certificate": {"reason": "finite-exponent", "prime": 2, "exponent": 3},
    }
    assert codec.plain({"v": Verdict.YES, "s": frozenset({"b", "a"})}) == {"v": "yes", "s": ["a", "b"]}
