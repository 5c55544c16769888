from fractions import Fraction as F
from itertools import accumulate

import pytest
from conftest import coarsening, dyadic, sqrt2_module, splits, triadic
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_measures.errors import InvalidChallenge, NotInV, SumMismatch
from cantor_measures.partitions import (
    PartitionMorphism,
    WeightedPartition,
    amalgamate,
    child_ids,
    common_refinement,
    split_cell,
    split_cells,
)
from cantor_measures.values import ZERO, enumerate_values, total

VALUE_SETS = {"dyadic": dyadic(), "triadic": triadic(), "sqrt2": sqrt2_module()}
POOLS = {name: enumerate_values(V, 4 if V.is_rational else 2) for name, V in VALUE_SETS.items()}


def test_refinement_examples():
    cr = common_refinement([F(1, 2), F(1, 2)], [F(1, 4), F(3, 4)], dyadic())
    assert list(cr.parts) == [F(1, 4), F(1, 4), F(1, 2)]
    assert cr.left_blocks == ((0, 1), (2,))
    assert cr.right_blocks == ((0,), (1, 2))

    cr = common_refinement([F(1, 3), F(2, 3)], [F(2, 3), F(1, 3)], triadic())
    assert list(cr.parts) == [F(1, 3)] * 3
    assert cr.left_blocks == ((0,), (1, 2))
    assert cr.right_blocks == ((0, 1), (2,))


def test_refinement_rejects_bad_input():
    with pytest.raises(SumMismatch):
        common_refinement([F(1, 2)], [F(1, 4)], dyadic())
    with pytest.raises(NotInV):
        common_refinement([F(1, 3), F(2, 3)], [F(1)], dyadic())


@settings(max_examples=500, deadline=None)
@given(st.sampled_from(sorted(VALUE_SETS)), st.data())
def test_refinement_sum_identities(name, data):
    V = VALUE_SETS[name]
    pieces = data.draw(splits(POOLS[name]))
    left = data.draw(coarsening(pieces))
    right = data.draw(coarsening(pieces))
    cr = common_refinement(left, right, V)
    assert len(cr.parts) <= len(left) + len(right) - 1
    assert all(V.member(z) and z.sign() > 0 for z in cr.parts)
    for x, block in zip(left, cr.left_blocks):
        assert total(cr.parts[s] for s in block) == x
    for y, block in zip(right, cr.right_blocks):
        assert total(cr.parts[s] for s in block) == y
    flat = sorted(s for b in cr.left_blocks for s in b)
    assert flat == sorted(s for b in cr.right_blocks for s in b) == list(range(len(cr.parts)))
    overlap = cr.overlap()
    for i, x in enumerate(left):
        assert total(w for (a, _), w in overlap.items() if a == i) == x
    assert total(overlap.values()) == total(left)
    cuts = sorted(set(accumulate(left)) | set(accumulate(right)))
    assert list(cr.parts) == [b - a for a, b in zip([ZERO] + cuts, cuts)]


def test_child_ids_skip_taken_names():
    taken = {"a", "a/0"}
    assert child_ids("a", 1, taken) == ["a"]
    assert child_ids("a", 2, taken) == ["a/1", "a/2"]


def test_morphism_composition():
    P = WeightedPartition([("0", 1)])
    Q, q = split_cell(P, "0", [F(1, 2), F(1, 2)], dyadic())
    R, r = split_cell(Q, "0/0", [F(1, 4), F(1, 4)], dyadic())
    composed = q.compose(r)
    assert composed.verify()
    assert set(composed.mapping.values()) == {"0"}
    assert r.fiber("0/1") == ["0/1"]
    with pytest.raises(InvalidChallenge):
        r.compose(q)


def test_split_cells_checks_sums():
    P = WeightedPartition.from_weights([F(1, 2), F(1, 2)])
    R, m = split_cells(P, {"t0": [F(1, 4), F(1, 4)], "t1": [F(1, 8), F(3, 8)]}, dyadic())
    assert m.verify()
    assert R.cells == ("t0/0", "t0/1", "t1/0", "t1/1")
    with pytest.raises(SumMismatch):
        split_cells(P, {"t0": [F(1, 4)]}, dyadic())
    with pytest.raises(InvalidChallenge):
        split_cells(P, {"t7": [F(1, 4), F(1, 4)]}, dyadic())


def test_morphism_verify_catches_mass_loss():
    P = WeightedPartition.from_weights([F(1, 4), F(3, 4)])
    Q = WeightedPartition.from_weights([F(1, 2), F(1, 2)], prefix="u")
    assert not PartitionMorphism(P, Q, {"t0": "u0", "t1": "u1"}).verify()
    assert not PartitionMorphism(P, Q, {"t0": "u0", "t1": "u0"}).verify()


@st.composite
def cospans(draw, name):
    V, pool = VALUE_SETS[name], POOLS[name]
    F_ = WeightedPartition.from_weights(draw(splits(pool, max_parts=3)), prefix="f")
    legs = []
    for prefix in ("a", "b"):
        parts = {}
        for cell, w in F_.items():
            pieces = draw(splits(pool, start=w, max_parts=3))
            if len(pieces) > 1:
                parts[cell] = pieces
        R, m = split_cells(F_, parts, V)
        renamed = WeightedPartition((f"{prefix}{c}", w) for c, w in R.items())
        legs.append(PartitionMorphism(renamed, F_, {f"{prefix}{c}": m.mapping[c] for c in R.cells}))
    return legs


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(VALUE_SETS)), st.data())
def test_amalgamation_square_commutes(name, data):
    V = VALUE_SETS[name]
    f1, f2 = data.draw(cospans(name))
    G, p1, p2 = amalgamate(f1, f2, V)
    G.check(V)
    assert p1.verify() and p2.verify()
    assert f1.compose(p1).mapping == f2.compose(p2).mapping
    assert len(G) <= len(f1.source) + len(f2.source) - 1


def test_amalgamation_names_cells_after_second_leg():
    V = dyadic()
    F_ = WeightedPartition.unit()
    A = WeightedPartition.from_weights([F(1, 4), F(3, 4)], prefix="a")
    B = WeightedPartition.from_weights([F(1, 2), F(1, 2)], prefix="b")
    f1 = PartitionMorphism(A, F_, {c: "0" for c in A.cells})
    f2 = PartitionMorphism(B, F_, {c: "0" for c in B.cells})
    G, p1, p2 = amalgamate(f1, f2, V)
    assert G.cells == ("b0/0", "b0/1", "b1")
    assert G.weights == [F(1, 4), F(1, 4), F(1, 2)]
    assert p1.mapping == {"b0/0": "a0", "b0/1": "a1", "b1": "a1"}
    G.check(V)
