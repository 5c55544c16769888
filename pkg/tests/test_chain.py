import random
from fractions import Fraction as F
from itertools import combinations

import pytest
from conftest import dyadic, triadic

from cantor_measures.chain import MORPHISM, OBJECT, AutomorphismPrefix, ClopenSet, new_chain
from cantor_measures.errors import (
    DepthTooShallow,
    InvalidChallenge,
    NotGroupLike,
    NotSmaller,
    PreconditionFailed,
    WeightMismatch,
)
from cantor_measures.partitions import ROOT, PartitionMorphism, WeightedPartition
from cantor_measures.values import ONE, GroupDescriptor, RationalGroup, enumerate_values, total


def random_targets(V, count, seed, height=9, max_parts=6):
    rng = random.Random(seed)
    pool = enumerate_values(V, height)
    out = []
    while len(out) < count:
        pieces = [ONE]
        for _ in range(rng.randint(1, max_parts - 1)):
            i = rng.randrange(len(pieces))
            smaller = [y for y in pool if y < pieces[i]]
            if smaller:
                y = rng.choice(smaller)
                pieces[i : i + 1] = [y, pieces[i] - y]
        out.append(pieces)
    return out


def clopen_subsets(chain, level):
    cells = chain.levels[level].cells
    return [ClopenSet(level, s) for k in range(1, len(cells) + 1) for s in combinations(cells, k)]


def test_finite_value_sets_are_refused():
    with pytest.raises(NotGroupLike):
        new_chain(GroupDescriptor(RationalGroup.integers()))


def test_built_chain_is_consistent(dyadic_chain):
    assert dyadic_chain.check()
    assert len(dyadic_chain.levels) >= 3
    assert dyadic_chain.levels[1].weights == [F(1, 2), F(1, 2)]
    kinds = {entry.kind for entry in dyadic_chain.ledger}
    assert kinds == {OBJECT, MORPHISM}
    assert set(dyadic_chain.projection(dyadic_chain.depth, 0).values()) == {ROOT}


def test_schedule_is_idempotent(dyadic_chain):
    chain = dyadic_chain.fork()
    chain.run_schedule(3)
    assert chain.depth == dyadic_chain.depth
    assert len(chain.ledger) == len(dyadic_chain.ledger)


def test_schedule_needs_a_budget():
    with pytest.raises(PreconditionFailed):
        new_chain(dyadic()).run_schedule(0)


def test_challenges_are_absorbed_once(dyadic_chain):
    chain = dyadic_chain.fork()
    target = WeightedPartition.from_weights([F(1, 8), F(7, 8)])
    stage = chain.absorb_object(target)
    size = len(chain.ledger)
    assert chain.absorb_object(target) == stage
    assert len(chain.ledger) == size
    challenge = PartitionMorphism(target, chain.levels[0], {c: ROOT for c in target.cells})
    entry = chain.lift_of(challenge, OBJECT)
    assert entry.stage == stage
    assert chain.check()


def test_unknown_challenge_has_no_lift(dyadic_chain):
    target = WeightedPartition.from_weights([F(1, 16), F(15, 16)])
    challenge = PartitionMorphism(target, dyadic_chain.levels[0], {c: ROOT for c in target.cells})
    with pytest.raises(InvalidChallenge):
        dyadic_chain.lift_of(challenge, OBJECT)


@pytest.mark.parametrize("fixture", ["dyadic_chain", "triadic_chain"])
def test_every_smaller_set_fits_inside_a_larger_one(fixture, request):
    chain = request.getfixturevalue(fixture)
    checked = 0
    for level in range(3):
        subsets = clopen_subsets(chain, level)
        for U in subsets:
            for W in subsets:
                if chain.measure(U) >= chain.measure(W):
                    continue
                trial = chain.fork()
                found = trial.subset_witness(U, W)
                assert trial.measure(found) == chain.measure(U)
                assert found.cells <= trial.lift_set(W, found.level).cells
                checked += 1
    assert checked > 0


def test_subset_witness_needs_a_smaller_set(dyadic_chain):
    U = ClopenSet(1, dyadic_chain.levels[1].cells)
    W = ClopenSet(1, dyadic_chain.levels[1].cells[:1])
    with pytest.raises(NotSmaller):
        dyadic_chain.fork().subset_witness(U, W)


@pytest.mark.parametrize("fixture, V", [("dyadic_chain", dyadic()), ("triadic_chain", triadic())])
def test_targets_are_realized_as_partitions(fixture, V, request):
    chain = request.getfixturevalue(fixture).fork()
    for targets in random_targets(V, 50, seed=11):
        sets = chain.realize_partition(targets)
        assert [chain.measure(U) for U in sets] == targets
        cells = [c for U in sets for c in U.cells]
        assert len(cells) == len(set(cells)) == len(chain.levels[sets[0].level])
    assert chain.check()


def test_lift_and_canonical_form(dyadic_chain):
    U = ClopenSet(1, dyadic_chain.levels[1].cells[:1])
    lifted = dyadic_chain.lift_set(U, dyadic_chain.depth)
    assert dyadic_chain.measure(lifted) == F(1, 2)
    assert dyadic_chain.canonical(lifted) == U


def test_partial_isomorphism_swaps_halves(dyadic_chain):
    chain = dyadic_chain.fork()
    a, b = chain.levels[1].cells
    sigma = chain.extend_partial_isomorphism({a: b}, 1)
    assert sigma.verify()
    assert sigma.top_map == {a: b, b: a}
    U = ClopenSet(1, {a})
    assert sigma.inverse().image(sigma.image(U)) == chain.lift_set(U, sigma.depth)


def _unequal_pair(chain):
    for level in range(chain.depth + 1):
        P = chain.levels[level]
        for c, d in combinations(P.cells, 2):
            if P.weight(c) != P.weight(d):
                return level, c, d
    raise AssertionError("no level with two different weights")


def test_partial_isomorphism_preconditions(dyadic_chain):
    chain = dyadic_chain.fork()
    level, c, d = _unequal_pair(chain)
    with pytest.raises(WeightMismatch):
        chain.extend_partial_isomorphism({c: d}, level)
    a, b = chain.levels[1].cells
    with pytest.raises(PreconditionFailed):
        chain.extend_partial_isomorphism({a: a, b: a}, 1)
    with pytest.raises(PreconditionFailed):
        chain.extend_partial_isomorphism({a: b}, chain.depth + 1)


def test_prefixes_extend_to_the_top(dyadic_chain):
    chain = dyadic_chain.fork()
    a, b = chain.levels[1].cells
    sigma = chain.extend_partial_isomorphism({a: b}, 1)
    deeper = chain.extend_prefix(sigma, chain.depth)
    assert deeper.verify()
    assert deeper.depth >= dyadic_chain.depth
    assert deeper.at(1) == sigma.top_map
    assert deeper.inverse().verify()
    P = chain.levels[deeper.depth]
    assert total(P.weight(c) for c in deeper.top_map) == ONE


def test_prefixes_past_the_top_deepen_the_chain():
    chain = new_chain(dyadic()).run_schedule(1)
    a, b = chain.levels[1].cells
    sigma = chain.extend_partial_isomorphism({a: b}, 1)
    wanted = chain.depth + 1
    deeper = chain.extend_prefix(sigma, wanted)
    assert chain.depth >= wanted
    assert deeper.depth >= wanted
    assert deeper.verify()
    assert deeper.at(sigma.depth) == sigma.top_map
    chain.check()


def test_deepening_gives_up_past_its_budget():
    chain = new_chain(dyadic()).run_schedule(1)
    with pytest.raises(DepthTooShallow):
        chain.deepen(chain.depth + 1, max_budget=1)
    assert chain.deepen(chain.depth) == 0


def test_identity_prefix(dyadic_chain):
    sigma = AutomorphismPrefix.identity(dyadic_chain)
    assert sigma.verify()
    assert sigma.depth == sigma.base == dyadic_chain.depth
