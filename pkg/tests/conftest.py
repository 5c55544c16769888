import orjson
import pytest
from hypothesis import strategies as st

from cantor_measures.chain import new_chain
from cantor_measures.values import INF, ONE, GroupDescriptor, IrrationalSymbol, RationalGroup

SQRT2_MINUS_1 = {"kind": "sqrt", "radicand": 2, "shift": "-1"}


def rational_set(default=0, **exponents):
    """Descriptor from prime exponents, e.g. rational_set(p2="inf", p3=1)."""
    exc = tuple((int(k[1:]), INF if e == "inf" else e) for k, e in exponents.items())
    return GroupDescriptor(RationalGroup(default, exc))


def dyadic():
    return GroupDescriptor(RationalGroup.p_adic(2))


def triadic():
    return GroupDescriptor(RationalGroup.p_adic(3))


def rationals():
    return GroupDescriptor(RationalGroup.rationals())


def sqrt2_module(name="alpha"):
    """(ℤ + ℤα) ∩ [0, 1] for α = √2 − 1."""
    alpha = IrrationalSymbol(name, SQRT2_MINUS_1)
    return GroupDescriptor(RationalGroup.integers(), ((alpha, RationalGroup.integers()),))


@pytest.fixture(scope="session")
def dyadic_chain():
    return new_chain(dyadic()).run_schedule(3)


@pytest.fixture(scope="session")
def triadic_chain():
    return new_chain(triadic()).run_schedule(3)


@pytest.fixture
def workspace(tmp_path):
    for sub in ("descriptors", "snapshots", "runs"):
        (tmp_path / sub).mkdir()
    return tmp_path


def write_json(path, obj):
    path.write_bytes(orjson.dumps(obj, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2) + b"\n")
    return path


# ---------------- Strategies ----------------

@st.composite
def splits(draw, pool, start=ONE, max_parts=6):
    """Random split of `start` into positive pool-sized pieces (the last piece takes the rest)."""
    pieces = [start]
    for _ in range(draw(st.integers(0, max_parts - 1))):
        i = draw(st.integers(0, len(pieces) - 1))
        x = pieces[i]
        smaller = [y for y in pool if y < x]
        if not smaller:
            continue
        y = draw(st.sampled_from(smaller))
        pieces[i : i + 1] = [y, x - y]
    return pieces


@st.composite
def coarsening(draw, pieces, max_groups=6):
    """Group a shuffled list of pieces into consecutive sums."""
    order = draw(st.permutations(range(len(pieces))))
    cuts = sorted(draw(st.sets(st.integers(1, len(pieces) - 1), max_size=max_groups - 1)) if len(pieces) > 1 else [])
    bounds = [0] + cuts + [len(pieces)]
    return [sum((pieces[order[k]] for k in range(a, b)), start=pieces[0] * 0) for a, b in zip(bounds, bounds[1:])]
