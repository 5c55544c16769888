"""Cycle tuples (weight, length), their morphisms, constructive lifts and the Rokhlin decision."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice

from loguru import logger

from cantor_measures.config import CLOSURE_SEARCH_LIMIT, DEFAULT_EFFORT
from cantor_measures.errors import (
    EmptyPartition,
    InvalidInput,
    InvariantViolation,
    MassMismatch,
    MassOverflow,
    NotCycleObject,
    NotGroupLike,
    NotInV,
    NotQLike,
    NotRingLike,
    PreconditionFailed,
)
from cantor_measures.matrices import cycle_decompose
from cantor_measures.partitions import common_refinement
from cantor_measures.values import ONE, ZERO, ExactValue, Verdict, iter_values, scale_value_set, total


class CycleTuple:
    """Multiset of (weight, length) kept sorted by weight then length."""

    __slots__ = ("entries", "mass")

    def __init__(self, entries, mass=None):
        entries = [(ExactValue.of(w), int(n)) for w, n in entries]
        if not entries:
            raise EmptyPartition("a cycle tuple needs at least one cycle")
        for w, n in entries:
            if n < 1:
                raise InvalidInput(f"cycle length {n} must be positive")
            if w.sign() <= 0:
                raise NotInV(f"cycle weight {w} must be positive")
        self.entries = tuple(sorted(entries, key=lambda e: (e[0], e[1])))
        self.mass = total(w * n for w, n in self.entries)
        if mass is not None and ExactValue.of(mass) != self.mass:
            raise MassMismatch(f"entries carry mass {self.mass}, declared {mass}")

    def check(self, V):
        for w, _ in self.entries:
            if not V.member(w):
                raise NotInV(f"cycle weight {w} is not in V")
        if self.mass > ONE:
            raise MassOverflow(f"mass {self.mass} exceeds 1")
        return self

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, CycleTuple):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        inner = ", ".join(f"({w}, {n})" for w, n in self.entries)
        return f"CycleTuple({inner})"


@dataclass(frozen=True)
class TupleMorphism:
    """blocks[j] lists the source entries wound onto target entry j."""

    blocks: tuple
    source: CycleTuple
    target: CycleTuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(sorted(b)) for b in self.blocks))

    def winding(self, i):
        for j, block in enumerate(self.blocks):
            if i in block:
                return self.source.entries[i][1] // self.target.entries[j][1]
        raise KeyError(i)

    def verify(self):
        return verify_tuple_morphism(self, self.source, self.target)


@dataclass(frozen=True)
class MorphismSearch:
    morphism: TupleMorphism | None
    nodes: int
    bound_hit: bool


def _concatenate(tuples):
    """Canonical concatenation plus the position of every (part, index) in the result."""
    raw = [(w, n, k, i) for k, t in enumerate(tuples) for i, (w, n) in enumerate(t.entries)]
    order = sorted(range(len(raw)), key=lambda r: (raw[r][0], raw[r][1]))
    position = {(raw[r][2], raw[r][3]): new for new, r in enumerate(order)}
    return CycleTuple([(raw[r][0], raw[r][1]) for r in order]), position


def tuple_sum(c, d):
    if c.mass + d.mass > ONE:
        raise MassOverflow(f"{c.mass} + {d.mass} exceeds 1")
    return _concatenate([c, d])[0]


def tuple_scale(n, c, V=None):
    if n < 1:
        raise PreconditionFailed("n >= 1", f"got {n}")
    mass = c.mass * n
    if mass > ONE:
        raise MassOverflow(f"{n} * {c.mass} exceeds 1")
    if V is not None and not V.member(mass):
        raise NotInV(f"{mass} is not in V")
    return _concatenate([c] * n)[0]


def verify_tuple_morphism(m, src, tgt):
    if src.mass != tgt.mass:
        raise MassMismatch(f"source mass {src.mass} differs from target mass {tgt.mass}")
    if len(m.blocks) != len(tgt.entries):
        return False
    seen = sorted(i for block in m.blocks for i in block)
    if seen != list(range(len(src.entries))):
        return False
    for block, (w, k) in zip(m.blocks, tgt.entries):
        if any(src.entries[i][1] % k for i in block):
            return False
        if total(src.entries[i][0] * src.entries[i][1] for i in block) != w * k:
            return False
    return True


def find_tuple_morphism(src, tgt, effort=DEFAULT_EFFORT):
    """Bounded depth-first search assigning source entries to target entries in order.

    The first morphism found is the lexicographically least assignment.
    """
    if src.mass != tgt.mass:
        raise MassMismatch(f"source mass {src.mass} differs from target mass {tgt.mass}")
    need = [w * k for w, k in tgt.entries]
    share = [v * n for v, n in src.entries]
    filled = [ZERO] * len(need)
    assign = [None] * len(share)
    nodes, refused = 0, False

    def search(i):
        nonlocal nodes, refused
        if nodes >= effort:
            refused = True
            return False
        nodes += 1
        if i == len(share):
            return all(f == t for f, t in zip(filled, need))
        n = src.entries[i][1]
        tried = set()
        for j, (_, k) in enumerate(tgt.entries):
            if n % k:
                continue
            state = (tgt.entries[j], filled[j])
            if state in tried:
                continue
            tried.add(state)
            grown = filled[j] + share[i]
            if grown > need[j]:
                continue
            filled[j], assign[i] = grown, j
            if search(i + 1):
                return True
            filled[j] = grown - share[i]
        return False

    found = search(0)
    morphism = None
    if found:
        blocks = [[i for i, j in enumerate(assign) if j == t] for t in range(len(need))]
        morphism = TupleMorphism(tuple(blocks), src, tgt)
    logger.debug("Tuple morphism search visited {} nodes", nodes)
    return MorphismSearch(morphism, nodes, not found and refused)


def identity_morphism(c):
    return TupleMorphism(tuple((i,) for i in range(len(c))), c, c)


def compose_tuple_morphisms(outer, inner):
    """outer ∘ inner; windings multiply."""
    if inner.target != outer.source:
        raise PreconditionFailed("composable tuple morphisms")
    blocks = [sorted(s for b in block for s in inner.blocks[b]) for block in outer.blocks]
    return TupleMorphism(tuple(blocks), inner.source, outer.target)


def sum_morphisms(morphisms):
    """Blockwise sum of morphisms between concatenated sources and targets."""
    source, src_pos = _concatenate([m.source for m in morphisms])
    target, tgt_pos = _concatenate([m.target for m in morphisms])
    blocks = [None] * len(target)
    for k, m in enumerate(morphisms):
        for j, block in enumerate(m.blocks):
            blocks[tgt_pos[(k, j)]] = [src_pos[(k, i)] for i in block]
    return TupleMorphism(tuple(blocks), source, target)


def sum_amalgams(parts):
    """Sum per-component amalgams (C, q0, q1) into one amalgam of the summed cospans."""
    if total(c.mass for c, _, _ in parts) > ONE:
        raise MassOverflow("summed amalgams exceed mass 1")
    q0 = sum_morphisms([p[1] for p in parts])
    q1 = sum_morphisms([p[2] for p in parts])
    return q0.source, q0, q1


def cycle_tuple_of(C):
    if not C.is_cycle_object():
        raise NotCycleObject("every row needs exactly one nonzero entry")
    return CycleTuple([(cycle.weight, len(cycle.vertices)) for cycle in cycle_decompose(C)])


def ring_product_lift(c, d, V):
    if V.classify().ring_like is not Verdict.YES:
        raise NotRingLike("common product lifts need a ring-like value set")
    if c.mass != ONE or d.mass != ONE:
        raise PreconditionFailed("both tuples have mass 1")
    raw = sorted(
        ((v * w, n * m, i, j) for i, (v, n) in enumerate(c.entries) for j, (w, m) in enumerate(d.entries)),
        key=lambda e: (e[0], e[1], e[2], e[3]),
    )
    u = CycleTuple([(w, n) for w, n, _, _ in raw]).check(V)
    to_c = [[s for s, e in enumerate(raw) if e[2] == i] for i in range(len(c))]
    to_d = [[s for s, e in enumerate(raw) if e[3] == j] for j in range(len(d))]
    mc, md = TupleMorphism(tuple(to_c), u, c), TupleMorphism(tuple(to_d), u, d)
    if not (mc.verify() and md.verify()):
        raise InvariantViolation("product lift legs do not verify")
    return u, mc, md


def qlike_amalgamate(p0, p1, V):
    """Common lift of two morphisms onto the same tuple over a ℚ-like value set.

    Over each target cycle of length n, covering cycles are unwound by the
    least common multiple L of their windings: an entry (x, w·n) becomes the
    weight w·x/L, the two weight lists are commonly refined, and every part z
    becomes a cycle (z, L·n).
    """
    if V.classify().q_like is not Verdict.YES:
        raise NotQLike("amalgamation of cycle tuples needs a ℚ-like value set")
    if p0.target != p1.target or not (p0.verify() and p1.verify()):
        raise PreconditionFailed("two verified morphisms onto one tuple")
    A = p0.target
    raw = []
    for j, (_, n) in enumerate(A.entries):
        block0, block1 = p0.blocks[j], p1.blocks[j]
        wind0 = [p0.source.entries[i][1] // n for i in block0]
        wind1 = [p1.source.entries[i][1] // n for i in block1]
        L = math.lcm(*wind0, *wind1)
        left = [p0.source.entries[i][0] * Fraction(w, L) for i, w in zip(block0, wind0)]
        right = [p1.source.entries[i][0] * Fraction(w, L) for i, w in zip(block1, wind1)]
        cr = common_refinement(left, right, V)
        owner0 = {s: block0[a] for a, b in enumerate(cr.left_blocks) for s in b}
        owner1 = {s: block1[a] for a, b in enumerate(cr.right_blocks) for s in b}
        for s, z in enumerate(cr.parts):
            raw.append((z, L * n, j, owner0[s], owner1[s]))
    raw.sort(key=lambda e: (e[0], e[1], e[2]))
    C = CycleTuple([(z, length) for z, length, *_ in raw])
    q0 = TupleMorphism(
        tuple([s for s, e in enumerate(raw) if e[3] == i] for i in range(len(p0.source))), C, p0.source
    )
    q1 = TupleMorphism(
        tuple([s for s, e in enumerate(raw) if e[4] == i] for i in range(len(p1.source))), C, p1.source
    )
    if not (q0.verify() and q1.verify()):
        raise InvariantViolation("amalgam legs do not verify")
    if compose_tuple_morphisms(p0, q0).blocks != compose_tuple_morphisms(p1, q1).blocks:
        raise InvariantViolation("amalgam square does not commute")
    return C, q0, q1


# ---------------- Rokhlin decision ----------------

@dataclass(frozen=True)
class RokhlinVerdict:
    strong_rokhlin: Verdict
    rokhlin: Verdict
    certificate: dict = field(default_factory=dict)


def rokhlin_decide(V):
    if not V.infinite_flag:
        raise NotGroupLike("value set must be countably infinite and group-like")
    if V.is_rational:
        bad = V.rational.finite_primes()
        if not bad:
            return RokhlinVerdict(Verdict.YES, Verdict.YES, {"reason": "ring-like"})
        p, n = bad[0]
        return RokhlinVerdict(Verdict.NO, Verdict.NO, {"reason": "finite-exponent", "prime": p, "exponent": n})
    if V.classify().q_like is Verdict.YES:
        return RokhlinVerdict(Verdict.YES, Verdict.YES, {"reason": "q-like"})
    if V.rational.is_rationals:
        blocking = [s.name for s, g in V.irrationals if not g.is_rationals]
        return RokhlinVerdict(
            Verdict.NO, Verdict.NO, {"reason": "contains-rationals-not-q-like", "symbol": blocking[0]}
        )
    return RokhlinVerdict(Verdict.UNKNOWN, Verdict.UNKNOWN, {"reason": "open"})


@dataclass(frozen=True)
class ClosureViolation:
    kind: str
    left: ExactValue
    right: int


def reciprocal_semigroup(V, samples, limit=CLOSURE_SEARCH_LIMIT):
    """The first `samples` integers n >= 2 with 1/n in V."""
    found = []
    for n in range(2, limit + 1):
        if len(found) >= samples:
            break
        if V.member(Fraction(1, n)):
            found.append(n)
    return found


def closure_divisors(V, samples):
    """Sampled reciprocal semigroup plus every power of a prime with a bounded exponent."""
    powers = {p**k for p, e in V.rational.finite_primes() for k in range(1, e + 1)}
    return sorted(set(reciprocal_semigroup(V, samples)) | {n for n in powers if V.member(Fraction(1, n))})


def divisibility_closure_check(V, samples):
    """Sampled failures of n·m ∈ Q and v/n ∈ V for Q = {n : 1/n ∈ V}."""
    Q = closure_divisors(V, samples)
    values = list(islice(iter_values(V), samples))
    violations = []
    for a, n in enumerate(Q):
        for m in Q[a:]:
            if not V.member(Fraction(1, n * m)):
                violations.append(ClosureViolation("product", ExactValue(n), m))
    for v in values:
        for n in Q:
            if not V.member(v / n):
                violations.append(ClosureViolation("quotient", v, n))
    logger.debug("Closure check over {} divisors and {} values: {} violations", len(Q), len(values), len(violations))
    return violations


@dataclass(frozen=True)
class DichotomyVerdict:
    verdict: str
    a: ExactValue | None = None
    scaled: object = None
    violation: dict | None = None


def dichotomy_analyze(V, b, n, c):
    if V.classify().q_like is Verdict.YES:
        return DichotomyVerdict("strong-rokhlin-for-every-a")
    b, c = ExactValue.of(b), ExactValue.of(c)
    checks = [
        ("b in V", lambda: V.member(b)),
        ("b < 1", lambda: b < ONE),
        ("n > 1", lambda: n > 1),
        ("b/n not in V", lambda: not V.member(b / n)),
        ("c in V", lambda: V.member(c)),
        ("b/n <= c <= 1/n", lambda: b / n <= c <= ExactValue(Fraction(1, n))),
    ]
    for name, holds in checks:
        if not holds():
            raise PreconditionFailed(name)
    a = c * n
    scaled = scale_value_set(V, a) if V.is_rational else None
    value = b / a
    if scaled is not None and scaled.member(value / n):
        raise InvariantViolation("scaled value set is closed under the witnessing division")
    return DichotomyVerdict(
        "no-rokhlin", a, scaled, {"value": value, "divisor": n, "quotient": value / n}
    )
