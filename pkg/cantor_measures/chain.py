"""Finite prefixes of the Fraïssé chain whose limit is the good measure with values set V."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

from loguru import logger

from cantor_measures.config import AUTO_EXTEND_BUDGET
from cantor_measures.errors import (
    DepthTooShallow,
    InvalidChallenge,
    InvariantViolation,
    NotGroupLike,
    NotSmaller,
    PreconditionFailed,
    WeightMismatch,
)
from cantor_measures.matrices import cycle_decompose
from cantor_measures.partitions import (
    ROOT,
    PartitionMorphism,
    WeightedPartition,
    amalgamate,
    common_refinement,
    split_cell,
    split_cells,
)
from cantor_measures.values import ONE, ZERO, Verdict, enumerate_values, total

OBJECT = "object"
MORPHISM = "morphism"


@dataclass(frozen=True)
class ClopenSet:
    level: int
    cells: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset(self.cells))

    def __len__(self):
        return len(self.cells)


def challenge_key(kind, level, challenge):
    body = ",".join(
        f"{c}:{challenge.source.weight(c)}>{challenge.mapping[c]}" for c in challenge.source.cells
    )
    return f"{kind}@{level}|{body}"


@dataclass
class LedgerEntry:
    kind: str
    level: int
    challenge: PartitionMorphism
    stage: int
    lift: dict

    @property
    def key(self):
        return challenge_key(self.kind, self.level, self.challenge)


def object_challenges(pool, max_cells):
    """Multisets of pool values of size <= max_cells summing to 1, by size then pool order."""
    out = []
    for size in range(1, max_cells + 1):
        for combo in combinations_with_replacement(range(len(pool)), size):
            weights = [pool[i] for i in combo]
            if total(weights) == ONE:
                out.append(weights)
    return out


def _as_permutation(transport):
    perm, images = {}, set()
    for x, y in transport:
        if x in perm or y in images:
            return None
        perm[x] = y
        images.add(y)
    return perm


def _weight_order(P):
    return lambda c: (P.weight(c), c)


class GoodMeasureChain:
    """Levels P_0, P_1, ... with links P_{n+1} -> P_n and a ledger of absorbed challenges.

    Levels are only ever appended.
    """

    def __init__(self, V, levels=None, links=None, ledger=None):
        self.V = V
        self.levels = list(levels) if levels else [WeightedPartition.unit()]
        self.links = list(links or [])
        self.ledger = list(ledger or [])
        self._keys = {entry.key: entry for entry in self.ledger}
        self._projections = {}

    @property
    def depth(self):
        return len(self.levels) - 1

    @property
    def top(self):
        return self.levels[-1]

    def fork(self):
        """Independent chain sharing the existing levels; later growth stays separate."""
        out = GoodMeasureChain(self.V, self.levels, self.links, self.ledger)
        out._projections = dict(self._projections)
        return out

    def __repr__(self):
        return f"GoodMeasureChain(depth={self.depth}, cells={len(self.top)}, ledger={len(self.ledger)})"

    # ---------------- Levels and projections ----------------

    def level_of(self, partition):
        for i in range(self.depth, -1, -1):
            if self.levels[i] == partition:
                return i
        raise InvalidChallenge("partition is not a level of the chain")

    def projection(self, j, i):
        """Cell map π^j_i from level j down to level i."""
        if not 0 <= i <= j <= self.depth:
            raise DepthTooShallow(f"no projection from level {j} to level {i}")
        mapping = {c: c for c in self.levels[j].cells}
        for n in range(j - 1, i - 1, -1):
            cached = self._projections.get((j, n))
            if cached is not None:
                mapping = cached
                continue
            link = self.links[n].mapping
            mapping = {c: link[p] for c, p in mapping.items()}
            self._projections[(j, n)] = mapping
        return mapping

    def projection_morphism(self, j, i):
        return PartitionMorphism(self.levels[j], self.levels[i], self.projection(j, i))

    def fibers(self, j, i):
        """Level-i cell -> level-j cells above it, in level-j order."""
        proj = self.projection(j, i)
        out = {x: [] for x in self.levels[i].cells}
        for c in self.levels[j].cells:
            out[proj[c]].append(c)
        return out

    def _push(self, partition, link):
        if link.target != self.top or link.source != partition or not link.verify():
            raise InvariantViolation("new link is not a valid morphism onto the top")
        partition.check(self.V)
        self.levels.append(partition)
        self.links.append(link)
        logger.debug("Level {} added with {} cells", self.depth, len(partition))
        return self.depth

    def check(self):
        if self.levels[0] != WeightedPartition.unit():
            raise InvariantViolation("level 0 must be the one-cell partition")
        if len(self.links) != self.depth:
            raise InvariantViolation("one link per level above 0")
        for n, link in enumerate(self.links):
            if link.source != self.levels[n + 1] or link.target != self.levels[n]:
                raise InvariantViolation(f"link {n} does not join levels {n + 1} and {n}")
            if not link.verify():
                raise InvariantViolation(f"link {n} is not mass-preserving")
        for level in self.levels:
            level.check(self.V)
        for entry in self.ledger:
            self._check_triangle(entry)
        return True

    def _check_triangle(self, entry):
        proj = self.projection(entry.stage, entry.level)
        challenge = entry.challenge
        for c in self.levels[entry.stage].cells:
            if challenge.mapping[entry.lift[c]] != proj[c]:
                raise InvariantViolation(f"ledger triangle fails at cell {c!r}")

    # ---------------- Absorption ----------------

    def _absorb(self, kind, level, challenge):
        if not challenge.verify():
            raise InvalidChallenge("challenge is not a mass-preserving surjection")
        if challenge.target != self.levels[level]:
            raise InvalidChallenge(f"challenge does not end at level {level}")
        challenge.source.check(self.V)
        key = challenge_key(kind, level, challenge)
        known = self._keys.get(key)
        if known is not None:
            logger.debug("Challenge already absorbed at stage {}", known.stage)
            return known.stage
        down = self.projection_morphism(self.depth, level)
        G, to_challenge, to_top = amalgamate(challenge, down, self.V)
        if G.cells == self.top.cells:
            stage = self.depth
        else:
            stage = self._push(G, to_top)
        entry = LedgerEntry(kind, level, challenge, stage, dict(to_challenge.mapping))
        self._check_triangle(entry)
        self.ledger.append(entry)
        self._keys[key] = entry
        logger.debug("Absorbed {} challenge at level {} into stage {}", kind, level, stage)
        return stage

    def absorb_object(self, target):
        target.check(self.V)
        challenge = PartitionMorphism(target, self.levels[0], {c: ROOT for c in target.cells})
        return self._absorb(OBJECT, 0, challenge)

    def absorb_morphism(self, challenge):
        return self._absorb(MORPHISM, self.level_of(challenge.target), challenge)

    def lift_of(self, challenge, kind=MORPHISM):
        level = 0 if kind == OBJECT else self.level_of(challenge.target)
        entry = self._keys.get(challenge_key(kind, level, challenge))
        if entry is None:
            raise InvalidChallenge("challenge has not been absorbed")
        return entry

    def run_schedule(self, budget):
        if budget < 1:
            raise PreconditionFailed("budget >= 1", f"got {budget}")
        for h in range(1, budget + 1):
            pool = enumerate_values(self.V, h + 1)
            for weights in object_challenges(pool, h + 1):
                self.absorb_object(WeightedPartition.from_weights(weights))
            for level in range(h + 1):
                if level > self.depth:
                    break
                partition = self.levels[level]
                for cell in partition.cells:
                    w = partition.weight(cell)
                    for v in pool:
                        if v < w:
                            _, split = split_cell(partition, cell, [v, w - v], self.V)
                            self._absorb(MORPHISM, level, split)
            logger.debug("Schedule height {} done: depth {}, ledger {}", h, self.depth, len(self.ledger))
        return self

    def deepen(self, depth, max_budget=AUTO_EXTEND_BUDGET):
        """Run ever higher schedules until the chain reaches depth; returns the number of levels added."""
        start, budget = self.depth, 1
        while self.depth < depth:
            if budget > max_budget:
                raise DepthTooShallow(f"chain stops at depth {self.depth}, below {depth}")
            self.run_schedule(budget)
            budget += 1
        if self.depth > start:
            logger.info("Chain extended from depth {} to {}", start, self.depth)
        return self.depth - start

    # ---------------- Clopen sets ----------------

    def _check_set(self, U):
        if not 0 <= U.level <= self.depth:
            raise PreconditionFailed("clopen level exists", f"level {U.level}")
        if not U.cells <= set(self.levels[U.level].cells):
            raise PreconditionFailed("clopen cells belong to their level")

    def measure(self, U):
        self._check_set(U)
        P = self.levels[U.level]
        return total(P.weight(c) for c in P.cells if c in U.cells)

    def lift_set(self, U, level):
        self._check_set(U)
        if level < U.level:
            raise DepthTooShallow(f"cannot lift a level-{U.level} set to level {level}")
        proj = self.projection(level, U.level)
        return ClopenSet(level, {c for c in self.levels[level].cells if proj[c] in U.cells})

    def canonical(self, U):
        self._check_set(U)
        best = U
        for lvl in range(U.level - 1, -1, -1):
            proj = self.projection(U.level, lvl)
            images = {proj[c] for c in U.cells}
            if any(proj[c] in images and c not in U.cells for c in self.levels[U.level].cells):
                break
            best = ClopenSet(lvl, images)
        return best

    def subset_witness(self, U, W):
        mu_u, mu_w = self.measure(U), self.measure(W)
        if mu_u >= mu_w:
            raise NotSmaller(f"measure {mu_u} is not below {mu_w}")
        W = self.lift_set(W, self.depth)
        P = self.top
        order = sorted(W.cells, key=lambda c: (-P.weight(c), c))
        taken, acc, out = [], ZERO, None
        for c in order:
            rem = mu_u - acc
            if rem.sign() == 0:
                break
            w = P.weight(c)
            if w <= rem:
                taken.append(c)
                acc = acc + w
                continue
            R, down = split_cell(P, c, [rem, w - rem], self.V)
            stage = self._push(R, down)
            logger.debug("Split cell {} at {} for a subset witness", c, rem)
            out = ClopenSet(stage, set(taken) | {down.fiber(c)[0]})
            break
        if out is None:
            out = ClopenSet(self.depth, taken)
        if self.measure(out) != mu_u:
            raise InvariantViolation("subset witness has the wrong measure")
        return out

    def maximal_partition_witness(self, targets):
        target = WeightedPartition.from_weights(targets)
        target.check(self.V)
        return self.absorb_object(target)

    def realize_partition(self, targets):
        """One clopen set per target, at the top level, with exactly the target measures."""
        target = WeightedPartition.from_weights(targets)
        self.maximal_partition_witness(targets)
        challenge = PartitionMorphism(target, self.levels[0], {c: ROOT for c in target.cells})
        entry = self.lift_of(challenge, OBJECT)
        top = self.depth
        proj = self.projection(top, entry.stage)
        return [
            ClopenSet(top, {c for c in self.levels[top].cells if entry.lift[proj[c]] == t})
            for t in target.cells
        ]

    # ---------------- Automorphism prefixes ----------------

    def split_along_cycles(self, cycles):
        """Split each top cell into one child per cycle through it.

        Returns the stage and a map (cell, cycle index) -> child cell.
        """
        through = {c: [] for c in self.top.cells}
        for idx, cycle in enumerate(cycles):
            for v in cycle.vertices:
                through[v].append(idx)
        splits = {c: [cycles[i].weight for i in idxs] for c, idxs in through.items() if len(idxs) > 1}
        if splits:
            R, down = split_cells(self.top, splits, self.V)
            stage = self._push(R, down)
            kids = down.fibers()
        else:
            stage = self.depth
            kids = {c: [c] for c in self.top.cells}
        child = {}
        for c, idxs in through.items():
            for i, kid in zip(idxs, kids[c]):
                child[(c, i)] = kid
        return stage, child

    def _transport(self, blocks, level):
        P = self.levels[level]
        order = _weight_order(P)
        plan = {}
        for sources, targets in blocks:
            xs, ys = sorted(sources, key=order), sorted(targets, key=order)
            cr = common_refinement([P.weight(x) for x in xs], [P.weight(y) for y in ys], self.V)
            for (i, j), amount in cr.overlap().items():
                key = (xs[i], ys[j])
                plan[key] = plan.get(key, ZERO) + amount
        return plan

    def _realize_blocks(self, blocks, level):
        """A weight-preserving bijection sending each block's sources onto its targets."""
        perm = _as_permutation(self._transport(blocks, level))
        if perm is not None:
            return level, perm
        if level < self.depth:
            top = self.depth
            fib = self.fibers(top, level)
            blocks = [
                ([c for s in sources for c in fib[s]], [c for t in targets for c in fib[t]])
                for sources, targets in blocks
            ]
            level = top
            perm = _as_permutation(self._transport(blocks, level))
            if perm is not None:
                return level, perm
        cycles = cycle_decompose(self._transport(blocks, level))
        stage, child = self.split_along_cycles(cycles)
        perm = {}
        for i, cycle in enumerate(cycles):
            vs = cycle.vertices
            for k, v in enumerate(vs):
                perm[child[(v, i)]] = child[(vs[(k + 1) % len(vs)], i)]
        logger.debug("Back-and-forth refined level {} along {} cycles", level, len(cycles))
        return stage, perm

    def extend_partial_isomorphism(self, f, level):
        if not 0 <= level <= self.depth:
            raise PreconditionFailed("level exists", f"level {level}")
        P = self.levels[level]
        f = dict(f)
        for c, d in f.items():
            if c not in P or d not in P:
                raise PreconditionFailed("cells of the given level", f"{c!r} -> {d!r}")
        images = set(f.values())
        if len(images) != len(f):
            raise PreconditionFailed("injective map")
        for c, d in f.items():
            if P.weight(c) != P.weight(d):
                raise WeightMismatch(f"{c!r} has weight {P.weight(c)}, {d!r} has {P.weight(d)}")
        blocks = [([c], [d]) for c, d in f.items()]
        rest = [c for c in P.cells if c not in f]
        if rest:
            blocks.append((rest, [c for c in P.cells if c not in images]))
        stage, perm = self._realize_blocks(blocks, level)
        sigma = AutomorphismPrefix(self, (stage,), (perm,))
        if not sigma.verify():
            raise InvariantViolation("extended prefix is not a measure-preserving bijection")
        for c, d in f.items():
            if sigma.image(ClopenSet(level, {c})) != self.lift_set(ClopenSet(level, {d}), stage):
                raise InvariantViolation(f"extended prefix does not send {c!r} onto {d!r}")
        return sigma

    def extend_prefix(self, sigma, to_depth):
        if to_depth < sigma.depth:
            raise PreconditionFailed("to_depth >= depth", f"{to_depth} < {sigma.depth}")
        if to_depth > self.depth:
            self.deepen(to_depth)
        if to_depth == sigma.depth:
            return sigma
        k, m = sigma.depth, sigma.top_map
        fib = self.fibers(to_depth, k)
        blocks = [(fib[c], fib[m[c]]) for c in self.levels[k].cells]
        stage, perm = self._realize_blocks(blocks, to_depth)
        out = AutomorphismPrefix(self, sigma.levels + (stage,), sigma.maps + (perm,))
        if not out.verify():
            raise InvariantViolation("extended prefix breaks a compatibility square")
        return out


class AutomorphismPrefix:
    """Compatible weight-preserving cell bijections at increasing chain levels."""

    __slots__ = ("chain", "levels", "maps")

    def __init__(self, chain, levels, maps):
        self.chain = chain
        self.levels = tuple(levels)
        self.maps = tuple(dict(m) for m in maps)

    @classmethod
    def identity(cls, chain, level=None):
        level = chain.depth if level is None else level
        return cls(chain, (level,), ({c: c for c in chain.levels[level].cells},))

    @property
    def depth(self):
        return self.levels[-1]

    @property
    def base(self):
        return self.levels[0]

    @property
    def top_map(self):
        return self.maps[-1]

    def at(self, level):
        for lvl, m in zip(self.levels, self.maps):
            if lvl == level:
                return m
        raise DepthTooShallow(f"prefix stores no map at level {level}")

    def image(self, U):
        if U.level > self.depth:
            raise DepthTooShallow(f"set at level {U.level} is below prefix depth {self.depth}")
        proj = self.chain.projection(self.depth, U.level)
        m = self.top_map
        return ClopenSet(self.depth, {m[c] for c in self.chain.levels[self.depth].cells if proj[c] in U.cells})

    def inverse(self):
        return AutomorphismPrefix(self.chain, self.levels, tuple({v: k for k, v in m.items()} for m in self.maps))

    def verify(self):
        if list(self.levels) != sorted(set(self.levels)) or len(self.levels) != len(self.maps):
            return False
        for lvl, m in zip(self.levels, self.maps):
            P = self.chain.levels[lvl]
            if set(m) != set(P.cells) or set(m.values()) != set(P.cells):
                return False
            if any(P.weight(c) != P.weight(d) for c, d in m.items()):
                return False
        for (a, ma), (b, mb) in zip(zip(self.levels, self.maps), zip(self.levels[1:], self.maps[1:])):
            proj = self.chain.projection(b, a)
            if any(proj[mb[c]] != ma[proj[c]] for c in self.chain.levels[b].cells):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, AutomorphismPrefix):
            return NotImplemented
        return self.levels == other.levels and self.maps == other.maps

    def __repr__(self):
        return f"AutomorphismPrefix(levels={list(self.levels)})"


def new_chain(V):
    if V.classify().group_like is not Verdict.YES:
        raise NotGroupLike("value set must be countably infinite and group-like")
    logger.debug("New chain over {}", V)
    return GoodMeasureChain(V)
