"""Weighted clopen partitions, mass-preserving merges, common refinement and amalgamation."""

from __future__ import annotations

from dataclasses import dataclass

from cantor_measures.errors import (
    EmptyPartition,
    InvalidChallenge,
    InvalidInput,
    InvariantViolation,
    NotInV,
    SumMismatch,
)
from cantor_measures.values import ONE, ZERO, ExactValue, total

ROOT = "0"


class WeightedPartition:
    """Cells in a fixed order with positive exact weights."""

    __slots__ = ("cells", "_weights")

    def __init__(self, items):
        cells, weights = [], {}
        for cell, w in items:
            cell = str(cell)
            if cell in weights:
                raise InvalidInput(f"duplicate cell identifier {cell!r}")
            weights[cell] = ExactValue.of(w)
            cells.append(cell)
        if not cells:
            raise EmptyPartition("a partition needs at least one cell")
        self.cells = tuple(cells)
        self._weights = weights

    @classmethod
    def from_weights(cls, weights, prefix="t"):
        return cls((f"{prefix}{i}", w) for i, w in enumerate(weights))

    @classmethod
    def unit(cls, cell=ROOT):
        return cls([(cell, ONE)])

    def weight(self, cell):
        return self._weights[cell]

    @property
    def weights(self):
        return [self._weights[c] for c in self.cells]

    @property
    def total(self):
        return total(self.weights)

    def items(self):
        return [(c, self._weights[c]) for c in self.cells]

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __contains__(self, cell):
        return cell in self._weights

    def __eq__(self, other):
        if not isinstance(other, WeightedPartition):
            return NotImplemented
        return self.cells == other.cells and self._weights == other._weights

    def __hash__(self):
        return hash(self.cells)

    def __repr__(self):
        inner = ", ".join(f"{c}={w}" for c, w in self.items())
        return f"WeightedPartition({inner})"

    def check(self, V, total_mass=ONE):
        for cell, w in self.items():
            if w.sign() <= 0 or not V.member(w):
                raise NotInV(f"weight {w} of cell {cell!r} is not a positive element of V")
        if self.total != total_mass:
            raise SumMismatch(f"weights sum to {self.total}, expected {total_mass}")


class PartitionMorphism:
    """A surjection source cells -> target cells that should preserve mass."""

    __slots__ = ("source", "target", "mapping")

    def __init__(self, source, target, mapping):
        self.source = source
        self.target = target
        self.mapping = dict(mapping)

    @classmethod
    def identity(cls, P):
        return cls(P, P, {c: c for c in P.cells})

    def __call__(self, cell):
        return self.mapping[cell]

    def fibers(self):
        out = {x: [] for x in self.target.cells}
        for c in self.source.cells:
            out.setdefault(self.mapping.get(c), []).append(c)
        return out

    def fiber(self, x):
        return [c for c in self.source.cells if self.mapping.get(c) == x]

    def verify(self):
        if set(self.mapping) != set(self.source.cells):
            return False
        fibers = self.fibers()
        if set(fibers) != set(self.target.cells):
            return False
        for x, cells in fibers.items():
            if not cells:
                return False
            if total(self.source.weight(c) for c in cells) != self.target.weight(x):
                return False
        return True

    def compose(self, inner):
        """self ∘ inner."""
        if inner.target != self.source:
            raise InvalidChallenge("morphisms are not composable")
        return PartitionMorphism(
            inner.source,
            self.target,
            {c: self.mapping[inner.mapping[c]] for c in inner.source.cells},
        )

    def __eq__(self, other):
        if not isinstance(other, PartitionMorphism):
            return NotImplemented
        return (
            self.source == other.source
            and self.target == other.target
            and self.mapping == other.mapping
        )

    def __repr__(self):
        return f"PartitionMorphism({self.mapping})"


def verify_morphism(m):
    return m.verify()


@dataclass(frozen=True)
class CommonRefinement:
    parts: tuple
    left_blocks: tuple
    right_blocks: tuple

    def overlap(self):
        """(i, j) -> total of the parts shared by left entry i and right entry j."""
        owner = {}
        for i, block in enumerate(self.left_blocks):
            for s in block:
                owner[s] = i
        out = {}
        for j, block in enumerate(self.right_blocks):
            for s in block:
                key = (owner[s], j)
                out[key] = out.get(key, ZERO) + self.parts[s]
        return out


def _check_entries(values, V):
    values = [ExactValue.of(x) for x in values]
    if not values:
        raise EmptyPartition("empty weight list")
    for x in values:
        if x.sign() <= 0 or not V.member(x):
            raise NotInV(f"{x} is not a positive element of V")
    return values


def common_refinement(left, right, V):
    """Refine two weight lists with equal sums into shared parts.

    Repeatedly compares the last entries: equal entries are peeled together,
    otherwise the smaller one is peeled off and subtracted from the larger.
    Peeled parts are appended after the parts of the one-entry base case.
    """
    left, right = _check_entries(left, V), _check_entries(right, V)
    if total(left) != total(right):
        raise SumMismatch(f"{total(left)} != {total(right)}")
    xs, ys = list(left), list(right)
    peeled = []
    while len(xs) > 1 and len(ys) > 1:
        i, j = len(xs) - 1, len(ys) - 1
        a, b = xs[-1], ys[-1]
        s = (a - b).sign()
        if s == 0:
            peeled.append((a, i, j))
            xs.pop()
            ys.pop()
        elif s > 0:
            peeled.append((b, i, j))
            xs[-1] = a - b
            ys.pop()
        else:
            peeled.append((a, i, j))
            ys[-1] = b - a
            xs.pop()
    left_blocks = [[] for _ in left]
    right_blocks = [[] for _ in right]
    if len(xs) == 1:
        parts = list(ys)
        left_blocks[0] = list(range(len(ys)))
        for j in range(len(ys)):
            right_blocks[j] = [j]
    else:
        parts = list(xs)
        right_blocks[0] = list(range(len(xs)))
        for i in range(len(xs)):
            left_blocks[i] = [i]
    for value, i, j in reversed(peeled):
        left_blocks[i].append(len(parts))
        right_blocks[j].append(len(parts))
        parts.append(value)
    for z in parts:
        if not V.member(z):
            raise InvariantViolation(f"refinement part {z} left V")
    return CommonRefinement(
        tuple(parts),
        tuple(tuple(b) for b in left_blocks),
        tuple(tuple(b) for b in right_blocks),
    )


def child_ids(parent, n, taken):
    """Identifiers for n children of parent; a single child keeps the parent's id."""
    if n == 1:
        return [parent]
    ids, index = [], 0
    while len(ids) < n:
        cid = f"{parent}/{index}"
        index += 1
        if cid in taken:
            continue
        taken.add(cid)
        ids.append(cid)
    return ids


def amalgamate(f1, f2, V):
    """Complete the cospan f1, f2 over F to a commuting square.

    G's cells are named after their image under the second leg.
    """
    if f1.target != f2.target:
        raise InvalidChallenge("cospan legs must share their target")
    if not f1.verify() or not f2.verify():
        raise InvalidChallenge("cospan legs must be valid morphisms")
    fib1, fib2 = f1.fibers(), f2.fibers()
    taken = set(f2.source.cells)
    children = {}
    for x in f1.target.cells:
        xs, ys = fib1[x], fib2[x]
        cr = common_refinement(
            [f1.source.weight(c) for c in xs], [f2.source.weight(c) for c in ys], V
        )
        owner = {s: xs[i] for i, block in enumerate(cr.left_blocks) for s in block}
        for j, y in enumerate(ys):
            block = cr.right_blocks[j]
            ids = child_ids(y, len(block), taken)
            children[y] = [(cid, cr.parts[s], owner[s]) for cid, s in zip(ids, block)]
    cells, p1, p2 = [], {}, {}
    for y in f2.source.cells:
        for cid, w, left in children[y]:
            cells.append((cid, w))
            p1[cid] = left
            p2[cid] = y
    G = WeightedPartition(cells)
    leg1 = PartitionMorphism(G, f1.source, p1)
    leg2 = PartitionMorphism(G, f2.source, p2)
    if not leg1.verify() or not leg2.verify():
        raise InvariantViolation("amalgam legs do not preserve mass")
    return G, leg1, leg2


def split_cells(P, splits, V):
    """Replace each listed cell by children with the given weights."""
    for cell in splits:
        if cell not in P:
            raise InvalidChallenge(f"{cell!r} is not a cell of the partition")
    taken = set(P.cells)
    cells, mapping = [], {}
    for c in P.cells:
        if c not in splits:
            cells.append((c, P.weight(c)))
            mapping[c] = c
            continue
        parts = _check_entries(splits[c], V)
        if total(parts) != P.weight(c):
            raise SumMismatch(f"parts of {c!r} sum to {total(parts)}, not {P.weight(c)}")
        for cid, w in zip(child_ids(c, len(parts), taken), parts):
            cells.append((cid, w))
            mapping[cid] = c
    R = WeightedPartition(cells)
    return R, PartitionMorphism(R, P, mapping)


def split_cell(P, cell, parts, V):
    return split_cells(P, {cell: parts}, V)
