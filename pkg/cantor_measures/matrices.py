"""Balanced matrices over chain levels, their cycle structure, lifts and compatible prefixes."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
from loguru import logger

from cantor_measures.errors import (
    DepthTooShallow,
    InvariantViolation,
    NotCycleObject,
    NotEquiSummed,
    PreconditionFailed,
)
from cantor_measures.partitions import PartitionMorphism, common_refinement
from cantor_measures.values import ONE, ZERO, ExactValue, total


def _normalize(entries):
    out = {}
    for (p, q), w in dict(entries).items():
        w = ExactValue.of(w)
        if w.sign() != 0:
            out[(str(p), str(q))] = w
    return out


def _sums(entries):
    rows, cols = {}, {}
    for (p, q), w in entries.items():
        rows[p] = rows.get(p, ZERO) + w
        cols[q] = cols.get(q, ZERO) + w
    return rows, cols


def is_equisummed(entries):
    rows, cols = _sums(entries)
    if any(w.sign() < 0 for w in entries.values()):
        return False
    return all(rows.get(p, ZERO) == cols.get(p, ZERO) for p in set(rows) | set(cols))


class BalancedMatrix:
    """Entries (cell, cell) -> mass over one chain level; zeros are not stored."""

    __slots__ = ("level", "entries")

    def __init__(self, level, entries):
        self.level = level
        self.entries = _normalize(entries)

    def row_sum(self, p):
        return total(w for (x, _), w in self.entries.items() if x == p)

    def col_sum(self, p):
        return total(w for (_, y), w in self.entries.items() if y == p)

    @property
    def nnz(self):
        return len(self.entries)

    def is_cycle_object(self):
        rows = [p for p, _ in self.entries]
        cols = [q for _, q in self.entries]
        return len(set(rows)) == len(rows) and len(set(cols)) == len(cols)

    def __eq__(self, other):
        if not isinstance(other, BalancedMatrix):
            return NotImplemented
        return self.level == other.level and self.entries == other.entries

    def __repr__(self):
        return f"BalancedMatrix(level={self.level}, nnz={self.nnz})"


@dataclass(frozen=True)
class CycleMatrix:
    vertices: tuple
    weight: ExactValue

    def entries(self):
        vs = self.vertices
        return {(v, vs[(k + 1) % len(vs)]): self.weight for k, v in enumerate(vs)}


class MatrixMorphism:
    __slots__ = ("underlying", "source", "target")

    def __init__(self, underlying, source, target):
        self.underlying = underlying
        self.source = source
        self.target = target

    def verify(self, chain):
        u = self.underlying
        if u.source != chain.levels[self.source.level] or u.target != chain.levels[self.target.level]:
            return False
        return u.verify() and pushforward(self.source, u) == self.target.entries


def pushforward(B, f):
    out = {}
    for (q, r), w in B.entries.items():
        key = (f.mapping[q], f.mapping[r])
        out[key] = out.get(key, ZERO) + w
    return out


def validate(A, chain):
    if not 0 <= A.level <= chain.depth:
        return False
    P = chain.levels[A.level]
    for (p, q), w in A.entries.items():
        if p not in P or q not in P:
            return False
        if w.sign() <= 0 or not chain.V.member(w):
            return False
    rows, cols = _sums(A.entries)
    for p in P.cells:
        row = rows.get(p, ZERO)
        if row.sign() <= 0 or row != cols.get(p, ZERO) or row != P.weight(p):
            return False
    return total(A.entries.values()) == ONE


def cycle_decompose(A):
    """Peel directed cycles off the support graph until nothing is left.

    The search starts at the smallest cell with an outgoing edge and tries
    successors in identifier order; each cycle is rotated to begin at its
    smallest cell.
    """
    remaining = _normalize(A.entries if isinstance(A, BalancedMatrix) else A)
    if not is_equisummed(remaining):
        raise NotEquiSummed("row and column sums differ")
    cycles = []
    while remaining:
        graph = nx.DiGraph()
        graph.add_edges_from(sorted(remaining))
        start = min(p for p, _ in remaining)
        edges = [(u, v) for u, v, *_ in nx.find_cycle(graph, source=start)]
        weight = min(remaining[e] for e in edges)
        for e in edges:
            left = remaining[e] - weight
            if left.sign() == 0:
                del remaining[e]
            else:
                remaining[e] = left
        vertices = [u for u, _ in edges]
        k = vertices.index(min(vertices))
        cycles.append(CycleMatrix(tuple(vertices[k:] + vertices[:k]), weight))
    logger.debug("Decomposed into {} cycles", len(cycles))
    return cycles


def _check_lift_base(chain, A, p):
    if not p.verify() or p.target != chain.levels[A.level]:
        raise PreconditionFailed("p is a valid morphism onto the matrix level")
    return chain.level_of(p.source)


def lift_cycle(chain, A, p):
    """Refine every cycle edge x -> y jointly against the fibers over x and y."""
    if not A.is_cycle_object():
        raise NotCycleObject("every row needs exactly one nonzero entry")
    level = _check_lift_base(chain, A, p)
    fibers, R = p.fibers(), p.source
    entries = {}
    for (x, y), _ in A.entries.items():
        senders, receivers = fibers[x], fibers[y]
        cr = common_refinement([R.weight(c) for c in senders], [R.weight(c) for c in receivers], chain.V)
        for (i, j), amount in cr.overlap().items():
            key = (senders[i], receivers[j])
            entries[key] = entries.get(key, ZERO) + amount
    B = BalancedMatrix(level, entries)
    if not MatrixMorphism(p, B, A).verify(chain):
        raise InvariantViolation("lifted cycle matrix does not project onto its base")
    return B


def lift_matrix(chain, A, p):
    """Lift an arbitrary balanced matrix along p.

    Each row is shared out among the fiber of its source, each column among
    the fiber of its target, and every entry joins its two shares.
    """
    level = _check_lift_base(chain, A, p)
    fibers, R, V = p.fibers(), p.source, chain.V
    rows, cols = {}, {}
    for (x, y) in sorted(A.entries):
        rows.setdefault(x, []).append(y)
        cols.setdefault(y, []).append(x)
    out_share, in_share = {}, {}
    for x, ys in rows.items():
        cr = common_refinement([R.weight(c) for c in fibers[x]], [A.entries[(x, y)] for y in ys], V)
        for (i, j), amount in cr.overlap().items():
            out_share[(fibers[x][i], ys[j])] = amount
    for y, xs in cols.items():
        cr = common_refinement([R.weight(c) for c in fibers[y]], [A.entries[(x, y)] for x in xs], V)
        for (i, j), amount in cr.overlap().items():
            in_share[(fibers[y][i], xs[j])] = amount
    entries = {}
    for (x, y) in sorted(A.entries):
        senders = [(c, out_share[(c, y)]) for c in fibers[x] if (c, y) in out_share]
        receivers = [(c, in_share[(c, x)]) for c in fibers[y] if (c, x) in in_share]
        cr = common_refinement([a for _, a in senders], [a for _, a in receivers], V)
        for (i, j), amount in cr.overlap().items():
            key = (senders[i][0], receivers[j][0])
            entries[key] = entries.get(key, ZERO) + amount
    B = BalancedMatrix(level, entries)
    if not MatrixMorphism(p, B, A).verify(chain):
        raise InvariantViolation("lifted matrix does not project onto its base")
    return B


def to_cycle_object(chain, A):
    """A cycle object over a new chain level together with its projection onto A."""
    if A.is_cycle_object():
        P = chain.levels[A.level]
        return A, MatrixMorphism(PartitionMorphism.identity(P), A, A)
    top = chain.depth
    B = A if A.level == top else lift_matrix(chain, A, chain.projection_morphism(top, A.level))
    cycles = cycle_decompose(B)
    stage, child = chain.split_along_cycles(cycles)
    entries = {}
    for i, cycle in enumerate(cycles):
        vs = cycle.vertices
        for k, v in enumerate(vs):
            entries[(child[(v, i)], child[(vs[(k + 1) % len(vs)], i)])] = cycle.weight
    C = BalancedMatrix(stage, entries)
    proj = MatrixMorphism(chain.projection_morphism(stage, A.level), C, A)
    if not validate(C, chain) or not proj.verify(chain):
        raise InvariantViolation("cycle object does not project onto the matrix")
    return C, proj


def reverse_projection(chain, p):
    """Close the triangle p ∘ r = projection from a chain level down to A's level."""
    if not (validate(p.source, chain) and validate(p.target, chain) and p.verify(chain)):
        raise PreconditionFailed("p is a verified balanced morphism")
    A = p.target
    C_B, q = to_cycle_object(chain, p.source)
    challenge = p.underlying.compose(q.underlying)
    chain.absorb_morphism(challenge)
    entry = chain.lift_of(challenge)
    r0 = PartitionMorphism(chain.levels[entry.stage], challenge.source, entry.lift)
    C = lift_cycle(chain, C_B, r0)
    r = MatrixMorphism(q.underlying.compose(r0), C, p.source)
    if not r.verify(chain):
        raise InvariantViolation("reverse projection is not a balanced morphism")
    if p.underlying.compose(r.underlying).mapping != chain.projection(entry.stage, A.level):
        raise InvariantViolation("reverse projection triangle does not commute")
    return C, r


def mass_entries(sigma, level):
    if level > sigma.depth:
        raise DepthTooShallow(f"prefix of depth {sigma.depth} cannot see level {level}")
    chain = sigma.chain
    P = chain.levels[sigma.depth]
    proj, m = chain.projection(sigma.depth, level), sigma.top_map
    out = {}
    for c in P.cells:
        key = (proj[c], proj[m[c]])
        out[key] = out.get(key, ZERO) + P.weight(c)
    return out


def mass_matrix(sigma, level):
    return BalancedMatrix(level, mass_entries(sigma, level))


def compatible(sigma, A):
    return mass_entries(sigma, A.level) == A.entries


def compatible_witness(chain, A):
    if not validate(A, chain):
        raise PreconditionFailed("A is a valid balanced matrix")
    C, _ = to_cycle_object(chain, A)
    perm = {p: q for p, q in C.entries}
    sigma = chain.extend_partial_isomorphism(perm, C.level)
    if not compatible(sigma, A):
        raise InvariantViolation("witness prefix is not compatible with the matrix")
    return sigma


def conjugate_transport_check(sigma_f, sigma_g, p):
    """Evaluate g f g^-1 against A via masses of f[g^-1 a] ∩ g^-1 a'."""
    chain = sigma_f.chain
    B, A = p.source, p.target
    if not compatible(sigma_f, B):
        raise PreconditionFailed("sigma_f is compatible with B")
    dg = sigma_g.depth
    if dg < B.level:
        raise DepthTooShallow(f"sigma_g of depth {dg} cannot see level {B.level}")
    g = sigma_g.top_map
    to_b, to_a = chain.projection(dg, B.level), chain.projection(dg, A.level)
    cells = chain.levels[dg].cells
    if any(to_a[g[c]] != p.underlying.mapping[to_b[c]] for c in cells):
        raise PreconditionFailed("sigma_g maps every cell into its p-image")
    pre_image = {c: to_a[g[c]] for c in cells}
    sf = sigma_f if sigma_f.depth >= dg else chain.extend_prefix(sigma_f, dg)
    down, f = chain.projection(sf.depth, dg), sf.top_map
    P = chain.levels[sf.depth]
    masses = {}
    for c in P.cells:
        key = (pre_image[down[c]], pre_image[down[f[c]]])
        masses[key] = masses.get(key, ZERO) + P.weight(c)
    return masses == A.entries


def is_pi_lift(B, A, chain):
    if B.level < A.level:
        return False
    return pushforward(B, chain.projection_morphism(B.level, A.level)) == A.entries
