"""Weighted disjoint sums of chains whose components are told apart by their coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from loguru import logger

from cantor_measures.chain import AutomorphismPrefix
from cantor_measures.errors import (
    ComponentMixing,
    InvalidInput,
    NonRationalScale,
    NotAValue,
    NotInV,
    PreconditionFailed,
    SumMismatch,
)
from cantor_measures.values import ONE, ZERO, ExactValue, total


@dataclass(frozen=True)
class CompositeMeasure:
    """components[i] = (chain, scale); component i carries scale times its chain's measure."""

    components: tuple

    @property
    def scales(self):
        return [s for _, s in self.components]

    @property
    def chains(self):
        return [c for c, _ in self.components]

    @property
    def rational_component(self):
        for i, (chain, _) in enumerate(self.components):
            if chain.V.is_rational:
                return i
        return None


def weighted_sum(parts):
    parts = [(chain, ExactValue.of(scale)) for chain, scale in parts]
    if not parts:
        raise InvalidInput("a composite needs at least one component")
    for _, scale in parts:
        if not scale.is_rational:
            raise NonRationalScale(f"component scale {scale} must be rational")
        if scale.sign() <= 0:
            raise NotInV(f"component scale {scale} must be positive")
    if total(s for _, s in parts) != ONE:
        raise SumMismatch(f"component scales sum to {total(s for _, s in parts)}")
    if len(parts) > 1:
        rational = [c for c, _ in parts if c.V.is_rational]
        if len(rational) > 1:
            raise InvalidInput("at most one purely rational component")
        seen = set()
        for chain, _ in parts:
            if chain.V.is_rational:
                continue
            if not chain.V.rational.is_integers:
                raise InvalidInput("irrational components need integer rational parts")
            names = set(chain.V.symbols)
            if names & seen:
                raise InvalidInput(f"components share symbols {sorted(names & seen)}")
            seen |= names
    logger.debug("Composite of {} components", len(parts))
    return CompositeMeasure(tuple(parts))


def decompose_value(m, v):
    """Every vector of per-component contributions (scaled masses) summing to v."""
    v = ExactValue.of(v)
    if len(m.components) == 1:
        chain, scale = m.components[0]
        return [(v,)] if chain.V.member(v / scale) else []
    owned = set()
    fixed, free = {}, []
    for i, (chain, scale) in enumerate(m.components):
        if chain.V.is_rational:
            continue
        names = set(chain.V.symbols)
        owned |= names
        terms = {s: c for s, c in v.terms if s.name in names}
        if not terms:
            free.append(i)
            continue
        slope = ExactValue(0, terms) / scale
        u = slope + (-slope.floor())
        if not chain.V.member(u):
            return []
        fixed[i] = u * scale
    if any(name not in owned for name in v.coefficients):
        return []
    r = m.rational_component
    out = []
    for picks in product((ZERO, ONE), repeat=len(free)):
        contrib = dict(fixed)
        for i, pick in zip(free, picks):
            contrib[i] = pick * m.components[i][1]
        rest = v - total(contrib.values())
        if r is None:
            if rest != ZERO:
                continue
        else:
            chain, scale = m.components[r]
            if not rest.is_rational or not chain.V.member(rest / scale):
                continue
            contrib[r] = rest
        out.append(tuple(contrib[i] for i in range(len(m.components))))
    return out


def member(m, v):
    v = ExactValue.of(v)
    return v.sign() >= 0 and v <= ONE and bool(decompose_value(m, v))


def measure(m, U):
    """U maps component index -> ClopenSet in that component's chain."""
    return total(m.components[i][1] * m.components[i][0].measure(W) for i, W in U.items())


@dataclass(frozen=True)
class MaximalityResult:
    feasible: bool
    partition: list | None = None
    certificate: dict = field(default_factory=dict)


def _reachable_sums(options):
    sums = {ZERO}
    for choices in options:
        sums = {s + x for s in sums for x in choices}
    return sums


def _infeasibility_certificate(m, targets, decompositions):
    failing = []
    for i, (chain, scale) in enumerate(m.components):
        options = [sorted({d[i] for d in ds}) for ds in decompositions]
        if scale not in _reachable_sums(options):
            failing.append(
                {"component": i, "symbols": list(chain.V.symbols), "scale": scale, "contributions": options}
            )
    if not failing:
        return {"reason": "components-coupled", "decompositions": decompositions}
    return {
        "reason": "component-total-unreachable",
        "failing": failing,
        "target_coefficients": [t.coefficients for t in targets],
    }


def maximality_refute(m, targets):
    """Realize the targets as a clopen partition of the composite or certify that none exists."""
    targets = [ExactValue.of(t) for t in targets]
    if not targets or any(t.sign() <= 0 for t in targets):
        raise PreconditionFailed("targets are positive")
    if total(targets) != ONE:
        raise SumMismatch(f"targets sum to {total(targets)}")
    decompositions = []
    for t in targets:
        ds = decompose_value(m, t)
        if not ds:
            raise NotAValue(f"{t} is not a clopen value of the composite")
        decompositions.append(ds)
    chosen = _choose(m.scales, decompositions)
    if chosen is None:
        certificate = _infeasibility_certificate(m, targets, decompositions)
        logger.info("Targets {} are not realizable: {}", [str(t) for t in targets], certificate["reason"])
        return MaximalityResult(False, None, certificate)
    pieces = [dict() for _ in targets]
    for i, (chain, scale) in enumerate(m.components):
        used = [(k, d[i] / scale) for k, d in enumerate(chosen) if d[i].sign() > 0]
        sets = chain.realize_partition([u for _, u in used])
        for (k, _), U in zip(used, sets):
            pieces[k][i] = U
    return MaximalityResult(True, pieces, {"contributions": chosen})


def _choose(scales, decompositions):
    remaining = list(scales)
    picked = []

    def search(k):
        if k == len(decompositions):
            return all(r.sign() == 0 for r in remaining)
        for d in decompositions[k]:
            if any(x > r for x, r in zip(d, remaining)):
                continue
            for i, x in enumerate(d):
                remaining[i] = remaining[i] - x
            picked.append(d)
            if search(k + 1):
                return True
            picked.pop()
            for i, x in enumerate(d):
                remaining[i] = remaining[i] + x
        return False

    return list(picked) if search(0) else None


def partial_isomorphism_extend_composite(m, f, levels=None):
    """Extend f: (component, cell) -> (component, cell) separately inside every component.

    `levels` gives the chain level of each component's cells (default: its top).
    """
    levels = dict(levels or {})
    per_component = {i: {} for i in range(len(m.components))}
    for (i, c), (j, d) in f.items():
        if i != j:
            raise ComponentMixing(f"cell {c!r} of component {i} is sent into component {j}")
        per_component[i][c] = d
    prefixes = []
    for i, (chain, _) in enumerate(m.components):
        level = levels.get(i, chain.depth)
        if per_component[i]:
            prefixes.append(chain.extend_partial_isomorphism(per_component[i], level))
        else:
            prefixes.append(AutomorphismPrefix.identity(chain, level))
    return prefixes

