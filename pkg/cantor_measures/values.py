"""Exact values, subgroups of the rationals and group-like value sets.

A value is a rational number plus rational multiples of declared irrational
symbols. The symbols together with 1 are trusted to be linearly independent
over the rationals, so equality is coefficientwise and the sign of a nonzero
value is found by refining interval enclosures until they exclude zero.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import count, product

import mpmath
from loguru import logger
from mpmath import libmp
from sympy import factorint, integer_nthroot, isprime, multiplicity

from cantor_measures.config import MAX_PRECISION_BITS, START_PRECISION_BITS
from cantor_measures.errors import (
    InvalidDescriptor,
    NonRationalScale,
    NotInV,
    PrecisionExhausted,
    PreconditionFailed,
)

INF = math.inf

CONSTANTS = {
    "pi": libmp.mpf_pi,
    "e": libmp.mpf_e,
    "ln2": libmp.mpf_ln2,
    "phi": libmp.mpf_phi,
    "euler": libmp.mpf_euler,
}


class Verdict(str, Enum):
    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"
    UNKNOWN = "unknown"


# ---------------- Irrational symbols ----------------

class IrrationalSymbol:
    """A named irrational number in (0, 1) known through dyadic enclosures.

    `enclosure(k)` returns ``[a/2^k, (a+1)/2^k] + shift`` where ``a`` is the
    exact floor of ``2^k`` times the unshifted value, so successive intervals
    are nested and their widths halve.
    """

    __slots__ = ("name", "spec", "shift", "_floors")

    def __init__(self, name, spec):
        if not name or not str(name).isidentifier():
            raise InvalidDescriptor(f"symbol name {name!r} is not an identifier")
        self.name = str(name)
        self.spec = dict(spec)
        self.shift = Fraction(self.spec.get("shift", 0))
        self._floors = {}
        kind = self.spec.get("kind")
        if kind == "sqrt":
            radicand = int(self.spec["radicand"])
            if radicand <= 0 or integer_nthroot(radicand, 2)[1]:
                raise InvalidDescriptor(f"{name}: radicand {radicand} has a rational square root")
        elif kind == "digits":
            base = int(self.spec["base"])
            if base < 2:
                raise InvalidDescriptor(f"{name}: base must be at least 2")
            try:
                [int(d, base) for d in self.spec["digits"]]
            except ValueError as e:
                raise InvalidDescriptor(f"{name}: bad digit string ({e})") from e
        elif kind == "constant":
            if self.spec.get("constant") not in CONSTANTS:
                raise InvalidDescriptor(f"{name}: unknown constant {self.spec.get('constant')!r}")
            if Fraction(self.spec.get("scale", 1)) == 0:
                raise InvalidDescriptor(f"{name}: scale must be nonzero")
        else:
            raise InvalidDescriptor(f"{name}: unknown enclosure kind {kind!r}")
        lo, hi = self._settle_inside_unit_interval()
        logger.debug("Declared symbol {} in [{}, {}]", self.name, lo, hi)

    def _settle_inside_unit_interval(self):
        for k in range(START_PRECISION_BITS, 4 * START_PRECISION_BITS + 1):
            lo, hi = self.enclosure(k)
            if lo > 0 and hi < 1:
                return lo, hi
            if hi <= 0 or lo >= 1:
                break
        raise InvalidDescriptor(f"{self.name}: value does not lie in (0, 1)")

    def __eq__(self, other):
        if not isinstance(other, IrrationalSymbol):
            return NotImplemented
        return self.name == other.name and self.spec == other.spec

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"IrrationalSymbol({self.name!r}, {self.spec!r})"

    def scaled_floor(self, k):
        if k not in self._floors:
            self._floors[k] = self._compute_floor(k)
        return self._floors[k]

    def _compute_floor(self, k):
        kind = self.spec["kind"]
        if kind == "sqrt":
            return integer_nthroot(int(self.spec["radicand"]) * 4**k, 2)[0]
        if kind == "digits":
            return self._digits_floor(k)
        return self._constant_floor(k)

    def _digits_floor(self, k):
        base = int(self.spec["base"])
        digits = self.spec["digits"]
        t = max(1, math.ceil(k / math.log2(base)))
        while t <= len(digits):
            lead = int(digits[:t], base)
            scale = base**t
            lo = (lead << k) // scale
            hi = -((-(lead + 1) << k) // scale) - 1
            if lo == hi:
                return lo
            t += 1
        raise PrecisionExhausted(f"{self.name}: {len(digits)} digits do not fix 2^-{k} precision")

    def _constant_floor(self, k):
        constant = CONSTANTS[self.spec["constant"]]
        scale = Fraction(self.spec.get("scale", 1))
        extra = 24
        while extra <= MAX_PRECISION_BITS:
            prec = k + extra
            lo = Fraction(*libmp.to_rational(constant(prec, libmp.round_floor))) * scale
            hi = Fraction(*libmp.to_rational(constant(prec, libmp.round_ceiling))) * scale
            lo, hi = min(lo, hi), max(lo, hi)
            a, b = math.floor(lo * 2**k), math.floor(hi * 2**k)
            if a == b:
                return a
            extra *= 2
        raise PrecisionExhausted(f"{self.name}: constant enclosure did not settle at 2^-{k}")

    def enclosure(self, k):
        a = self.scaled_floor(k)
        return Fraction(a, 2**k) + self.shift, Fraction(a + 1, 2**k) + self.shift


# ---------------- Exact values ----------------

def _coerce(x):
    if isinstance(x, ExactValue):
        return x
    if isinstance(x, (int, Fraction)):
        return ExactValue(x)
    return NotImplemented


class ExactValue:
    """rational + sum(coefficient * symbol); immutable, zero coefficients dropped."""

    __slots__ = ("rational", "_terms")

    def __init__(self, rational=0, terms=None):
        self.rational = Fraction(rational)
        merged = {}
        pairs = terms.items() if isinstance(terms, Mapping) else (terms or ())
        for symbol, coeff in pairs:
            merged[symbol] = merged.get(symbol, Fraction(0)) + Fraction(coeff)
        self._terms = tuple(
            sorted(((s, c) for s, c in merged.items() if c), key=lambda t: t[0].name)
        )

    @classmethod
    def of(cls, x):
        if isinstance(x, ExactValue):
            return x
        if isinstance(x, str):
            return cls(Fraction(x))
        value = _coerce(x)
        if value is NotImplemented:
            raise TypeError(f"cannot interpret {x!r} as an exact value")
        return value

    @property
    def terms(self):
        return self._terms

    @property
    def coefficients(self):
        return {s.name: c for s, c in self._terms}

    @property
    def symbols(self):
        return tuple(s for s, _ in self._terms)

    @property
    def is_rational(self):
        return not self._terms

    def as_fraction(self):
        if self._terms:
            raise TypeError(f"{self} is not rational")
        return self.rational

    def height(self):
        parts = [self.rational] + [c for _, c in self._terms]
        return max(max(abs(q.numerator), q.denominator) for q in parts)

    # arithmetic

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        merged = dict(self._terms)
        for s, c in other._terms:
            merged[s] = merged.get(s, Fraction(0)) + c
        return ExactValue(self.rational + other.rational, merged)

    __radd__ = __add__

    def __neg__(self):
        return ExactValue(-self.rational, {s: -c for s, c in self._terms})

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def _scale(self, q):
        return ExactValue(self.rational * q, {s: c * q for s, c in self._terms})

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if not other._terms:
            return self._scale(other.rational)
        if not self._terms:
            return other._scale(self.rational)
        raise TypeError("a product of two irrational values is not representable")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other._terms:
            raise TypeError("division by an irrational value is not representable")
        return self._scale(1 / other.rational)

    # comparison

    def _key(self):
        return self.rational, tuple((s.name, c) for s, c in self._terms)

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        if not self._terms:
            return hash(self.rational)
        return hash(self._key())

    def enclosure(self, k):
        lo = hi = self.rational
        for symbol, c in self._terms:
            s_lo, s_hi = symbol.enclosure(k)
            if c > 0:
                lo, hi = lo + c * s_lo, hi + c * s_hi
            else:
                lo, hi = lo + c * s_hi, hi + c * s_lo
        return lo, hi

    def sign(self):
        if not self._terms:
            return (self.rational > 0) - (self.rational < 0)
        k = START_PRECISION_BITS
        while k <= MAX_PRECISION_BITS:
            lo, hi = self.enclosure(k)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            if k == 64:
                logger.debug("Sign of {} still open at 2^-64", self)
            k += 1
        raise PrecisionExhausted(f"sign of {self} undecided at 2^-{MAX_PRECISION_BITS}")

    def floor(self):
        if not self._terms:
            return math.floor(self.rational)
        for k in range(START_PRECISION_BITS, MAX_PRECISION_BITS + 1):
            lo, hi = self.enclosure(k)
            if math.floor(lo) == math.floor(hi):
                return math.floor(lo)
        raise PrecisionExhausted(f"floor of {self} undecided at 2^-{MAX_PRECISION_BITS}")

    def _compare(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign()

    def __lt__(self, other):
        s = self._compare(other)
        return s if s is NotImplemented else s < 0

    def __le__(self, other):
        s = self._compare(other)
        return s if s is NotImplemented else s <= 0

    def __gt__(self, other):
        s = self._compare(other)
        return s if s is NotImplemented else s > 0

    def __ge__(self, other):
        s = self._compare(other)
        return s if s is NotImplemented else s >= 0

    def __bool__(self):
        return bool(self.rational) or bool(self._terms)

    # display

    def __str__(self):
        text = str(self.rational) if self.rational or not self._terms else ""
        for symbol, c in self._terms:
            magnitude = "" if abs(c) == 1 else f"{abs(c)}*"
            if text:
                text += f" {'-' if c < 0 else '+'} {magnitude}{symbol.name}"
            else:
                text = f"{'-' if c < 0 else ''}{magnitude}{symbol.name}"
        return text

    def __repr__(self):
        return f"ExactValue({self})"

    def approx(self, digits=15):
        lo, hi = self.enclosure(int(digits * 3.33) + 8)
        mid = (lo + hi) / 2
        with mpmath.workdps(digits + 5):
            return mpmath.nstr(mpmath.mpf(mid.numerator) / mid.denominator, digits)


ZERO = ExactValue(0)
ONE = ExactValue(1)


def total(values):
    return sum(values, ZERO)


# ---------------- Subgroups of the rationals ----------------

@lru_cache(maxsize=8192)
def _factor(n):
    return tuple(sorted(factorint(n).items()))


def valuation(n, p):
    return multiplicity(p, n) if n else INF


def _exponent(value):
    if value == INF or value == "inf":
        return INF
    e = int(value)
    if e < 0:
        raise InvalidDescriptor(f"prime exponents are nonnegative, got {e}")
    return e


@dataclass(frozen=True)
class RationalGroup:
    """The group of rationals a/b whose denominator has p-valuation at most n_p."""

    default: float = 0
    exceptions: tuple = ()

    def __post_init__(self):
        default = _exponent(self.default)
        if default not in (0, INF):
            raise InvalidDescriptor("the default exponent is 0 or inf")
        exc = dict(self.exceptions)
        normalized = []
        for p, e in sorted((int(p), _exponent(e)) for p, e in exc.items()):
            if not isprime(p):
                raise InvalidDescriptor(f"{p} is not a prime")
            if e != default:
                normalized.append((p, e))
        object.__setattr__(self, "default", default)
        object.__setattr__(self, "exceptions", tuple(normalized))

    @classmethod
    def integers(cls):
        return cls(0)

    @classmethod
    def rationals(cls):
        return cls(INF)

    @classmethod
    def p_adic(cls, *primes):
        return cls(0, tuple((p, INF) for p in primes))

    def exponent(self, p):
        return dict(self.exceptions).get(p, self.default)

    def contains(self, q):
        q = Fraction(q)
        return all(e <= self.exponent(p) for p, e in _factor(q.denominator))

    @property
    def is_integers(self):
        return self.default == 0 and not self.exceptions

    @property
    def is_rationals(self):
        return self.default == INF and not self.exceptions

    @property
    def is_ring_like(self):
        return all(e in (0, INF) for _, e in self.exceptions)

    def finite_primes(self):
        return [(p, e) for p, e in self.exceptions if 0 < e < INF]

    def largest_denominator(self):
        """Largest denominator in the group, or None when denominators are unbounded."""
        if self.default == INF or any(e == INF for _, e in self.exceptions):
            return None
        return math.prod(p**e for p, e in self.exceptions)

    def scaled(self, a):
        """Exponents of (1/a)·G for a positive rational a = r/s in G."""
        a = Fraction(a)
        r, s = a.numerator, a.denominator
        exc = dict(self.exceptions)
        for p, _ in _factor(r) + _factor(s):
            n = self.exponent(p)
            exc[p] = n if n == INF else n + valuation(r, p) - valuation(s, p)
        return RationalGroup(self.default, tuple(exc.items()))


@dataclass(frozen=True)
class Classification:
    group_like: Verdict
    q_like: Verdict
    ring_like: Verdict


@dataclass(frozen=True)
class GroupDescriptor:
    """V = G ∩ [0,1] for G = rational + Σ coefficient_group(s)·s."""

    rational: RationalGroup
    irrationals: tuple = ()
    declared_infinite: bool | None = None

    def __post_init__(self):
        pairs = tuple(sorted(self.irrationals, key=lambda t: t[0].name))
        names = [s.name for s, _ in pairs]
        if len(set(names)) != len(names):
            raise InvalidDescriptor(f"duplicate symbol names in {names}")
        object.__setattr__(self, "irrationals", pairs)

    @property
    def symbols(self):
        return {s.name: s for s, _ in self.irrationals}

    @property
    def is_rational(self):
        return not self.irrationals

    @property
    def is_infinite(self):
        return not self.rational.is_integers or bool(self.irrationals)

    @property
    def infinite_flag(self):
        return self.declared_infinite is not False and self.is_infinite

    def coefficient_group(self, name):
        for symbol, group in self.irrationals:
            if symbol.name == name:
                return group
        return None

    def member(self, v):
        v = ExactValue.of(v)
        if not self.rational.contains(v.rational):
            return False
        for name, c in v.coefficients.items():
            group = self.coefficient_group(name)
            if group is None or not group.contains(c):
                return False
        return v.sign() >= 0 and (v - 1).sign() <= 0

    def classify(self):
        group_like = Verdict.YES if self.infinite_flag else Verdict.NO
        every_group = [self.rational] + [g for _, g in self.irrationals]
        q_like = Verdict.YES if all(g.is_rationals for g in every_group) else Verdict.NO
        if self.irrationals:
            ring_like = Verdict.UNDECIDED
        else:
            ring_like = Verdict.YES if self.rational.is_ring_like else Verdict.NO
        return Classification(group_like, q_like, ring_like)


def member(v, V):
    return V.member(v)


def classify(V):
    return V.classify()


# ---------------- Enumeration ----------------

def _height(q):
    return max(abs(q.numerator), q.denominator)


def _fractions_up_to(h, group):
    out = []
    for den in range(1, h + 1):
        for num in range(-h, h + 1):
            if math.gcd(num, den) == 1 and group.contains(Fraction(num, den)):
                out.append(Fraction(num, den))
    return out


def _sort_key(v):
    return (
        v.rational.numerator,
        v.rational.denominator,
        tuple((s.name, c) for s, c in v.terms),
    )


@lru_cache(maxsize=256)
def _values_of_height(V, h):
    if V.is_rational:
        found = [
            ExactValue(Fraction(a, h))
            for a in range(1, h + 1)
            if math.gcd(a, h) == 1 and V.rational.contains(Fraction(a, h))
        ]
        return tuple(found)
    candidates = [_fractions_up_to(h, V.rational)]
    candidates += [_fractions_up_to(h, group) for _, group in V.irrationals]
    symbols = [s for s, _ in V.irrationals]
    found = []
    for combo in product(*candidates):
        if max(_height(q) for q in combo) != h:
            continue
        v = ExactValue(combo[0], zip(symbols, combo[1:]))
        if v.sign() > 0 and (v - 1).sign() <= 0:
            found.append(v)
    return tuple(sorted(found, key=_sort_key))


def iter_values(V):
    """Elements of V ∩ (0,1] ordered by height, then by _sort_key."""
    if not V.is_infinite:
        yield ONE
        return
    bound = V.rational.largest_denominator() if V.is_rational else None
    for h in count(1):
        if bound is not None and h > bound:
            return
        yield from _values_of_height(V, h)


def enumerate_values(V, budget):
    if budget < 1:
        raise PreconditionFailed("budget >= 1", f"got {budget}")
    out = []
    for h in range(1, budget + 1):
        out.extend(_values_of_height(V, h))
        if not V.is_infinite:
            break
    return out


def scale_value_set(V, a):
    a = ExactValue.of(a)
    if not a.is_rational or not V.is_rational:
        raise NonRationalScale("scaling is defined for rational a and purely rational V")
    if a.sign() <= 0 or not V.member(a):
        raise NotInV(f"scale {a} must be a positive element of V")
    return GroupDescriptor(V.rational.scaled(a.rational))
