"""Canonical JSON for every artifact: orjson bytes, jsonschema validation, exact decoding."""

from __future__ import annotations

import hashlib
from dataclasses import fields, is_dataclass
from enum import Enum
from fractions import Fraction

import orjson
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from cantor_measures.chain import AutomorphismPrefix, ClopenSet, GoodMeasureChain, LedgerEntry
from cantor_measures.composite import weighted_sum
from cantor_measures.config import SNAPSHOT_FORMAT
from cantor_measures.cycles import CycleTuple, TupleMorphism
from cantor_measures.errors import CantorError, InvalidInput
from cantor_measures.matrices import BalancedMatrix, CycleMatrix
from cantor_measures.partitions import PartitionMorphism, WeightedPartition
from cantor_measures.values import INF, ExactValue, GroupDescriptor, IrrationalSymbol, RationalGroup

DUMP_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2

# ---------------- Schemas ----------------
RATIONAL = {"type": ["string", "integer"], "pattern": r"^-?[0-9]+(/[1-9][0-9]*)?$"}
VALUE = {
    "oneOf": [
        RATIONAL,
        {
            "type": "object",
            "properties": {"q": RATIONAL, "irr": {"type": "object", "additionalProperties": RATIONAL}},
            "required": ["q"],
            "additionalProperties": False,
        },
    ]
}
EXPONENT = {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "inf"}]}
GROUP = {
    "type": "object",
    "properties": {
        "default": {"enum": ["0", "inf", 0]},
        "exceptions": {
            "type": "object",
            "propertyNames": {"pattern": "^[0-9]+$"},
            "additionalProperties": EXPONENT,
        },
    },
    "required": ["default"],
    "additionalProperties": False,
}
ENCLOSURE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["sqrt", "digits", "constant"]},
        "radicand": {"type": "integer", "minimum": 1},
        "base": {"type": "integer", "minimum": 2, "maximum": 36},
        "digits": {"type": "string", "minLength": 1},
        "constant": {"enum": ["pi", "e", "ln2", "phi", "euler"]},
        "scale": RATIONAL,
        "shift": RATIONAL,
    },
    "required": ["kind"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "sqrt"}}}, "then": {"required": ["radicand"]}},
        {"if": {"properties": {"kind": {"const": "digits"}}}, "then": {"required": ["base", "digits"]}},
        {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["constant"]}},
    ],
}
DESCRIPTOR = {
    "type": "object",
    "properties": {
        "rational": GROUP,
        "irrationals": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                    "enclosure": ENCLOSURE,
                    "group": GROUP,
                },
                "required": ["name", "enclosure"],
                "additionalProperties": False,
            },
        },
        "infinite": {"type": "boolean"},
    },
    "required": ["rational"],
    "additionalProperties": False,
}
CELL_MAP = {"type": "object", "additionalProperties": {"type": "string"}}
PARTITION = {
    "type": "object",
    "properties": {
        "cells": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"id": {"type": "string", "minLength": 1}, "w": VALUE},
                "required": ["id", "w"],
                "additionalProperties": False,
            },
        },
        "total": VALUE,
    },
    "required": ["cells"],
    "additionalProperties": False,
}
MORPHISM = {
    "type": "object",
    "properties": {"map": CELL_MAP},
    "required": ["map"],
    "additionalProperties": False,
}
MATRIX = {
    "type": "object",
    "properties": {
        "level": {"type": "integer", "minimum": 0},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"from": {"type": "string"}, "to": {"type": "string"}, "w": VALUE},
                "required": ["from", "to", "w"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["level", "entries"],
    "additionalProperties": False,
}
TUPLE = {
    "type": "object",
    "properties": {
        "entries": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"w": VALUE, "n": {"type": "integer", "minimum": 1}},
                "required": ["w", "n"],
                "additionalProperties": False,
            },
        },
        "mass": VALUE,
    },
    "required": ["entries"],
    "additionalProperties": False,
}
TUPLE_MORPHISM = {
    "type": "object",
    "properties": {
        "blocks": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}
    },
    "required": ["blocks"],
    "additionalProperties": False,
}
PREFIX = {
    "type": "object",
    "properties": {
        "levels": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
        "maps": {"type": "array", "minItems": 1, "items": CELL_MAP},
    },
    "required": ["levels", "maps"],
    "additionalProperties": False,
}
LEDGER_ENTRY = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["object", "morphism"]},
        "level": {"type": "integer", "minimum": 0},
        "challenge": {
            "type": "object",
            "properties": {"source": PARTITION, "map": CELL_MAP},
            "required": ["source", "map"],
            "additionalProperties": False,
        },
        "stage": {"type": "integer", "minimum": 0},
        "lift": CELL_MAP,
    },
    "required": ["kind", "level", "challenge", "stage", "lift"],
    "additionalProperties": False,
}
SNAPSHOT = {
    "type": "object",
    "properties": {
        "format": {"const": SNAPSHOT_FORMAT},
        "descriptor": DESCRIPTOR,
        "levels": {"type": "array", "minItems": 1, "items": PARTITION},
        "links": {"type": "array", "items": MORPHISM},
        "ledger": {"type": "array", "items": LEDGER_ENTRY},
    },
    "required": ["format", "descriptor", "levels", "links", "ledger"],
    "additionalProperties": False,
}
COMPATIBILITY = {
    "type": "object",
    "properties": {"matrix": MATRIX, "prefix": PREFIX},
    "required": ["matrix", "prefix"],
    "additionalProperties": False,
}
AMALGAMATION = {
    "type": "object",
    "properties": {
        "target": TUPLE,
        "sources": {"type": "array", "minItems": 2, "maxItems": 2, "items": TUPLE},
        "morphisms": {"type": "array", "minItems": 2, "maxItems": 2, "items": TUPLE_MORPHISM},
    },
    "required": ["target", "sources", "morphisms"],
    "additionalProperties": False,
}
TUPLE_PAIR = {
    "type": "object",
    "properties": {"left": TUPLE, "right": TUPLE},
    "required": ["left", "right"],
    "additionalProperties": False,
}
MORPHISM_QUERY = {
    "type": "object",
    "properties": {"source": TUPLE, "target": TUPLE},
    "required": ["source", "target"],
    "additionalProperties": False,
}
COMPOSITE_SPEC = {
    "type": "object",
    "properties": {
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "descriptor": DESCRIPTOR,
                    "scale": RATIONAL,
                    "budget": {"type": "integer", "minimum": 1},
                },
                "required": ["descriptor", "scale"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["components"],
    "additionalProperties": False,
}
COMPOSITE = {
    "type": "object",
    "properties": {
        "format": {"const": SNAPSHOT_FORMAT},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"scale": RATIONAL, "chain": SNAPSHOT},
                "required": ["scale", "chain"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["format", "components"],
    "additionalProperties": False,
}


# ---------------- Bytes ----------------

def _reject_floats(obj):
    if isinstance(obj, float):
        raise InvalidInput(f"floating point value {obj!r} in an exact document")
    if isinstance(obj, dict):
        for v in obj.values():
            _reject_floats(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _reject_floats(v)


def dumps(obj):
    _reject_floats(obj)
    return orjson.dumps(obj, option=DUMP_OPTIONS) + b"\n"


def loads(data):
    try:
        obj = orjson.loads(data)
    except orjson.JSONDecodeError as e:
        raise InvalidInput(f"not valid JSON: {e}") from e
    _reject_floats(obj)
    return obj


def input_hash(obj):
    return hashlib.sha256(dumps(obj)).hexdigest()


def validate(doc, schema, what="document"):
    error = best_match(Draft202012Validator(schema).iter_errors(doc))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise InvalidInput(f"{what} invalid at {where}: {error.message}")
    return doc


# ---------------- Values ----------------

def rational_to_json(q):
    return str(Fraction(q))


def rational_from_json(obj):
    try:
        return Fraction(obj)
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidInput(f"bad rational {obj!r}") from e


def value_to_json(v):
    v = ExactValue.of(v)
    if v.is_rational:
        return rational_to_json(v.rational)
    return {"q": rational_to_json(v.rational), "irr": {s.name: rational_to_json(c) for s, c in v.terms}}


def value_from_json(obj, symbols=None):
    symbols = symbols or {}
    if not isinstance(obj, dict):
        return ExactValue(rational_from_json(obj))
    terms = {}
    for name, c in obj.get("irr", {}).items():
        if name not in symbols:
            raise InvalidInput(f"unknown symbol {name!r}")
        terms[symbols[name]] = rational_from_json(c)
    return ExactValue(rational_from_json(obj["q"]), terms)


def parse_value(text, symbols=None):
    """Command-line values: "a/b" or "q+c*name+..." with rational c."""
    text = str(text).replace(" ", "")
    if not text:
        raise InvalidInput("empty value")
    out = ExactValue(0)
    for token in text.replace("-", "+-").split("+"):
        if not token:
            continue
        coeff, _, name = token.partition("*")
        if not name and not coeff.lstrip("-").replace("/", "").isdigit():
            coeff, name = ("-1" if coeff.startswith("-") else "1"), coeff.lstrip("-")
        if name:
            if name not in (symbols or {}):
                raise InvalidInput(f"unknown symbol {name!r}")
            out = out + ExactValue(0, {symbols[name]: rational_from_json(coeff)})
        else:
            out = out + ExactValue(rational_from_json(coeff))
    return out


def parse_values(text, symbols=None):
    return [parse_value(part, symbols) for part in str(text).split(",") if part.strip()]


# ---------------- Value sets ----------------

def _exponent_to_json(e):
    return "inf" if e == INF else int(e)


def group_to_json(G):
    return {
        "default": "inf" if G.default == INF else "0",
        "exceptions": {str(p): _exponent_to_json(e) for p, e in G.exceptions},
    }


def group_from_json(obj):
    exceptions = {int(p): ("inf" if e == "inf" else e) for p, e in obj.get("exceptions", {}).items()}
    return RationalGroup(str(obj["default"]), tuple(exceptions.items()))


def _enclosure_to_json(spec):
    out = {}
    for key, val in spec.items():
        out[key] = rational_to_json(val) if key in ("scale", "shift") else val
    return out


def descriptor_to_json(V):
    out = {"rational": group_to_json(V.rational)}
    if V.irrationals:
        out["irrationals"] = [
            {"name": s.name, "enclosure": _enclosure_to_json(s.spec), "group": group_to_json(g)}
            for s, g in V.irrationals
        ]
    if V.declared_infinite is not None:
        out["infinite"] = V.declared_infinite
    return out


def descriptor_from_json(obj):
    validate(obj, DESCRIPTOR, "descriptor")
    irrationals = []
    for item in obj.get("irrationals", []):
        spec = _enclosure_to_json(
            {k: rational_from_json(v) if k in ("scale", "shift") else v for k, v in item["enclosure"].items()}
        )
        group = group_from_json(item.get("group", {"default": "0"}))
        irrationals.append((IrrationalSymbol(item["name"], spec), group))
    return GroupDescriptor(group_from_json(obj["rational"]), tuple(irrationals), obj.get("infinite"))


# ---------------- Partitions and chains ----------------

def partition_to_json(P):
    return {
        "cells": [{"id": c, "w": value_to_json(w)} for c, w in P.items()],
        "total": value_to_json(P.total),
    }


def partition_from_json(obj, symbols=None):
    validate(obj, PARTITION, "partition")
    P = WeightedPartition((cell["id"], value_from_json(cell["w"], symbols)) for cell in obj["cells"])
    if "total" in obj and value_from_json(obj["total"], symbols) != P.total:
        raise InvalidInput("declared total differs from the sum of the cell weights")
    return P


def morphism_to_json(m):
    return {"map": {c: m.mapping[c] for c in m.source.cells}}


def morphism_from_json(obj, source, target):
    validate(obj, MORPHISM, "morphism")
    return PartitionMorphism(source, target, obj["map"])


def clopen_to_json(U):
    return {"level": U.level, "cells": sorted(U.cells)}


def snapshot_to_json(chain):
    return {
        "format": SNAPSHOT_FORMAT,
        "descriptor": descriptor_to_json(chain.V),
        "levels": [partition_to_json(P) for P in chain.levels],
        "links": [morphism_to_json(link) for link in chain.links],
        "ledger": [
            {
                "kind": e.kind,
                "level": e.level,
                "challenge": {
                    "source": partition_to_json(e.challenge.source),
                    "map": morphism_to_json(e.challenge)["map"],
                },
                "stage": e.stage,
                "lift": {c: e.lift[c] for c in chain.levels[e.stage].cells},
            }
            for e in chain.ledger
        ],
    }


def snapshot_from_json(obj):
    validate(obj, SNAPSHOT, "snapshot")
    V = descriptor_from_json(obj["descriptor"])
    symbols = V.symbols
    levels = [partition_from_json(p, symbols) for p in obj["levels"]]
    if len(obj["links"]) != len(levels) - 1:
        raise InvalidInput("snapshot needs one link per level above 0")
    links = [morphism_from_json(m, levels[n + 1], levels[n]) for n, m in enumerate(obj["links"])]
    ledger = []
    for item in obj["ledger"]:
        if not 0 <= item["level"] <= item["stage"] < len(levels):
            raise InvalidInput("ledger entry refers to a missing level")
        source = partition_from_json(item["challenge"]["source"], symbols)
        challenge = PartitionMorphism(source, levels[item["level"]], item["challenge"]["map"])
        ledger.append(LedgerEntry(item["kind"], item["level"], challenge, item["stage"], item["lift"]))
    chain = GoodMeasureChain(V, levels, links, ledger)
    try:
        chain.check()
    except (CantorError, KeyError) as e:
        raise InvalidInput(f"snapshot is not a consistent chain: {e}") from e
    return chain


# ---------------- Matrices, tuples, prefixes ----------------

def matrix_to_json(A):
    return {
        "level": A.level,
        "entries": [{"from": p, "to": q, "w": value_to_json(w)} for (p, q), w in sorted(A.entries.items())],
    }


def matrix_from_json(obj, symbols=None):
    validate(obj, MATRIX, "matrix")
    entries = {}
    for e in obj["entries"]:
        key = (e["from"], e["to"])
        if key in entries:
            raise InvalidInput(f"duplicate matrix entry {key}")
        entries[key] = value_from_json(e["w"], symbols)
    return BalancedMatrix(obj["level"], entries)


def cycle_to_json(C):
    return {"vertices": list(C.vertices), "weight": value_to_json(C.weight)}


def tuple_to_json(c):
    return {"entries": [{"w": value_to_json(w), "n": n} for w, n in c.entries], "mass": value_to_json(c.mass)}


def tuple_from_json(obj, symbols=None):
    validate(obj, TUPLE, "cycle tuple")
    mass = value_from_json(obj["mass"], symbols) if "mass" in obj else None
    return CycleTuple([(value_from_json(e["w"], symbols), e["n"]) for e in obj["entries"]], mass)


def tuple_morphism_to_json(m):
    return {"blocks": [list(b) for b in m.blocks]}


def tuple_morphism_from_json(obj, source, target):
    validate(obj, TUPLE_MORPHISM, "tuple morphism")
    return TupleMorphism(tuple(obj["blocks"]), source, target)


def prefix_to_json(sigma):
    return {
        "levels": list(sigma.levels),
        "maps": [{c: m[c] for c in sigma.chain.levels[lvl].cells} for lvl, m in zip(sigma.levels, sigma.maps)],
    }


def prefix_from_json(obj, chain):
    validate(obj, PREFIX, "prefix")
    if len(obj["levels"]) != len(obj["maps"]) or max(obj["levels"]) > chain.depth:
        raise InvalidInput("prefix levels do not match the chain")
    sigma = AutomorphismPrefix(chain, obj["levels"], obj["maps"])
    if not sigma.verify():
        raise InvalidInput("prefix is not a compatible family of measure-preserving bijections")
    return sigma


# ---------------- Composites ----------------

def composite_to_json(m):
    return {
        "format": SNAPSHOT_FORMAT,
        "components": [
            {"scale": rational_to_json(scale.rational), "chain": snapshot_to_json(chain)}
            for chain, scale in m.components
        ],
    }


def composite_from_json(obj):
    validate(obj, COMPOSITE, "composite")
    return weighted_sum(
        (snapshot_from_json(item["chain"]), rational_from_json(item["scale"])) for item in obj["components"]
    )


# ---------------- Results ----------------

def plain(obj):
    """JSON-ready form of a result object."""
    if isinstance(obj, ExactValue):
        return value_to_json(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Fraction):
        return rational_to_json(obj)
    if isinstance(obj, float):
        if obj == INF:
            return "inf"
        raise InvalidInput(f"floating point value {obj!r} in a result")
    if isinstance(obj, ClopenSet):
        return clopen_to_json(obj)
    if isinstance(obj, GroupDescriptor):
        return descriptor_to_json(obj)
    if isinstance(obj, CycleTuple):
        return tuple_to_json(obj)
    if isinstance(obj, TupleMorphism):
        return tuple_morphism_to_json(obj)
    if isinstance(obj, BalancedMatrix):
        return matrix_to_json(obj)
    if isinstance(obj, CycleMatrix):
        return cycle_to_json(obj)
    if isinstance(obj, AutomorphismPrefix):
        return prefix_to_json(obj)
    if isinstance(obj, WeightedPartition):
        return partition_to_json(obj)
    if is_dataclass(obj):
        return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(plain(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    raise TypeError(f"no JSON form for {type(obj).__name__}")
