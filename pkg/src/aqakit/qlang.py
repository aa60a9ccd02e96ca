"""Typed question semantics trees and the fixed answer vocabulary.

Selectors pick a single event occurrence, set selectors pick a group,
and root nodes turn selections into answers.  Trees serialize to plain
JSON dicts so questions can travel with their semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

DURATION = "duration"
LOUDNESS = "loudness"
BEFORE = "before"
AFTER = "after"

SKILLS = ("exist", "query", "count", "compare", "compare_integer")

#: Relative tolerance under which two attribute values count as tied.
TIE_RTOL = 1e-9

INTEGER_WORDS = ("zero", "one", "two", "three", "four", "five", "six",
                 "seven", "eight", "nine", "ten", "eleven", "twelve")

ORDINAL_WORDS = ("first", "second", "third", "fourth", "fifth", "sixth",
                 "seventh", "eighth", "ninth", "tenth", "eleventh", "twelfth")


class Invalid:
    """Marker for ill-posed references (distinct from the answer 'nothing')."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Invalid"


INVALID = Invalid()


def answer_vocab(types) -> list[str]:
    """The 36-answer vocabulary, in fixed documented order:
    yes, no, the 20 event type phrases in taxonomy order, nothing, zero..twelve.
    """
    vocab = ["yes", "no"]
    vocab += [t.phrase for t in types]
    vocab.append("nothing")
    vocab += list(INTEGER_WORDS)
    return vocab


# --------------------------- selector nodes -------------------------------

@dataclass(frozen=True)
class ByType:
    type_id: str


@dataclass(frozen=True)
class ByOrdinal:
    pos: int | str  # 1-based, or "last"


@dataclass(frozen=True)
class RelativeSel:
    base: object
    side: str  # before | after
    immediate: bool


@dataclass(frozen=True)
class SuperlativeSel:
    attr: str       # duration | loudness
    extremum: str   # max | min


# --------------------------- set selector nodes ---------------------------

@dataclass(frozen=True)
class AllOfType:
    type_id: str


@dataclass(frozen=True)
class AllSide:
    base: object
    side: str


@dataclass(frozen=True)
class AttrFiltered:
    attr: str
    direction: str  # greater | less
    base: object


@dataclass(frozen=True)
class AllEvents:
    pass


# --------------------------- root nodes -----------------------------------

@dataclass(frozen=True)
class Exist:
    set_sel: object


@dataclass(frozen=True)
class QueryType:
    sel: object


@dataclass(frozen=True)
class CountSet:
    set_sel: object


@dataclass(frozen=True)
class CompareAttr:
    left: object
    right: object
    attr: str
    rel: str  # greater | less | equal


@dataclass(frozen=True)
class CompareSame:
    left: object
    right: object


@dataclass(frozen=True)
class CompareInt:
    left: object
    right: object
    rel: str  # more | fewer | equal


SELECTOR_NODES = (ByType, ByOrdinal, RelativeSel, SuperlativeSel)
SET_NODES = (AllOfType, AllSide, AttrFiltered, AllEvents)
ROOT_NODES = (Exist, QueryType, CountSet, CompareAttr, CompareSame, CompareInt)


def depth(node) -> int:
    if isinstance(node, (ByType, ByOrdinal, SuperlativeSel, AllOfType, AllEvents)):
        return 1
    if isinstance(node, (RelativeSel, AllSide)):
        return 1 + depth(node.base)
    if isinstance(node, AttrFiltered):
        return 1 + depth(node.base)
    if isinstance(node, (Exist, CountSet)):
        return 1 + depth(node.set_sel)
    if isinstance(node, QueryType):
        return 1 + depth(node.sel)
    if isinstance(node, (CompareAttr, CompareSame, CompareInt)):
        return 1 + max(depth(node.left), depth(node.right))
    raise TypeError(f"not an AST node: {node!r}")


def uses_temporal(node) -> bool:
    """True when the tree references order: ordinals, sides, or neighbours."""
    if isinstance(node, (ByOrdinal, RelativeSel, AllSide)):
        return True
    if isinstance(node, (ByType, SuperlativeSel, AllOfType, AllEvents)):
        return False
    if isinstance(node, AttrFiltered):
        return uses_temporal(node.base)
    if isinstance(node, (Exist, CountSet)):
        return uses_temporal(node.set_sel)
    if isinstance(node, QueryType):
        return uses_temporal(node.sel)
    if isinstance(node, (CompareAttr, CompareSame, CompareInt)):
        return uses_temporal(node.left) or uses_temporal(node.right)
    raise TypeError(f"not an AST node: {node!r}")


# --------------------------- JSON round trip -------------------------------

def to_json(node) -> dict:
    if isinstance(node, ByType):
        return {"op": "by_type", "type": node.type_id}
    if isinstance(node, ByOrdinal):
        return {"op": "by_ordinal", "pos": node.pos}
    if isinstance(node, RelativeSel):
        return {"op": "relative", "base": to_json(node.base), "side": node.side,
                "immediate": node.immediate}
    if isinstance(node, SuperlativeSel):
        return {"op": "superlative", "attr": node.attr, "extremum": node.extremum}
    if isinstance(node, AllOfType):
        return {"op": "all_of_type", "type": node.type_id}
    if isinstance(node, AllSide):
        return {"op": "all_side", "base": to_json(node.base), "side": node.side}
    if isinstance(node, AttrFiltered):
        return {"op": "attr_filtered", "attr": node.attr,
                "direction": node.direction, "base": to_json(node.base)}
    if isinstance(node, AllEvents):
        return {"op": "all_events"}
    if isinstance(node, Exist):
        return {"op": "exist", "set": to_json(node.set_sel)}
    if isinstance(node, QueryType):
        return {"op": "query_type", "sel": to_json(node.sel)}
    if isinstance(node, CountSet):
        return {"op": "count", "set": to_json(node.set_sel)}
    if isinstance(node, CompareAttr):
        return {"op": "compare_attr", "left": to_json(node.left),
                "right": to_json(node.right), "attr": node.attr, "rel": node.rel}
    if isinstance(node, CompareSame):
        return {"op": "compare_same", "left": to_json(node.left),
                "right": to_json(node.right)}
    if isinstance(node, CompareInt):
        return {"op": "compare_int", "left": to_json(node.left),
                "right": to_json(node.right), "rel": node.rel}
    raise TypeError(f"not an AST node: {node!r}")


def from_json(doc: dict):
    op = doc["op"]
    if op == "by_type":
        return ByType(doc["type"])
    if op == "by_ordinal":
        return ByOrdinal(doc["pos"])
    if op == "relative":
        return RelativeSel(from_json(doc["base"]), doc["side"], doc["immediate"])
    if op == "superlative":
        return SuperlativeSel(doc["attr"], doc["extremum"])
    if op == "all_of_type":
        return AllOfType(doc["type"])
    if op == "all_side":
        return AllSide(from_json(doc["base"]), doc["side"])
    if op == "attr_filtered":
        return AttrFiltered(doc["attr"], doc["direction"], from_json(doc["base"]))
    if op == "all_events":
        return AllEvents()
    if op == "exist":
        return Exist(from_json(doc["set"]))
    if op == "query_type":
        return QueryType(from_json(doc["sel"]))
    if op == "count":
        return CountSet(from_json(doc["set"]))
    if op == "compare_attr":
        return CompareAttr(from_json(doc["left"]), from_json(doc["right"]),
                           doc["attr"], doc["rel"])
    if op == "compare_same":
        return CompareSame(from_json(doc["left"]), from_json(doc["right"]))
    if op == "compare_int":
        return CompareInt(from_json(doc["left"]), from_json(doc["right"]), doc["rel"])
    raise ValueError(f"unknown AST op: {op!r}")


def validate(node, max_depth: int = 4) -> None:
    """Structural checks shared by catalog loading and oracle entry points."""
    if not isinstance(node, ROOT_NODES):
        raise ValueError(f"root must be a question node, got {type(node).__name__}")
    if depth(node) > max_depth:
        raise ValueError(f"tree depth {depth(node)} exceeds {max_depth}")
    _validate_inner(node)


def _validate_inner(node):
    if isinstance(node, (SuperlativeSel, AttrFiltered, CompareAttr)):
        if node.attr not in (DURATION, LOUDNESS):
            raise ValueError(f"bad attribute {node.attr!r}")
    if isinstance(node, (RelativeSel, AllSide)):
        if node.side not in (BEFORE, AFTER):
            raise ValueError(f"bad side {node.side!r}")
    for child in _children(node):
        _validate_inner(child)


def _children(node):
    if isinstance(node, (RelativeSel, AllSide, AttrFiltered)):
        return (node.base,)
    if isinstance(node, (Exist, CountSet)):
        return (node.set_sel,)
    if isinstance(node, QueryType):
        return (node.sel,)
    if isinstance(node, (CompareAttr, CompareSame, CompareInt)):
        return (node.left, node.right)
    return ()
