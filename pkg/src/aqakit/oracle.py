"""Generic answer semantics over clip annotations.

This is the ground-truth evaluator: it interprets a semantics tree against
an annotation and produces an answer from the fixed vocabulary, or INVALID
for ill-posed references.  The question engine computes answers a second
time with per-family procedures; any disagreement is a generation-time
hard failure.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

from . import qlang as q
from .clips import ClipAnnotation
from .events import load_taxonomy

NOTHING = "nothing"


class _NothingRef:
    """A reference that points past the ends of the clip (a legal answer
    for queries, ill-posed as an anchor)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NothingRef"


NOTHING_REF = _NothingRef()


@lru_cache(maxsize=1)
def default_type_phrases() -> dict[str, str]:
    types, _ = load_taxonomy()
    return {t.id: t.phrase for t in types}


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= q.TIE_RTOL * max(abs(a), abs(b))


def _attr_value(occ, attr: str) -> float:
    return occ.duration if attr == q.DURATION else occ.loudness


def resolve_selector(sel, ann: ClipAnnotation):
    """Resolve a singular selector to a 1-based ordinal, NOTHING_REF, or INVALID."""
    occs = ann.occurrences
    if isinstance(sel, q.ByType):
        hits = [o.ordinal for o in occs if o.type_id == sel.type_id]
        return hits[0] if len(hits) == 1 else q.INVALID
    if isinstance(sel, q.ByOrdinal):
        if sel.pos == "last":
            return len(occs)
        if isinstance(sel.pos, int) and 1 <= sel.pos <= len(occs):
            return sel.pos
        return q.INVALID
    if isinstance(sel, q.RelativeSel):
        if not sel.immediate:
            return q.INVALID  # plain before/after is a set context, not singular
        base = resolve_selector(sel.base, ann)
        if base is q.INVALID or base is NOTHING_REF:
            return q.INVALID
        nxt = base + 1 if sel.side == q.AFTER else base - 1
        if 1 <= nxt <= len(occs):
            return nxt
        return NOTHING_REF
    if isinstance(sel, q.SuperlativeSel):
        vals = [_attr_value(o, sel.attr) for o in occs]
        pick = max(range(len(vals)), key=lambda i: vals[i]) if sel.extremum == "max" \
            else min(range(len(vals)), key=lambda i: vals[i])
        for i, v in enumerate(vals):
            if i != pick and _tied(v, vals[pick]):
                return q.INVALID
        return occs[pick].ordinal
    raise TypeError(f"not a singular selector: {sel!r}")


def resolve_set(set_sel, ann: ClipAnnotation):
    """Resolve a set selector to a list of 1-based ordinals, or INVALID."""
    occs = ann.occurrences
    if isinstance(set_sel, q.AllOfType):
        return [o.ordinal for o in occs if o.type_id == set_sel.type_id]
    if isinstance(set_sel, q.AllEvents):
        return [o.ordinal for o in occs]
    if isinstance(set_sel, q.AllSide):
        anchor = resolve_selector(set_sel.base, ann)
        if anchor is q.INVALID or anchor is NOTHING_REF:
            return q.INVALID
        if set_sel.side == q.BEFORE:
            return [o.ordinal for o in occs if o.ordinal < anchor]
        return [o.ordinal for o in occs if o.ordinal > anchor]
    if isinstance(set_sel, q.AttrFiltered):
        anchor = resolve_selector(set_sel.base, ann)
        if anchor is q.INVALID or anchor is NOTHING_REF:
            return q.INVALID
        ref = _attr_value(occs[anchor - 1], set_sel.attr)
        members = []
        for o in occs:
            if o.ordinal == anchor:
                continue
            v = _attr_value(o, set_sel.attr)
            if _tied(v, ref):
                return q.INVALID  # ambiguous comparison
            if set_sel.direction == "greater" and v > ref:
                members.append(o.ordinal)
            elif set_sel.direction == "less" and v < ref:
                members.append(o.ordinal)
        return members
    raise TypeError(f"not a set selector: {set_sel!r}")


def evaluate(root, ann: ClipAnnotation, type_phrases: dict[str, str] | None = None):
    """Answer string from the vocabulary, or INVALID."""
    phrases = type_phrases if type_phrases is not None else default_type_phrases()
    occs = ann.occurrences

    if isinstance(root, q.Exist):
        members = resolve_set(root.set_sel, ann)
        if members is q.INVALID:
            return q.INVALID
        return "yes" if members else "no"

    if isinstance(root, q.QueryType):
        ref = resolve_selector(root.sel, ann)
        if ref is q.INVALID:
            return q.INVALID
        if ref is NOTHING_REF:
            return NOTHING
        return phrases[occs[ref - 1].type_id]

    if isinstance(root, q.CountSet):
        members = resolve_set(root.set_sel, ann)
        if members is q.INVALID:
            return q.INVALID
        if len(members) >= len(q.INTEGER_WORDS):
            # counts above twelve mean the annotation itself is malformed
            raise ValueError(f"count {len(members)} exceeds the answer "
                             f"vocabulary on {ann.clip_id}")
        return q.INTEGER_WORDS[len(members)]

    if isinstance(root, q.CompareAttr):
        a = resolve_selector(root.left, ann)
        b = resolve_selector(root.right, ann)
        if a in (q.INVALID, NOTHING_REF) or b in (q.INVALID, NOTHING_REF):
            return q.INVALID
        va = _attr_value(occs[a - 1], root.attr)
        vb = _attr_value(occs[b - 1], root.attr)
        if _tied(va, vb):
            return q.INVALID
        if root.rel == "greater":
            return "yes" if va > vb else "no"
        if root.rel == "less":
            return "yes" if va < vb else "no"
        return "no"  # rel == equal and values are not tied

    if isinstance(root, q.CompareSame):
        a = resolve_selector(root.left, ann)
        b = resolve_selector(root.right, ann)
        if a in (q.INVALID, NOTHING_REF) or b in (q.INVALID, NOTHING_REF):
            return q.INVALID
        return "yes" if occs[a - 1].type_id == occs[b - 1].type_id else "no"

    if isinstance(root, q.CompareInt):
        s1 = resolve_set(root.left, ann)
        s2 = resolve_set(root.right, ann)
        if s1 is q.INVALID or s2 is q.INVALID:
            return q.INVALID
        if root.rel == "more":
            return "yes" if len(s1) > len(s2) else "no"
        if root.rel == "fewer":
            return "yes" if len(s1) < len(s2) else "no"
        return "yes" if len(s1) == len(s2) else "no"

    raise TypeError(f"not a question root: {root!r}")


def verify_dataset(questions_path: str | Path, annotations_path: str | Path,
                   type_phrases: dict[str, str] | None = None) -> dict:
    """Re-evaluate every question against its clip annotation.

    Returns {"total": n, "mismatches": [...]}; an empty mismatch list means
    the dataset is internally consistent.
    """
    from .clips import read_annotations

    anns = {a.clip_id: a for a in read_annotations(annotations_path)}
    total = 0
    mismatches = []
    with open(questions_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            total += 1
            ann = anns.get(doc["clip_id"])
            if ann is None:
                mismatches.append({"kind": "missing_clip",
                                   "question_id": doc["question_id"],
                                   "clip_id": doc["clip_id"]})
                continue
            got = evaluate(q.from_json(doc["ast"]), ann, type_phrases)
            if got is q.INVALID or got != doc["answer"]:
                mismatches.append({"kind": "answer_mismatch",
                                   "question_id": doc["question_id"],
                                   "expected": doc["answer"],
                                   "evaluated": None if got is q.INVALID else got})
    return {"total": total, "mismatches": mismatches}
