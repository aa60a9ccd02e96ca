"""Template catalog: parsing, validation, binding, and text realization.

A template couples a semantics tree with placeholder slots to surface
phrasings.  Binding a template fills every slot with a concrete value
(an event type, an ordinal, a side, or a comparison word) and yields both
an instantiated AST and question text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import qlang as q
from .events import EventType

PLACEHOLDER_KINDS = ("source", "action", "ordinal", "rel_order",
                     "attribute", "relation", "count")

SUPERLATIVE_WORDS = {
    "loudest": (q.LOUDNESS, "max"),
    "quietest": (q.LOUDNESS, "min"),
    "longest": (q.DURATION, "max"),
    "shortest": (q.DURATION, "min"),
}
RELATION_WORDS = {
    "louder": (q.LOUDNESS, "greater"),
    "quieter": (q.LOUDNESS, "less"),
    "longer": (q.DURATION, "greater"),
    "shorter": (q.DURATION, "less"),
}
ORDINAL_VALUES = q.ORDINAL_WORDS + ("last",)


class CatalogError(Exception):
    pass


@dataclass(frozen=True)
class Placeholder:
    name: str     # surface token, appears as <name> in phrasings
    kind: str
    slot: str     # semantic variable filled at binding time
    values: tuple[str, ...] | None = None


@dataclass(frozen=True)
class QuestionTemplate:
    template_id: str
    skill: str
    placeholders: tuple[Placeholder, ...]
    phrasings: tuple[str, ...]
    semantics: dict
    support: tuple[str, ...]
    distinct: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    requires_temporal: bool = field(default=False)

    @property
    def slots(self) -> list[str]:
        seen = []
        for p in self.placeholders:
            if p.slot not in seen:
                seen.append(p.slot)
        return seen


_PLACEHOLDER_RE = re.compile(r"<([A-Za-z0-9]+)>")


def _slot_refs(node: dict) -> set[str]:
    refs = set()
    for key, val in node.items():
        if isinstance(val, dict):
            refs |= _slot_refs(val)
        elif isinstance(val, str) and val.startswith("$"):
            refs.add(val[1:])
    return refs


def _validate_template(doc: dict, types: list[EventType], vocab: set[str]) -> QuestionTemplate:
    tid = doc["template_id"]
    if doc["skill"] not in q.SKILLS:
        raise CatalogError(f"{tid}: unknown skill {doc['skill']!r}")

    placeholders = []
    for p in doc["placeholders"]:
        if p["kind"] not in PLACEHOLDER_KINDS:
            raise CatalogError(f"{tid}: unknown placeholder kind {p['kind']!r}")
        values = tuple(p["values"]) if "values" in p else None
        if p["kind"] == "relation" and values:
            attrs = {RELATION_WORDS[w][0] for w in values}
            if len(attrs) > 1:
                raise CatalogError(
                    f"{tid}: relation placeholder {p['name']} mixes duration "
                    "and loudness in one comparison")
        placeholders.append(Placeholder(p["name"], p["kind"], p["slot"], values))
    names = [p.name for p in placeholders]
    if len(set(names)) != len(names):
        raise CatalogError(f"{tid}: duplicate placeholder names")
    declared = set(names)

    phrasings = tuple(doc["phrasings"])
    if len(phrasings) < 2:
        raise CatalogError(f"{tid}: needs at least two phrasings")
    for phrase in phrasings:
        used = set(_PLACEHOLDER_RE.findall(phrase))
        for u in used - declared:
            raise CatalogError(f"{tid}: phrasing references undeclared "
                               f"placeholder <{u}>")
        for d in declared - used:
            raise CatalogError(f"{tid}: phrasing omits placeholder <{d}>; "
                               "question text would not determine the question")

    slots = {p.slot for p in placeholders}
    refs = _slot_refs(doc["semantics"])
    for r in refs - slots:
        raise CatalogError(f"{tid}: semantics references undeclared slot {r!r}")

    support = []
    raw_support = doc["support"]
    if not isinstance(raw_support, list):
        raw_support = [raw_support]
    for entry in raw_support:
        if entry == "@types":
            support.extend(t.phrase for t in types)
        else:
            support.append(entry)
    for ans in support:
        if ans not in vocab:
            raise CatalogError(f"{tid}: support answer {ans!r} not in vocabulary")

    distinct = tuple(
        (tuple(pair[0]), tuple(pair[1])) for pair in doc.get("distinct", [])
    )

    # structural sanity: instantiate with arbitrary in-domain values and
    # run the shared AST validator (depth, attrs, sides)
    probe = {}
    for p in placeholders:
        if p.slot in probe:
            continue
        probe[p.slot] = _probe_value(p, types)
    ast = instantiate_ast(doc["semantics"], probe)
    q.validate(ast)

    tpl = QuestionTemplate(
        template_id=tid, skill=doc["skill"], placeholders=tuple(placeholders),
        phrasings=phrasings, semantics=doc["semantics"], support=tuple(support),
        distinct=distinct, requires_temporal=q.uses_temporal(ast))
    return tpl


def _probe_value(p: Placeholder, types: list[EventType]):
    if p.kind in ("source", "action"):
        return types[0].id
    if p.kind == "ordinal":
        return "first"
    if p.kind == "rel_order":
        return q.BEFORE
    if p.values:
        return p.values[0]
    raise CatalogError(f"placeholder {p.name} has no value domain")


def instantiate_ast(sem: dict, bindings: dict):
    """Fill slot references with bound values and build the typed tree."""

    def fill(node: dict):
        op = node["op"]
        if op == "by_type":
            return q.ByType(_slot(node["type"], bindings))
        if op == "all_of_type":
            return q.AllOfType(_slot(node["type"], bindings))
        if op == "by_ordinal":
            word = _slot(node["pos"], bindings)
            return q.ByOrdinal("last" if word == "last"
                               else q.ORDINAL_WORDS.index(word) + 1)
        if op == "superlative":
            attr, extremum = SUPERLATIVE_WORDS[_slot(node["word"], bindings)]
            return q.SuperlativeSel(attr, extremum)
        if op == "relative":
            return q.RelativeSel(fill(node["base"]),
                                 _slot(node["side"], bindings), node["immediate"])
        if op == "all_side":
            return q.AllSide(fill(node["base"]), _slot(node["side"], bindings))
        if op == "attr_filtered":
            attr, direction = RELATION_WORDS[_slot(node["word"], bindings)]
            return q.AttrFiltered(attr, direction, fill(node["base"]))
        if op == "all_events":
            return q.AllEvents()
        if op == "exist":
            return q.Exist(fill(node["set"]))
        if op == "count":
            return q.CountSet(fill(node["set"]))
        if op == "query_type":
            return q.QueryType(fill(node["sel"]))
        if op == "compare_attr":
            attr, direction = RELATION_WORDS[_slot(node["word"], bindings)]
            return q.CompareAttr(fill(node["left"]), fill(node["right"]),
                                 attr, direction)
        if op == "compare_same":
            return q.CompareSame(fill(node["left"]), fill(node["right"]))
        if op == "compare_int":
            rel = node["rel"]
            if rel.startswith("$"):
                rel = _slot(rel, bindings)
            return q.CompareInt(fill(node["left"]), fill(node["right"]), rel)
        raise CatalogError(f"unknown semantics op {op!r}")

    return fill(sem)


def _slot(ref: str, bindings: dict):
    if isinstance(ref, str) and ref.startswith("$"):
        return bindings[ref[1:]]
    return ref


def load_catalog(path: str | Path | None = None,
                 types: list[EventType] | None = None) -> list[QuestionTemplate]:
    """Load and validate a template catalog.

    Defaults to the packaged 54-template catalog and the default taxonomy.
    """
    if types is None:
        from .events import load_taxonomy
        types, _ = load_taxonomy()
    if path is None:
        raw = resources.files("aqakit.data").joinpath("catalog.json").read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise CatalogError(f"catalog file not found: {p}")
        raw = p.read_text()
    doc = json.loads(raw)
    vocab = set(q.answer_vocab(types))
    templates = []
    seen = set()
    for tdoc in doc["templates"]:
        if tdoc["template_id"] in seen:
            raise CatalogError(f"duplicate template_id {tdoc['template_id']!r}")
        seen.add(tdoc["template_id"])
        templates.append(_validate_template(tdoc, types, vocab))
    return templates


def load_synonyms(path: str | Path | None = None) -> dict[str, list[str]]:
    if path is None:
        raw = resources.files("aqakit.data").joinpath("synonyms.json").read_text()
    else:
        raw = Path(path).read_text()
    return json.loads(raw)


# ---------------------------------------------------------------------------
# Text realization
# ---------------------------------------------------------------------------

def surface_words(template: QuestionTemplate, bindings: dict,
                  types_by_id: dict[str, EventType]) -> dict[str, str]:
    """Map each placeholder's surface name to the word(s) it prints as."""
    words = {}
    for p in template.placeholders:
        value = bindings[p.slot]
        if p.kind == "source":
            words[p.name] = types_by_id[value].source
        elif p.kind == "action":
            words[p.name] = types_by_id[value].action
        else:
            words[p.name] = str(value)
    return words


def realize_text(template: QuestionTemplate, bindings: dict,
                 types_by_id: dict[str, EventType],
                 rng: np.random.Generator,
                 synonyms: dict[str, list[str]] | None = None,
                 phrasing_index: int | None = None) -> list[str]:
    """One phrasing, placeholder substitution, coin-flip synonyms, tokens."""
    if phrasing_index is None:
        phrasing_index = int(rng.integers(len(template.phrasings)))
    phrase = template.phrasings[phrasing_index]
    words = surface_words(template, bindings, types_by_id)
    text = _PLACEHOLDER_RE.sub(lambda m: words[m.group(1)], phrase)
    if synonyms:
        text = apply_synonyms(text, synonyms, rng)
    return tokenize(text)


def apply_synonyms(text: str, synonyms: dict[str, list[str]],
                   rng: np.random.Generator) -> str:
    """Each eligible occurrence independently swaps with probability 0.5.

    Multi-word keys are handled before their substrings, left to right, so
    'fire engine' can become 'fire truck' without clobbering shorter keys.
    """
    for key in sorted(synonyms, key=len, reverse=True):
        pattern = re.compile(r"\b" + re.escape(key) + r"\b")
        out = []
        pos = 0
        for m in pattern.finditer(text):
            out.append(text[pos:m.start()])
            if rng.random() < 0.5:
                choices = synonyms[key]
                out.append(choices[int(rng.integers(len(choices)))])
            else:
                out.append(m.group(0))
            pos = m.end()
        out.append(text[pos:])
        text = "".join(out)
    return text


def tokenize(text: str) -> list[str]:
    return text.lower().replace("?", " ").replace(".", " ").replace(",", " ").split()
