"""Question instantiation against clip annotations.

Answers are computed twice on purpose: the per-family procedures here work
directly off the catalog's JSON semantics and an annotation index, while
the oracle module evaluates the typed tree.  Every emitted question must
agree across both paths; a mismatch aborts generation.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import qlang as q
from .catalog import (RELATION_WORDS, SUPERLATIVE_WORDS, QuestionTemplate,
                      instantiate_ast, realize_text)
from .clips import ClipAnnotation, SPLITS
from .events import EventType
from .oracle import evaluate

QUESTION_STREAM = 101  # seed-space tag separating question rngs from clip rngs
DEFAULT_TEMPLATE_DRAWS = 20
DEFAULT_ATTEMPTS = {"train": 5, "validation": 10, "test": 10}


class GenerationError(Exception):
    pass


class Rejection(Enum):
    NO_VALID_BINDING = "no_valid_binding"
    BALANCE_REJECTED = "balance_rejected"


@dataclass(frozen=True)
class QuestionInstance:
    question_id: str
    clip_id: str
    template_id: str
    skill: str
    text_tokens: tuple[str, ...]
    ast: object
    answer: str

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "clip_id": self.clip_id,
            "template_id": self.template_id,
            "skill": self.skill,
            "text_tokens": list(self.text_tokens),
            "ast": q.to_json(self.ast),
            "answer": self.answer,
        }

    @staticmethod
    def from_json(doc: dict) -> "QuestionInstance":
        return QuestionInstance(
            doc["question_id"], doc["clip_id"], doc["template_id"], doc["skill"],
            tuple(doc["text_tokens"]), q.from_json(doc["ast"]), doc["answer"])


# ---------------------------------------------------------------------------
# Balance heuristic
# ---------------------------------------------------------------------------

class BalanceState:
    """Online per-template answer histogram with rejection.

    A candidate is accepted when, after hypothetically counting it, the
    (max - min) / total gap over the template's reachable-answer support
    stays within the threshold.  Templates still inside the warm-up count
    accept unconditionally so cold starts cannot deadlock.
    """

    def __init__(self, templates: list[QuestionTemplate],
                 gap_threshold: float = 0.05, warmup: int = 50):
        self.gap_threshold = gap_threshold
        self.warmup = warmup
        self.support = {t.template_id: t.support for t in templates}
        self.hist: dict[str, Counter] = {t.template_id: Counter() for t in templates}

    def accept(self, template_id: str, answer: str) -> bool:
        hist = self.hist[template_id]
        total = sum(hist.values())
        if total >= self.warmup:
            counts = [hist[a] + (1 if a == answer else 0)
                      for a in self.support[template_id]]
            gap = (max(counts) - min(counts)) / (total + 1)
            if gap > self.gap_threshold:
                return False
        hist[answer] += 1
        return True

    def gap(self, template_id: str) -> float | None:
        hist = self.hist[template_id]
        total = sum(hist.values())
        if total == 0:
            return None
        counts = [hist[a] for a in self.support[template_id]]
        return (max(counts) - min(counts)) / total


# ---------------------------------------------------------------------------
# Annotation index and direct answer procedures
# ---------------------------------------------------------------------------

class AnnotationIndex:
    """Flat arrays for fast repeated answering over one annotation."""

    def __init__(self, ann: ClipAnnotation):
        self.ann = ann
        self.n = len(ann.occurrences)
        self.types = [o.type_id for o in ann.occurrences]
        self.durations = [o.duration for o in ann.occurrences]
        self.loudness = [o.loudness for o in ann.occurrences]
        self.by_type: dict[str, list[int]] = {}
        for i, tid in enumerate(self.types):
            self.by_type.setdefault(tid, []).append(i)

    def values(self, attr: str) -> list[float]:
        return self.durations if attr == q.DURATION else self.loudness


_NOTHING = object()


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= q.TIE_RTOL * max(abs(a), abs(b))


def _d_singular(node: dict, b: dict, idx: AnnotationIndex):
    """0-based position, _NOTHING for past-the-end neighbours, None if ill-posed."""
    op = node["op"]
    if op == "by_type":
        hits = idx.by_type.get(_v(node["type"], b), [])
        return hits[0] if len(hits) == 1 else None
    if op == "by_ordinal":
        word = _v(node["pos"], b)
        k = idx.n - 1 if word == "last" else q.ORDINAL_WORDS.index(word)
        return k if 0 <= k < idx.n else None
    if op == "superlative":
        attr, extremum = SUPERLATIVE_WORDS[_v(node["word"], b)]
        vals = idx.values(attr)
        pick = max(range(idx.n), key=vals.__getitem__) if extremum == "max" \
            else min(range(idx.n), key=vals.__getitem__)
        if any(_tied(vals[i], vals[pick]) for i in range(idx.n) if i != pick):
            return None
        return pick
    if op == "relative":
        if not node["immediate"]:
            return None
        base = _d_singular(node["base"], b, idx)
        if base is None or base is _NOTHING:
            return None
        j = base + 1 if _v(node["side"], b) == q.AFTER else base - 1
        return j if 0 <= j < idx.n else _NOTHING
    raise GenerationError(f"not a singular selector op: {op}")


def _d_set(node: dict, b: dict, idx: AnnotationIndex):
    op = node["op"]
    if op == "all_of_type":
        return list(idx.by_type.get(_v(node["type"], b), []))
    if op == "all_events":
        return list(range(idx.n))
    if op == "all_side":
        anchor = _d_singular(node["base"], b, idx)
        if anchor is None or anchor is _NOTHING:
            return None
        if _v(node["side"], b) == q.BEFORE:
            return list(range(anchor))
        return list(range(anchor + 1, idx.n))
    if op == "attr_filtered":
        attr, direction = RELATION_WORDS[_v(node["word"], b)]
        anchor = _d_singular(node["base"], b, idx)
        if anchor is None or anchor is _NOTHING:
            return None
        vals = idx.values(attr)
        ref = vals[anchor]
        members = []
        for i in range(idx.n):
            if i == anchor:
                continue
            if _tied(vals[i], ref):
                return None
            if (vals[i] > ref) if direction == "greater" else (vals[i] < ref):
                members.append(i)
        return members
    raise GenerationError(f"not a set selector op: {op}")


def _v(ref, b):
    return b[ref[1:]] if isinstance(ref, str) and ref.startswith("$") else ref


def direct_answer(template: QuestionTemplate, bindings: dict,
                  idx: AnnotationIndex, phrases: dict[str, str]) -> str | None:
    """Family-specific answer computation; None marks an invalid binding."""
    sem = template.semantics
    op = sem["op"]
    if op == "exist":
        members = _d_set(sem["set"], bindings, idx)
        return None if members is None else ("yes" if members else "no")
    if op == "count":
        members = _d_set(sem["set"], bindings, idx)
        return None if members is None else q.INTEGER_WORDS[len(members)]
    if op == "query_type":
        pos = _d_singular(sem["sel"], bindings, idx)
        if pos is None:
            return None
        if pos is _NOTHING:
            return "nothing"
        return phrases[idx.types[pos]]
    if op == "compare_attr":
        attr, direction = RELATION_WORDS[_v(sem["word"], bindings)]
        a = _d_singular(sem["left"], bindings, idx)
        c = _d_singular(sem["right"], bindings, idx)
        if a in (None, _NOTHING) or c in (None, _NOTHING):
            return None
        vals = idx.values(attr)
        if _tied(vals[a], vals[c]):
            return None
        hit = vals[a] > vals[c] if direction == "greater" else vals[a] < vals[c]
        return "yes" if hit else "no"
    if op == "compare_same":
        a = _d_singular(sem["left"], bindings, idx)
        c = _d_singular(sem["right"], bindings, idx)
        if a in (None, _NOTHING) or c in (None, _NOTHING):
            return None
        return "yes" if idx.types[a] == idx.types[c] else "no"
    if op == "compare_int":
        rel = _v(sem["rel"], bindings)
        s1 = _d_set(sem["left"], bindings, idx)
        s2 = _d_set(sem["right"], bindings, idx)
        if s1 is None or s2 is None:
            return None
        if rel == "more":
            return "yes" if len(s1) > len(s2) else "no"
        if rel == "fewer":
            return "yes" if len(s1) < len(s2) else "no"
        return "yes" if len(s1) == len(s2) else "no"
    raise GenerationError(f"unknown root op {op!r}")


# ---------------------------------------------------------------------------
# Binding enumeration and instantiation
# ---------------------------------------------------------------------------

def _singular_type_slots(sem: dict) -> set[str]:
    slots = set()

    def walk(node):
        if not isinstance(node, dict):
            return
        if node.get("op") == "by_type" and str(node["type"]).startswith("$"):
            slots.add(node["type"][1:])
        for v in node.values():
            walk(v)

    walk(sem)
    return slots


def slot_domains(template: QuestionTemplate, idx: AnnotationIndex,
                 all_type_ids: list[str]) -> dict[str, list]:
    """Per-slot candidate values, narrowed by what could possibly be valid."""
    singular = _singular_type_slots(template.semantics)
    unique_types = [t for t in all_type_ids if len(idx.by_type.get(t, [])) == 1]
    domains: dict[str, list] = {}
    for p in template.placeholders:
        if p.slot in domains:
            continue
        if p.kind in ("source", "action"):
            domains[p.slot] = unique_types if p.slot in singular else list(all_type_ids)
        elif p.kind == "ordinal":
            domains[p.slot] = list(q.ORDINAL_WORDS[:idx.n]) + ["last"]
        elif p.kind == "rel_order":
            domains[p.slot] = [q.BEFORE, q.AFTER]
        else:
            domains[p.slot] = list(p.values or ())
    return domains


def enumerate_valid_bindings(template: QuestionTemplate, idx: AnnotationIndex,
                             phrases: dict[str, str],
                             all_type_ids: list[str]) -> list[tuple[dict, str]]:
    """All (bindings, answer) pairs whose ASTs are well-posed on this clip."""
    import itertools

    slots = template.slots
    domains = slot_domains(template, idx, all_type_ids)
    if any(not domains[s] for s in slots):
        return []
    valid = []
    for combo in itertools.product(*(domains[s] for s in slots)):
        b = dict(zip(slots, combo))
        if any(tuple(b[s] for s in left) == tuple(b[s] for s in right)
               for left, right in template.distinct):
            continue
        ans = direct_answer(template, b, idx, phrases)
        if ans is not None and ans in template.support:
            valid.append((b, ans))
    return valid


def instantiate(template: QuestionTemplate, ann: ClipAnnotation,
                rng: np.random.Generator, balance: BalanceState,
                types_by_id: dict[str, EventType],
                synonyms: dict[str, list[str]] | None = None,
                idx: AnnotationIndex | None = None,
                cross_check: bool = True):
    """One instantiation attempt; a QuestionInstance or a Rejection."""
    idx = idx or AnnotationIndex(ann)
    phrases = {tid: t.phrase for tid, t in types_by_id.items()}
    valid = enumerate_valid_bindings(template, idx, phrases, list(types_by_id))
    if not valid:
        return Rejection.NO_VALID_BINDING
    bindings, answer = valid[int(rng.integers(len(valid)))]
    if not balance.accept(template.template_id, answer):
        return Rejection.BALANCE_REJECTED
    ast = instantiate_ast(template.semantics, bindings)
    tokens = realize_text(template, bindings, types_by_id, rng, synonyms)
    inst = QuestionInstance(
        question_id="", clip_id=ann.clip_id, template_id=template.template_id,
        skill=template.skill, text_tokens=tuple(tokens), ast=ast, answer=answer)
    if cross_check:
        got = evaluate(ast, ann, phrases)
        if got is q.INVALID or got != answer:
            raise GenerationError(
                f"oracle disagreement on {ann.clip_id} / {template.template_id}: "
                f"engine={answer!r} oracle={got!r}")
    return inst


def generate_questions(split_annotations: dict[str, list[ClipAnnotation]],
                       templates: list[QuestionTemplate],
                       types_by_id: dict[str, EventType],
                       master_seed: int,
                       attempts: dict[str, int] | None = None,
                       synonyms: dict[str, list[str]] | None = None,
                       template_draws: int = DEFAULT_TEMPLATE_DRAWS,
                       gap_threshold: float = 0.05,
                       warmup: int = 50,
                       out_dir: str | Path | None = None,
                       ) -> dict[str, list[QuestionInstance]]:
    """Instantiate questions for every split, deterministically.

    Each clip gets `attempts[split]` attempts; every attempt draws up to
    `template_draws` templates before giving up, so some clips end with
    fewer questions than attempted.  Balance histograms are kept per split
    and committed in clip-index order.
    """
    attempts = attempts or DEFAULT_ATTEMPTS
    phrases = {tid: t.phrase for tid, t in types_by_id.items()}
    out: dict[str, list[QuestionInstance]] = {}
    for split, anns in split_annotations.items():
        split_idx = SPLITS.index(split)
        balance = BalanceState(templates, gap_threshold, warmup)
        emitted: list[QuestionInstance] = []
        for clip_index, ann in enumerate(anns):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
                (int(master_seed), QUESTION_STREAM, split_idx, clip_index))))
            idx = AnnotationIndex(ann)
            n_emitted = 0
            for _attempt in range(attempts[split]):
                for _draw in range(template_draws):
                    tpl = templates[int(rng.integers(len(templates)))]
                    qid = f"{ann.clip_id}_q{n_emitted:02d}"
                    try:
                        result = instantiate(tpl, ann, rng, balance, types_by_id,
                                             synonyms, idx)
                    except GenerationError as exc:
                        raise GenerationError(f"{qid}: {exc}") from exc
                    if isinstance(result, QuestionInstance):
                        emitted.append(replace(result, question_id=qid))
                        n_emitted += 1
                        break
        out[split] = emitted
        if out_dir is not None:
            write_questions(emitted, Path(out_dir) / f"{split}.jsonl")
    return out


def write_questions(questions: list[QuestionInstance], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for inst in questions:
            fh.write(json.dumps(inst.to_json()) + "\n")


def read_questions(path: str | Path) -> list[QuestionInstance]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(QuestionInstance.from_json(json.loads(line)))
    return out
