"""Regenerate src/aqakit/data/catalog.json.

The catalog pairs each question template with its semantics tree, surface
phrasings, placeholder declarations, and reachable-answer support.  Editing
this script and re-running it keeps the variant families (loudness vs
duration flavors of the same shape) consistent.
"""

import json
from pathlib import Path

TYPES = "@types"  # expanded to the 20 type phrases at load time
YN = ["yes", "no"]
INTS = ["zero", "one", "two", "three", "four", "five", "six", "seven",
        "eight", "nine", "ten", "eleven", "twelve"]

LOUD_REL = ["louder", "quieter"]
DUR_REL = ["longer", "shorter"]
LOUD_SUP = ["loudest", "quietest"]
DUR_SUP = ["longest", "shortest"]


def ph(name, kind, slot, values=None):
    d = {"name": name, "kind": kind, "slot": slot}
    if values is not None:
        d["values"] = values
    return d


P_S = ph("S", "source", "T1")
P_A = ph("A", "action", "T1")
P_S2 = ph("S2", "source", "T2")
P_A2 = ph("A2", "action", "T2")
P_O = ph("O", "ordinal", "O1")
P_O2 = ph("O2", "ordinal", "O2")
P_RO = ph("RO", "rel_order", "RO1")
P_RO2 = ph("RO2", "rel_order", "RO2")
P_CMP = ph("CMP", "count", "CMP1", ["more", "fewer"])


def sup(values):
    return ph("SUP", "attribute", "SUP1", values)


def rel(values):
    return ph("REL", "relation", "REL1", values)


def by_type(slot="T1"):
    return {"op": "by_type", "type": f"${slot}"}


def all_of_type(slot="T1"):
    return {"op": "all_of_type", "type": f"${slot}"}


def by_ordinal(slot="O1"):
    return {"op": "by_ordinal", "pos": f"${slot}"}


def superlative():
    return {"op": "superlative", "word": "$SUP1"}


def relative(base, side_slot="RO1"):
    return {"op": "relative", "base": base, "side": f"${side_slot}", "immediate": True}


def all_side(base, side_slot="RO1"):
    return {"op": "all_side", "base": base, "side": f"${side_slot}"}


def filtered(base):
    return {"op": "attr_filtered", "word": "$REL1", "base": base}


def exist(s):
    return {"op": "exist", "set": s}


def count(s):
    return {"op": "count", "set": s}


def query(sel):
    return {"op": "query_type", "sel": sel}


def cmp_attr(left, right):
    return {"op": "compare_attr", "left": left, "right": right, "word": "$REL1"}


def same(left, right):
    return {"op": "compare_same", "left": left, "right": right}


def cmp_int(left, right, rel_value="$CMP1"):
    return {"op": "compare_int", "left": left, "right": right, "rel": rel_value}


def t(template_id, skill, placeholders, phrasings, semantics, support,
      distinct=None):
    doc = {
        "template_id": template_id,
        "skill": skill,
        "placeholders": placeholders,
        "phrasings": phrasings,
        "semantics": semantics,
        "support": support,
    }
    if distinct:
        doc["distinct"] = [distinct]  # one (left slots, right slots) pair
    return doc


templates = []

# ---------------------------------------------------------------- exist (11)
templates.append(t(
    "exist_type", "exist", [P_S, P_A],
    ["was there a <S> <A>",
     "did you hear a <S> <A>",
     "did you hear any <S> <A>",
     "was there a sound of a <S> <A>"],
    exist(all_of_type()), YN))
templates.append(t(
    "exist_side_type", "exist", [P_S, P_A, P_RO],
    ["was there anything <RO> the <S> <A>",
     "did you hear anything <RO> the <S> <A>",
     "were there any sounds <RO> the <S> <A>"],
    exist(all_side(by_type())), YN))
templates.append(t(
    "exist_side_ordinal", "exist", [P_O, P_RO],
    ["was there anything <RO> the <O> sound",
     "did you hear anything <RO> the <O> sound",
     "were there any sounds <RO> the <O> sound"],
    exist(all_side(by_ordinal())), YN))
for attr, words in (("loudness", LOUD_SUP), ("duration", DUR_SUP)):
    templates.append(t(
        f"exist_side_superlative_{attr}", "exist", [sup(words), P_RO],
        ["was there anything <RO> the <SUP> sound",
         "did you hear anything <RO> the <SUP> sound"],
        exist(all_side(superlative())), YN))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"exist_filter_type_{attr}", "exist", [P_S, P_A, rel(words)],
        ["was there a sound <REL> than the <S> <A>",
         "were there any sounds <REL> than the <S> <A>",
         "did you hear anything <REL> than the <S> <A>"],
        exist(filtered(by_type())), YN))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"exist_filter_ordinal_{attr}", "exist", [P_O, rel(words)],
        ["was there a sound <REL> than the <O> sound",
         "were there any sounds <REL> than the <O> sound"],
        exist(filtered(by_ordinal())), YN))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"exist_filter_relative_{attr}", "exist", [P_S, P_A, P_RO, rel(words)],
        ["was there a sound <REL> than the sound immediately <RO> the <S> <A>",
         "were there any sounds <REL> than the sound immediately <RO> the <S> <A>"],
        exist(filtered(relative(by_type()))), YN))

# ---------------------------------------------------------------- query (7)
templates.append(t(
    "query_ordinal", "query", [P_O],
    ["what was the <O> sound",
     "what was the <O> sound you heard"],
    query(by_ordinal()), TYPES))
for attr, words in (("loudness", LOUD_SUP), ("duration", DUR_SUP)):
    templates.append(t(
        f"query_superlative_{attr}", "query", [sup(words)],
        ["what was the <SUP> sound",
         "what was the <SUP> sound you heard"],
        query(superlative()), TYPES))
templates.append(t(
    "query_relative_type", "query", [P_S, P_A, P_RO],
    ["what did you hear <RO> the <S> <A>",
     "what was the sound <RO> the <S> <A>",
     "what did you hear immediately <RO> the <S> <A>",
     "what was the sound immediately <RO> the <S> <A>"],
    query(relative(by_type())), [TYPES, "nothing"]))
templates.append(t(
    "query_relative_ordinal", "query", [P_O, P_RO],
    ["what did you hear immediately <RO> the <O> sound",
     "what was the sound immediately <RO> the <O> sound"],
    query(relative(by_ordinal())), [TYPES, "nothing"]))
for attr, words in (("loudness", LOUD_SUP), ("duration", DUR_SUP)):
    templates.append(t(
        f"query_relative_superlative_{attr}", "query", [sup(words), P_RO],
        ["what did you hear immediately <RO> the <SUP> sound",
         "what was the sound immediately <RO> the <SUP> sound"],
        query(relative(superlative())), [TYPES, "nothing"]))

# ---------------------------------------------------------------- count (12)
templates.append(t(
    "count_all", "count", [],
    ["how many sounds were there",
     "how many sounds did you hear",
     "how many sound events were there"],
    count({"op": "all_events"}), INTS[5:13]))
templates.append(t(
    "count_type", "count", [P_S, P_A],
    ["how many times did you hear a <S> <A>",
     "how many <S> <A> events were there",
     "how many times was there a <S> <A>"],
    count(all_of_type()), INTS[0:9]))
templates.append(t(
    "count_side_type", "count", [P_S, P_A, P_RO],
    ["how many sounds were there <RO> the <S> <A>",
     "how many sounds did you hear <RO> the <S> <A>",
     "how many sounds <RO> the <S> <A> were there"],
    count(all_side(by_type())), INTS[0:12]))
templates.append(t(
    "count_side_ordinal", "count", [P_O, P_RO],
    ["how many sounds <RO> the <O> sound were there",
     "how many sounds were there <RO> the <O> sound",
     "how many sounds did you hear <RO> the <O> sound"],
    count(all_side(by_ordinal())), INTS[0:12]))
for attr, words in (("loudness", LOUD_SUP), ("duration", DUR_SUP)):
    templates.append(t(
        f"count_side_superlative_{attr}", "count", [sup(words), P_RO],
        ["how many sounds were there <RO> the <SUP> sound",
         "how many sounds did you hear <RO> the <SUP> sound"],
        count(all_side(superlative())), INTS[0:12]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"count_filter_type_{attr}", "count", [P_S, P_A, rel(words)],
        ["how many sounds were <REL> than the <S> <A>",
         "how many sounds <REL> than the <S> <A> were there"],
        count(filtered(by_type())), INTS[0:12]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"count_filter_ordinal_{attr}", "count", [P_O, rel(words)],
        ["how many sounds were <REL> than the <O> sound",
         "how many sounds <REL> than the <O> sound were there"],
        count(filtered(by_ordinal())), INTS[0:12]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"count_filter_relative_{attr}", "count", [P_S, P_A, P_RO, rel(words)],
        ["how many sounds were <REL> than the sound immediately <RO> the <S> <A>",
         "how many sounds <REL> than the sound immediately <RO> the <S> <A> were there"],
        count(filtered(relative(by_type()))), INTS[0:12]))

# ---------------------------------------------------------------- compare (16)
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"compare_type_type_{attr}", "compare", [P_S, P_A, P_S2, P_A2, rel(words)],
        ["was the <S> <A> <REL> than the <S2> <A2>",
         "was the sound of the <S> <A> <REL> than the sound of the <S2> <A2>"],
        cmp_attr(by_type("T1"), by_type("T2")), YN,
        distinct=[["T1"], ["T2"]]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"compare_ordinal_type_{attr}", "compare", [P_O, P_S, P_A, rel(words)],
        ["was the <O> sound <REL> than the <S> <A>",
         "was the <O> sound you heard <REL> than the <S> <A>"],
        cmp_attr(by_ordinal(), by_type()), YN))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"compare_type_ordinal_{attr}", "compare", [P_S, P_A, P_O, rel(words)],
        ["was the <S> <A> <REL> than the <O> sound",
         "was the <S> <A> <REL> than the <O> sound you heard"],
        cmp_attr(by_type(), by_ordinal()), YN))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"compare_ordinal_ordinal_{attr}", "compare", [P_O, P_O2, rel(words)],
        ["was the <O> sound <REL> than the <O2> sound",
         "was the <O> sound you heard <REL> than the <O2> sound"],
        cmp_attr(by_ordinal("O1"), by_ordinal("O2")), YN,
        distinct=[["O1"], ["O2"]]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"compare_relative_type_{attr}", "compare",
        [P_S, P_A, P_RO, P_S2, P_A2, rel(words)],
        ["was the sound immediately <RO> the <S> <A> <REL> than the <S2> <A2>",
         "was the sound just <RO> the <S> <A> <REL> than the <S2> <A2>"],
        cmp_attr(relative(by_type("T1")), by_type("T2")), YN))
templates.append(t(
    "same_ordinal_ordinal", "compare", [P_O, P_O2],
    ["were the <O> and <O2> sounds the same",
     "were the <O> and <O2> sounds the same type of sound",
     "was the <O> sound the same type as the <O2> sound"],
    same(by_ordinal("O1"), by_ordinal("O2")), YN,
    distinct=[["O1"], ["O2"]]))
templates.append(t(
    "same_ordinal_type", "compare", [P_O, P_S, P_A],
    ["was the <O> sound a <S> <A>",
     "was the <O> sound you heard a <S> <A>"],
    same(by_ordinal(), by_type()), YN))
templates.append(t(
    "same_relative_type", "compare", [P_S, P_A, P_RO, P_S2, P_A2],
    ["was the sound immediately <RO> the <S> <A> a <S2> <A2>",
     "was the sound just <RO> the <S> <A> a <S2> <A2>"],
    same(relative(by_type("T1")), by_type("T2")), YN,
    distinct=[["T1"], ["T2"]]))
templates.append(t(
    "same_ordinal_superlative", "compare",
    [P_O, sup(LOUD_SUP + DUR_SUP)],
    ["was the <O> sound the same type as the <SUP> sound",
     "was the <O> sound the same kind of sound as the <SUP> sound"],
    same(by_ordinal(), superlative()), YN))
templates.append(t(
    "same_type_superlative", "compare",
    [P_S, P_A, sup(LOUD_SUP + DUR_SUP)],
    ["was the <S> <A> the <SUP> sound",
     "was the <SUP> sound the <S> <A>"],
    same(by_type(), superlative()), YN))
templates.append(t(
    "compare_superlative_type_loudness", "compare",
    [sup(DUR_SUP), P_S, P_A, rel(LOUD_REL)],
    ["was the <SUP> sound <REL> than the <S> <A>",
     "was the <SUP> sound you heard <REL> than the <S> <A>"],
    cmp_attr(superlative(), by_type()), YN))

# ------------------------------------------------------- compare integer (8)
templates.append(t(
    "cint_type_type_more", "compare_integer", [P_S, P_A, P_S2, P_A2],
    ["were there more <S> <A> events than <S2> <A2> events",
     "was the number of times you heard a <S> <A> more than the number of times you heard a <S2> <A2>",
     "did you hear a <S> <A> more times than a <S2> <A2>"],
    cmp_int(all_of_type("T1"), all_of_type("T2"), "more"), YN,
    distinct=[["T1"], ["T2"]]))
templates.append(t(
    "cint_type_type_fewer", "compare_integer", [P_S, P_A, P_S2, P_A2],
    ["were there fewer <S> <A> events than <S2> <A2> events",
     "was the number of times you heard a <S> <A> less than the number of times you heard a <S2> <A2>",
     "did you hear a <S> <A> fewer times than a <S2> <A2>"],
    cmp_int(all_of_type("T1"), all_of_type("T2"), "fewer"), YN,
    distinct=[["T1"], ["T2"]]))
templates.append(t(
    "cint_type_type_equal", "compare_integer", [P_S, P_A, P_S2, P_A2],
    ["were there an equal number of <S> <A> events and <S2> <A2> events",
     "was the number of times you heard a <S> <A> the same as the number of times you heard a <S2> <A2>",
     "did you hear a <S> <A> as many times as a <S2> <A2>"],
    cmp_int(all_of_type("T1"), all_of_type("T2"), "equal"), YN,
    distinct=[["T1"], ["T2"]]))
templates.append(t(
    "cint_type_side", "compare_integer", [P_S, P_A, P_CMP, P_RO, P_S2, P_A2],
    ["were there <CMP> <S> <A> events than sounds <RO> the <S2> <A2>",
     "was the number of <S> <A> events <CMP> than the number of sounds <RO> the <S2> <A2>"],
    cmp_int(all_of_type("T1"), all_side(by_type("T2"))), YN))
templates.append(t(
    "cint_side_side", "compare_integer",
    [P_CMP, P_RO, P_S, P_A, P_RO2, P_S2, P_A2],
    ["were there <CMP> sounds <RO> the <S> <A> than <RO2> the <S2> <A2>",
     "was the number of sounds <RO> the <S> <A> <CMP> than the number of sounds <RO2> the <S2> <A2>"],
    cmp_int(all_side(by_type("T1"), "RO1"), all_side(by_type("T2"), "RO2")), YN,
    distinct=[["T1", "RO1"], ["T2", "RO2"]]))
templates.append(t(
    "cint_ordinal_sides", "compare_integer", [P_CMP, P_RO, P_O, P_RO2, P_O2],
    ["were there <CMP> sounds <RO> the <O> sound than <RO2> the <O2> sound",
     "was the number of sounds <RO> the <O> sound <CMP> than the number of sounds <RO2> the <O2> sound"],
    cmp_int(all_side(by_ordinal("O1"), "RO1"), all_side(by_ordinal("O2"), "RO2")), YN,
    distinct=[["O1", "RO1"], ["O2", "RO2"]]))
for attr, words in (("loudness", LOUD_REL), ("duration", DUR_REL)):
    templates.append(t(
        f"cint_type_filter_{attr}", "compare_integer",
        [P_S, P_A, P_CMP, rel(words), P_S2, P_A2],
        ["were there <CMP> <S> <A> events than sounds <REL> than the <S2> <A2>",
         "was the number of <S> <A> events <CMP> than the number of sounds <REL> than the <S2> <A2>"],
        cmp_int(all_of_type("T1"), filtered(by_type("T2"))), YN))

assert len(templates) == 54, len(templates)

out = Path(__file__).resolve().parents[1] / "src" / "aqakit" / "data" / "catalog.json"
out.write_text(json.dumps({"templates": templates}, indent=1) + "\n")
print(f"wrote {out} with {len(templates)} templates")
