"""Stand-off parsing, tokenization, BIO conversion, splits, and interchange."""

import json
import random
import re

import pytest

from matie.corpus import (
    DiscontinuousSpanError,
    Document,
    Entity,
    ParseError,
    corpus_stats,
    dump_jsonl,
    from_bio,
    load_jsonl,
    parse_standoff,
    sentence_split,
    sentence_split_and_tokenize,
    span_surface,
    split_corpus,
    stats_from_sentences,
    to_bio,
    to_conll,
    token_span,
    tokenize,
)

from conftest import mk_sent

# ---------------------------------------------------------------------------
# stand-off parsing

DOC = "Hastelloy X resists creep. It is tested at 900 K."


def test_parse_entities_and_relations():
    ann = (
        "T1\tMaterial 0 11\tHastelloy X\n"
        "T2\tPhenomenon 20 25\tcreep\n"
        "R1\tProperty-Of Arg1:T2 Arg2:T1\n"
    )
    doc = parse_standoff(ann, DOC, "d1")
    assert [e.id for e in doc.entities] == ["T1", "T2"]
    t1 = doc.entities[0]
    assert (t1.etype, t1.start, t1.end, t1.surface) == ("Material", 0, 11, "Hastelloy X")
    assert doc.relations[0].rtype == "Property-Of"
    assert (doc.relations[0].head, doc.relations[0].tail) == ("T2", "T1")
    assert doc.warnings == []


def test_parse_alias_labels_are_canonicalized():
    ann = "T1\tmaterial 0 11\nT2\tphenomenon 20 25\nR1\tPropertyOf Arg1:T2 Arg2:T1\n"
    doc = parse_standoff(ann, DOC, "d1")
    assert doc.entities[0].etype == "Material"
    assert doc.relations[0].rtype == "Property-Of"


def test_parse_entities_sorted_by_offset():
    ann = "T2\tPhenomenon 20 25\tcreep\nT1\tMaterial 0 11\tHastelloy X\n"
    doc = parse_standoff(ann, DOC, "d1")
    assert [e.id for e in doc.entities] == ["T1", "T2"]


def test_recorded_text_mismatch_warns_but_keeps_offsets():
    ann = "T1\tMaterial 0 11\tHastelloy Y\n"
    doc = parse_standoff(ann, DOC, "d1")
    assert len(doc.warnings) == 1
    assert "T1" in doc.warnings[0] and "offsets kept" in doc.warnings[0]
    assert doc.entities[0].surface == "Hastelloy X"


def test_recorded_text_whitespace_differences_are_tolerated():
    ann = "T1\tMaterial 0 11\tHastelloy  X\n"
    doc = parse_standoff(ann, DOC, "d1")
    assert doc.warnings == []


def test_ignored_line_kinds_warn():
    ann = (
        "T1\tMaterial 0 11\tHastelloy X\n"
        "#1\tAnnotatorNotes T1\tcheck this\n"
        "A1\tNegated T1\n"
        "E1\tProcess:T1\n"
        "*\tEquiv T1 T1\n"
    )
    doc = parse_standoff(ann, DOC, "d1")
    assert len(doc.entities) == 1
    assert len(doc.warnings) == 4


@pytest.mark.parametrize(
    "ann, message",
    [
        ("Z1\tMaterial 0 11\n", "unrecognized line type"),
        ("T1\tMaterial 0 99\n", "out of range"),
        ("T1\tMaterial 0 zero\n", "non-integer"),
        ("T1\tMaterial 0 11\nT1\tMaterial 0 11\n", "duplicate annotation id"),
        ("T1\tGadget 0 11\n", "Gadget"),
        ("T1\tMaterial 0 11\nR1\tCoref Arg1:T1 Arg2:T9\n", "unknown entity T9"),
        ("T1\tMaterial 0 11\nR1\tCoref Arg1:T1\n", "Arg1"),
    ],
)
def test_parse_errors(ann, message):
    with pytest.raises(ParseError, match=message):
        parse_standoff(ann, DOC, "d1")


def test_discontinuous_span_error_names_annotation():
    ann = "T7\tMaterial 0 4;6 11\tHastelloy X\n"
    with pytest.raises(DiscontinuousSpanError, match="T7"):
        parse_standoff(ann, DOC, "d1")


def test_keep_labels_preserves_foreign_schema():
    ann = "T1\tCondition-Misc 0 11\nT2\tMaterial 20 25\nR1\tRecipe-Precursor Arg1:T1 Arg2:T2\n"
    doc = parse_standoff(ann, DOC, "d1", strict_labels=False)
    assert doc.entities[0].etype == "Condition-Misc"
    assert doc.relations[0].rtype == "Recipe-Precursor"


def test_byte_offsets_decode_against_utf8():
    text = "Crack at 5 µm depth."  # µ is two bytes in UTF-8
    ann = "T1\tNumber 9 10\t5\nT2\tAmount-Unit 11 14\tµm\n"
    doc = parse_standoff(ann, text, "d1", byte_offsets=True)
    assert doc.entities[0].surface == "5"
    assert doc.entities[1].surface == "µm"
    assert (doc.entities[1].start, doc.entities[1].end) == (11, 13)
    assert doc.warnings == []


def test_byte_offsets_splitting_a_character_fail():
    text = "5 µm"
    ann = "T1\tAmount-Unit 2 3\n"  # ends mid-µ
    with pytest.raises(ParseError, match="multi-byte"):
        parse_standoff(ann, text, "d1", byte_offsets=True)


def test_empty_annotation_file():
    doc = parse_standoff("", DOC, "d1")
    assert doc.entities == [] and doc.relations == []


# ---------------------------------------------------------------------------
# tokenizer


@pytest.mark.parametrize(
    "text, expected",
    [
        ("Hastelloy X", ["Hastelloy", "X"]),
        ("solid-state", ["solid-state"]),
        ("(Ni-based).", ["(", "Ni-based", ")", "."]),
        ("a/b", ["a", "/", "b"]),
        ("95%", ["95", "%"]),
        ("3,100", ["3", ",", "100"]),
        ("e.g.", ["e", ".", "g", "."]),
        ("x- y", ["x", "-", "y"]),
        ("-x", ["-", "x"]),
        ("x-", ["x", "-"]),
        ("a--b", ["a", "-", "-", "b"]),
        ("3-5 mm", ["3-5", "mm"]),
        ("'quoted'", ["'", "quoted", "'"]),
        ("", []),
        ("   ", []),
    ],
)
def test_tokenize_examples(text, expected):
    assert [t.text for t in tokenize(text)] == expected


def test_tokenize_offsets_and_window():
    text = "  alpha  beta-3 "
    tokens = tokenize(text)
    assert [(t.text, t.start, t.end) for t in tokens] == [("alpha", 2, 7), ("beta-3", 9, 15)]
    windowed = tokenize(text, 9, 15)
    assert [(t.text, t.start, t.end) for t in windowed] == [("beta-3", 9, 15)]


def test_tokens_tile_the_non_whitespace_text():
    rng = random.Random(5)
    alphabet = "ab1 -.,;()/%'\tX"
    for _ in range(300):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 30)))
        tokens = tokenize(text)
        assert "".join(t.text for t in tokens) == re.sub(r"\s+", "", text)
        for tok in tokens:
            assert text[tok.start : tok.end] == tok.text
        for a, b in zip(tokens, tokens[1:]):
            assert a.end <= b.start


# ---------------------------------------------------------------------------
# sentence splitting


def test_sentence_split_basic():
    text = "Alloys creep. Tests ran at 900 K! Did they fail? Yes."
    spans = [text[s:e] for s, e in sentence_split(text)]
    assert spans == ["Alloys creep.", "Tests ran at 900 K!", "Did they fail?", "Yes."]


def test_sentence_split_requires_uppercase_after_terminator():
    text = "Measured at 3.5 MPa. the rest continues. Done."
    spans = [text[s:e] for s, e in sentence_split(text)]
    assert spans == ["Measured at 3.5 MPa. the rest continues.", "Done."]


def test_sentence_split_abbreviation_guard():
    text = "Some metals, e.g. Nickel, resist creep. See Fig. 3 and et al. Smith."
    spans = [text[s:e] for s, e in sentence_split(text)]
    assert spans == ["Some metals, e.g. Nickel, resist creep.", "See Fig. 3 and et al. Smith."]


def test_sentence_split_guard_survives_leading_bracket():
    text = "Stable phases (cf. Table) were found. More text follows."
    spans = [text[s:e] for s, e in sentence_split(text)]
    assert len(spans) == 2


def test_sentence_split_no_terminator_and_empty():
    assert sentence_split("no terminator here") == [(0, 18)]
    assert sentence_split("") == []
    assert sentence_split("   ") == []


def test_sentence_split_trims_whitespace():
    text = "  First.  Second one.  "
    spans = sentence_split(text)
    assert [text[s:e] for s, e in spans] == ["First.", "Second one."]


# ---------------------------------------------------------------------------
# document -> sentences alignment


def test_alignment_snaps_entities_outward():
    text = "Hastelloy X resists creep."
    ann = "T1\tMaterial 0 9\tHastelloy\n"  # ends inside token "Hastelloy"? no: token is 0..9
    doc = parse_standoff(ann, text, "d1")
    sent = sentence_split_and_tokenize(doc)[0]
    # mid-token span snaps to the covering token
    ann2 = "T1\tMaterial 2 7\tstell\n"
    doc2 = parse_standoff(ann2, text, "d1")
    sent2 = sentence_split_and_tokenize(doc2)[0]
    snapped = sent2.entities[0]
    assert (snapped.start, snapped.end, snapped.surface) == (0, 9, "Hastelloy")
    assert sent.entities[0].surface == "Hastelloy"


def test_alignment_multi_token_and_counters():
    text = "Hastelloy X resists creep. It is tested at 900 K."
    ann = (
        "T1\tMaterial 0 11\tHastelloy X\n"
        "T2\tPhenomenon 20 25\tcreep\n"
        "T3\tNumber 43 46\t900\n"
        "R1\tProperty-Of Arg1:T2 Arg2:T1\n"
        "R2\tObserved-In Arg1:T2 Arg2:T3\n"
    )
    doc = parse_standoff(ann, text, "d1")
    counters = {}
    sents = sentence_split_and_tokenize(doc, counters)
    assert len(sents) == 2
    assert [e.id for e in sents[0].entities] == ["T1", "T2"]
    assert [e.id for e in sents[1].entities] == ["T3"]
    assert [r.id for r in sents[0].relations] == ["R1"]
    assert counters["cross_sentence_relations_dropped"] == 1
    assert counters["entities_dropped"] == 0
    assert sents[0].sent_index == 0 and sents[1].sent_index == 1


def test_span_surface_single_spaces_gaps():
    tokens = tokenize("alpha   beta-3 (x)")
    assert span_surface(tokens, 0, 2) == "alpha beta-3"
    # adjacent punctuation tokens have no whitespace gap, so none is invented
    assert span_surface(tokens, 2, 5) == "(x)"
    assert span_surface(tokens, 1, 3) == "beta-3 ("
    assert span_surface(tokens, 0, 0) == ""


# ---------------------------------------------------------------------------
# BIO conversion


def test_to_bio_tags():
    sent = mk_sent(
        ["Hastelloy", "X", "resists", "creep"],
        ents=[("T1", "Material", 0, 2), ("T2", "Phenomenon", 3, 4)],
    )
    assert to_bio(sent) == ["B-Material", "I-Material", "O", "B-Phenomenon"]


def test_to_bio_adjacent_entities():
    sent = mk_sent(["900", "K"], ents=[("T1", "Number", 0, 1), ("T2", "Amount-Unit", 1, 2)])
    assert to_bio(sent) == ["B-Number", "B-Amount-Unit"]


def test_to_bio_rejects_overlap():
    sent = mk_sent(
        ["high", "angle", "boundaries"],
        ents=[("T1", "Descriptor", 0, 2), ("T2", "Microstructure", 1, 3)],
    )
    with pytest.raises(ValueError, match="T1.*T2"):
        to_bio(sent)


def test_from_bio_round_trip():
    sent = mk_sent(
        ["Hastelloy", "X", "resists", "creep"],
        ents=[("T1", "Material", 0, 2), ("T2", "Phenomenon", 3, 4)],
    )
    text = "Hastelloy X resists creep"
    decoded = from_bio(to_bio(sent), sent.tokens, text)
    assert [(e.etype, e.start, e.end, e.surface) for e in decoded] == [
        ("Material", 0, 11, "Hastelloy X"),
        ("Phenomenon", 20, 25, "creep"),
    ]
    assert [e.id for e in decoded] == ["P1", "P2"]


def test_from_bio_repairs_dangling_inside_tags():
    tokens = tokenize("a b c")
    ents = from_bio(["O", "I-Material", "I-Property"], tokens)
    assert [(e.etype, e.surface) for e in ents] == [("Material", "b"), ("Property", "c")]


def test_from_bio_validates_input():
    tokens = tokenize("a b")
    with pytest.raises(ValueError, match="2 tokens"):
        from_bio(["O"], tokens)
    with pytest.raises(ValueError, match="unknown tag"):
        from_bio(["O", "Q-Material"], tokens)


def test_bio_round_trip_property():
    rng = random.Random(11)
    types = ["Material", "Property", "Number", "Amount-Unit"]
    for _ in range(200):
        n = rng.randrange(1, 9)
        words = [f"w{i}" for i in range(n)]
        ents = []
        i = 0
        while i < n:
            if rng.random() < 0.4:
                j = min(n, i + rng.randrange(1, 3))
                ents.append((f"T{len(ents) + 1}", rng.choice(types), i, j))
                i = j
            else:
                i += 1
        sent = mk_sent(words, ents=ents)
        decoded = from_bio(to_bio(sent), sent.tokens, " ".join(words))
        assert [(e.etype, e.start, e.end) for e in decoded] == [
            (e.etype, e.start, e.end) for e in sent.entities
        ]


def test_token_span_requires_overlap():
    sent = mk_sent(["a", "b"])
    stray = Entity("T1", "Material", 99, 104, "zzzzz")
    with pytest.raises(ValueError, match="T1"):
        token_span(sent, stray)


# ---------------------------------------------------------------------------
# splits


def _docs(n):
    return [Document(id=f"d{i}", text="x") for i in range(n)]


def test_split_sizes():
    train, dev, test = split_corpus(_docs(67), seed=1)
    assert (len(train), len(dev), len(test)) == (33, 17, 17)
    train, dev, test = split_corpus(_docs(4), seed=1)
    assert (len(train), len(dev), len(test)) == (2, 1, 1)
    train, dev, test = split_corpus(_docs(3), seed=1)
    assert (len(train), len(dev), len(test)) == (1, 1, 1)


def test_split_is_a_partition_and_deterministic():
    docs = _docs(13)
    train, dev, test = split_corpus(docs, seed=7)
    ids = [d.id for d in train + dev + test]
    assert sorted(ids) == sorted(d.id for d in docs)
    assert len(set(ids)) == len(docs)
    again = split_corpus(docs, seed=7)
    assert [[d.id for d in part] for part in again] == [
        [d.id for d in part] for part in (train, dev, test)
    ]
    other = split_corpus(docs, seed=8)
    assert [[d.id for d in part] for part in other] != [
        [d.id for d in part] for part in (train, dev, test)
    ]


def test_split_rejects_tiny_corpora():
    with pytest.raises(ValueError, match="at least 3"):
        split_corpus(_docs(2), seed=0)


# ---------------------------------------------------------------------------
# statistics


def test_corpus_stats_counts():
    text = "Hastelloy X resists creep. It is tested at 900 K."
    ann = (
        "T1\tMaterial 0 11\tHastelloy X\n"
        "T2\tPhenomenon 20 25\tcreep\n"
        "R1\tProperty-Of Arg1:T2 Arg2:T1\n"
    )
    doc = parse_standoff(ann, text, "d1")
    stats = corpus_stats([doc])
    assert stats.abstracts == 1
    assert stats.sentences == 2
    assert stats.tokens == 12
    assert stats.entities == 2
    assert stats.relations == 1
    assert stats.entity_types["Material"] == 1
    assert stats.relation_types["Property-Of"] == 1

    sents = sentence_split_and_tokenize(doc)
    stats2 = stats_from_sentences(sents)
    assert stats2.sentences == 2 and stats2.tokens == 12


# ---------------------------------------------------------------------------
# interchange


def test_jsonl_round_trip_with_meta():
    sent = mk_sent(
        ["900", "K"],
        ents=[("T1", "Number", 0, 1), ("T2", "Amount-Unit", 1, 2)],
        rels=[("R1", "Number-Of", "T1", "T2")],
    )
    blob = dump_jsonl([sent], meta={"tool": "x"})
    lines = blob.strip().split("\n")
    assert json.loads(lines[0]) == {"meta": {"tool": "x"}}
    loaded, meta = load_jsonl(blob)
    assert meta == {"tool": "x"}
    assert len(loaded) == 1
    got = loaded[0]
    assert got.doc_id == sent.doc_id and got.sent_index == sent.sent_index
    assert got.tokens == sent.tokens
    assert got.entities == sent.entities
    assert got.relations == sent.relations


def test_jsonl_is_deterministic_and_compact():
    sent = mk_sent(["a"], ents=[("T1", "Material", 0, 1)])
    blob = dump_jsonl([sent])
    assert blob == dump_jsonl([sent])
    assert ": " not in blob and ", " not in blob
    keys = list(json.loads(blob.splitlines()[0]))
    assert keys == sorted(keys)


def test_jsonl_no_meta_line_when_absent():
    sent = mk_sent(["a"])
    loaded, meta = load_jsonl(dump_jsonl([sent]))
    assert meta is None and len(loaded) == 1


def test_load_jsonl_rejects_unknown_labels_unless_asked():
    sent = mk_sent(["a"], ents=[("T1", "Material", 0, 1)])
    blob = dump_jsonl([sent]).replace("Material", "Condition-Misc")
    with pytest.raises(Exception, match="Condition-Misc"):
        load_jsonl(blob)
    loaded, _ = load_jsonl(blob, strict_labels=False)
    assert loaded[0].entities[0].etype == "Condition-Misc"


def test_to_conll_two_columns():
    sent = mk_sent(["900", "K"], ents=[("T1", "Number", 0, 1)])
    out = to_conll([sent, mk_sent(["x"], sent_index=1)])
    assert out == "900\tB-Number\nK\tO\n\nx\tO\n"
