"""Integrity checks for the annotated-abstract fixture corpus.

The frozen numbers (token counts per sentence, entity and relation tallies)
were hand-verified against the raw text once; these tests pin them so any
tokenizer or parser drift is caught immediately.
"""

from matie.corpus import dump_jsonl, from_bio, load_jsonl, parse_standoff, to_bio

from conftest import DATA_DIR, load_abstract_fixture

TOKENS_PER_SENTENCE = [22, 25, 39, 43, 29, 44, 38, 21, 19]


def test_fixture_shape():
    sentences = load_abstract_fixture()
    assert [s.sent_index for s in sentences] == list(range(9))
    assert [len(s.tokens) for s in sentences] == TOKENS_PER_SENTENCE
    assert sum(len(s.entities) for s in sentences) == 22
    assert sum(len(s.relations) for s in sentences) == 5


def test_fixture_parses_without_warnings_or_drops():
    root = DATA_DIR / "annotated_abstract"
    doc = parse_standoff(
        (root / "doc.ann").read_text(encoding="utf-8"),
        (root / "doc.txt").read_text(encoding="utf-8"),
        "hx1",
    )
    assert doc.warnings == []
    counters = {}
    from matie.corpus import sentence_split_and_tokenize

    sentence_split_and_tokenize(doc, counters)
    assert counters["cross_sentence_relations_dropped"] == 0
    assert counters["entities_dropped"] == 0


def test_fixture_entities_are_token_aligned():
    for sent in load_abstract_fixture():
        starts = {t.start for t in sent.tokens}
        ends = {t.end for t in sent.tokens}
        for ent in sent.entities:
            assert ent.start in starts and ent.end in ends, ent.id


def test_fixture_relations_reference_local_entities():
    by_id = {}
    seen = []
    for sent in load_abstract_fixture():
        ids = {e.id for e in sent.entities}
        for rel in sent.relations:
            assert rel.head in ids and rel.tail in ids, rel.id
            seen.append((rel.id, rel.rtype, rel.head, rel.tail))
        by_id.update({e.id: e for e in sent.entities})
    assert ("R3", "Number-Of", "T13", "T14") in seen
    assert by_id["T13"].surface == "140" and by_id["T14"].surface == "MPa"


def test_fixture_bio_round_trip():
    for sent in load_abstract_fixture():
        tags = to_bio(sent)
        rebuilt = from_bio(tags, sent.tokens)
        assert [(e.etype, e.start, e.end) for e in rebuilt] == [
            (e.etype, e.start, e.end) for e in sent.entities
        ]


def test_fixture_jsonl_round_trip_is_stable():
    sentences = load_abstract_fixture()
    once = dump_jsonl(sentences)
    again = dump_jsonl(load_jsonl(once)[0])
    assert once == again
