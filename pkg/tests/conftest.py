"""Shared builders for synthetic sentences and stub representation sources."""

from pathlib import Path

import numpy as np

from matie.corpus import (
    AnnotatedSentence,
    Entity,
    Relation,
    parse_standoff,
    sentence_split_and_tokenize,
    tokenize,
)

DATA_DIR = Path(__file__).parent / "data"


def load_abstract_fixture():
    """The annotated-abstract fixture as a list of sentences."""
    root = DATA_DIR / "annotated_abstract"
    doc = parse_standoff(
        (root / "doc.ann").read_text(encoding="utf-8"),
        (root / "doc.txt").read_text(encoding="utf-8"),
        "hx1",
    )
    return sentence_split_and_tokenize(doc, {})


def mk_sent(words, ents=(), rels=(), doc_id="d1", sent_index=0):
    """Build a sentence from whitespace-joined words.

    ``ents`` rows are (id, type, first_token, last_token_exclusive) in token
    indices; ``rels`` rows are (id, type, head_id, tail_id).
    """
    text = " ".join(words)
    tokens = tokenize(text)
    assert len(tokens) == len(words), "each builder word must be a single token"
    entities = []
    for eid, etype, lo, hi in ents:
        start, end = tokens[lo].start, tokens[hi - 1].end
        entities.append(Entity(eid, etype, start, end, text[start:end]))
    relations = [Relation(rid, rtype, head, tail) for rid, rtype, head, tail in rels]
    return AnnotatedSentence(doc_id, sent_index, tokens, entities, relations)


class StubSource:
    """Fixed per-token representation; rows keyed by token text, zeros otherwise."""

    trainable = False

    def __init__(self, dim, rows=None):
        self.dim = dim
        self.rows = rows or {}

    def matrix(self, sentence):
        out = np.zeros((len(sentence.tokens), self.dim))
        for i, tok in enumerate(sentence.tokens):
            if tok.text in self.rows:
                out[i] = np.asarray(self.rows[tok.text], dtype=float)
        return out

    def config(self):
        return {"kind": "stub", "dim": self.dim}
