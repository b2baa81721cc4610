"""BRAT standoff ingestion, sentence/token alignment, BIO tags, splits, stats.

The sentence-level JSON Lines layout produced here is the interchange format
every other module consumes:

    {"doc_id": ..., "sent_index": ..., "tokens": [{"t","s","e"}, ...],
     "entities": [{"id","type","start","end"}, ...],
     "relations": [{"id","type","head","tail"}, ...]}

Offsets are character offsets into the source document text throughout.
"""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field

from .labels import (
    UnknownLabelError,
    canonical_entity_type,
    canonical_relation_type,
)


class ParseError(ValueError):
    """Standoff input that cannot be interpreted; message carries the line number."""


class DiscontinuousSpanError(ParseError):
    """T-line with a multi-fragment span ("start end;start end")."""


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Entity:
    id: str
    etype: str
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class Relation:
    id: str
    rtype: str
    head: str
    tail: str


@dataclass
class Document:
    id: str
    text: str
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class AnnotatedSentence:
    doc_id: str
    sent_index: int
    tokens: list[Token]
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)


_WS_RUN = re.compile(r"\s+")


def _norm_ws(s: str) -> str:
    return _WS_RUN.sub(" ", s)


# ---------------------------------------------------------------------------
# standoff parsing


_T_LINE = re.compile(r"^(T\S*)\t(\S+) (\d+(?: \d+)*(?:;\d+ \d+)*) (\d+)(?:\t(.*))?$")


def _char_span_from_bytes(text: str, data: bytes, start: int, end: int, line_no: int) -> tuple[int, int]:
    """Map byte offsets into ``data`` (the UTF-8 encoding of text) to char offsets."""
    try:
        prefix = data[:start].decode("utf-8")
        span = data[start:end].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"line {line_no}: byte offsets {start}..{end} split a multi-byte character") from exc
    return len(prefix), len(prefix) + len(span)


def parse_standoff(
    ann_text: str,
    doc_text: str,
    doc_id: str,
    byte_offsets: bool = False,
    strict_labels: bool = True,
) -> Document:
    """Parse a BRAT .ann document against its paired .txt content.

    T-lines become entities and R-lines relations; E/A/# lines are skipped
    with a recorded warning.  Offsets are trusted over the recorded surface
    text; a mismatch is kept as a warning.  ``byte_offsets`` reinterprets the
    stand-off offsets against the UTF-8 byte encoding of ``doc_text``.
    ``strict_labels=False`` keeps labels outside the canonical sets verbatim
    (for foreign-schema corpora headed into schema mapping).
    """
    doc = Document(id=doc_id, text=doc_text)
    encoded = doc_text.encode("utf-8") if byte_offsets else None
    limit = len(encoded) if byte_offsets else len(doc_text)
    entities: dict[str, Entity] = {}
    pending_relations: list[tuple[int, str, str, str, str]] = []

    for line_no, raw in enumerate(ann_text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        kind = line[0]
        if kind == "T":
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise ParseError(f"line {line_no}: expected 2 or 3 tab-separated fields in T-line, got {len(fields)}")
            tid, span_part = fields[0], fields[1]
            recorded = fields[2] if len(fields) == 3 else None
            if ";" in span_part:
                raise DiscontinuousSpanError(
                    f"line {line_no}: annotation {tid} uses a discontinuous span ({span_part.split(' ', 1)[1]}); not supported"
                )
            pieces = span_part.split(" ")
            if len(pieces) != 3:
                raise ParseError(f"line {line_no}: expected 'Type start end' in T-line, got {span_part!r}")
            label, start_s, end_s = pieces
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise ParseError(f"line {line_no}: non-integer offsets in {span_part!r}") from None
            try:
                etype = canonical_entity_type(label)
            except UnknownLabelError as exc:
                if strict_labels:
                    raise ParseError(f"line {line_no}: {exc}") from None
                etype = label
            if not (0 <= start < end <= limit):
                raise ParseError(f"line {line_no}: offsets {start}..{end} out of range for document of length {limit}")
            if byte_offsets:
                start, end = _char_span_from_bytes(doc_text, encoded, start, end, line_no)
            surface = doc_text[start:end]
            if recorded is not None and _norm_ws(recorded) != _norm_ws(surface):
                doc.warnings.append(
                    f"line {line_no}: {tid} recorded text {recorded!r} differs from text at offsets {surface!r}; offsets kept"
                )
            if tid in entities:
                raise ParseError(f"line {line_no}: duplicate annotation id {tid}")
            entities[tid] = Entity(id=tid, etype=etype, start=start, end=end, surface=surface)
        elif kind == "R":
            fields = line.split("\t")
            if len(fields) < 2:
                raise ParseError(f"line {line_no}: expected 2 tab-separated fields in R-line")
            rid = fields[0]
            parts = fields[1].split(" ")
            if len(parts) != 3 or not parts[1].startswith("Arg1:") or not parts[2].startswith("Arg2:"):
                raise ParseError(f"line {line_no}: expected 'Type Arg1:Tx Arg2:Ty', got {fields[1]!r}")
            try:
                rtype = canonical_relation_type(parts[0])
            except UnknownLabelError as exc:
                if strict_labels:
                    raise ParseError(f"line {line_no}: {exc}") from None
                rtype = parts[0]
            pending_relations.append((line_no, rid, rtype, parts[1][5:], parts[2][5:]))
        elif kind in ("E", "A", "#"):
            label = {"E": "event", "A": "attribute", "#": "note"}[kind]
            doc.warnings.append(f"line {line_no}: ignored {label} line")
        elif kind == "*":
            doc.warnings.append(f"line {line_no}: ignored equivalence line")
        else:
            raise ParseError(f"line {line_no}: unrecognized line type {kind!r}")

    seen_rids = set()
    for line_no, rid, rtype, head, tail in pending_relations:
        for ref in (head, tail):
            if ref not in entities:
                raise ParseError(f"line {line_no}: relation {rid} references unknown entity {ref}")
        if rid in seen_rids:
            raise ParseError(f"line {line_no}: duplicate annotation id {rid}")
        seen_rids.add(rid)
        doc.relations.append(Relation(id=rid, rtype=rtype, head=head, tail=tail))
    doc.entities = sorted(entities.values(), key=lambda e: (e.start, e.end, e.id))
    return doc


# ---------------------------------------------------------------------------
# sentence splitting and tokenization

# chunk spellings (leading brackets/quotes stripped) that block a sentence break
_ABBREVIATIONS = {
    "e.g.", "i.e.", "etc.", "cf.", "vs.", "ca.", "al.", "et.",
    "fig.", "figs.", "eq.", "eqs.", "ref.", "refs.", "sec.",
    "no.", "nos.", "approx.", "wt.", "at.", "vol.",
    "dr.", "prof.", "mr.", "mrs.", "inc.", "co.", "ltd.",
}

_SPLIT_PUNCT = set(".,;:()[]/\"'%")


def sentence_split(text: str) -> list[tuple[int, int]]:
    """Return (start, end) character ranges of sentences, whitespace-trimmed.

    A boundary is a '.', '?' or '!' followed by whitespace and an uppercase
    letter, unless the chunk ending at the period is a known abbreviation.
    """
    boundaries: list[tuple[int, int]] = []  # (end_of_sentence, start_of_next)
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in ".?!":
            continue
        j = i + 1
        if j >= n or not text[j].isspace():
            continue
        k = j
        while k < n and text[k].isspace():
            k += 1
        if k >= n or not text[k].isupper():
            continue
        if ch == ".":
            w = i
            while w > 0 and not text[w - 1].isspace():
                w -= 1
            chunk = text[w : i + 1].lstrip("([{\"'")
            if chunk.lower() in _ABBREVIATIONS:
                continue
        boundaries.append((i + 1, k))

    ranges: list[tuple[int, int]] = []
    start = 0
    for end, nxt in boundaries:
        ranges.append((start, end))
        start = nxt
    ranges.append((start, n))

    trimmed: list[tuple[int, int]] = []
    for s, e in ranges:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            trimmed.append((s, e))
    return trimmed


def tokenize(text: str, start: int = 0, end: int | None = None) -> list[Token]:
    """Deterministic rule-based tokens over ``text[start:end]``.

    Whitespace separates chunks; the punctuation characters .,;:()[]/"'% are
    always their own tokens; '-' stays inside a token only between two
    alphanumeric characters.  Token offsets partition the non-space text.
    """
    if end is None:
        end = len(text)
    tokens: list[Token] = []
    run_start: int | None = None

    def flush(upto: int) -> None:
        nonlocal run_start
        if run_start is not None:
            tokens.append(Token(text[run_start:upto], run_start, upto))
            run_start = None

    i = start
    while i < end:
        ch = text[i]
        if ch.isspace():
            flush(i)
        elif ch in _SPLIT_PUNCT:
            flush(i)
            tokens.append(Token(ch, i, i + 1))
        elif ch == "-":
            prev_ok = run_start is not None and text[i - 1].isalnum()
            next_ok = i + 1 < end and text[i + 1].isalnum()
            if prev_ok and next_ok:
                if run_start is None:
                    run_start = i
            else:
                flush(i)
                tokens.append(Token(ch, i, i + 1))
        else:
            if run_start is None:
                run_start = i
        i += 1
    flush(end)
    return tokens


def _covering_token_span(tokens: list[Token], start: int, end: int) -> tuple[int, int] | None:
    """Smallest token index range [i, j) whose tokens overlap [start, end)."""
    first = last = None
    for idx, tok in enumerate(tokens):
        if tok.start < end and start < tok.end:
            if first is None:
                first = idx
            last = idx
    if first is None:
        return None
    return first, last + 1


def sentence_split_and_tokenize(doc: Document, counters: dict | None = None) -> list[AnnotatedSentence]:
    """Split a document into tokenized sentences with aligned annotations.

    Entities snap outward to the smallest covering token span.  Relations
    whose endpoints land in different sentences are dropped and counted under
    ``cross_sentence_relations_dropped`` when a counters dict is supplied.
    """
    if counters is None:
        counters = {}
    counters.setdefault("cross_sentence_relations_dropped", 0)
    counters.setdefault("entities_dropped", 0)

    sentences: list[AnnotatedSentence] = []
    for idx, (s, e) in enumerate(sentence_split(doc.text)):
        sentences.append(AnnotatedSentence(doc.id, idx, tokenize(doc.text, s, e)))

    entity_home: dict[str, int] = {}
    for ent in doc.entities:
        placed = False
        for sent in sentences:
            if not sent.tokens:
                continue
            if ent.start >= sent.tokens[-1].end or ent.end <= sent.tokens[0].start:
                continue
            span = _covering_token_span(sent.tokens, ent.start, ent.end)
            if span is None:
                continue
            i, j = span
            aligned = Entity(
                id=ent.id,
                etype=ent.etype,
                start=sent.tokens[i].start,
                end=sent.tokens[j - 1].end,
                surface=doc.text[sent.tokens[i].start : sent.tokens[j - 1].end],
            )
            sent.entities.append(aligned)
            entity_home[ent.id] = sent.sent_index
            placed = True
            break
        if not placed:
            counters["entities_dropped"] += 1

    for rel in doc.relations:
        head_home = entity_home.get(rel.head)
        tail_home = entity_home.get(rel.tail)
        if head_home is None or tail_home is None or head_home != tail_home:
            counters["cross_sentence_relations_dropped"] += 1
            continue
        sentences[head_home].relations.append(rel)

    for sent in sentences:
        sent.entities.sort(key=lambda ent: (ent.start, ent.end, ent.id))
    return sentences


def span_surface(tokens: list[Token], start_tok: int, end_tok: int) -> str:
    """Surface form of tokens[start_tok:end_tok], single-spacing any gaps."""
    parts: list[str] = []
    prev_end: int | None = None
    for tok in tokens[start_tok:end_tok]:
        if prev_end is not None and tok.start > prev_end:
            parts.append(" ")
        parts.append(tok.text)
        prev_end = tok.end
    return "".join(parts)


# ---------------------------------------------------------------------------
# BIO conversion


def token_span(sentence: AnnotatedSentence, entity: Entity) -> tuple[int, int]:
    """Token index range [i, j) covered by a token-aligned entity."""
    span = _covering_token_span(sentence.tokens, entity.start, entity.end)
    if span is None:
        raise ValueError(f"entity {entity.id} covers no tokens of sentence {sentence.doc_id}#{sentence.sent_index}")
    return span


def to_bio(sentence: AnnotatedSentence) -> list[str]:
    """Tag each token: B-type on an entity's first token, I-type inside, else O."""
    tags = ["O"] * len(sentence.tokens)
    spans = sorted(
        ((token_span(sentence, ent), ent) for ent in sentence.entities),
        key=lambda item: item[0],
    )
    prev_end = 0
    prev_ent: Entity | None = None
    for (i, j), ent in spans:
        if i < prev_end and prev_ent is not None:
            raise ValueError(f"overlapping entities {prev_ent.id} and {ent.id} in {sentence.doc_id}#{sentence.sent_index}")
        tags[i] = f"B-{ent.etype}"
        for k in range(i + 1, j):
            tags[k] = f"I-{ent.etype}"
        prev_end, prev_ent = j, ent
    return tags


def from_bio(tags: list[str], tokens: list[Token], text: str | None = None, id_prefix: str = "P") -> list[Entity]:
    """Decode BIO tags to entities; an I-X with no live X run is repaired to B-X."""
    if len(tags) != len(tokens):
        raise ValueError(f"{len(tags)} tags for {len(tokens)} tokens")
    entities: list[Entity] = []
    run_start: int | None = None
    run_type: str | None = None

    def close(upto: int) -> None:
        nonlocal run_start, run_type
        if run_start is None:
            return
        s, e = tokens[run_start].start, tokens[upto - 1].end
        surface = text[s:e] if text is not None else span_surface(tokens, run_start, upto)
        entities.append(Entity(f"{id_prefix}{len(entities) + 1}", run_type, s, e, surface))
        run_start = run_type = None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i)
        elif tag.startswith("B-"):
            close(i)
            run_start, run_type = i, tag[2:]
        elif tag.startswith("I-"):
            if run_type != tag[2:]:
                close(i)
                run_start, run_type = i, tag[2:]
        else:
            raise ValueError(f"unknown tag {tag!r} at position {i}")
    close(len(tags))
    return entities


# ---------------------------------------------------------------------------
# splits and statistics


def split_corpus(docs: list[Document], seed: int) -> tuple[list[Document], list[Document], list[Document]]:
    """Document-level 50/25/25 split; dev and test get int(n*0.25 + 0.5) each."""
    n = len(docs)
    if n < 3:
        raise ValueError(f"need at least 3 documents to split, got {n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_dev = n_test = int(n * 0.25 + 0.5)
    n_train = n - n_dev - n_test
    train = [docs[i] for i in order[:n_train]]
    dev = [docs[i] for i in order[n_train : n_train + n_dev]]
    test = [docs[i] for i in order[n_train + n_dev :]]
    return train, dev, test


@dataclass
class Stats:
    abstracts: int
    sentences: int
    tokens: int
    entities: int
    relations: int
    entity_types: Counter
    relation_types: Counter

    def to_dict(self) -> dict:
        return {
            "abstracts": self.abstracts,
            "sentences": self.sentences,
            "tokens": self.tokens,
            "entities": self.entities,
            "relations": self.relations,
            "entity_types": dict(sorted(self.entity_types.items())),
            "relation_types": dict(sorted(self.relation_types.items())),
        }


def corpus_stats(docs: list[Document]) -> Stats:
    """Counts of abstracts/sentences/tokens/entities/relations plus type histograms."""
    sentences = 0
    tokens = 0
    entity_types: Counter = Counter()
    relation_types: Counter = Counter()
    n_entities = 0
    n_relations = 0
    for doc in docs:
        sents = sentence_split_and_tokenize(doc)
        sentences += len(sents)
        tokens += sum(len(s.tokens) for s in sents)
        n_entities += len(doc.entities)
        n_relations += len(doc.relations)
        entity_types.update(ent.etype for ent in doc.entities)
        relation_types.update(rel.rtype for rel in doc.relations)
    return Stats(len(docs), sentences, tokens, n_entities, n_relations, entity_types, relation_types)


def stats_from_sentences(sentences: list[AnnotatedSentence]) -> Stats:
    """Stats over interchange sentences; abstracts = distinct doc ids."""
    entity_types: Counter = Counter()
    relation_types: Counter = Counter()
    for sent in sentences:
        entity_types.update(e.etype for e in sent.entities)
        relation_types.update(r.rtype for r in sent.relations)
    return Stats(
        abstracts=len({s.doc_id for s in sentences}),
        sentences=len(sentences),
        tokens=sum(len(s.tokens) for s in sentences),
        entities=sum(len(s.entities) for s in sentences),
        relations=sum(len(s.relations) for s in sentences),
        entity_types=entity_types,
        relation_types=relation_types,
    )


# ---------------------------------------------------------------------------
# interchange formats


def sentence_to_obj(sent: AnnotatedSentence) -> dict:
    return {
        "doc_id": sent.doc_id,
        "sent_index": sent.sent_index,
        "tokens": [{"t": t.text, "s": t.start, "e": t.end} for t in sent.tokens],
        "entities": [
            {"id": e.id, "type": e.etype, "start": e.start, "end": e.end} for e in sent.entities
        ],
        "relations": [
            {"id": r.id, "type": r.rtype, "head": r.head, "tail": r.tail} for r in sent.relations
        ],
    }


def _resolve_label(label: str, resolver, strict: bool) -> str:
    try:
        return resolver(label)
    except UnknownLabelError:
        if strict:
            raise
        return label


def sentence_from_obj(obj: dict, strict_labels: bool = True) -> AnnotatedSentence:
    tokens = [Token(t["t"], t["s"], t["e"]) for t in obj["tokens"]]
    entities = []
    for e in obj["entities"]:
        span = _covering_token_span(tokens, e["start"], e["end"])
        if span is None:
            raise ValueError(f"entity {e['id']} covers no tokens in {obj['doc_id']}#{obj['sent_index']}")
        surface = span_surface(tokens, *span)
        etype = _resolve_label(e["type"], canonical_entity_type, strict_labels)
        entities.append(Entity(e["id"], etype, e["start"], e["end"], surface))
    relations = [
        Relation(r["id"], _resolve_label(r["type"], canonical_relation_type, strict_labels), r["head"], r["tail"])
        for r in obj["relations"]
    ]
    return AnnotatedSentence(obj["doc_id"], obj["sent_index"], tokens, entities, relations)


def dump_jsonl(sentences: list[AnnotatedSentence], meta: dict | None = None) -> str:
    """Serialize sentences to the interchange JSON Lines text (meta line first)."""
    lines = []
    if meta is not None:
        lines.append(json.dumps({"meta": meta}, sort_keys=True, separators=(",", ":")))
    for sent in sentences:
        lines.append(json.dumps(sentence_to_obj(sent), sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def load_jsonl(text: str, strict_labels: bool = True) -> tuple[list[AnnotatedSentence], dict | None]:
    """Parse interchange JSON Lines; returns (sentences, meta-or-None)."""
    sentences = []
    meta = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {line_no}: invalid JSON: {exc}") from None
        if "meta" in obj and "doc_id" not in obj:
            meta = obj["meta"]
            continue
        try:
            sentences.append(sentence_from_obj(obj, strict_labels=strict_labels))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"line {line_no}: malformed sentence object ({exc})") from None
    return sentences, meta


def to_conll(sentences: list[AnnotatedSentence]) -> str:
    """Two-column export: token TAB tag, blank line between sentences."""
    blocks = []
    for sent in sentences:
        tags = to_bio(sent)
        blocks.append("\n".join(f"{tok.text}\t{tag}" for tok, tag in zip(sent.tokens, tags)))
    return "\n\n".join(blocks) + "\n"
