"""Per-token representations: hashed sparse features, trainable embeddings,
precomputed embedding files (TKV1), marker augmentation, and the optional
3-token mixing layer.

TKV1 layout: one UTF-8 JSON header line
``{"version":1,"dim":D,"sentences":[{"doc":...,"sent":...,"n":...}, ...]}``
terminated by '\\n', followed by the listed sentences' rows as packed
little-endian float32, n rows of D values each, no padding.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedSentence, Entity, token_span
from .labels import ENTITY_TYPES

HASH_SPACE = 1 << 18


class EmbeddingFormatError(ValueError):
    """TKV1 file violation; carries the byte offset where it was detected."""

    def __init__(self, message: str, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"{message} (byte offset {byte_offset})")


def fnv1a_32(data: str) -> int:
    """FNV-1a 32-bit hash of the UTF-8 encoding of ``data``."""
    h = 0x811C9DC5
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


_RUN = re.compile(r"(.)\1+")


def shape_class(token: str) -> str:
    """Character-class sketch with repeated classes collapsed: "100" -> "d"."""
    classes = []
    for ch in token:
        if ch.isdigit():
            classes.append("d")
        elif ch.isalpha():
            classes.append("A" if ch.isupper() else "a")
        else:
            classes.append(ch)
    return _RUN.sub(r"\1", "".join(classes))


def token_features(tokens: list[str], i: int) -> list[str]:
    """Feature strings for token i: form, shape, affixes, neighbor forms."""
    tok = tokens[i]
    low = tok.lower()
    feats = [f"w={low}", f"shape={shape_class(tok)}"]
    for k in (1, 2, 3):
        if len(low) >= k:
            feats.append(f"pre{k}={low[:k]}")
            feats.append(f"suf{k}={low[-k:]}")
    feats.append(f"prev={tokens[i - 1].lower() if i > 0 else '<s>'}")
    feats.append(f"next={tokens[i + 1].lower() if i + 1 < len(tokens) else '</s>'}")
    return feats


@dataclass
class SparseFeatureSource:
    """Deterministic hashed features projected to a fixed width.

    Each feature string hashes (FNV-1a) into a 2^18 bucket space; bucket b
    adds +/-1 at column b % dim, sign taken from the hash's top bit.
    """

    dim: int = 64

    trainable = False

    def matrix(self, sentence: AnnotatedSentence) -> np.ndarray:
        texts = [t.text for t in sentence.tokens]
        out = np.zeros((len(texts), self.dim))
        for i in range(len(texts)):
            for feat in token_features(texts, i):
                h = fnv1a_32(feat)
                bucket = h % HASH_SPACE
                sign = 1.0 if (h >> 31) == 0 else -1.0
                out[i, bucket % self.dim] += sign
        return out

    def config(self) -> dict:
        return {"source": "sparse", "dim": self.dim}


class TrainableEmbeddingSource:
    """Lookup table over a fixed vocabulary; unseen tokens share the UNK row."""

    trainable = True

    def __init__(self, vocab: list[str], dim: int, seed: int = 0, table: np.ndarray | None = None):
        self.vocab = list(vocab)
        self.dim = dim
        self.row_of = {tok: i + 1 for i, tok in enumerate(self.vocab)}  # row 0 = UNK
        if table is not None:
            self.table = np.asarray(table, dtype=float)
            if self.table.shape != (len(self.vocab) + 1, dim):
                raise ValueError(f"embedding table shape {self.table.shape} does not match vocab+UNK x dim")
        else:
            rng = np.random.default_rng(seed)
            self.table = rng.uniform(-0.1, 0.1, size=(len(self.vocab) + 1, dim))

    @classmethod
    def from_sentences(cls, sentences: list[AnnotatedSentence], dim: int, seed: int = 0) -> "TrainableEmbeddingSource":
        vocab = sorted({tok.text for sent in sentences for tok in sent.tokens})
        return cls(vocab, dim, seed)

    def indices(self, sentence: AnnotatedSentence) -> np.ndarray:
        return np.array([self.row_of.get(t.text, 0) for t in sentence.tokens], dtype=int)

    def matrix(self, sentence: AnnotatedSentence) -> np.ndarray:
        return self.table[self.indices(sentence)].copy()

    def config(self) -> dict:
        return {
            "source": "trainable",
            "dim": self.dim,
            "vocab": self.vocab,
            "table": [float(v) for v in self.table.ravel()],
        }


class EmbeddingStore:
    """Read-only per-sentence embedding matrices loaded from a TKV1 file."""

    trainable = False

    def __init__(self, dim: int, index: dict[tuple[str, int], tuple[int, int]], data: np.ndarray):
        self.dim = dim
        self.index = index
        self.data = data

    def lookup(self, doc_id: str, sent_index: int) -> np.ndarray:
        key = (doc_id, sent_index)
        if key not in self.index:
            raise KeyError(f"no embeddings stored for sentence {doc_id}#{sent_index}")
        offset, n = self.index[key]
        return np.asarray(self.data[offset : offset + n], dtype=float)

    def matrix(self, sentence: AnnotatedSentence) -> np.ndarray:
        m = self.lookup(sentence.doc_id, sentence.sent_index)
        if m.shape[0] != len(sentence.tokens):
            raise ValueError(
                f"store has {m.shape[0]} rows for {sentence.doc_id}#{sentence.sent_index}, sentence has {len(sentence.tokens)} tokens"
            )
        return m

    def config(self) -> dict:
        return {"source": "store", "dim": self.dim}


def load_embedding_file(path: str) -> EmbeddingStore:
    """Parse a TKV1 file, validating header/payload consistency."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise EmbeddingFormatError("missing header line terminator", len(blob))
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise EmbeddingFormatError("header is not valid JSON", 0) from None
    if not isinstance(header, dict) or header.get("version") != 1:
        raise EmbeddingFormatError(f"unsupported version {header.get('version')!r}", 0)
    dim = header.get("dim")
    sentences = header.get("sentences")
    if not isinstance(dim, int) or dim <= 0 or not isinstance(sentences, list):
        raise EmbeddingFormatError("header must carry positive int 'dim' and list 'sentences'", 0)

    payload = blob[nl + 1 :]
    index: dict[tuple[str, int], tuple[int, int]] = {}
    offset_rows = 0
    for entry in sentences:
        try:
            key = (entry["doc"], int(entry["sent"]))
            n = int(entry["n"])
        except (KeyError, TypeError, ValueError):
            raise EmbeddingFormatError(f"malformed sentence entry {entry!r}", 0) from None
        if n < 0:
            raise EmbeddingFormatError(f"negative row count for {key}", 0)
        if key in index:
            raise EmbeddingFormatError(f"duplicate sentence key {key}", 0)
        index[key] = (offset_rows, n)
        offset_rows += n

    expected = offset_rows * dim * 4
    if len(payload) < expected:
        raise EmbeddingFormatError(
            f"payload truncated: expected {expected} bytes, found {len(payload)}",
            nl + 1 + len(payload),
        )
    if len(payload) > expected:
        raise EmbeddingFormatError(
            f"payload has {len(payload) - expected} trailing bytes beyond the declared rows",
            nl + 1 + expected,
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(offset_rows, dim) if offset_rows else np.zeros((0, dim), "<f4")
    return EmbeddingStore(dim, index, data)


def dump_embedding_file(path: str, dim: int, items: list[tuple[str, int, np.ndarray]]) -> None:
    """Write a TKV1 file from (doc_id, sent_index, n x dim matrix) items."""
    header = {
        "version": 1,
        "dim": dim,
        "sentences": [{"doc": doc, "sent": sent, "n": int(m.shape[0])} for doc, sent, m in items],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for _, _, m in items:
            arr = np.ascontiguousarray(m, dtype="<f4")
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise ValueError(f"matrix shape {arr.shape} does not match dim {dim}")
            fh.write(arr.tobytes())


def represent(sentence: AnnotatedSentence, source) -> np.ndarray:
    """Token representation matrix (token count x source dim) from any source."""
    m = source.matrix(sentence)
    if m.shape[0] != len(sentence.tokens):
        raise ValueError(f"source produced {m.shape[0]} rows for {len(sentence.tokens)} tokens")
    return m


@dataclass
class MarkerTable:
    """One additive vector per entity type, plus one anchor vector."""

    types: tuple[str, ...]
    type_embeddings: np.ndarray  # (len(types), dim)
    anchor_embedding: np.ndarray  # (dim,)

    @classmethod
    def init(cls, dim: int, seed: int = 0, types: tuple[str, ...] = ENTITY_TYPES) -> "MarkerTable":
        rng = np.random.default_rng(seed)
        return cls(
            types=types,
            type_embeddings=rng.uniform(-0.1, 0.1, size=(len(types), dim)),
            anchor_embedding=rng.uniform(-0.1, 0.1, size=dim),
        )

    @classmethod
    def zeros(cls, dim: int, types: tuple[str, ...] = ENTITY_TYPES) -> "MarkerTable":
        return cls(types=types, type_embeddings=np.zeros((len(types), dim)), anchor_embedding=np.zeros(dim))

    def type_row(self, etype: str) -> int:
        try:
            return self.types.index(etype)
        except ValueError:
            raise KeyError(f"no marker embedding for entity type {etype!r}") from None


def marker_augment(
    matrix: np.ndarray,
    sentence: AnnotatedSentence,
    entities: list[Entity],
    anchor_id: str,
    table: MarkerTable,
) -> np.ndarray:
    """Add each entity's type embedding to its token rows; anchor tokens also
    get the anchor embedding.  Rows outside entity spans are untouched."""
    anchors = [e for e in entities if e.id == anchor_id]
    if not anchors:
        raise ValueError(f"anchor {anchor_id!r} is not among the sentence entities")
    out = matrix.copy()
    for ent in entities:
        i, j = token_span(sentence, ent)
        out[i:j] += table.type_embeddings[table.type_row(ent.etype)]
        if ent.id == anchor_id:
            out[i:j] += table.anchor_embedding
    return out


class Mixer:
    """One learned 3-token-window linear convolution followed by tanh.

    Initialized to A = C = 0, B = identity, b = 0 so the starting transform is
    tanh of the input.  Edges use zero padding.
    """

    def __init__(self, dim: int, A=None, B=None, C=None, b=None):
        self.dim = dim
        self.A = np.zeros((dim, dim)) if A is None else np.asarray(A, dtype=float)
        self.B = np.eye(dim) if B is None else np.asarray(B, dtype=float)
        self.C = np.zeros((dim, dim)) if C is None else np.asarray(C, dtype=float)
        self.b = np.zeros(dim) if b is None else np.asarray(b, dtype=float)

    def forward(self, m: np.ndarray) -> tuple[np.ndarray, dict]:
        prev = np.vstack([np.zeros((1, self.dim)), m[:-1]])
        nxt = np.vstack([m[1:], np.zeros((1, self.dim))])
        pre = prev @ self.A.T + m @ self.B.T + nxt @ self.C.T + self.b
        out = np.tanh(pre)
        return out, {"m": m, "prev": prev, "next": nxt, "out": out}

    def backward(self, cache: dict, grad_out: np.ndarray) -> tuple[np.ndarray, dict]:
        d_pre = grad_out * (1.0 - cache["out"] ** 2)
        grads = {
            "A": d_pre.T @ cache["prev"],
            "B": d_pre.T @ cache["m"],
            "C": d_pre.T @ cache["next"],
            "b": d_pre.sum(axis=0),
        }
        d_prev = d_pre @ self.A
        d_m = d_pre @ self.B
        d_next = d_pre @ self.C
        grad_m = d_m
        grad_m[:-1] += d_prev[1:]
        grad_m[1:] += d_next[:-1]
        return grad_m, grads

    def config(self) -> dict:
        return {
            "A": [float(v) for v in self.A.ravel()],
            "B": [float(v) for v in self.B.ravel()],
            "C": [float(v) for v in self.C.ravel()],
            "b": [float(v) for v in self.b],
        }

    @classmethod
    def from_config(cls, dim: int, cfg: dict) -> "Mixer":
        return cls(
            dim,
            A=np.asarray(cfg["A"], dtype=float).reshape(dim, dim),
            B=np.asarray(cfg["B"], dtype=float).reshape(dim, dim),
            C=np.asarray(cfg["C"], dtype=float).reshape(dim, dim),
            b=np.asarray(cfg["b"], dtype=float),
        )


def source_from_config(cfg: dict, store: EmbeddingStore | None = None):
    """Rebuild a representation source from a model file's source_config."""
    kind = cfg.get("source")
    if kind == "sparse":
        return SparseFeatureSource(dim=cfg["dim"])
    if kind == "trainable":
        table = np.asarray(cfg["table"], dtype=float).reshape(len(cfg["vocab"]) + 1, cfg["dim"])
        return TrainableEmbeddingSource(cfg["vocab"], cfg["dim"], table=table)
    if kind == "store":
        if store is None:
            raise ValueError("model was trained against an embedding file; pass one via --embeddings")
        if store.dim != cfg["dim"]:
            raise ValueError(f"embedding file dim {store.dim} does not match model dim {cfg['dim']}")
        return store
    raise ValueError(f"unknown representation source {kind!r}")
