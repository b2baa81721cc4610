"""Corpus JSONL in, TKV1 vectors out.

The TKV1 layout: line 1 is a UTF-8 JSON header {"version":1,"dim":D,
"sentences":[{"doc":...,"sent":...,"n":...}, ...]} terminated by a
newline, followed by the concatenation, in listed order, of n x D
little-endian float32 rows per sentence. Alignment is to the corpus
tokens, never to subwords: a token split into several pieces gets the
vector of its first piece; a token with no pieces gets a zero row.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import numpy as np


class EncoderError(RuntimeError):
    """The pretrained encoder could not be loaded or run."""


@dataclass(frozen=True)
class SentenceRec:
    doc_id: str
    sent_index: int
    tokens: list[tuple[str, int, int]]  # (text, start, end) in document chars


def read_corpus(path: str) -> list[SentenceRec]:
    """Parse the sentence-level JSON Lines corpus, skipping the meta line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON: {exc}") from None
            if "meta" in obj and "doc_id" not in obj:
                continue
            try:
                records.append(
                    SentenceRec(
                        obj["doc_id"],
                        int(obj["sent_index"]),
                        [(t["t"], int(t["s"]), int(t["e"])) for t in obj["tokens"]],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {line_no}: malformed sentence object ({exc})") from None
    return records


def sentence_text(tokens: list[tuple[str, int, int]]) -> tuple[str, list[tuple[int, int]]]:
    """Rebuild the sentence string and per-token character spans within it.

    Document offsets are rebased to the first token; gaps between tokens
    become single spaces per skipped character, which preserves every
    token's relative position.
    """
    if not tokens:
        return "", []
    base = tokens[0][1]
    chars = [" "] * (tokens[-1][2] - base)
    spans = []
    for text, start, _ in tokens:
        rel = start - base
        chars[rel : rel + len(text)] = list(text)
        spans.append((rel, rel + len(text)))
    return "".join(chars), spans


def first_piece_indices(
    piece_offsets: list[tuple[int, int]], token_spans: list[tuple[int, int]]
) -> list[int | None]:
    """Index of the first subword piece overlapping each token span.

    Zero-width offsets (special tokens, padding) never match. A span no
    piece overlaps yields None.
    """
    out: list[int | None] = []
    for lo, hi in token_spans:
        hit = None
        for j, (a, b) in enumerate(piece_offsets):
            if a < b and max(a, lo) < min(b, hi):
                hit = j
                break
        out.append(hit)
    return out


def write_tkv1(path: str, dim: int, items: list[tuple[str, int, np.ndarray]]) -> None:
    header = {
        "version": 1,
        "dim": dim,
        "sentences": [{"doc": doc, "sent": sent, "n": int(m.shape[0])} for doc, sent, m in items],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for _, _, m in items:
            fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def export(
    corpus_path: str,
    encoder_id: str,
    out_path: str,
    layer: int = -1,
    batch_size: int = 8,
    manifest_path: str | None = None,
) -> dict:
    """Run the frozen encoder over every sentence and write the TKV1 file.

    Returns the manifest: encoder id, dim, layer, per-sentence token
    counts, and how many rows were zero-filled for unmappable tokens.
    """
    import torch
    from transformers import AutoModel, AutoTokenizer

    records = read_corpus(corpus_path)
    try:
        tokenizer = AutoTokenizer.from_pretrained(encoder_id, use_fast=True)
        model = AutoModel.from_pretrained(encoder_id)
    except Exception as exc:
        raise EncoderError(f"cannot load encoder {encoder_id!r}: {exc}") from exc
    model.eval()
    dim = int(model.config.hidden_size)

    items: list[tuple[str, int, np.ndarray]] = []
    zero_rows = 0
    with torch.no_grad():
        for lo in range(0, len(records), batch_size):
            batch = records[lo : lo + batch_size]
            texts_spans = [sentence_text(rec.tokens) for rec in batch]
            enc = tokenizer(
                [text for text, _ in texts_spans],
                padding=True,
                return_offsets_mapping=True,
                return_tensors="pt",
            )
            offsets = enc.pop("offset_mapping")
            hidden = model(**enc, output_hidden_states=True).hidden_states[layer]
            for b, (rec, (_, spans)) in enumerate(zip(batch, texts_spans)):
                piece_offsets = [(int(a), int(bb)) for a, bb in offsets[b].tolist()]
                rows = np.zeros((len(spans), dim), dtype="<f4")
                for i, piece in enumerate(first_piece_indices(piece_offsets, spans)):
                    if piece is None:
                        zero_rows += 1
                        tok = rec.tokens[i][0]
                        print(
                            f"warning: {rec.doc_id}:{rec.sent_index} token {i} {tok!r} "
                            "has no subword pieces; wrote a zero row",
                            file=sys.stderr,
                        )
                    else:
                        rows[i] = hidden[b, piece].numpy()
                items.append((rec.doc_id, rec.sent_index, rows))

    write_tkv1(out_path, dim, items)
    manifest = {
        "encoder": encoder_id,
        "dim": dim,
        "layer": layer,
        "sentences": [[doc, sent, int(m.shape[0])] for doc, sent, m in items],
        "zero_rows": zero_rows,
    }
    if manifest_path:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return manifest
