"""Frozen-encoder token vectors for annotated corpora, in TKV1 files.

Reads the sentence-level corpus JSON Lines format, runs a pretrained
transformer in evaluation mode, keeps the first subword piece of every
corpus token, and writes one vector row per token.
"""

from .exporter import export, first_piece_indices, read_corpus, sentence_text

__all__ = ["export", "first_piece_indices", "read_corpus", "sentence_text"]
__version__ = "0.1.0"
