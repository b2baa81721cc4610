"""Offline fixtures: a tiny local BERT checkpoint and a converted corpus.

The checkpoint is built from scratch (vocab, config, random weights) so no
network or model hub is touched. The corpus fixture shells out to the
primary toolkit's converter, which is the interchange boundary between the
two packages.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
ABSTRACT_BRAT_DIR = REPO_ROOT / "tests" / "data" / "annotated_abstract"

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "was", "a", "of", "in", "and", "to",
    "hastel", "##lo", "##y", "nickel", "super", "##alloy", "##s",
    "melt", "##ing", "powder", "bed", "fusion", "laser",
    "crack", "hot", "high", "temperature", ".",
]


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    path = tmp_path_factory.mktemp("encoder") / "tiny-bert"
    tk = Tokenizer(WordPiece({w: i for i, w in enumerate(VOCAB)}, unk_token="[UNK]"))
    tk.normalizer = BertNormalizer(lowercase=True)
    tk.pre_tokenizer = BertPreTokenizer()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", VOCAB.index("[CLS]")), ("[SEP]", VOCAB.index("[SEP]"))],
    )
    wrapped = PreTrainedTokenizerFast(
        tokenizer_object=tk,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    wrapped.save_pretrained(path)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=256,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def abstract_corpus_jsonl(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "abstract.jsonl"
    subprocess.run(
        [sys.executable, "-m", "matie.cli", "convert", "--brat", str(ABSTRACT_BRAT_DIR), "--out", str(out)],
        check=True,
        capture_output=True,
    )
    return str(out)


def write_corpus(path, sentences):
    """Minimal interchange writer: sentences as (doc_id, sent_index, tokens)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, sent_index, tokens in sentences:
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc_id,
                        "sent_index": sent_index,
                        "tokens": [{"t": t, "s": s, "e": e} for t, s, e in tokens],
                        "entities": [],
                        "relations": [],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def tokens_from_text(text, start=0):
    """Whitespace tokens with character offsets, for hand-built corpora."""
    out, pos = [], start
    for word in text.split():
        begin = text.index(word, pos - start) + start
        out.append((word, begin, begin + len(word)))
        pos = begin + len(word)
    return out
