"""Train the CRF entity tagger on a small synthetic corpus and inspect it.

The corpus is separable (each content word always carries the same type),
so a few epochs reach perfect dev F1. The same train_ner call scales to
real corpora; only the embedding source and config change.
"""

import numpy as np

from matie.corpus import AnnotatedSentence, Entity, Token, to_bio
from matie.crf import marginals, predict_entities, predict_tags, train_ner
from matie.encoder import TrainableEmbeddingSource, represent

VOCAB = {
    "iron": "Material",
    "chromium": "Material",
    "sintered": "Operation",
    "hardness": "Property",
    "750": "Number",
    "the": None,
    "was": None,
    "at": None,
    "and": None,
    "measured": None,
}


def sentence(words, doc_id, sent_index=0):
    tokens, pos = [], 0
    for w in words:
        tokens.append(Token(w, pos, pos + len(w)))
        pos += len(w) + 1
    ents = []
    for j, w in enumerate(words):
        if VOCAB[w]:
            tok = tokens[j]
            ents.append(Entity(f"T{len(ents) + 1}", VOCAB[w], tok.start, tok.end, w))
    return AnnotatedSentence(doc_id, sent_index, tokens, ents, [])


def corpus(n, seed):
    rng = np.random.default_rng(seed)
    words = list(VOCAB)
    out = [sentence(words[:5], "cover", 0), sentence(words[5:], "cover", 1)]
    for i in range(n - 2):
        out.append(sentence([words[int(j)] for j in rng.integers(0, len(words), size=6)], f"d{i}"))
    return out


train, dev = corpus(60, seed=0), corpus(16, seed=1)
source = TrainableEmbeddingSource.from_sentences(train, dim=12, seed=0)
print(f"training on {len(train)} sentences, vocab {len(source.vocab)} types, dim {source.dim}")

model, history = train_ner(train, dev, source, config={"max_epochs": 50, "lr": 0.05}, seed=0)
for row in history[:3] + history[-1:]:
    print(f"  epoch {row['epoch']:>2}  loss {row['loss']:8.3f}  dev F1 {row['dev_f1']:.3f}")
print(f"stopped after {len(history)} epochs\n")

probe = dev[3]
print("probe sentence:", [t.text for t in probe.tokens])
print("  gold:", to_bio(probe))
print("  pred:", predict_tags(model, probe, source))
for ent in predict_entities(model, probe, source):
    print(f"  predicted {ent.etype:<10} {ent.surface!r}")

# Marginals expose per-token confidence; each row is a distribution over tags.
m = marginals(model, model.emissions(represent(probe, source)))
print("\nper-token max marginal:", np.round(m.max(axis=1), 3))
