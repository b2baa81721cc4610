"""Linear-chain CRF over BIO tags.

Scores a tag sequence as the sum of per-token emission scores, adjacent-tag
transition scores, and begin/end boundary scores; all dynamic programs run in
log space.  A structural mask pins transitions that would break the BIO
grammar (I-X not preceded by B-X/I-X) at -inf during both training and
decoding, so decoded sequences are always well-formed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import __version__
from .corpus import AnnotatedSentence, Entity, from_bio, to_bio
from .encoder import represent, source_from_config
from .evaluation import corpus_entity_prf
from .labels import BIO_TAGS
from .optim import Adam

NEG_INF = -np.inf


def bio_transition_mask(tagset: tuple[str, ...]) -> np.ndarray:
    """allowed[s, t]: True unless t is I-X without s in {B-X, I-X}."""
    k = len(tagset)
    allowed = np.ones((k, k), dtype=bool)
    for t, tag in enumerate(tagset):
        if not tag.startswith("I-"):
            continue
        etype = tag[2:]
        for s, prev in enumerate(tagset):
            allowed[s, t] = prev in (f"B-{etype}", f"I-{etype}")
    return allowed


def bio_start_mask(tagset: tuple[str, ...]) -> np.ndarray:
    """allowed first tags: everything except I-X."""
    return np.array([not tag.startswith("I-") for tag in tagset], dtype=bool)


@dataclass
class CrfModel:
    tagset: tuple[str, ...]
    dim: int
    emission_weights: np.ndarray  # (dim, K)
    transitions: np.ndarray  # (K, K)
    begin: np.ndarray  # (K,)
    end: np.ndarray  # (K,)
    mask: np.ndarray  # (K, K) bool
    use_boundary: bool = True
    source_config: dict = field(default_factory=dict)
    training_config: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def k(self) -> int:
        return len(self.tagset)

    def effective_transitions(self) -> np.ndarray:
        return np.where(self.mask, self.transitions, NEG_INF)

    def effective_begin(self) -> np.ndarray:
        start = bio_start_mask(self.tagset)
        base = self.begin if self.use_boundary else np.zeros(self.k)
        return np.where(start, base, NEG_INF)

    def effective_end(self) -> np.ndarray:
        return self.end if self.use_boundary else np.zeros(self.k)

    def emissions(self, matrix: np.ndarray) -> np.ndarray:
        return matrix @ self.emission_weights

    def tag_index(self, tags: list[str]) -> np.ndarray:
        lookup = {tag: i for i, tag in enumerate(self.tagset)}
        return np.array([lookup[t] for t in tags], dtype=int)


def init_model(
    tagset: tuple[str, ...] = BIO_TAGS,
    dim: int = 64,
    source_config: dict | None = None,
    seed: int | None = None,
    use_boundary: bool = True,
) -> CrfModel:
    """Fresh model; seeded init draws emission weights from U[-0.1, 0.1],
    seed=None gives all-zero parameters (exactly uniform marginals)."""
    k = len(tagset)
    if seed is None:
        weights = np.zeros((dim, k))
    else:
        weights = np.random.default_rng(seed).uniform(-0.1, 0.1, size=(dim, k))
    return CrfModel(
        tagset=tuple(tagset),
        dim=dim,
        emission_weights=weights,
        transitions=np.zeros((k, k)),
        begin=np.zeros(k),
        end=np.zeros(k),
        mask=bio_transition_mask(tuple(tagset)),
        use_boundary=use_boundary,
        source_config=source_config or {},
        seed=seed if seed is not None else 0,
    )


# ---------------------------------------------------------------------------
# scoring and dynamic programs


def sequence_score(model: CrfModel, emissions: np.ndarray, tag_idx: np.ndarray) -> float:
    """Sum of emission, transition, and boundary scores; -inf on masked transitions."""
    trans = model.effective_transitions()
    score = model.effective_begin()[tag_idx[0]] + model.effective_end()[tag_idx[-1]]
    score += emissions[np.arange(len(tag_idx)), tag_idx].sum()
    if len(tag_idx) > 1:
        score += trans[tag_idx[:-1], tag_idx[1:]].sum()
    return float(score)


def _forward(model: CrfModel, emissions: np.ndarray) -> np.ndarray:
    n = emissions.shape[0]
    trans = model.effective_transitions()
    alpha = np.empty_like(emissions)
    alpha[0] = model.effective_begin() + emissions[0]
    for i in range(1, n):
        alpha[i] = logsumexp(alpha[i - 1][:, None] + trans, axis=0) + emissions[i]
    return alpha


def _backward(model: CrfModel, emissions: np.ndarray) -> np.ndarray:
    n = emissions.shape[0]
    trans = model.effective_transitions()
    beta = np.empty_like(emissions)
    beta[n - 1] = model.effective_end()
    for i in range(n - 2, -1, -1):
        beta[i] = logsumexp(trans + (emissions[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(model: CrfModel, emissions: np.ndarray) -> float:
    alpha = _forward(model, emissions)
    return float(logsumexp(alpha[-1] + model.effective_end()))


def marginals(model: CrfModel, emissions: np.ndarray) -> np.ndarray:
    """Per-token tag posteriors p(t_i = y); rows sum to 1."""
    alpha = _forward(model, emissions)
    beta = _backward(model, emissions)
    log_z = logsumexp(alpha[-1] + model.effective_end())
    return np.exp(alpha + beta - log_z)


def viterbi(model: CrfModel, emissions: np.ndarray) -> list[int]:
    """Highest-scoring tag sequence; ties take the lowest tag index."""
    n, k = emissions.shape
    trans = model.effective_transitions()
    delta = model.effective_begin() + emissions[0]
    back = np.zeros((n, k), dtype=int)
    for i in range(1, n):
        cand = delta[:, None] + trans
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(k)] + emissions[i]
    last = int(np.argmax(delta + model.effective_end()))
    path = [last]
    for i in range(n - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    return path[::-1]


def nll_and_gradient(
    model: CrfModel, emissions: np.ndarray, gold_idx: np.ndarray
) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
    """NLL of one sentence plus gradients (expectation minus observation).

    Returns (loss, d_emissions, extras) with extras holding "transitions",
    "begin", "end" gradients.  Masked transition cells keep zero gradient.
    """
    n, k = emissions.shape
    if len(gold_idx) > 1 and not model.mask[gold_idx[:-1], gold_idx[1:]].all():
        bad = int(np.flatnonzero(~model.mask[gold_idx[:-1], gold_idx[1:]])[0])
        raise ValueError(
            f"gold sequence uses masked transition {model.tagset[gold_idx[bad]]} -> {model.tagset[gold_idx[bad + 1]]}"
        )
    if not bio_start_mask(model.tagset)[gold_idx[0]]:
        raise ValueError(f"gold sequence starts with disallowed tag {model.tagset[gold_idx[0]]}")

    trans = model.effective_transitions()
    alpha = _forward(model, emissions)
    beta = _backward(model, emissions)
    log_z = float(logsumexp(alpha[-1] + model.effective_end()))
    gold = sequence_score(model, emissions, gold_idx)
    loss = log_z - gold

    gamma = np.exp(alpha + beta - log_z)
    d_emissions = gamma.copy()
    d_emissions[np.arange(n), gold_idx] -= 1.0

    d_trans = np.zeros((k, k))
    for i in range(n - 1):
        with np.errstate(invalid="ignore"):
            xi = np.exp(alpha[i][:, None] + trans + (emissions[i + 1] + beta[i + 1])[None, :] - log_z)
        xi = np.nan_to_num(xi, nan=0.0, posinf=0.0, neginf=0.0)
        d_trans += xi
        d_trans[gold_idx[i], gold_idx[i + 1]] -= 1.0
    d_trans[~model.mask] = 0.0

    d_begin = gamma[0].copy()
    d_begin[gold_idx[0]] -= 1.0
    d_begin[~bio_start_mask(model.tagset)] = 0.0
    d_end = gamma[-1].copy()
    d_end[gold_idx[-1]] -= 1.0

    return loss, d_emissions, {"transitions": d_trans, "begin": d_begin, "end": d_end}


# ---------------------------------------------------------------------------
# prediction helpers


def predict_tags(model: CrfModel, sentence: AnnotatedSentence, source) -> list[str]:
    if not sentence.tokens:
        return []
    emissions = model.emissions(represent(sentence, source))
    return [model.tagset[i] for i in viterbi(model, emissions)]


def predict_entities(model: CrfModel, sentence: AnnotatedSentence, source) -> list[Entity]:
    return from_bio(predict_tags(model, sentence, source), sentence.tokens)


# ---------------------------------------------------------------------------
# training


DEFAULTS = {
    "lr": 1e-3,
    "batch_size": 8,
    "max_epochs": 50,
    "patience": 5,
    "dim": 64,
    "use_boundary": True,
}


def dev_entity_f1(model: CrfModel, dev: list[AnnotatedSentence], source) -> float:
    """Exact labeled entity F1 of the model's Viterbi decode over a dev set."""
    pairs = [(sent.entities, predict_entities(model, sent, source)) for sent in dev if sent.tokens]
    return corpus_entity_prf(pairs, regime="exact", labeled=True).f1


def train_ner(
    train: list[AnnotatedSentence],
    dev: list[AnnotatedSentence],
    source,
    config: dict | None = None,
    seed: int = 0,
) -> tuple[CrfModel, list[dict]]:
    """Mini-batch Adam training of the CRF NLL with early stopping on dev F1.

    Returns the best-dev model and a per-epoch log of loss and dev F1.
    Trainable sources (embedding tables) are updated alongside the CRF.
    """
    if not train:
        raise ValueError("training set is empty")
    cfg = dict(DEFAULTS)
    cfg.update(config or {})
    dim = source.dim
    model = init_model(BIO_TAGS, dim, source.config(), seed=seed, use_boundary=cfg["use_boundary"])
    model.training_config = {k: v for k, v in cfg.items()}
    model.seed = seed

    gold_cache = [model.tag_index(to_bio(sent)) for sent in train]

    params = {"W": model.emission_weights, "transitions": model.transitions}
    if cfg["use_boundary"]:
        params["begin"] = model.begin
        params["end"] = model.end
    if source.trainable:
        params["table"] = source.table

    optimizer = Adam(lr=cfg["lr"])
    rng = np.random.default_rng(seed)
    history: list[dict] = []
    best_f1 = -1.0
    best_params = None
    since_best = 0

    for epoch in range(cfg["max_epochs"]):
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg["batch_size"]):
            batch = order[start : start + cfg["batch_size"]]
            grads = {name: np.zeros_like(p) for name, p in params.items()}
            batch_n = 0
            for si in batch:
                sent = train[int(si)]
                if not sent.tokens:
                    continue
                batch_n += 1
                h = represent(sent, source)
                emissions = model.emissions(h)
                loss, d_em, extras = nll_and_gradient(model, emissions, gold_cache[int(si)])
                epoch_loss += loss
                grads["W"] += h.T @ d_em
                grads["transitions"] += extras["transitions"]
                if cfg["use_boundary"]:
                    grads["begin"] += extras["begin"]
                    grads["end"] += extras["end"]
                if source.trainable:
                    d_h = d_em @ model.emission_weights.T
                    np.add.at(grads["table"], source.indices(sent), d_h)
            if batch_n == 0:
                continue
            for name in grads:
                grads[name] /= batch_n
            optimizer.step(params, grads)

        f1 = dev_entity_f1(model, dev, source)
        history.append({"epoch": epoch, "loss": float(epoch_loss), "dev_f1": float(f1)})
        if f1 > best_f1:
            best_f1 = f1
            best_params = {name: p.copy() for name, p in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg["patience"]:
                break

    if best_params is not None:
        for name, p in params.items():
            p[...] = best_params[name]
    model.source_config = source.config()
    return model, history


# ---------------------------------------------------------------------------
# model files


def save_crf(model: CrfModel, path: str) -> None:
    doc = {
        "format": "crf-v1",
        "tool_version": __version__,
        "tagset": list(model.tagset),
        "dim": model.dim,
        "source_config": model.source_config,
        "emission_weights": [float(v) for v in model.emission_weights.ravel()],
        "transitions": [float(v) for v in model.transitions.ravel()],
        "begin": [float(v) for v in model.begin],
        "end": [float(v) for v in model.end],
        "mask": [int(v) for v in model.mask.ravel()],
        "use_boundary": model.use_boundary,
        "training_config": model.training_config,
        "seed": model.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_crf(path: str) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "crf-v1":
        raise ValueError(f"{path}: not a crf-v1 model file")
    tagset = tuple(doc["tagset"])
    k = len(tagset)
    dim = doc["dim"]
    return CrfModel(
        tagset=tagset,
        dim=dim,
        emission_weights=np.asarray(doc["emission_weights"], dtype=float).reshape(dim, k),
        transitions=np.asarray(doc["transitions"], dtype=float).reshape(k, k),
        begin=np.asarray(doc["begin"], dtype=float),
        end=np.asarray(doc["end"], dtype=float),
        mask=np.asarray(doc["mask"], dtype=int).reshape(k, k).astype(bool),
        use_boundary=doc["use_boundary"],
        source_config=doc["source_config"],
        training_config=doc["training_config"],
        seed=doc["seed"],
    )


def source_for_model(model: CrfModel, store=None):
    return source_from_config(model.source_config, store=store)
