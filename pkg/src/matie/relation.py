"""Anchor-centric relation classification.

One scoring pass per anchor entity: the sentence representation is augmented
with type markers for every entity plus an anchor marker, optionally mixed by
a 3-token convolution, and a linear softmax scores each (anchor, other) pair
from the concatenated boundary-token vectors [h_l1; h_r1; h_l2; h_r2].

Direction is encoded in the label space: NONE plus, per relation type r,
"r->" (anchor is head) and "r<-" (anchor is tail) - 23 classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .corpus import AnnotatedSentence, Entity, Relation, token_span
from .encoder import MarkerTable, Mixer, marker_augment, represent, source_from_config
from .evaluation import corpus_relation_prf
from .labels import RELATION_TYPES
from .optim import Adam

NONE_LABEL = "NONE"

LABEL_SPACE: tuple[str, ...] = (NONE_LABEL,) + tuple(
    f"{r}{arrow}" for r in RELATION_TYPES for arrow in ("->", "<-")
)


@dataclass
class RelModel:
    dim: int
    label_space: tuple[str, ...]
    W: np.ndarray  # (4*dim, L)
    b: np.ndarray  # (L,)
    marker: MarkerTable
    mixer: Mixer | None = None
    source_config: dict = field(default_factory=dict)
    training_config: dict = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True)
class RelationPrediction:
    head: str
    tail: str
    rtype: str
    prob: float


def init_rel_model(dim: int, seed: int = 0, use_mixer: bool = False) -> RelModel:
    rng = np.random.default_rng(seed)
    return RelModel(
        dim=dim,
        label_space=LABEL_SPACE,
        W=rng.uniform(-0.1, 0.1, size=(4 * dim, len(LABEL_SPACE))),
        b=np.zeros(len(LABEL_SPACE)),
        marker=MarkerTable.init(dim, seed=seed + 1),
        mixer=Mixer(dim) if use_mixer else None,
        seed=seed,
    )


def candidate_pairs(entities: list[Entity]) -> list[tuple[Entity, Entity]]:
    """All ordered (anchor, other) pairs within one sentence: k*(k-1) pairs."""
    return [(a, o) for a in entities for o in entities if o.id != a.id]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _boundary_indices(sentence: AnnotatedSentence, entity: Entity) -> tuple[int, int]:
    i, j = token_span(sentence, entity)
    return i, j - 1


def _anchor_matrix(
    sentence: AnnotatedSentence,
    entities: list[Entity],
    anchor_id: str,
    model: RelModel,
    source,
) -> tuple[np.ndarray, np.ndarray, dict | None]:
    base = represent(sentence, source)
    aug = marker_augment(base, sentence, entities, anchor_id, model.marker)
    if model.mixer is not None:
        mixed, cache = model.mixer.forward(aug)
    else:
        mixed, cache = aug, None
    return aug, mixed, cache


def _pair_input(mixed: np.ndarray, sentence: AnnotatedSentence, anchor: Entity, other: Entity) -> np.ndarray:
    l1, r1 = _boundary_indices(sentence, anchor)
    l2, r2 = _boundary_indices(sentence, other)
    return np.concatenate([mixed[l1], mixed[r1], mixed[l2], mixed[r2]])


def score_anchor(
    sentence: AnnotatedSentence,
    entities: list[Entity],
    anchor_id: str,
    model: RelModel,
    source,
) -> dict[str, np.ndarray]:
    """One marker-augmented pass; label distribution per other entity."""
    anchor = next(e for e in entities if e.id == anchor_id)
    _, mixed, _ = _anchor_matrix(sentence, entities, anchor_id, model, source)
    out: dict[str, np.ndarray] = {}
    for other in entities:
        if other.id == anchor_id:
            continue
        x = _pair_input(mixed, sentence, anchor, other)
        out[other.id] = _softmax(x @ model.W + model.b)
    return out


def predict_relations(
    sentence: AnnotatedSentence,
    entities: list[Entity],
    model: RelModel,
    source,
    tau: float = 0.5,
) -> list[RelationPrediction]:
    """Reconcile the two anchor passes of each unordered pair.

    The winner is the highest-probability non-NONE directed label across both
    passes (ties: lexicographically smaller (head id, label index)); it is
    emitted only if its probability reaches tau and beats NONE within its own
    pass's distribution.
    """
    if len(entities) < 2:
        return []
    passes = {e.id: score_anchor(sentence, entities, e.id, model, source) for e in entities}
    none_idx = model.label_space.index(NONE_LABEL)
    predictions: list[RelationPrediction] = []
    for ai in range(len(entities)):
        for bi in range(ai + 1, len(entities)):
            a, b = entities[ai], entities[bi]
            candidates = []  # (-prob, head_id, label_index, tail_id, rtype, prob, none_prob)
            for anchor, other in ((a, b), (b, a)):
                dist = passes[anchor.id][other.id]
                for li, label in enumerate(model.label_space):
                    if label == NONE_LABEL:
                        continue
                    rtype, arrow = label[:-2], label[-2:]
                    head, tail = (anchor, other) if arrow == "->" else (other, anchor)
                    candidates.append(
                        (-float(dist[li]), head.id, li, tail.id, rtype, float(dist[li]), float(dist[none_idx]))
                    )
            candidates.sort()
            neg_p, head_id, _, tail_id, rtype, prob, none_prob = candidates[0]
            if prob >= tau and prob > none_prob:
                predictions.append(RelationPrediction(head=head_id, tail=tail_id, rtype=rtype, prob=prob))
    return predictions


# ---------------------------------------------------------------------------
# training


DEFAULTS = {
    "lr": 1e-3,
    "batch_size": 8,
    "max_epochs": 50,
    "patience": 5,
    "none_ratio": 5,
    "tau": 0.5,
    "mixer": False,
}


def build_training_rows(sentences: list[AnnotatedSentence]) -> list[tuple[int, str, str, int]]:
    """(sentence index, anchor id, other id, label index) supervision rows.

    Each (anchor, other) pair yields one row per gold directed relation
    touching it (both-direction annotation gives two rows), else a NONE row.
    Two different relation types on one ordered pair violate the schema.
    """
    label_index = {label: i for i, label in enumerate(LABEL_SPACE)}
    rows: list[tuple[int, str, str, int]] = []
    for si, sent in enumerate(sentences):
        directed: dict[tuple[str, str], set[str]] = {}
        for rel in sent.relations:
            directed.setdefault((rel.head, rel.tail), set()).add(rel.rtype)
        for pair, types in directed.items():
            if len(types) > 1:
                raise ValueError(
                    f"entities {pair[0]} and {pair[1]} in {sent.doc_id}#{sent.sent_index} carry multiple relation types {sorted(types)}"
                )
        for anchor, other in candidate_pairs(sent.entities):
            labels = []
            for t in directed.get((anchor.id, other.id), ()):
                labels.append(label_index[f"{t}->"])
            for t in directed.get((other.id, anchor.id), ()):
                labels.append(label_index[f"{t}<-"])
            if labels:
                rows.extend((si, anchor.id, other.id, li) for li in labels)
            else:
                rows.append((si, anchor.id, other.id, 0))
    return rows


def _group_rows(rows: list[tuple[int, str, str, int]]) -> list[tuple[tuple[int, str], list[tuple[str, int]]]]:
    groups: dict[tuple[int, str], list[tuple[str, int]]] = {}
    for si, anchor_id, other_id, li in rows:
        groups.setdefault((si, anchor_id), []).append((other_id, li))
    return sorted(groups.items())


def _forward_backward_group(
    model: RelModel,
    sentence: AnnotatedSentence,
    anchor_id: str,
    members: list[tuple[str, int]],
    source,
    grads: dict[str, np.ndarray],
    train_table: bool,
) -> float:
    """Accumulate gradients for all rows sharing one anchor pass; returns loss."""
    entities = sentence.entities
    by_id = {e.id: e for e in entities}
    anchor = by_id[anchor_id]
    aug, mixed, cache = _anchor_matrix(sentence, entities, anchor_id, model, source)
    d_mixed = np.zeros_like(mixed)
    loss = 0.0
    dim = model.dim
    for other_id, gold_li in members:
        other = by_id[other_id]
        x = _pair_input(mixed, sentence, anchor, other)
        p = _softmax(x @ model.W + model.b)
        loss -= float(np.log(max(p[gold_li], 1e-300)))
        d_logits = p.copy()
        d_logits[gold_li] -= 1.0
        grads["W"] += np.outer(x, d_logits)
        grads["b"] += d_logits
        dx = model.W @ d_logits
        l1, r1 = _boundary_indices(sentence, anchor)
        l2, r2 = _boundary_indices(sentence, other)
        d_mixed[l1] += dx[:dim]
        d_mixed[r1] += dx[dim : 2 * dim]
        d_mixed[l2] += dx[2 * dim : 3 * dim]
        d_mixed[r2] += dx[3 * dim :]
    if model.mixer is not None:
        d_aug, mixer_grads = model.mixer.backward(cache, d_mixed)
        for key, g in mixer_grads.items():
            grads[f"mixer_{key}"] += g
    else:
        d_aug = d_mixed
    for ent in entities:
        i, j = token_span(sentence, ent)
        row_sum = d_aug[i:j].sum(axis=0)
        grads["marker_types"][model.marker.type_row(ent.etype)] += row_sum
        if ent.id == anchor_id:
            grads["marker_anchor"] += row_sum
    if train_table:
        np.add.at(grads["table"], source.indices(sentence), d_aug)
    return loss


def _dev_f1(model: RelModel, dev: list[AnnotatedSentence], source, tau: float) -> float:
    pairs = []
    for sent in dev:
        preds = predict_relations(sent, sent.entities, model, source, tau=tau)
        pred_rels = [Relation(f"P{i + 1}", p.rtype, p.head, p.tail) for i, p in enumerate(preds)]
        pairs.append((sent.relations, pred_rels))
    return corpus_relation_prf(pairs, labeled=True).f1


def train_rel(
    train: list[AnnotatedSentence],
    dev: list[AnnotatedSentence],
    source,
    config: dict | None = None,
    seed: int = 0,
) -> tuple[RelModel, list[dict]]:
    """Cross-entropy training over anchored pair rows with NONE downsampling.

    Per epoch, NONE rows are resampled down to none_ratio per positive row;
    early stopping tracks dev labeled relation F1 with the configured tau.
    """
    if not train:
        raise ValueError("training set is empty")
    cfg = dict(DEFAULTS)
    cfg.update(config or {})
    dim = source.dim
    model = init_rel_model(dim, seed=seed, use_mixer=cfg["mixer"])
    model.training_config = dict(cfg)
    model.source_config = source.config()

    all_rows = build_training_rows(train)
    pos_rows = [r for r in all_rows if r[3] != 0]
    none_rows = [r for r in all_rows if r[3] == 0]

    params = {
        "W": model.W,
        "b": model.b,
        "marker_types": model.marker.type_embeddings,
        "marker_anchor": model.marker.anchor_embedding,
    }
    if model.mixer is not None:
        params["mixer_A"] = model.mixer.A
        params["mixer_B"] = model.mixer.B
        params["mixer_C"] = model.mixer.C
        params["mixer_b"] = model.mixer.b
    train_table = bool(getattr(source, "trainable", False))
    if train_table:
        params["table"] = source.table

    optimizer = Adam(lr=cfg["lr"])
    rng = np.random.default_rng(seed)
    history: list[dict] = []
    best_f1 = -1.0
    best_params = None
    since_best = 0

    for epoch in range(cfg["max_epochs"]):
        if pos_rows and none_rows:
            quota = min(len(none_rows), cfg["none_ratio"] * len(pos_rows))
            keep = rng.choice(len(none_rows), size=quota, replace=False)
            epoch_rows = pos_rows + [none_rows[int(i)] for i in sorted(keep)]
        else:
            epoch_rows = pos_rows + none_rows
        groups = _group_rows(epoch_rows)
        order = rng.permutation(len(groups))
        epoch_loss = 0.0
        pending = 0
        grads = {name: np.zeros_like(p) for name, p in params.items()}
        for gi in order:
            (si, anchor_id), members = groups[int(gi)]
            epoch_loss += _forward_backward_group(
                model, train[si], anchor_id, members, source, grads, train_table
            )
            pending += len(members)
            if pending >= cfg["batch_size"]:
                for name in grads:
                    grads[name] /= pending
                optimizer.step(params, grads)
                grads = {name: np.zeros_like(p) for name, p in params.items()}
                pending = 0
        if pending:
            for name in grads:
                grads[name] /= pending
            optimizer.step(params, grads)

        f1 = _dev_f1(model, dev, source, cfg["tau"])
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


def save_rel(model: RelModel, path: str) -> None:
    doc = {
        "format": "rel-v1",
        "tool_version": __version__,
        "dim": model.dim,
        "label_space": list(model.label_space),
        "W": [float(v) for v in model.W.ravel()],
        "b": [float(v) for v in model.b],
        "marker_table": {
            "types": list(model.marker.types),
            "type_embeddings": [float(v) for v in model.marker.type_embeddings.ravel()],
            "anchor_embedding": [float(v) for v in model.marker.anchor_embedding],
        },
        "mixer": model.mixer.config() if model.mixer is not None else None,
        "source_config": model.source_config,
        "training_config": model.training_config,
        "seed": model.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_rel(path: str) -> RelModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "rel-v1":
        raise ValueError(f"{path}: not a rel-v1 model file")
    dim = doc["dim"]
    label_space = tuple(doc["label_space"])
    mt = doc["marker_table"]
    marker = MarkerTable(
        types=tuple(mt["types"]),
        type_embeddings=np.asarray(mt["type_embeddings"], dtype=float).reshape(len(mt["types"]), dim),
        anchor_embedding=np.asarray(mt["anchor_embedding"], dtype=float),
    )
    mixer = Mixer.from_config(dim, doc["mixer"]) if doc["mixer"] is not None else None
    return RelModel(
        dim=dim,
        label_space=label_space,
        W=np.asarray(doc["W"], dtype=float).reshape(4 * dim, len(label_space)),
        b=np.asarray(doc["b"], dtype=float),
        marker=marker,
        mixer=mixer,
        source_config=doc["source_config"],
        training_config=doc["training_config"],
        seed=doc["seed"],
    )


def source_for_model(model: RelModel, store=None):
    return source_from_config(model.source_config, store=store)
