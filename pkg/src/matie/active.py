"""Sentence selection for annotation: FULL / RAND / AL strategies, token-cost
accounting, and learning-curve simulation over annotation cycles.

Uncertainty defaults to mean per-token marginal entropy; selection takes the
top ratio share of each abstract's sentences, cost is counted in tokens, and
curves retrain the tagger from scratch each cycle so runs stay comparable.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedSentence, span_surface
from .crf import (
    CrfModel,
    dev_entity_f1,
    init_model,
    log_partition,
    marginals,
    sequence_score,
    train_ner,
    viterbi,
)
from .encoder import TrainableEmbeddingSource, represent
from .labels import BIO_TAGS

STRATEGIES = ("FULL", "RAND", "AL")


@dataclass
class SelectionPlan:
    cycle: int
    strategy: str
    ratio: float
    chosen: list[tuple[str, int]]
    cost_tokens: int


@dataclass
class CurvePoint:
    strategy: str
    seed: int
    cycle: int
    cumulative_cost_tokens: int
    dev_f1_entity: float
    dev_f1_relation: float | None = None


def sentence_uncertainty(sentence: AnnotatedSentence, model: CrfModel, source, method: str = "entropy") -> float:
    """Length-normalized model uncertainty for one sentence.

    "entropy": mean per-token marginal entropy; "viterbi": one minus the
    probability of the Viterbi path.
    """
    if not sentence.tokens:
        return 0.0
    emissions = model.emissions(represent(sentence, source))
    if method == "entropy":
        p = marginals(model, emissions)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(p), 0.0)
        return float(-terms.sum() / emissions.shape[0])
    if method == "viterbi":
        path = viterbi(model, emissions)
        best = sequence_score(model, emissions, np.asarray(path))
        return float(1.0 - math.exp(best - log_partition(model, emissions)))
    raise ValueError(f"unknown uncertainty method {method!r}")


def _by_doc(sentences: list[AnnotatedSentence]) -> dict[str, list[AnnotatedSentence]]:
    docs: dict[str, list[AnnotatedSentence]] = {}
    for sent in sentences:
        docs.setdefault(sent.doc_id, []).append(sent)
    return docs


def select(
    abstracts: dict[str, list[AnnotatedSentence]],
    strategy: str,
    ratio: float = 0.40,
    model: CrfModel | None = None,
    source=None,
    seed: int = 0,
    cycle: int = 0,
    uncertainty_method: str = "entropy",
) -> SelectionPlan:
    """Choose sentences from each abstract of one cycle.

    FULL takes everything; RAND samples ceil(ratio * n) uniformly per
    abstract; AL takes the ceil(ratio * n) most uncertain per abstract, ties
    resolved by (doc_id, sent_index).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    if strategy == "AL" and (model is None or source is None):
        raise ValueError("AL selection requires a trained model and its representation source")

    chosen: list[tuple[str, int]] = []
    cost = 0
    rng = random.Random(seed)
    for doc_id in sorted(abstracts):
        sents = abstracts[doc_id]
        if strategy == "FULL":
            picked = list(sents)
        else:
            k = math.ceil(ratio * len(sents))
            if strategy == "RAND":
                picked = [sents[i] for i in sorted(rng.sample(range(len(sents)), k))]
            else:
                scored = sorted(
                    sents,
                    key=lambda s: (-sentence_uncertainty(s, model, source, uncertainty_method), s.doc_id, s.sent_index),
                )
                picked = scored[:k]
        for sent in picked:
            chosen.append((sent.doc_id, sent.sent_index))
            cost += len(sent.tokens)
    chosen.sort()
    return SelectionPlan(cycle=cycle, strategy=strategy, ratio=ratio, chosen=chosen, cost_tokens=cost)


def _train_seed(seed: int, cycle: int) -> int:
    # strategy-independent so FULL and RAND(1.0) trace identical curves
    return (seed * 100003 + cycle * 7919 + 1) % (2**31)


def simulate_curve(
    sentences: list[AnnotatedSentence],
    dev: list[AnnotatedSentence],
    strategy: str,
    seeds: list[int],
    ratio: float = 0.40,
    cycle_size: int = 4,
    train_config: dict | None = None,
    dim: int = 16,
    shuffle_cycles: bool = False,
    uncertainty_method: str = "entropy",
) -> list[CurvePoint]:
    """Learning curves: reveal sentences cycle by cycle, retrain from scratch,
    record dev entity F1 against cumulative annotation cost in tokens.

    Abstracts are consumed ``cycle_size`` at a time in corpus order (or a
    seed-shuffled order); AL scores sentences with the previous cycle's model,
    falling back to an all-zero model (uniform marginals) on the first cycle.
    """
    if not dev:
        raise ValueError("dev set is empty")
    docs = _by_doc(sentences)
    doc_order = list(docs)
    points: list[CurvePoint] = []
    cfg = dict(train_config or {})

    for seed in seeds:
        order = list(doc_order)
        if shuffle_cycles:
            random.Random(seed).shuffle(order)
        pool: list[AnnotatedSentence] = []
        cumulative = 0
        model = None
        source = None
        for cycle, start in enumerate(range(0, len(order), cycle_size)):
            cycle_docs = {d: docs[d] for d in order[start : start + cycle_size]}
            if strategy == "AL" and model is None:
                empty_source = TrainableEmbeddingSource([], dim, seed=0)
                zero = init_model(BIO_TAGS, dim, empty_source.config(), seed=None)
                plan = select(cycle_docs, strategy, ratio, zero, empty_source, seed=seed, cycle=cycle,
                              uncertainty_method=uncertainty_method)
            else:
                plan = select(cycle_docs, strategy, ratio, model, source, seed=seed + cycle, cycle=cycle,
                              uncertainty_method=uncertainty_method)
            chosen_keys = set(plan.chosen)
            pool.extend(s for d in cycle_docs.values() for s in d if (s.doc_id, s.sent_index) in chosen_keys)
            cumulative += plan.cost_tokens

            tseed = _train_seed(seed, cycle)
            source = TrainableEmbeddingSource.from_sentences(pool, dim, seed=tseed)
            model, _ = train_ner(pool, dev, source, cfg, seed=tseed)
            f1 = dev_entity_f1(model, dev, source)
            points.append(
                CurvePoint(
                    strategy=strategy,
                    seed=seed,
                    cycle=cycle,
                    cumulative_cost_tokens=cumulative,
                    dev_f1_entity=f1,
                )
            )
    return points


def curve_to_csv(points: list[CurvePoint], meta_comment: str | None = None) -> str:
    """CSV rows with the standard curve header; optional leading # comment."""
    lines = []
    if meta_comment is not None:
        lines.append(f"# {meta_comment}")
    lines.append("strategy,seed,cycle,cumulative_cost_tokens,entity_dev_f1,relation_dev_f1")
    for p in points:
        rel = "" if p.dev_f1_relation is None else f"{p.dev_f1_relation:.6f}"
        lines.append(f"{p.strategy},{p.seed},{p.cycle},{p.cumulative_cost_tokens},{p.dev_f1_entity:.6f},{rel}")
    return "\n".join(lines) + "\n"


def worklist_jsonl(plan: SelectionPlan, sentences: list[AnnotatedSentence]) -> str:
    """Annotator hand-off: JSON Lines of {doc_id, sent_index, text}."""
    by_key = {(s.doc_id, s.sent_index): s for s in sentences}
    lines = []
    for key in plan.chosen:
        sent = by_key[key]
        text = span_surface(sent.tokens, 0, len(sent.tokens))
        lines.append(
            json.dumps(
                {"doc_id": key[0], "sent_index": key[1], "text": text},
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"
