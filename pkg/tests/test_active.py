"""Selection strategies and learning-curve simulation.

Uncertainty values are checked against full sequence enumeration; RAND plans
against a from-scratch reimplementation of the per-abstract sampler; curve
equivalences (FULL vs RAND at ratio 1.0) must hold exactly, float for float.
"""

import math
import random

import numpy as np
import pytest

import matie.active as active
from matie.active import (
    CurvePoint,
    SelectionPlan,
    curve_to_csv,
    select,
    sentence_uncertainty,
    simulate_curve,
    worklist_jsonl,
)
from matie.crf import init_model
from matie.encoder import represent
from matie.labels import BIO_TAGS

from conftest import StubSource, mk_sent
from oracle_utils import enum_marginals, enumerate_scores

FLAT3 = ("O", "B-Material", "B-Number")  # no I- tags: all transitions allowed
FLAT4 = ("O", "B-Material", "B-Number", "B-Operation")


def flat_zero_model(tagset=FLAT3, dim=3):
    return init_model(tagset, dim=dim, seed=None)


# ---------------------------------------------------------------------------
# sentence_uncertainty


@pytest.mark.parametrize("tagset", [FLAT3, FLAT4])
def test_uncertainty_uniform_model_gives_log_k(tagset):
    # zero weights and no I- tags: every token's marginal is exactly uniform
    model = flat_zero_model(tagset)
    source = StubSource(dim=3)
    for n in (1, 2, 5):
        sent = mk_sent([f"w{i}" for i in range(n)])
        h = sentence_uncertainty(sent, model, source)
        assert abs(h - math.log(len(tagset))) < 1e-12


def test_uncertainty_entropy_matches_enumeration():
    tagset = ("O", "B-Material", "I-Material", "B-Number", "I-Number")
    rng = np.random.default_rng(7)
    for trial in range(10):
        model = init_model(tagset, dim=4, seed=trial)
        model.transitions[:] = rng.normal(size=model.transitions.shape)
        model.begin[:] = rng.normal(size=model.begin.shape)
        model.end[:] = rng.normal(size=model.end.shape)
        words = [f"t{i}" for i in range(int(rng.integers(1, 5)))]
        source = StubSource(dim=4, rows={w: rng.normal(size=4) for w in words})
        sent = mk_sent(words)

        p = enum_marginals(model, model.emissions(represent(sent, source)))
        with np.errstate(divide="ignore", invalid="ignore"):
            expected = float(-(np.where(p > 0, p * np.log(p), 0.0)).sum() / len(words))
        got = sentence_uncertainty(sent, model, source)
        assert abs(got - expected) < 1e-10


def test_uncertainty_peaked_model_near_zero():
    model = flat_zero_model()
    model.emission_weights[:] = 50.0 * np.eye(3)
    source = StubSource(dim=3, rows={"a": [0, 1, 0], "b": [0, 1, 0]})
    h = sentence_uncertainty(mk_sent(["a", "b", "a"]), model, source)
    assert 0.0 <= h < 1e-8


def test_uncertainty_viterbi_method_uniform():
    # every one of the 3^n paths ties, so the decoded path has mass 3^-n
    model = flat_zero_model()
    source = StubSource(dim=3)
    sent = mk_sent(["w0", "w1", "w2", "w3"])
    got = sentence_uncertainty(sent, model, source, method="viterbi")
    assert abs(got - (1.0 - 3.0 ** -4)) < 1e-12


def test_uncertainty_viterbi_method_matches_enumeration():
    tagset = ("O", "B-Material", "I-Material")
    rng = np.random.default_rng(11)
    for trial in range(10):
        model = init_model(tagset, dim=3, seed=100 + trial)
        model.transitions[:] = rng.normal(size=model.transitions.shape)
        words = [f"t{i}" for i in range(int(rng.integers(1, 5)))]
        source = StubSource(dim=3, rows={w: rng.normal(size=3) for w in words})
        sent = mk_sent(words)

        _, scores = enumerate_scores(model, model.emissions(represent(sent, source)))
        from scipy.special import logsumexp

        expected = 1.0 - float(np.exp(scores.max() - logsumexp(scores)))
        got = sentence_uncertainty(sent, model, source, method="viterbi")
        assert abs(got - expected) < 1e-10


def test_uncertainty_empty_sentence_is_zero():
    assert sentence_uncertainty(mk_sent([]), flat_zero_model(), StubSource(dim=3)) == 0.0


def test_uncertainty_unknown_method():
    with pytest.raises(ValueError, match="unknown uncertainty method"):
        sentence_uncertainty(mk_sent(["a"]), flat_zero_model(), StubSource(dim=3), method="margin")


# ---------------------------------------------------------------------------
# select


def abstracts_fixture():
    docs = {}
    for doc_id, n_sents, n_toks in (("d1", 3, 2), ("d2", 2, 4), ("d3", 1, 3)):
        docs[doc_id] = [
            mk_sent([f"{doc_id}w{j}" for j in range(n_toks)], doc_id=doc_id, sent_index=i)
            for i in range(n_sents)
        ]
    return docs


def test_select_full_takes_everything():
    docs = abstracts_fixture()
    plan = select(docs, "FULL", cycle=3)
    assert plan.strategy == "FULL"
    assert plan.cycle == 3
    assert plan.chosen == [
        ("d1", 0), ("d1", 1), ("d1", 2),
        ("d2", 0), ("d2", 1),
        ("d3", 0),
    ]
    assert plan.cost_tokens == 3 * 2 + 2 * 4 + 1 * 3


def test_select_rand_matches_reference_sampler():
    # abstracts must be consumed in sorted doc order for the stream to line up
    docs = abstracts_fixture()
    for seed in range(6):
        for ratio in (0.34, 0.5, 0.75):
            plan = select(docs, "RAND", ratio=ratio, seed=seed)

            rng = random.Random(seed)
            expected, cost = [], 0
            for doc_id in sorted(docs):
                sents = docs[doc_id]
                k = math.ceil(ratio * len(sents))
                for i in sorted(rng.sample(range(len(sents)), k)):
                    expected.append((doc_id, sents[i].sent_index))
                    cost += len(sents[i].tokens)
            assert plan.chosen == sorted(expected)
            assert plan.cost_tokens == cost


def test_select_rand_deterministic_and_seed_sensitive():
    docs = {
        "d1": [mk_sent([f"w{j}" for j in range(3)], doc_id="d1", sent_index=i) for i in range(10)]
    }
    base = select(docs, "RAND", ratio=0.3, seed=0)
    assert select(docs, "RAND", ratio=0.3, seed=0).chosen == base.chosen
    assert any(select(docs, "RAND", ratio=0.3, seed=s).chosen != base.chosen for s in range(1, 6))


def test_select_rand_ratio_one_equals_full():
    docs = abstracts_fixture()
    rand = select(docs, "RAND", ratio=1.0, seed=9)
    full = select(docs, "FULL")
    assert rand.chosen == full.chosen
    assert rand.cost_tokens == full.cost_tokens


def test_select_al_picks_most_uncertain():
    model = flat_zero_model()
    model.emission_weights[:] = 50.0 * np.eye(3)
    peaked = {"sure": [0, 1, 0]}  # rows drive tag 1 hard; unseen tokens stay uniform
    source = StubSource(dim=3, rows=peaked)
    docs = {
        "d1": [
            mk_sent(["sure", "sure"], doc_id="d1", sent_index=0),
            mk_sent(["novel", "novel"], doc_id="d1", sent_index=1),
            mk_sent(["sure", "sure"], doc_id="d1", sent_index=2),
        ],
        "d0": [mk_sent(["sure"], doc_id="d0", sent_index=0)],
    }
    plan = select(docs, "AL", ratio=0.4, model=model, source=source)
    # d1: k = ceil(1.2) = 2 -> the uniform sentence wins, then the tie between
    # the two peaked ones resolves by sent_index; d0: k = 1 takes its only one
    assert plan.chosen == [("d0", 0), ("d1", 0), ("d1", 1)]


def test_select_al_all_ties_resolve_by_sent_index():
    # equal-length sentences under a zero model score identically (same float
    # computation), so the tie break on sent_index is fully exercised
    model = flat_zero_model()
    source = StubSource(dim=3)
    docs = {
        "d1": [mk_sent(["w0", "w1"], doc_id="d1", sent_index=i) for i in range(4)]
    }
    plan = select(docs, "AL", ratio=0.5, model=model, source=source)
    assert plan.chosen == [("d1", 0), ("d1", 1)]


def test_select_al_requires_model_and_source():
    docs = abstracts_fixture()
    with pytest.raises(ValueError, match="requires a trained model"):
        select(docs, "AL", ratio=0.5)
    with pytest.raises(ValueError, match="requires a trained model"):
        select(docs, "AL", ratio=0.5, model=flat_zero_model(), source=None)


def test_select_validates_strategy_and_ratio():
    docs = abstracts_fixture()
    with pytest.raises(ValueError, match="unknown strategy"):
        select(docs, "GREEDY")
    for ratio in (0.0, -0.3, 1.2):
        with pytest.raises(ValueError, match="ratio"):
            select(docs, "RAND", ratio=ratio)


def test_select_al_invariant_under_monotone_score_transform(monkeypatch):
    # ranking only depends on score order, so exp() must not change the plan
    docs = abstracts_fixture()
    base = {
        ("d1", 0): 0.2, ("d1", 1): 1.4, ("d1", 2): -0.7,
        ("d2", 0): 0.9, ("d2", 1): 0.3,
        ("d3", 0): 0.0,
    }

    def fixed(sent, model, source, method="entropy"):
        return base[(sent.doc_id, sent.sent_index)]

    monkeypatch.setattr(active, "sentence_uncertainty", fixed)
    plan_raw = select(docs, "AL", ratio=0.5, model=object(), source=object())

    def warped(sent, model, source, method="entropy"):
        return math.exp(base[(sent.doc_id, sent.sent_index)])

    monkeypatch.setattr(active, "sentence_uncertainty", warped)
    plan_exp = select(docs, "AL", ratio=0.5, model=object(), source=object())

    assert plan_raw.chosen == plan_exp.chosen
    assert plan_raw.chosen == [("d1", 0), ("d1", 1), ("d2", 0), ("d3", 0)]


def test_select_chosen_sorted_and_duplicate_free():
    docs = abstracts_fixture()
    for strategy in ("FULL", "RAND"):
        plan = select(docs, strategy, ratio=0.5, seed=4)
        assert plan.chosen == sorted(set(plan.chosen))


# ---------------------------------------------------------------------------
# simulate_curve


def curve_corpus(n_docs=4, sents_per_doc=2):
    sentences, dev = [], []
    for d in range(n_docs):
        doc_id = f"a{d}"
        for i in range(sents_per_doc):
            sentences.append(
                mk_sent(
                    ["sample", f"m{d}", "tested"],
                    ents=[(f"E{d}_{i}", "Material", 1, 2)],
                    doc_id=doc_id,
                    sent_index=i,
                )
            )
    for d in range(2):
        dev.append(
            mk_sent(
                ["sample", f"m{d}", "tested"],
                ents=[(f"D{d}", "Material", 1, 2)],
                doc_id=f"dev{d}",
                sent_index=0,
            )
        )
    return sentences, dev


FAST_CFG = {"max_epochs": 2, "lr": 0.05, "batch_size": 8}


def test_curve_structure_and_cost_accounting():
    sentences, dev = curve_corpus()
    points = simulate_curve(sentences, dev, "FULL", seeds=[0, 1], cycle_size=2,
                            train_config=FAST_CFG, dim=4)
    assert len(points) == 4  # 2 seeds x 2 cycles
    per_cycle = 2 * 2 * 3  # two docs of two 3-token sentences per cycle
    for seed in (0, 1):
        mine = [p for p in points if p.seed == seed]
        assert [p.cycle for p in mine] == [0, 1]
        assert [p.cumulative_cost_tokens for p in mine] == [per_cycle, 2 * per_cycle]
        for p in mine:
            assert p.strategy == "FULL"
            assert 0.0 <= p.dev_f1_entity <= 1.0
            assert p.dev_f1_relation is None


def test_curve_full_and_rand_ratio_one_coincide_pointwise():
    sentences, dev = curve_corpus()
    full = simulate_curve(sentences, dev, "FULL", seeds=[3], cycle_size=2,
                          train_config=FAST_CFG, dim=4)
    rand = simulate_curve(sentences, dev, "RAND", seeds=[3], ratio=1.0, cycle_size=2,
                          train_config=FAST_CFG, dim=4)
    assert len(full) == len(rand)
    for a, b in zip(full, rand):
        assert a.cycle == b.cycle
        assert a.cumulative_cost_tokens == b.cumulative_cost_tokens
        assert a.dev_f1_entity == b.dev_f1_entity  # exact: same pool, same seeds


def test_curve_al_first_cycle_scores_with_blank_model(monkeypatch):
    sentences, dev = curve_corpus()
    weight_mass_by_cycle = {}
    orig = active.sentence_uncertainty

    def spy(sent, model, source, method="entropy"):
        cycle = 0 if sent.doc_id in ("a0", "a1") else 1
        weight_mass_by_cycle.setdefault(cycle, set()).add(float(np.abs(model.emission_weights).sum()))
        return orig(sent, model, source, method)

    monkeypatch.setattr(active, "sentence_uncertainty", spy)
    points = simulate_curve(sentences, dev, "AL", seeds=[0], ratio=0.5, cycle_size=2,
                            train_config=FAST_CFG, dim=4)
    assert len(points) == 2
    assert weight_mass_by_cycle[0] == {0.0}  # before any training: all-zero weights
    assert all(m > 0.0 for m in weight_mass_by_cycle[1])


def test_curve_shuffle_cycles_follows_seeded_doc_order():
    sentences = []
    widths = {"a": 2, "b": 3, "c": 4, "d": 5}
    for doc_id, n in widths.items():
        sentences.append(
            mk_sent([f"{doc_id}{j}" for j in range(n)],
                    ents=[(f"E{doc_id}", "Material", 0, 1)],
                    doc_id=doc_id, sent_index=0)
        )
    _, dev = curve_corpus()

    order = list(widths)
    random.Random(5).shuffle(order)
    assert order != sorted(widths)  # seed chosen so the shuffle actually moves docs
    expected = np.cumsum([widths[d] for d in order]).tolist()

    points = simulate_curve(sentences, dev, "FULL", seeds=[5], cycle_size=1,
                            train_config={"max_epochs": 1, "lr": 0.05}, dim=4,
                            shuffle_cycles=True)
    assert [p.cumulative_cost_tokens for p in points] == expected


def test_curve_empty_dev_rejected():
    sentences, _ = curve_corpus()
    with pytest.raises(ValueError, match="dev set is empty"):
        simulate_curve(sentences, [], "FULL", seeds=[0])


# ---------------------------------------------------------------------------
# outputs


def test_curve_csv_layout():
    points = [
        CurvePoint("AL", 7, 0, 120, 0.5, None),
        CurvePoint("AL", 7, 1, 260, 0.625, 0.25),
    ]
    assert curve_to_csv(points) == (
        "strategy,seed,cycle,cumulative_cost_tokens,entity_dev_f1,relation_dev_f1\n"
        "AL,7,0,120,0.500000,\n"
        "AL,7,1,260,0.625000,0.250000\n"
    )
    with_meta = curve_to_csv(points[:1], meta_comment="ratio=0.4 cycle_size=4")
    assert with_meta.startswith("# ratio=0.4 cycle_size=4\nstrategy,seed,")


def test_worklist_jsonl_layout():
    sents = [
        mk_sent(["Steel", "melts", "."], doc_id="d1", sent_index=0),
        mk_sent(["See", "above"], doc_id="d2", sent_index=1),
    ]
    plan = SelectionPlan(cycle=0, strategy="RAND", ratio=0.5,
                         chosen=[("d1", 0), ("d2", 1)], cost_tokens=5)
    out = worklist_jsonl(plan, sents)
    assert out == (
        '{"doc_id":"d1","sent_index":0,"text":"Steel melts ."}\n'
        '{"doc_id":"d2","sent_index":1,"text":"See above"}\n'
    )
