"""Span-level scoring: COR/INC/PAR/MIS/SPU assignment, exact/relaxed/overlap
regimes, labeled and unlabeled P/R/F1, relation scoring, per-type breakdowns.

Category definitions: COR = exact span and type agreement; INC = exact span,
wrong type; PAR = boundary overlap; MIS = gold with no counterpart; SPU =
prediction with no counterpart.

Note on formulas: INC counts only toward the precision denominator, never the
recall denominator (precision = COR/(COR+INC+SPU), recall = COR/(COR+PAR+MIS)).
This is deliberate and differs from scorers that treat a wrong-type prediction
as both a false positive and a false negative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .corpus import Entity, Relation

CATEGORIES = ("COR", "INC", "PAR", "MIS", "SPU")

REGIMES = ("exact", "relaxed", "overlap")

_WS_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class Pair:
    gold: Entity | None
    pred: Entity | None
    category: str


@dataclass
class EvalReport:
    regime: str
    labeled: bool
    counts: dict[str, int]
    precision: float
    recall: float
    f1: float
    per_type: list[dict] | None = None

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime,
            "labeled": self.labeled,
            "counts": dict(self.counts),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.per_type is not None:
            out["per_type"] = self.per_type
        return out


def _check_non_overlapping(entities: list[Entity]) -> None:
    ordered = sorted(entities, key=lambda e: (e.start, e.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValueError(f"overlapping gold entities {a.id} and {b.id}")


def _sort_key(e: Entity) -> tuple:
    return (e.start, e.end, e.etype, e.id)


def classify_errors(gold: list[Entity], pred: list[Entity]) -> list[Pair]:
    """One-to-one assignment of gold and predicted entities into categories.

    Stages: exact span+type matches become COR; among the rest, exact-span
    pairs become INC; remaining overlapping pairs become PAR, assigned
    greedily by descending character overlap with ties broken by earliest
    gold start, then earliest pred start; leftovers are MIS and SPU.
    """
    _check_non_overlapping(gold)
    gold = sorted(gold, key=_sort_key)
    pred = sorted(pred, key=_sort_key)
    gold_free = [True] * len(gold)
    pred_free = [True] * len(pred)
    pairs: list[Pair] = []

    by_exact: dict[tuple, list[int]] = {}
    for gi, g in enumerate(gold):
        by_exact.setdefault((g.start, g.end, g.etype), []).append(gi)
    for pi, p in enumerate(pred):
        bucket = by_exact.get((p.start, p.end, p.etype))
        while bucket:
            gi = bucket.pop(0)
            if gold_free[gi]:
                gold_free[gi] = False
                pred_free[pi] = False
                pairs.append(Pair(gold[gi], p, "COR"))
                break

    by_span: dict[tuple, list[int]] = {}
    for gi, g in enumerate(gold):
        if gold_free[gi]:
            by_span.setdefault((g.start, g.end), []).append(gi)
    for pi, p in enumerate(pred):
        if not pred_free[pi]:
            continue
        bucket = by_span.get((p.start, p.end))
        while bucket:
            gi = bucket.pop(0)
            if gold_free[gi]:
                gold_free[gi] = False
                pred_free[pi] = False
                pairs.append(Pair(gold[gi], p, "INC"))
                break

    candidates = []
    for gi, g in enumerate(gold):
        if not gold_free[gi]:
            continue
        for pi, p in enumerate(pred):
            if not pred_free[pi]:
                continue
            overlap = min(g.end, p.end) - max(g.start, p.start)
            if overlap > 0:
                candidates.append((-overlap, g.start, p.start, g.end, p.end, g.id, p.id, gi, pi))
    for cand in sorted(candidates):
        gi, pi = cand[7], cand[8]
        if gold_free[gi] and pred_free[pi]:
            gold_free[gi] = False
            pred_free[pi] = False
            pairs.append(Pair(gold[gi], pred[pi], "PAR"))

    for gi, g in enumerate(gold):
        if gold_free[gi]:
            pairs.append(Pair(g, None, "MIS"))
    for pi, p in enumerate(pred):
        if pred_free[pi]:
            pairs.append(Pair(None, p, "SPU"))
    return pairs


def surfaces_contain(a: str, b: str) -> bool:
    """Substring containment either way, whitespace runs collapsed, case kept."""
    a2 = _WS_RUN.sub(" ", a)
    b2 = _WS_RUN.sub(" ", b)
    return a2 in b2 or b2 in a2


def apply_regime(pairs: list[Pair], regime: str) -> list[Pair]:
    """Reclassify PAR pairs as COR per the chosen regime.

    relaxed: surfaces in a containment relation and matching types.
    overlap: matching types (the overlap itself already holds for PAR).
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "exact":
        return list(pairs)
    out = []
    for pair in pairs:
        if pair.category == "PAR" and pair.gold.etype == pair.pred.etype:
            if regime == "overlap" or surfaces_contain(pair.gold.surface, pair.pred.surface):
                pair = Pair(pair.gold, pair.pred, "COR")
        out.append(pair)
    return out


def count_categories(pairs: list[Pair]) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for pair in pairs:
        counts[pair.category] += 1
    return counts


def prf_from_counts(counts: dict[str, int]) -> tuple[float, float, float]:
    cor = counts["COR"]
    p_den = cor + counts["INC"] + counts["SPU"]
    r_den = cor + counts["PAR"] + counts["MIS"]
    precision = cor / p_den if p_den else 0.0
    recall = cor / r_den if r_den else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _erase_types(entities: list[Entity]) -> list[Entity]:
    return [replace(e, etype="_") for e in entities]


def evaluate_entities(
    gold: list[Entity], pred: list[Entity], regime: str = "exact", labeled: bool = True
) -> EvalReport:
    """End-to-end scoring of one entity set pair."""
    return corpus_entity_prf([(gold, pred)], regime=regime, labeled=labeled)


def corpus_entity_prf(
    sentence_pairs: list[tuple[list[Entity], list[Entity]]],
    regime: str = "exact",
    labeled: bool = True,
) -> EvalReport:
    """Micro-averaged scoring over per-sentence (gold, pred) pairs."""
    counts = {c: 0 for c in CATEGORIES}
    for gold, pred in sentence_pairs:
        if not labeled:
            gold, pred = _erase_types(gold), _erase_types(pred)
        pairs = apply_regime(classify_errors(gold, pred), regime)
        for cat, n in count_categories(pairs).items():
            counts[cat] += n
    precision, recall, f1 = prf_from_counts(counts)
    return EvalReport(regime, labeled, counts, precision, recall, f1)


# ---------------------------------------------------------------------------
# relations


@dataclass
class RelationReport:
    labeled: bool
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "labeled": self.labeled,
            "counts": {"TP": self.tp, "FP": self.fp, "FN": self.fn},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def relation_prf(
    gold: list[Relation],
    pred: list[Relation],
    labeled: bool = True,
    known_ids: set[str] | None = None,
) -> RelationReport:
    """Set-based scoring of directed relation triples against gold.

    Labeled compares (head, tail, type); unlabeled compares (head, tail).
    """
    if known_ids is not None:
        for rel in pred:
            for ref in (rel.head, rel.tail):
                if ref not in known_ids:
                    raise ValueError(f"prediction {rel.id} references unknown entity {ref}")
    if labeled:
        gold_set = {(r.head, r.tail, r.rtype) for r in gold}
        pred_set = {(r.head, r.tail, r.rtype) for r in pred}
    else:
        gold_set = {(r.head, r.tail) for r in gold}
        pred_set = {(r.head, r.tail) for r in pred}
    tp = len(gold_set & pred_set)
    fp = len(pred_set - gold_set)
    fn = len(gold_set - pred_set)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RelationReport(labeled, tp, fp, fn, precision, recall, f1)


def corpus_relation_prf(
    sentence_pairs: list[tuple[list[Relation], list[Relation]]],
    labeled: bool = True,
) -> RelationReport:
    """Micro-averaged relation scoring over per-sentence (gold, pred) pairs."""
    tp = fp = fn = 0
    for gold, pred in sentence_pairs:
        r = relation_prf(gold, pred, labeled=labeled)
        tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RelationReport(labeled, tp, fp, fn, precision, recall, f1)


# ---------------------------------------------------------------------------
# per-type breakdowns


def breakdown_by_type(
    sentence_pairs: list[tuple[list[Entity], list[Entity]]],
    min_count: int = 20,
    regime: str = "exact",
    split_counts: dict[str, dict] | None = None,
) -> list[dict]:
    """Per-entity-type F1 rows, sorted by F1 descending, filtered to types
    with at least ``min_count`` gold occurrences.  ``split_counts`` rows
    (type -> counts per split) are merged in when given."""
    types = sorted({e.etype for gold, _ in sentence_pairs for e in gold})
    rows = []
    for etype in types:
        counts = {c: 0 for c in CATEGORIES}
        gold_n = 0
        for gold, pred in sentence_pairs:
            sub_gold = [e for e in gold if e.etype == etype]
            sub_pred = [e for e in pred if e.etype == etype]
            gold_n += len(sub_gold)
            pairs = apply_regime(classify_errors(sub_gold, sub_pred), regime)
            for cat, n in count_categories(pairs).items():
                counts[cat] += n
        if gold_n < min_count:
            continue
        precision, recall, f1 = prf_from_counts(counts)
        row = {
            "type": etype,
            "gold_count": gold_n,
            "precision": precision,
            "recall": recall,
            "f1": f1,
        }
        if split_counts and etype in split_counts:
            row["counts_by_split"] = split_counts[etype]
        rows.append(row)
    rows.sort(key=lambda r: (-r["f1"], r["type"]))
    return rows


def breakdown_relations_by_type(
    sentence_pairs: list[tuple[list[Relation], list[Relation]]],
    min_count: int = 20,
    labeled: bool = True,
) -> list[dict]:
    """Per-relation-type F1 rows, same sorting and filtering as entities."""
    types = sorted({r.rtype for gold, _ in sentence_pairs for r in gold})
    rows = []
    for rtype in types:
        sub_pairs = [
            ([r for r in gold if r.rtype == rtype], [r for r in pred if r.rtype == rtype])
            for gold, pred in sentence_pairs
        ]
        gold_n = sum(len(g) for g, _ in sub_pairs)
        if gold_n < min_count:
            continue
        rep = corpus_relation_prf(sub_pairs, labeled=labeled)
        rows.append(
            {
                "type": rtype,
                "gold_count": gold_n,
                "precision": rep.precision,
                "recall": rep.recall,
                "f1": rep.f1,
            }
        )
    rows.sort(key=lambda r: (-r["f1"], r["type"]))
    return rows


def report_to_text(report: EvalReport | RelationReport) -> str:
    """Fixed-width table rendering of a report for terminal output."""
    lines = []
    d = report.to_dict()
    head = f"{'regime':<10}{d.get('regime', '-'): <10}" if "regime" in d else ""
    if head:
        lines.append(head)
    lines.append(f"{'labeled':<10}{str(d['labeled']):<10}")
    counts = " ".join(f"{k}={v}" for k, v in d["counts"].items())
    lines.append(f"{'counts':<10}{counts}")
    lines.append(f"{'precision':<10}{d['precision']:.4f}")
    lines.append(f"{'recall':<10}{d['recall']:.4f}")
    lines.append(f"{'f1':<10}{d['f1']:.4f}")
    per_type = d.get("per_type")
    if per_type:
        lines.append("")
        lines.append(f"{'type':<24}{'count':>7}{'P':>9}{'R':>9}{'F1':>9}")
        for row in per_type:
            lines.append(
                f"{row['type']:<24}{row['gold_count']:>7}{row['precision']:>9.4f}{row['recall']:>9.4f}{row['f1']:>9.4f}"
            )
    return "\n".join(lines) + "\n"
