"""Entity scoring beyond exact match: error categories and regimes.

Every gold/pred pair lands in exactly one of five categories (COR correct,
INC wrong type, PAR boundary overlap, MIS missed, SPU spurious). Regimes
then decide how leniently PAR cases are credited:

  exact    PAR counts against both precision and recall
  overlap  any overlap with the right type counts as correct
  relaxed  overlap counts only when one surface contains the other
"""

from matie.corpus import Entity
from matie.evaluation import (
    apply_regime,
    classify_errors,
    count_categories,
    evaluate_entities,
)

TEXT = "Parts built from Hastelloy X powder were annealed at high temperature today."


def ent(eid, etype, surface):
    start = TEXT.find(surface)
    return Entity(eid, etype, start, start + len(surface), surface)


gold = [
    ent("G1", "Material", "Hastelloy X"),
    ent("G2", "Operation", "annealed"),
    ent("G3", "Environment", "high temperature"),
]
pred = [
    ent("P1", "Material", "Hastelloy X powder"),   # boundary overlap
    ent("P2", "Operation", "annealed"),            # exact hit
    ent("P3", "Application", "high temperature"),  # right span, wrong type
    ent("P4", "Number", "today"),                  # spurious
]

pairs = classify_errors(gold, pred)
for p in pairs:
    g = p.gold.surface if p.gold else "-"
    q = p.pred.surface if p.pred else "-"
    print(f"  {p.category}:  gold={g!r}  pred={q!r}")
print("counts:", count_categories(pairs), "\n")

for regime in ("exact", "overlap", "relaxed"):
    regimed = count_categories(apply_regime(pairs, regime))
    report = evaluate_entities(gold, pred, regime=regime, labeled=True)
    print(f"{regime:<8} COR={regimed['COR']}  P={report.precision:.2f} R={report.recall:.2f} F1={report.f1:.2f}")

unlabeled = evaluate_entities(gold, pred, regime="exact", labeled=False)
print(f"\nunlabeled exact F1 {unlabeled.f1:.2f} (type errors forgiven)")
