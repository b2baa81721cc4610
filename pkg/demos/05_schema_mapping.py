"""Relabel a corpus annotated under a foreign schema into the toolkit's.

A mapping names, for each foreign entity and relation type, the target
type it becomes; anything unnamed is dropped, and relations die with
either endpoint. The bundled "syntheses" preset covers a recipe-style
annotation scheme; retention statistics summarize what survived.
"""

from matie.corpus import parse_standoff, sentence_split_and_tokenize
from matie.schema_map import apply_mapping, load_mapping

TEXT = "Dissolve 5 g of LiOH in water. Heat the beaker at 90 C."

# Foreign labels (Condition-Type, Recipe-Precursor, Apparatus, ...) are not
# part of the toolkit's schema, so parsing must keep them verbatim.
ANN = """\
T1\tOperation 0 8\tDissolve
T2\tNumber 9 10\t5
T3\tAmount-Unit 11 12\tg
T4\tMaterial 16 20\tLiOH
T5\tMaterial 24 29\twater
T6\tOperation 31 35\tHeat
T7\tApparatus 40 46\tbeaker
T8\tNumber 50 52\t90
T9\tCondition-Type 53 54\tC
R1\tAmount-Of Arg1:T3 Arg2:T4
R2\tRecipe-Precursor Arg1:T4 Arg2:T1
R3\tCondition-Of Arg1:T9 Arg2:T6
R4\tNumber-Of Arg1:T8 Arg2:T9
R5\tApparatus-Of Arg1:T7 Arg2:T6
"""

doc = parse_standoff(ANN, TEXT, "recipe", strict_labels=False)
sentences = sentence_split_and_tokenize(doc, {})

mapping = load_mapping("syntheses")
print(f"preset maps {len(mapping.entity_map)} entity and {len(mapping.relation_map)} relation types\n")

mapped, stats = apply_mapping(sentences, mapping)
for before, after in zip(sentences, mapped):
    kept_entities = {e.id: e.etype for e in after.entities}
    kept_relations = {r.id: r.rtype for r in after.relations}
    for ent in before.entities:
        target = kept_entities.get(ent.id, "(dropped)")
        marker = "" if target == ent.etype else f" -> {target}"
        print(f"  {ent.id} {ent.etype:<16} {ent.surface!r}{marker}")
    for rel in before.relations:
        target = kept_relations.get(rel.id, "(dropped)")
        marker = "" if target == rel.rtype else f" -> {target}"
        print(f"  {rel.id} {rel.rtype}({rel.head}, {rel.tail}){marker}")

print(
    f"\nretention: entities {stats.entities_kept}/{stats.entities_total} "
    f"({stats.entity_retention:.0%}), relations {stats.relations_kept}/{stats.relations_total} "
    f"({stats.relation_retention:.0%})"
)
