"""From a BRAT standoff document to the sentence-level interchange format.

Everything downstream (taggers, relation models, evaluation, selection)
consumes the JSON Lines layout produced here, so this is the front door
of the toolkit.
"""

from matie.corpus import (
    dump_jsonl,
    load_jsonl,
    parse_standoff,
    sentence_split_and_tokenize,
    stats_from_sentences,
    to_bio,
)

TEXT = (
    "Inconel 625 was melted at 1350 K under argon. "
    "The resulting ingot was then cooled slowly."
)

# A .ann file is tab-separated: T-lines are typed character spans, R-lines
# connect entity ids. Offsets index into the paired .txt content.
ANN = """\
T1\tMaterial 0 11\tInconel 625
T2\tOperation 16 22\tmelted
T3\tNumber 26 30\t1350
T4\tAmount-Unit 31 32\tK
T5\tEnvironment 39 44\targon
T6\tMaterial 60 65\tingot
T7\tOperation 75 81\tcooled
R1\tNumber-Of Arg1:T3 Arg2:T4
R2\tCondition-Of Arg1:T5 Arg2:T2
"""

doc = parse_standoff(ANN, TEXT, "demo-doc")
print(f"parsed document {doc.id!r}: {len(doc.entities)} entities, {len(doc.relations)} relations")

counters = {}
sentences = sentence_split_and_tokenize(doc, counters)
print(f"split into {len(sentences)} sentences (dropped: {counters})\n")

for sent in sentences:
    words = [t.text for t in sent.tokens]
    print(f"sentence {sent.sent_index}: {words}")
    print("  BIO:", to_bio(sent))
    for ent in sent.entities:
        print(f"  {ent.id} {ent.etype:<12} {ent.surface!r}")
    for rel in sent.relations:
        print(f"  {rel.id} {rel.rtype}({rel.head} -> {rel.tail})")
    print()

stats = stats_from_sentences(sentences)
print("corpus stats:", stats.to_dict())

# The interchange format round-trips exactly.
blob = dump_jsonl(sentences, meta={"demo": True})
reloaded, meta = load_jsonl(blob)
assert dump_jsonl(reloaded, meta=meta) == blob
print(f"\nJSONL round-trip is stable ({len(blob.splitlines())} lines including meta header)")
