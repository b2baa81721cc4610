"""Label mappings between annotation schemas: relabel, drop, report retention.

A mapping spec is JSON {"entities": {source: target}, "relations": {source:
target}}.  Applying it relabels mapped entities/relations, passes through
labels already in the mapping's target set, and drops everything else;
relations additionally drop when either endpoint entity was dropped.  The
built-in "syntheses" preset covers the solid-state syntheses-procedure schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

from .corpus import AnnotatedSentence
from .labels import ENTITY_TYPES, RELATION_TYPES

PRESETS = {"syntheses": "syntheses_mapping.json"}


@dataclass
class Mapping:
    entity_map: dict[str, str]
    relation_map: dict[str, str]

    def entity_target(self, label: str) -> str | None:
        """Mapped target, pass-through when already a target, else None."""
        if label in self.entity_map:
            return self.entity_map[label]
        if label in set(self.entity_map.values()):
            return label
        return None

    def relation_target(self, label: str) -> str | None:
        if label in self.relation_map:
            return self.relation_map[label]
        if label in set(self.relation_map.values()):
            return label
        return None


@dataclass
class RetentionStats:
    entities_total: int = 0
    entities_kept: int = 0
    relations_total: int = 0
    relations_kept: int = 0
    dropped_entity_ids: list[str] = field(default_factory=list)
    dropped_relation_ids: list[str] = field(default_factory=list)

    @property
    def entity_retention(self) -> float:
        return self.entities_kept / self.entities_total if self.entities_total else 0.0

    @property
    def relation_retention(self) -> float:
        return self.relations_kept / self.relations_total if self.relations_total else 0.0

    def to_dict(self) -> dict:
        return {
            "entities_total": self.entities_total,
            "entities_kept": self.entities_kept,
            "entity_retention": self.entity_retention,
            "relations_total": self.relations_total,
            "relations_kept": self.relations_kept,
            "relation_retention": self.relation_retention,
        }


def _validate(spec: dict) -> Mapping:
    if not isinstance(spec, dict) or "entities" not in spec or "relations" not in spec:
        raise ValueError("mapping spec must be a JSON object with 'entities' and 'relations'")
    for section, targets in (("entities", ENTITY_TYPES), ("relations", RELATION_TYPES)):
        table = spec[section]
        if not isinstance(table, dict):
            raise ValueError(f"mapping section {section!r} must be an object")
        for src, tgt in table.items():
            if tgt not in targets:
                raise ValueError(f"mapping target {tgt!r} for source {src!r} is not a canonical label")
    return Mapping(entity_map=dict(spec["entities"]), relation_map=dict(spec["relations"]))


def load_mapping(path_or_preset: str) -> Mapping:
    """Load a mapping spec from a file path or a named preset ("syntheses")."""
    if path_or_preset in PRESETS:
        text = resources.files("matie").joinpath("data", PRESETS[path_or_preset]).read_text("utf-8")
    else:
        with open(path_or_preset, encoding="utf-8") as fh:
            text = fh.read()
    return _validate(json.loads(text))


def mapping_from_dict(spec: dict) -> Mapping:
    return _validate(spec)


def apply_mapping(
    sentences: list[AnnotatedSentence], mapping: Mapping
) -> tuple[list[AnnotatedSentence], RetentionStats]:
    """Relabel a corpus into the target schema, dropping unmapped items.

    Never merges or invents annotations: kept ids are a subset of the input.
    """
    stats = RetentionStats()
    out: list[AnnotatedSentence] = []
    for sent in sentences:
        kept_entities = []
        kept_ids = set()
        for ent in sent.entities:
            stats.entities_total += 1
            target = mapping.entity_target(ent.etype)
            if target is None:
                stats.dropped_entity_ids.append(ent.id)
                continue
            stats.entities_kept += 1
            kept_ids.add(ent.id)
            kept_entities.append(ent if target == ent.etype else replace(ent, etype=target))
        kept_relations = []
        for rel in sent.relations:
            stats.relations_total += 1
            target = mapping.relation_target(rel.rtype)
            if target is None or rel.head not in kept_ids or rel.tail not in kept_ids:
                stats.dropped_relation_ids.append(rel.id)
                continue
            stats.relations_kept += 1
            kept_relations.append(rel if target == rel.rtype else replace(rel, rtype=target))
        out.append(
            AnnotatedSentence(sent.doc_id, sent.sent_index, sent.tokens, kept_entities, kept_relations)
        )
    return out, stats
