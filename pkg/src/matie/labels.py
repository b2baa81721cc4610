"""Canonical entity/relation label sets, alias folding, and the BIO tagset."""

from __future__ import annotations

import re

ENTITY_TYPES: tuple[str, ...] = (
    "Material",
    "Participating-Material",
    "Synthesis",
    "Characterization",
    "Environment",
    "Phenomenon",
    "MStructure",
    "Microstructure",
    "Phase",
    "Property",
    "Descriptor",
    "Operation",
    "Result",
    "Application",
    "Number",
    "Amount-Unit",
)

RELATION_TYPES: tuple[str, ...] = (
    "Form-Of",
    "Condition-Of",
    "Observed-In",
    "Property-Of",
    "Input",
    "Output",
    "Result-Of",
    "Next-Opr",
    "Coref",
    "Number-Of",
    "Amount-Of",
)

OUTSIDE_TAG = "O"

# "O" + B/I per type, in canonical type order: 2*16 + 1 = 33 tags.
BIO_TAGS: tuple[str, ...] = (OUTSIDE_TAG,) + tuple(
    f"{prefix}-{etype}" for etype in ENTITY_TYPES for prefix in ("B", "I")
)

_SEPARATORS = re.compile(r"[\s_\-]+")

# Aliases that plain separator folding cannot recover.
_SPECIAL_ALIASES = {
    "mesostructure-or-macrostructure": "MStructure",
    "mesostructure/macrostructure": "MStructure",
}


def _fold(label: str) -> str:
    return _SEPARATORS.sub("-", label.strip()).lower()


def _strip_fold(label: str) -> str:
    return _SEPARATORS.sub("", label.strip()).lower()


_ENTITY_BY_FOLD = {_fold(t): t for t in ENTITY_TYPES}
_ENTITY_BY_STRIP = {_strip_fold(t): t for t in ENTITY_TYPES}
_RELATION_BY_FOLD = {_fold(t): t for t in RELATION_TYPES}
_RELATION_BY_STRIP = {_strip_fold(t): t for t in RELATION_TYPES}


class UnknownLabelError(ValueError):
    """Raised when a label cannot be resolved to a canonical name."""

    def __init__(self, label: str, known: tuple[str, ...]):
        self.label = label
        self.known = known
        super().__init__(
            f"unknown label {label!r}; known labels: {', '.join(known)}"
        )


def canonical_entity_type(label: str) -> str:
    """Resolve ``label`` to a canonical entity type.

    Accepts separator variants ("Amount Unit", "amount_unit"), compacted
    CamelCase ("AmountUnit"), and the long-form mesostructure alias.
    """
    folded = _fold(label)
    if folded in _SPECIAL_ALIASES:
        return _SPECIAL_ALIASES[folded]
    if folded in _ENTITY_BY_FOLD:
        return _ENTITY_BY_FOLD[folded]
    stripped = _strip_fold(label)
    if stripped in _ENTITY_BY_STRIP:
        return _ENTITY_BY_STRIP[stripped]
    raise UnknownLabelError(label, ENTITY_TYPES)


def canonical_relation_type(label: str) -> str:
    """Resolve ``label`` to a canonical relation type (same folding rules)."""
    folded = _fold(label)
    if folded in _RELATION_BY_FOLD:
        return _RELATION_BY_FOLD[folded]
    stripped = _strip_fold(label)
    if stripped in _RELATION_BY_STRIP:
        return _RELATION_BY_STRIP[stripped]
    raise UnknownLabelError(label, RELATION_TYPES)


def bio_tagset(entity_types: tuple[str, ...] = ENTITY_TYPES) -> tuple[str, ...]:
    """BIO tagset for an ordered entity type tuple (O first, then B/I pairs)."""
    return (OUTSIDE_TAG,) + tuple(
        f"{prefix}-{etype}" for etype in entity_types for prefix in ("B", "I")
    )


def is_valid_bio(tags: list[str]) -> bool:
    """True iff every I-X is immediately preceded by B-X or I-X."""
    prev = OUTSIDE_TAG
    for tag in tags:
        if tag.startswith("I-") and prev not in (f"B-{tag[2:]}", tag):
            return False
        prev = tag
    return True
