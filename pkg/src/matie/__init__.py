"""Materials-literature information extraction toolkit.

Pipelines for BRAT-annotated abstracts: corpus ingestion and BIO tagging,
linear-chain CRF entity tagging, anchor-marked relation classification,
span-level evaluation with partial-match categories, schema mapping between
annotation label sets, and uncertainty-based sentence selection.
"""

__version__ = "0.1.0"
