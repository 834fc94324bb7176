"""Weighted unified citation metrics over N bibliographic databases,
recorded in hash-chained informetric ledgers."""

from .model import (
    CONFLATE_LABEL,
    CitationPartition,
    ConflateError,
    DoiId,
    EntityKind,
    EntityMetrics,
    EntityRef,
    PublicationMetrics,
    PublicationRecord,
    WeightedCitationScore,
    normalize_doi,
)

__all__ = [
    "CONFLATE_LABEL",
    "CitationPartition",
    "ConflateError",
    "DoiId",
    "EntityKind",
    "EntityMetrics",
    "EntityRef",
    "PublicationMetrics",
    "PublicationRecord",
    "WeightedCitationScore",
    "normalize_doi",
]
