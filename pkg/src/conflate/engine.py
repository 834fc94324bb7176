"""Conflation core: citer-set partitioning, pay-off weighting, h-index.

The weighting rule: a citer present in all N databases is *common* and
weighs 1; a citer present in the union but not everywhere is *unique*
and weighs 1/N. A publication's weighted score is ceil(s1 + s2) with
s1 = |common| and s2 = |unique|/N. Entity totals apply one ceiling to
the summed weights rather than summing the per-publication ceilings;
the per-publication values stay available for display and CSV export.

Articles follow the same rule: a publication indexed by all N databases
counts 1, otherwise 1/N, with a single ceiling over the entity total.

The h-index is computed over deduplicated union citer counts, never
over weighted counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import (
    CONFLATE_LABEL,
    CitationPartition,
    ConflateError,
    DoiId,
    EntityMetrics,
    EntityRef,
    PublicationMetrics,
    PublicationRecord,
    WeightedCitationScore,
)


class ZeroSources(ConflateError):
    """Raised when a conflation is attempted over zero databases."""


def partition(
    citers_by_source: Mapping[str, frozenset[DoiId]], n_sources: int
) -> CitationPartition:
    """Split the merged citer set into common and unique parts.

    ``common`` is the intersection over all N source sets; a source
    absent from the map contributes the empty set, so fewer than
    n_sources keys forces common to be empty. ``unique`` is the union
    minus common.

    Raises:
        ZeroSources: n_sources < 1.
        ValueError: more keys than n_sources.
    """
    if n_sources < 1:
        raise ZeroSources(f"n_sources must be >= 1, got {n_sources}")
    if len(citers_by_source) > n_sources:
        raise ValueError(
            f"{len(citers_by_source)} sources supplied for n_sources={n_sources}"
        )
    sets = [frozenset(s) for s in citers_by_source.values()]
    union_all: frozenset[DoiId] = frozenset().union(*sets) if sets else frozenset()
    if len(sets) == n_sources and sets:
        common = frozenset.intersection(*sets)
    else:
        common = frozenset()
    return CitationPartition(
        n_sources=n_sources,
        common=common,
        unique=union_all - common,
        union_all=union_all,
    )


def weighted_score(part: CitationPartition) -> WeightedCitationScore:
    """Apply the pay-off weights to a partition: common citers weigh 1,
    unique citers weigh 1/N, and the total is ceiled."""
    s1 = len(part.common)
    s2 = Fraction(len(part.unique), part.n_sources)
    return WeightedCitationScore(s1=s1, s2=s2, s=math.ceil(s1 + s2))


def h_index(citation_counts: Iterable[int]) -> int:
    """Largest h such that at least h publications have >= h citations."""
    h = 0
    for i, c in enumerate(sorted(citation_counts, reverse=True), start=1):
        if c >= i:
            h = i
        else:
            break
    return h


def conflate_entity(
    entity: EntityRef,
    records: Sequence[PublicationRecord],
    source_names: Sequence[str],
) -> EntityMetrics:
    """Compute the full metric set for one entity from its assembled
    records.

    Per-source numbers mirror what each database would report alone
    (a record the database never indexed contributes zero). The
    conflate numbers apply the pay-off weighting with a single ceiling
    over the entity total, and conflate_h runs over the per-record
    deduplicated union citer counts.

    An empty record list yields all-zero metrics.
    """
    names = list(source_names)
    n = len(names)
    if n == 0:
        raise ZeroSources("at least one source is required")
    if len(set(names)) != n:
        raise ValueError(f"duplicate source names: {names}")
    known = set(names)
    for record in records:
        extra = set(record.sources) - known
        if extra:
            raise ValueError(f"record {record.doi} names unknown sources {sorted(extra)}")

    ordered = sorted(records, key=lambda r: r.doi)
    per_publication = []
    for r in ordered:
        part = partition(r.citers_by_source, n)
        per_publication.append(
            PublicationMetrics(
                doi=r.doi,
                sources=tuple(sorted(r.sources)),
                partition=part,
                score=weighted_score(part),
            )
        )
    per_publication = tuple(per_publication)

    per_source_articles = {s: sum(1 for r in ordered if s in r.sources) for s in names}
    per_source_citations = {s: sum(r.citer_count(s) for r in ordered) for s in names}
    per_source_h = {s: h_index(r.citer_count(s) for r in ordered) for s in names}

    total_common = sum(len(p.partition.common) for p in per_publication)
    total_unique = sum(len(p.partition.unique) for p in per_publication)
    conflate_citations = math.ceil(total_common + Fraction(total_unique, n))

    full = sum(1 for r in ordered if len(r.sources) == n)
    partial = len(ordered) - full
    conflate_articles = math.ceil(full + Fraction(partial, n))

    conflate_h = h_index(len(p.partition.union_all) for p in per_publication)

    return EntityMetrics(
        entity=entity,
        per_source_articles=per_source_articles,
        per_source_citations=per_source_citations,
        per_source_h=per_source_h,
        conflate_articles=conflate_articles,
        conflate_citations=conflate_citations,
        conflate_h=conflate_h,
        per_publication=per_publication,
    )


@dataclass(frozen=True)
class IndicatorRow:
    articles: int
    citations: int
    h_index: int
    mean_citations: float


def related_indicators(metrics: EntityMetrics) -> dict[str, IndicatorRow]:
    """Total articles, total citations, h-index, and mean citations per
    article, for each source and for the conflate row (keyed
    ``conflate``). Means are 0 when there are no articles."""

    def row(articles: int, citations: int, h: int) -> IndicatorRow:
        mean = citations / articles if articles else 0.0
        return IndicatorRow(articles, citations, h, mean)

    out = {
        s: row(
            metrics.per_source_articles[s],
            metrics.per_source_citations[s],
            metrics.per_source_h[s],
        )
        for s in metrics.source_names
    }
    out[CONFLATE_LABEL] = row(
        metrics.conflate_articles, metrics.conflate_citations, metrics.conflate_h
    )
    return out
