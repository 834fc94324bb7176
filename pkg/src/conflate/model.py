"""Core domain types for the conflate pipeline.

Everything downstream (ingest, engine, report, ledger) operates on the
types defined here. All of them are immutable values after construction:
safe to share across threads and to use as dict keys where hashable.

The single join key across bibliographic databases is the normalized DOI.
Two raw DOI strings that differ only in case, resolver prefix, or
surrounding whitespace normalize to equal ``DoiId`` values; everything
else is treated as a distinct identifier (no fuzzy matching, ever).
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

CONFLATE_LABEL = "conflate"


class ConflateError(Exception):
    """Base class for every error raised by this package."""


class EmptyDoi(ConflateError):
    """Raised when a DOI string is empty after normalization."""


class MalformedDoi(ConflateError):
    """Raised when a DOI string lacks the prefix/suffix separator or is
    not in normalized form."""


class InvalidEntityId(ConflateError):
    """Raised when an entity identifier does not match the shape required
    by its kind (ORCID for authors, ISSN for journals)."""


_RESOLVER_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi:",
)


def _normalize(raw: str) -> str:
    value = raw.strip().lower()
    stripped = True
    while stripped:
        stripped = False
        for prefix in _RESOLVER_PREFIXES:
            if value.startswith(prefix):
                value = value[len(prefix):].strip()
                stripped = True
    return value


@dataclass(frozen=True, order=True)
class DoiId:
    """A normalized Digital Object Identifier.

    Construction rejects raw (non-normalized) strings, so a ``DoiId``
    found anywhere in the system is guaranteed comparable byte-wise with
    any other. Use :func:`normalize_doi` to build one from raw input.
    """

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise EmptyDoi("DOI is empty")
        if "/" not in self.value:
            raise MalformedDoi(f"DOI has no prefix/suffix separator: {self.value!r}")
        if self.value != _normalize(self.value):
            raise MalformedDoi(
                f"DOI is not in normalized form: {self.value!r} "
                "(use normalize_doi on raw strings)"
            )

    def __str__(self) -> str:
        return self.value


def normalize_doi(raw: str) -> DoiId:
    """Normalize a raw DOI string into a :class:`DoiId`.

    Strips the common resolver prefixes (``https://doi.org/``,
    ``http://dx.doi.org/``, ``doi:``, ...), trims whitespace, and
    lowercases. Idempotent: feeding the result back in returns an equal
    value.

    Raises:
        EmptyDoi: nothing is left after stripping.
        MalformedDoi: the remainder has no ``/`` separator.
    """
    value = _normalize(raw)
    if not value:
        raise EmptyDoi(f"DOI is empty after normalization: {raw!r}")
    if "/" not in value:
        raise MalformedDoi(f"DOI has no prefix/suffix separator: {raw!r}")
    return DoiId(value)


class EntityKind(str, enum.Enum):
    AUTHOR = "author"
    ORGANIZATION = "organization"
    JOURNAL = "journal"


_ORCID_RE = re.compile(r"^[0-9A-Za-z]{4}-[0-9A-Za-z]{4}-[0-9A-Za-z]{4}-[0-9A-Za-z]{4}$")
_ISSN_RE = re.compile(r"^[0-9]{4}-[0-9]{3}[0-9X]$")


@dataclass(frozen=True, order=True)
class EntityRef:
    """Identity of a tracked entity: an author (ORCID), an organization
    (name), or a journal (ISSN), plus a free-form group label such as a
    discipline or an organization category."""

    kind: EntityKind
    id: str
    group: str = ""

    def __post_init__(self) -> None:
        if self.kind is EntityKind.AUTHOR and not _ORCID_RE.match(self.id):
            raise InvalidEntityId(f"not an ORCID id: {self.id!r}")
        if self.kind is EntityKind.JOURNAL and not _ISSN_RE.match(self.id):
            raise InvalidEntityId(f"not an ISSN: {self.id!r}")
        if self.kind is EntityKind.ORGANIZATION and not self.id:
            raise InvalidEntityId("organization name is empty")


@dataclass(frozen=True)
class PublicationRecord:
    """One article, keyed by DOI, with its per-source presence and the
    per-source sets of citing DOIs.

    ``sources`` lists every database that indexes the article;
    ``citers_by_source`` may only mention those sources. A citer equal to
    the article's own DOI is dropped at construction (a record citing
    itself is always a fixture artifact, and it would inflate h-index).
    """

    doi: DoiId
    sources: frozenset[str]
    citers_by_source: Mapping[str, frozenset[DoiId]]

    def __post_init__(self) -> None:
        sources = frozenset(self.sources)
        unknown = set(self.citers_by_source) - sources
        if unknown:
            raise ValueError(f"citer sources not in sources: {sorted(unknown)}")
        cleaned = {
            src: frozenset(c for c in citers if c != self.doi)
            for src, citers in self.citers_by_source.items()
        }
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "citers_by_source", cleaned)

    def citer_count(self, source: str) -> int:
        return len(self.citers_by_source.get(source, ()))

    def union_citers(self) -> frozenset[DoiId]:
        out: frozenset[DoiId] = frozenset()
        for citers in self.citers_by_source.values():
            out |= citers
        return out


@dataclass(frozen=True)
class CitationPartition:
    """Common/unique split of the merged citer set for one publication.

    ``common`` holds citers present in all N source sets (a source with
    no entry contributes the empty set, so anything less than full
    presence empties ``common``); ``unique`` is the rest of the union.
    """

    n_sources: int
    common: frozenset[DoiId]
    unique: frozenset[DoiId]
    union_all: frozenset[DoiId]

    def __post_init__(self) -> None:
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if self.common & self.unique:
            raise ValueError("common and unique overlap")
        if self.common | self.unique != self.union_all:
            raise ValueError("common + unique does not reconstruct the union")


@dataclass(frozen=True)
class WeightedCitationScore:
    """Pay-off-weighted citation score for one publication.

    s1 counts the fully-weighted common citers, s2 is the 1/N-weighted
    unique mass (kept exact as a rational), and s is the ceiling of their
    sum.
    """

    s1: int
    s2: Fraction
    s: int

    def __post_init__(self) -> None:
        if self.s1 < 0 or self.s2 < 0:
            raise ValueError("negative citation weight")
        if self.s != math.ceil(self.s1 + self.s2):
            raise ValueError("s is not ceil(s1 + s2)")


@dataclass(frozen=True)
class PublicationMetrics:
    """Per-publication slice of an entity's metrics: which sources carry
    the article, how its citers partition, and its weighted score."""

    doi: DoiId
    sources: tuple[str, ...]
    partition: CitationPartition
    score: WeightedCitationScore


@dataclass(frozen=True)
class EntityMetrics:
    """Full metric set for one entity.

    Per-source maps mirror what each database would report on its own.
    The conflate fields apply the pay-off weighting: per-entity citation
    and article totals take a single ceiling over the summed weights,
    while each row of ``per_publication`` carries its own ceiled score
    for display.
    """

    entity: EntityRef
    per_source_articles: Mapping[str, int]
    per_source_citations: Mapping[str, int]
    per_source_h: Mapping[str, int]
    conflate_articles: int
    conflate_citations: int
    conflate_h: int
    per_publication: tuple[PublicationMetrics, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.conflate_h > len(self.per_publication):
            raise ValueError("conflate_h exceeds publication count")
        for src, h in self.per_source_h.items():
            if h > self.per_source_articles.get(src, 0):
                raise ValueError(f"h-index for {src!r} exceeds its article count")

    @property
    def source_names(self) -> tuple[str, ...]:
        return tuple(self.per_source_articles)

    @property
    def n_sources(self) -> int:
        return len(self.per_source_articles)


def ensure_doi_ids(values: Iterable[DoiId]) -> frozenset[DoiId]:
    """Collect values into a frozenset, rejecting anything that is not
    already a DoiId (mixing raw strings into set algebra is a bug)."""
    out = set()
    for v in values:
        if not isinstance(v, DoiId):
            raise TypeError(f"expected DoiId, got {type(v).__name__}: {v!r}")
        out.add(v)
    return frozenset(out)
