"""Group-level aggregation, summary statistics, and file outputs.

The entity CSV written here is the normative interchange format: it is
what the CLI emits, what round-trips through ``parse_entity_csv``, and
what gets posted to the ledger node. Layout (UTF-8, LF, one row per
publication, rows sorted by DOI):

    entity_kind,entity_id,group,doi,sources,common_citations,\
unique_citations,union_citations,weighted_citations

``sources`` is a '+'-joined sorted list of the database names carrying
that publication. ``weighted_citations`` is the per-publication ceiled
score (the entity-level total applies its single ceiling separately).
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .model import (
    CONFLATE_LABEL,
    ConflateError,
    DoiId,
    EntityKind,
    EntityMetrics,
    EntityRef,
)

ENTITY_CSV_HEADER = (
    "entity_kind",
    "entity_id",
    "group",
    "doi",
    "sources",
    "common_citations",
    "unique_citations",
    "union_citations",
    "weighted_citations",
)

SOURCE_JOINER = "+"


class EmptyInput(ConflateError):
    """Raised when an aggregation is asked for zero entities."""


class DegenerateFit(ConflateError):
    """Raised when a least-squares fit is attempted on vertical data."""


class CsvFormatError(ConflateError):
    """Entity CSV body is malformed; carries row/column diagnostics."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


def _round_half_up(total: int, count: int) -> int:
    # floor(total/count + 1/2) in exact integer arithmetic
    return (2 * total + count) // (2 * count)


@dataclass(frozen=True)
class GroupSummary:
    """Totals and average h-index for one group of entities. The maps
    are keyed by source name plus the ``conflate`` label."""

    group: str
    entity_count: int
    articles: Mapping[str, int]
    citations: Mapping[str, int]
    avg_h: Mapping[str, int]


def _labels(metrics: Sequence[EntityMetrics]) -> list[str]:
    names: list[str] = []
    for m in metrics:
        for s in m.source_names:
            if s not in names:
                names.append(s)
    return sorted(names) + [CONFLATE_LABEL]


def _field(m: EntityMetrics, label: str, which: str) -> int:
    if label == CONFLATE_LABEL:
        return {
            "articles": m.conflate_articles,
            "citations": m.conflate_citations,
            "h": m.conflate_h,
        }[which]
    return {
        "articles": m.per_source_articles,
        "citations": m.per_source_citations,
        "h": m.per_source_h,
    }[which].get(label, 0)


def aggregate(
    metrics: Sequence[EntityMetrics],
    group_by: Callable[[EntityMetrics], str] | None = None,
) -> list[GroupSummary]:
    """One GroupSummary per distinct group label, sorted by label.

    Totals are exact sums over the member entities; avg_h is the
    round-half-up of the arithmetic mean of member h values.
    """
    if not metrics:
        raise EmptyInput("no entities to aggregate")
    if group_by is None:
        group_by = lambda m: m.entity.group
    labels = _labels(metrics)

    groups: dict[str, list[EntityMetrics]] = {}
    for m in metrics:
        groups.setdefault(group_by(m), []).append(m)

    summaries = []
    for group in sorted(groups):
        members = groups[group]
        summaries.append(
            GroupSummary(
                group=group,
                entity_count=len(members),
                articles={
                    lb: sum(_field(m, lb, "articles") for m in members) for lb in labels
                },
                citations={
                    lb: sum(_field(m, lb, "citations") for m in members) for lb in labels
                },
                avg_h={
                    lb: _round_half_up(
                        sum(_field(m, lb, "h") for m in members), len(members)
                    )
                    for lb in labels
                },
            )
        )
    return summaries


@dataclass(frozen=True)
class StatLine:
    mean: float
    std: float


def summary_stats(
    metrics: Sequence[EntityMetrics],
) -> dict[str, dict[str, StatLine]]:
    """Mean and population standard deviation of articles, citations,
    and h per source and for conflate: ``result[label][field]``."""
    if not metrics:
        raise EmptyInput("no entities to summarize")
    out: dict[str, dict[str, StatLine]] = {}
    for label in _labels(metrics):
        out[label] = {}
        for field in ("articles", "citations", "h"):
            values = [_field(m, label, field) for m in metrics]
            out[label][field] = StatLine(
                mean=statistics.fmean(values),
                std=statistics.pstdev(values),
            )
    return out


@dataclass(frozen=True)
class EntityCsvRow:
    """One parsed row of the normative entity CSV."""

    doi: DoiId
    sources: tuple[str, ...]
    common: int
    unique: int
    union: int
    weighted: int


def entity_csv_text(metrics: EntityMetrics) -> str:
    """Render the normative entity CSV as a string."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ENTITY_CSV_HEADER)
    for pub in sorted(metrics.per_publication, key=lambda p: p.doi):
        writer.writerow(
            [
                metrics.entity.kind.value,
                metrics.entity.id,
                metrics.entity.group,
                pub.doi.value,
                SOURCE_JOINER.join(sorted(pub.sources)),
                len(pub.partition.common),
                len(pub.partition.unique),
                len(pub.partition.union_all),
                pub.score.s,
            ]
        )
    return buffer.getvalue()


def export_entity_csv(metrics: EntityMetrics, path: str | Path) -> None:
    """Write the normative entity CSV for one entity. An entity with no
    publications produces a header-only file."""
    Path(path).write_text(entity_csv_text(metrics), encoding="utf-8", newline="")


def parse_entity_csv(text: str) -> tuple[EntityRef | None, list[EntityCsvRow]]:
    """Parse an entity CSV body.

    Returns the entity reference (None for a header-only body, which
    carries no entity fields) and the publication rows. Only structure
    is validated here; arithmetic consistency checks belong to the
    caller (the ledger node enforces them before accepting rows).

    Raises:
        CsvFormatError: wrong header, non-integer counts, malformed DOI,
            or rows naming more than one entity.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty body: expected header row", row=0) from None
    if tuple(header) != ENTITY_CSV_HEADER:
        raise CsvFormatError(
            f"bad header: expected {','.join(ENTITY_CSV_HEADER)}", row=0
        )

    ref: EntityRef | None = None
    rows: list[EntityCsvRow] = []
    for lineno, record in enumerate(reader, start=1):
        if not record:
            continue
        if len(record) != len(ENTITY_CSV_HEADER):
            raise CsvFormatError(
                f"row {lineno}: expected {len(ENTITY_CSV_HEADER)} fields, "
                f"got {len(record)}",
                row=lineno,
            )
        named = dict(zip(ENTITY_CSV_HEADER, record))
        try:
            row_ref = EntityRef(
                EntityKind(named["entity_kind"]), named["entity_id"], named["group"]
            )
        except (ValueError, ConflateError) as exc:
            raise CsvFormatError(
                f"row {lineno}: {exc}", row=lineno, column="entity_id"
            ) from exc
        if ref is None:
            ref = row_ref
        elif row_ref != ref:
            raise CsvFormatError(
                f"row {lineno}: entity differs from row 1 "
                f"({row_ref.id!r} vs {ref.id!r})",
                row=lineno,
                column="entity_id",
            )
        try:
            doi = DoiId(named["doi"])
        except ConflateError as exc:
            raise CsvFormatError(
                f"row {lineno}: {exc}", row=lineno, column="doi"
            ) from exc
        sources = tuple(s for s in named["sources"].split(SOURCE_JOINER) if s)
        counts = {}
        for column in (
            "common_citations",
            "unique_citations",
            "union_citations",
            "weighted_citations",
        ):
            try:
                value = int(named[column])
            except ValueError:
                raise CsvFormatError(
                    f"row {lineno}: {column} is not an integer: {named[column]!r}",
                    row=lineno,
                    column=column,
                ) from None
            if value < 0:
                raise CsvFormatError(
                    f"row {lineno}: {column} is negative", row=lineno, column=column
                )
            counts[column] = value
        rows.append(
            EntityCsvRow(
                doi=doi,
                sources=sources,
                common=counts["common_citations"],
                unique=counts["unique_citations"],
                union=counts["union_citations"],
                weighted=counts["weighted_citations"],
            )
        )
    return ref, rows


def import_entity_csv(path: str | Path) -> tuple[EntityRef | None, list[EntityCsvRow]]:
    return parse_entity_csv(Path(path).read_text(encoding="utf-8"))


def _least_squares(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    n = len(points)
    mean_x = sum(x for x, _ in points) / n
    mean_y = sum(y for _, y in points) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in points)
    if sxx == 0:
        raise DegenerateFit("all x values are equal; no unique fit line")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in points)
    slope = sxy / sxx
    return slope, mean_y - slope * mean_x


SCATTER_FIELDS = ("articles", "citations", "h")


def export_scatter_data(
    metrics: Sequence[EntityMetrics], source: str, path: str | Path | None = None
) -> dict:
    """Per-entity (source value, conflate value) points for articles,
    citations, and h, each with the slope/intercept of the ordinary
    least-squares fit. Rendering is out of scope; this is the data that
    a best-fit-line plot would consume, written as JSON when a path is
    given.

    Raises:
        EmptyInput: fewer than 2 entities.
        DegenerateFit: all x values equal for some field.
    """
    if len(metrics) < 2:
        raise EmptyInput("scatter export requires at least 2 entities")
    payload: dict = {"x_source": source, "y_source": CONFLATE_LABEL, "fields": {}}
    for field in SCATTER_FIELDS:
        points = [
            (
                m.entity.id,
                float(_field(m, source, field)),
                float(_field(m, CONFLATE_LABEL, field)),
            )
            for m in metrics
        ]
        slope, intercept = _least_squares([(x, y) for _, x, y in points])
        payload["fields"][field] = {
            "points": [{"entity_id": e, "x": x, "y": y} for e, x, y in points],
            "slope": slope,
            "intercept": intercept,
        }
    if path is not None:
        Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return payload
