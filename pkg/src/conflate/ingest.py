"""Snapshot loading, DOI filtration, and per-entity record assembly.

A snapshot file is one bibliographic database's view of a set of
entities, their publications, and each publication's citing works. The
file format is JSON:

    {"database": "scopus",
     "entities": [
       {"kind": "author", "id": "0000-0001-2345-6789", "group": "Sciences",
        "publications": [
          {"doi": "10.1000/x", "citers": [{"doi": "10.2000/a"}, ...]},
          ...]},
       ...]}

Unknown fields are ignored. Filtration is deliberately split from
parsing: ``load_snapshot`` keeps raw DOI strings (including nulls) so
that the DOI-existence filters are observable, testable steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .model import (
    ConflateError,
    CONFLATE_LABEL,
    DoiId,
    EntityKind,
    EntityRef,
    PublicationRecord,
    normalize_doi,
)


class ParseError(ConflateError):
    """Snapshot file is unreadable or structurally wrong; message carries
    file/position context."""


class DuplicateEntity(ConflateError):
    """The same (kind, id) appears twice within one snapshot."""


class DuplicateSource(ConflateError):
    """Two snapshots in one run claim the same database name."""


class UnknownEntity(ConflateError):
    """The requested entity appears in no snapshot."""


@dataclass(frozen=True)
class RawPublication:
    """A publication entry as found in a snapshot file. ``doi`` and the
    citer entries hold raw strings (or None) until filtration."""

    doi: str | None
    citers: tuple[str | None, ...]


@dataclass(frozen=True)
class SnapshotEntity:
    ref: EntityRef
    publications: tuple[RawPublication, ...]


@dataclass(frozen=True)
class DatabaseSnapshot:
    source_name: str
    entities: tuple[SnapshotEntity, ...]

    def find(self, kind: EntityKind, entity_id: str) -> SnapshotEntity | None:
        for entity in self.entities:
            if entity.ref.kind is kind and entity.ref.id == entity_id:
                return entity
        return None


def _optional_doi(value, context: str) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ParseError(f"{context}: doi must be a string or null")
    return value


def load_snapshot(path: str | Path) -> DatabaseSnapshot:
    """Parse one snapshot file. Raw DOIs are not filtered here.

    Raises:
        ParseError: unreadable JSON (with line/column) or wrong structure.
        DuplicateEntity: an entity id repeats within the file.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc

    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    source = data.get("database")
    if not isinstance(source, str) or not source:
        raise ParseError(f"{path}: 'database' must be a non-empty string")
    if source == CONFLATE_LABEL:
        raise ParseError(f"{path}: {CONFLATE_LABEL!r} is a reserved source name")
    raw_entities = data.get("entities")
    if not isinstance(raw_entities, list):
        raise ParseError(f"{path}: 'entities' must be a list")

    entities: list[SnapshotEntity] = []
    seen: set[tuple[EntityKind, str]] = set()
    for i, raw in enumerate(raw_entities):
        context = f"{path}: entities[{i}]"
        if not isinstance(raw, dict):
            raise ParseError(f"{context}: must be an object")
        try:
            kind = EntityKind(raw.get("kind"))
        except ValueError:
            raise ParseError(f"{context}: unknown kind {raw.get('kind')!r}") from None
        entity_id = raw.get("id")
        if not isinstance(entity_id, str):
            raise ParseError(f"{context}: 'id' must be a string")
        group = raw.get("group", "")
        if not isinstance(group, str):
            raise ParseError(f"{context}: 'group' must be a string")
        try:
            ref = EntityRef(kind, entity_id, group)
        except ConflateError as exc:
            raise ParseError(f"{context}: {exc}") from exc
        if (kind, entity_id) in seen:
            raise DuplicateEntity(f"{context}: repeated entity {entity_id!r}")
        seen.add((kind, entity_id))

        publications: list[RawPublication] = []
        raw_pubs = raw.get("publications", [])
        if not isinstance(raw_pubs, list):
            raise ParseError(f"{context}: 'publications' must be a list")
        for j, pub in enumerate(raw_pubs):
            pcontext = f"{context}.publications[{j}]"
            if not isinstance(pub, dict):
                raise ParseError(f"{pcontext}: must be an object")
            doi = _optional_doi(pub.get("doi"), pcontext)
            raw_citers = pub.get("citers", [])
            if not isinstance(raw_citers, list):
                raise ParseError(f"{pcontext}: 'citers' must be a list")
            citers = []
            for k, citer in enumerate(raw_citers):
                if not isinstance(citer, dict):
                    raise ParseError(f"{pcontext}.citers[{k}]: must be an object")
                citers.append(_optional_doi(citer.get("doi"), f"{pcontext}.citers[{k}]"))
            publications.append(RawPublication(doi, tuple(citers)))
        entities.append(SnapshotEntity(ref, tuple(publications)))

    return DatabaseSnapshot(source, tuple(entities))


def load_snapshots(paths: list[str | Path]) -> list[DatabaseSnapshot]:
    """Load several snapshot files and enforce distinct database names."""
    snapshots = [load_snapshot(p) for p in paths]
    seen: dict[str, Path] = {}
    for path, snap in zip(paths, snapshots):
        if snap.source_name in seen:
            raise DuplicateSource(
                f"source {snap.source_name!r} appears in both "
                f"{seen[snap.source_name]} and {path}"
            )
        seen[snap.source_name] = Path(path)
    return snapshots


def _valid_doi(raw: str | None) -> str | None:
    if raw is None:
        return None
    try:
        return normalize_doi(raw).value
    except ConflateError:
        return None


def filter_articles(snapshot: DatabaseSnapshot) -> DatabaseSnapshot:
    """Drop publication entries whose DOI is missing or malformed;
    normalize the survivors. Entities are kept even when every entry is
    dropped. Citers are untouched (see filter_citers)."""
    entities = []
    for entity in snapshot.entities:
        kept = []
        for pub in entity.publications:
            doi = _valid_doi(pub.doi)
            if doi is not None:
                kept.append(replace(pub, doi=doi))
        entities.append(SnapshotEntity(entity.ref, tuple(kept)))
    return DatabaseSnapshot(snapshot.source_name, tuple(entities))


def filter_citers(snapshot: DatabaseSnapshot) -> DatabaseSnapshot:
    """Within every publication, drop citer entries without a valid DOI;
    normalize and deduplicate the survivors (set semantics per
    publication per source)."""
    entities = []
    for entity in snapshot.entities:
        pubs = []
        for pub in entity.publications:
            citers = sorted({c for c in map(_valid_doi, pub.citers) if c is not None})
            pubs.append(RawPublication(pub.doi, tuple(citers)))
        entities.append(SnapshotEntity(entity.ref, tuple(pubs)))
    return DatabaseSnapshot(snapshot.source_name, tuple(entities))


def filter_snapshot(snapshot: DatabaseSnapshot) -> DatabaseSnapshot:
    """Both filtration passes in their canonical order."""
    return filter_citers(filter_articles(snapshot))


def assemble(
    snapshots: list[DatabaseSnapshot], entity: EntityRef
) -> list[PublicationRecord]:
    """Merge the filtered snapshots into one PublicationRecord per
    distinct publication DOI for the given entity.

    The result is independent of snapshot order (records are keyed by
    DOI and returned sorted). An entity listed in a snapshot with zero
    surviving publications still counts as present.

    Raises:
        UnknownEntity: the entity appears in no snapshot.
    """
    present = False
    sources: dict[str, set[str]] = {}
    citers: dict[str, dict[str, set[str]]] = {}
    for snap in snapshots:
        match = snap.find(entity.kind, entity.id)
        if match is None:
            continue
        present = True
        for pub in match.publications:
            if pub.doi is None:
                raise ValueError("assemble requires filtered snapshots")
            sources.setdefault(pub.doi, set()).add(snap.source_name)
            per_source = citers.setdefault(pub.doi, {})
            per_source.setdefault(snap.source_name, set()).update(
                c for c in pub.citers if c is not None
            )
    if not present:
        raise UnknownEntity(f"{entity.kind.value} {entity.id!r} is in no snapshot")

    records = []
    for doi in sorted(sources):
        records.append(
            PublicationRecord(
                doi=DoiId(doi),
                sources=frozenset(sources[doi]),
                citers_by_source={
                    src: frozenset(DoiId(c) for c in cs)
                    for src, cs in citers[doi].items()
                },
            )
        )
    return records


def find_entity(
    snapshots: list[DatabaseSnapshot], kind: EntityKind, entity_id: str
) -> EntityRef:
    """Locate an entity across snapshots and resolve its group label.

    Snapshots may disagree on the label; the lexicographically smallest
    non-empty one wins so the result does not depend on snapshot order.

    Raises:
        UnknownEntity: no snapshot mentions the entity.
    """
    groups = []
    found = False
    for snap in snapshots:
        match = snap.find(kind, entity_id)
        if match is not None:
            found = True
            if match.ref.group:
                groups.append(match.ref.group)
    if not found:
        raise UnknownEntity(f"{kind.value} {entity_id!r} is in no snapshot")
    return EntityRef(kind, entity_id, min(groups) if groups else "")


def list_entities(snapshots: list[DatabaseSnapshot]) -> list[EntityRef]:
    """Every distinct entity across the snapshots, sorted, with group
    labels resolved as in find_entity."""
    keys = sorted(
        {(e.ref.kind, e.ref.id) for snap in snapshots for e in snap.entities},
        key=lambda pair: (pair[0].value, pair[1]),
    )
    return [find_entity(snapshots, kind, entity_id) for kind, entity_id in keys]
