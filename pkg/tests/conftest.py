import json
import random

import pytest

from conflate.model import DoiId, EntityKind, EntityRef, PublicationRecord

AUTHOR = EntityRef(EntityKind.AUTHOR, "0000-0001-2345-6789", "Sciences")
SOURCES = ("scopus", "wos")


def pub(doi, *citers):
    return {"doi": doi, "citers": [{"doi": c} for c in citers]}


def entity_payload(ref: EntityRef, publications):
    return {
        "kind": ref.kind.value,
        "id": ref.id,
        "group": ref.group,
        "publications": publications,
    }


def snapshot_payload(database, entities):
    return {"database": database, "entities": entities}


def record(doi: str, citers_by_source: dict[str, list[str]]) -> PublicationRecord:
    return PublicationRecord(
        doi=DoiId(doi),
        sources=frozenset(citers_by_source),
        citers_by_source={
            src: frozenset(DoiId(c) for c in citers)
            for src, citers in citers_by_source.items()
        },
    )


def table2_payloads(example: int):
    """Snapshot payload pair (scopus, wos) for the three worked weighting
    examples: (1) 3 citations in scopus only, (2) 3+3 with 2 common,
    (3) 3 identical citer sets."""
    a, b, c, d = "10.2000/a", "10.2000/b", "10.2000/c", "10.2000/d"
    citers = {
        1: (["10.2000/c1", "10.2000/c2", "10.2000/c3"], []),
        2: ([a, b, c], [a, b, d]),
        3: ([a, b, c], [a, b, c]),
    }[example]
    scopus = snapshot_payload(
        "scopus", [entity_payload(AUTHOR, [pub("10.1000/px", *citers[0])])]
    )
    wos = snapshot_payload(
        "wos", [entity_payload(AUTHOR, [pub("10.1000/px", *citers[1])])]
    )
    return scopus, wos


def random_records(
    rng: random.Random,
    sources=SOURCES,
    max_records: int = 8,
    max_citers: int = 30,
    pool_size: int = 60,
) -> list[PublicationRecord]:
    """Randomized per-entity records: each publication lands in a random
    non-empty subset of the sources, each such source gets a random citer
    subset drawn from a shared pool (so overlaps actually happen)."""
    pool = [f"10.9999/c{i}" for i in range(pool_size)]
    records = []
    for i in range(rng.randint(1, max_records)):
        present = [s for s in sources if rng.random() < 0.8]
        if not present:
            present = [rng.choice(sources)]
        citers_by_source = {
            s: rng.sample(pool, rng.randint(0, max_citers)) for s in present
        }
        records.append(record(f"10.1000/p{i}", citers_by_source))
    return records


@pytest.fixture
def write_snapshot(tmp_path):
    def _write(filename: str, payload) -> str:
        path = tmp_path / filename
        path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture
def table2_files(write_snapshot):
    def _files(example: int):
        scopus, wos = table2_payloads(example)
        return [
            write_snapshot(f"scopus_{example}.json", scopus),
            write_snapshot(f"wos_{example}.json", wos),
        ]

    return _files
