#!/usr/bin/env python3
"""Generate randomized snapshot fixture files for desk-scale runs.

Writes one JSON snapshot per database, sharing entities and overlapping
citer pools so common/unique splits are non-trivial:

    python3 scripts/make_snapshots.py --out-dir data --seed 7 \
        --databases scopus --databases wos --authors 12 --journals 4
"""
import argparse
import json
import random
from pathlib import Path

GROUPS = ["Life Sciences", "Sciences", "Social Sciences", "Engineering", "Humanities"]
ORG_GROUPS = ["Universities", "IITs", "NITs", "IISC & IISER"]


def orcid(rng):
    return "-".join(f"{rng.randint(0, 9999):04d}" for _ in range(4))


def issn(rng):
    return f"{rng.randint(0, 9999):04d}-{rng.randint(0, 999):03d}{rng.choice('0123456789X')}"


def make_entities(rng, n_authors, n_journals, n_organizations):
    entities = []
    for _ in range(n_authors):
        entities.append(("author", orcid(rng), rng.choice(GROUPS)))
    for _ in range(n_journals):
        entities.append(("journal", issn(rng), rng.choice(GROUPS)))
    for i in range(n_organizations):
        entities.append(("organization", f"Institute {i:03d}", rng.choice(ORG_GROUPS)))
    return entities


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="data")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument(
        "--databases", action="append", default=None, help="repeatable; default scopus, wos"
    )
    parser.add_argument("--authors", type=int, default=10)
    parser.add_argument("--journals", type=int, default=3)
    parser.add_argument("--organizations", type=int, default=3)
    parser.add_argument("--max-publications", type=int, default=12)
    parser.add_argument("--max-citers", type=int, default=25)
    parser.add_argument(
        "--missing-doi-rate", type=float, default=0.1,
        help="fraction of entries emitted without a DOI (exercises filtration)",
    )
    args = parser.parse_args()
    databases = args.databases or ["scopus", "wos"]

    rng = random.Random(args.seed)
    entities = make_entities(rng, args.authors, args.journals, args.organizations)
    citer_pool = [f"10.9000/cite{i}" for i in range(400)]

    # per entity: publications with a global DOI and per-database presence
    catalog = []
    for kind, entity_id, group in entities:
        pubs = []
        for p in range(rng.randint(1, args.max_publications)):
            doi = f"10.{rng.randint(1000, 9999)}/{kind[:3]}{len(catalog)}p{p}"
            present_in = [db for db in databases if rng.random() < 0.8]
            if not present_in:
                present_in = [rng.choice(databases)]
            shared = rng.sample(citer_pool, rng.randint(0, args.max_citers))
            per_db = {}
            for db in present_in:
                extra = rng.sample(citer_pool, rng.randint(0, args.max_citers // 2))
                per_db[db] = sorted(set(rng.sample(shared, rng.randint(0, len(shared)))) | set(extra))
            pubs.append((doi, per_db))
        catalog.append((kind, entity_id, group, pubs))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for db in databases:
        entities_json = []
        for kind, entity_id, group, pubs in catalog:
            pub_entries = []
            for doi, per_db in pubs:
                if db not in per_db:
                    continue
                entry_doi = None if rng.random() < args.missing_doi_rate else doi
                citers = [
                    {"doi": None if rng.random() < args.missing_doi_rate else c}
                    for c in per_db[db]
                ]
                pub_entries.append({"doi": entry_doi, "citers": citers})
            entities_json.append(
                {
                    "kind": kind,
                    "id": entity_id,
                    "group": group,
                    "publications": pub_entries,
                }
            )
        path = out_dir / f"{db}.json"
        path.write_text(
            json.dumps({"database": db, "entities": entities_json}, indent=1),
            encoding="utf-8",
        )
        print(f"wrote {path}")
    sample = catalog[0]
    print(f"try: conflate compute --kind {sample[0]} --id '{sample[1]}' "
          + " ".join(f"--sources {out_dir}/{db}.json" for db in databases)
          + " --out entity.csv")


if __name__ == "__main__":
    main()
