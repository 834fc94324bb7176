import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conflate import ingest
from conflate.ingest import (
    DatabaseSnapshot,
    DuplicateEntity,
    DuplicateSource,
    ParseError,
    RawPublication,
    SnapshotEntity,
    UnknownEntity,
)
from conflate.model import DoiId, EntityKind, EntityRef

from conftest import AUTHOR, entity_payload, pub, snapshot_payload

JOURNAL = EntityRef(EntityKind.JOURNAL, "1234-5678", "Engineering")


class TestLoadSnapshot:
    def test_well_formed(self, write_snapshot):
        path = write_snapshot(
            "ok.json",
            snapshot_payload(
                "scopus",
                [
                    entity_payload(AUTHOR, [pub("10.1/x", "10.2/a")]),
                    entity_payload(JOURNAL, []),
                ],
            ),
        )
        snap = ingest.load_snapshot(path)
        assert snap.source_name == "scopus"
        assert len(snap.entities) == 2
        assert snap.entities[0].publications[0].citers == ("10.2/a",)

    def test_duplicate_entity(self, write_snapshot):
        payload = snapshot_payload(
            "scopus", [entity_payload(AUTHOR, []), entity_payload(AUTHOR, [])]
        )
        with pytest.raises(DuplicateEntity):
            ingest.load_snapshot(write_snapshot("dup.json", payload))

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"database": "scopus", "entities": [{"kind"')
        with pytest.raises(ParseError) as err:
            ingest.load_snapshot(path)
        assert "broken.json:1:" in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            ingest.load_snapshot(tmp_path / "nope.json")

    def test_unknown_kind(self, write_snapshot):
        payload = {
            "database": "scopus",
            "entities": [{"kind": "planet", "id": "x", "publications": []}],
        }
        with pytest.raises(ParseError):
            ingest.load_snapshot(write_snapshot("kind.json", payload))

    def test_bad_id_shape_is_parse_error(self, write_snapshot):
        payload = {
            "database": "scopus",
            "entities": [{"kind": "author", "id": "not-an-orcid", "publications": []}],
        }
        with pytest.raises(ParseError):
            ingest.load_snapshot(write_snapshot("badid.json", payload))

    def test_reserved_source_name(self, write_snapshot):
        with pytest.raises(ParseError):
            ingest.load_snapshot(
                write_snapshot("r.json", snapshot_payload("conflate", []))
            )

    def test_unknown_fields_ignored(self, write_snapshot):
        payload = snapshot_payload("scopus", [entity_payload(AUTHOR, [pub("10.1/x")])])
        payload["schema_version"] = 9
        payload["entities"][0]["extra"] = {"nested": True}
        payload["entities"][0]["publications"][0]["title"] = "ignored"
        snap = ingest.load_snapshot(write_snapshot("extra.json", payload))
        assert snap.entities[0].publications[0].doi == "10.1/x"

    def test_duplicate_source_across_run(self, write_snapshot):
        a = write_snapshot("a.json", snapshot_payload("scopus", []))
        b = write_snapshot("b.json", snapshot_payload("scopus", []))
        with pytest.raises(DuplicateSource):
            ingest.load_snapshots([a, b])


def snapshot_of(entries, source="scopus", ref=AUTHOR):
    return DatabaseSnapshot(
        source, (SnapshotEntity(ref, tuple(RawPublication(d, tuple(c)) for d, c in entries)),)
    )


class TestFiltration:
    def test_articles_without_doi_dropped(self):
        snap = snapshot_of(
            [
                ("10.1/a", []),
                (None, []),
                ("10.1/b", []),
                ("not a doi", []),
                ("10.1/c", []),
            ]
        )
        filtered = ingest.filter_articles(snap)
        assert [p.doi for p in filtered.entities[0].publications] == [
            "10.1/a",
            "10.1/b",
            "10.1/c",
        ]

    def test_entity_kept_when_everything_dropped(self):
        filtered = ingest.filter_articles(snapshot_of([(None, []), ("junk", [])]))
        assert len(filtered.entities) == 1
        assert filtered.entities[0].publications == ()

    def test_article_dois_normalized(self):
        filtered = ingest.filter_articles(
            snapshot_of([("https://doi.org/10.1/UP", [])])
        )
        assert filtered.entities[0].publications[0].doi == "10.1/up"

    def test_citers_skip_and_dedup(self):
        snap = snapshot_of([("10.1/x", ["10.2/d1", None, "10.2/d1"])])
        filtered = ingest.filter_citers(snap)
        assert filtered.entities[0].publications[0].citers == ("10.2/d1",)

    def test_zero_citers(self):
        filtered = ingest.filter_citers(snapshot_of([("10.1/x", [])]))
        assert filtered.entities[0].publications[0].citers == ()

    def test_citers_normalize_then_dedup(self):
        # oracle: normalize each entry, insert into a set
        raw = ["DOI:10.1/A", "10.1/a"]
        expected = {"10.1/a"}
        snap = snapshot_of([("10.1/x", raw)])
        filtered = ingest.filter_citers(snap)
        assert set(filtered.entities[0].publications[0].citers) == expected

    @given(
        st.lists(
            st.tuples(
                st.one_of(st.none(), st.text(max_size=12)),
                st.lists(st.one_of(st.none(), st.text(max_size=12)), max_size=5),
            ),
            max_size=8,
        )
    )
    def test_filtration_never_increases_counts(self, entries):
        snap = snapshot_of(entries)
        filtered = ingest.filter_articles(snap)
        assert len(filtered.entities[0].publications) <= len(entries)
        citer_filtered = ingest.filter_citers(filtered)
        for before, after in zip(
            filtered.entities[0].publications, citer_filtered.entities[0].publications
        ):
            assert len(after.citers) <= len(before.citers)


class TestAssemble:
    def two_filtered(self):
        scopus = snapshot_of([("10.1/d", ["10.2/x"])], source="s")
        wos = snapshot_of([("10.1/d", ["10.2/y"])], source="w")
        return [ingest.filter_snapshot(scopus), ingest.filter_snapshot(wos)]

    def test_merges_presence_and_citers(self):
        records = ingest.assemble(self.two_filtered(), AUTHOR)
        assert len(records) == 1
        rec = records[0]
        assert rec.sources == frozenset({"s", "w"})
        assert rec.citers_by_source == {
            "s": frozenset({DoiId("10.2/x")}),
            "w": frozenset({DoiId("10.2/y")}),
        }

    def test_single_source_publication(self):
        snaps = [
            ingest.filter_snapshot(snapshot_of([("10.1/only", [])], source="s")),
            ingest.filter_snapshot(snapshot_of([], source="w")),
        ]
        records = ingest.assemble(snaps, AUTHOR)
        assert records[0].sources == frozenset({"s"})

    def test_unknown_entity(self):
        with pytest.raises(UnknownEntity):
            ingest.assemble(self.two_filtered(), JOURNAL)

    def test_order_invariant(self):
        snaps = self.two_filtered()
        assert ingest.assemble(snaps, AUTHOR) == ingest.assemble(snaps[::-1], AUTHOR)

    def test_duplicate_doi_within_source_unions_citers(self):
        snap = ingest.filter_snapshot(
            snapshot_of([("10.1/d", ["10.2/x"]), ("doi:10.1/D", ["10.2/y"])], source="s")
        )
        records = ingest.assemble([snap], AUTHOR)
        assert len(records) == 1
        assert records[0].citers_by_source["s"] == frozenset(
            {DoiId("10.2/x"), DoiId("10.2/y")}
        )

    def test_no_fabricated_dois(self):
        snaps = self.two_filtered()
        seen = {
            p.doi
            for snap in snaps
            for e in snap.entities
            for p in e.publications
        } | {
            c
            for snap in snaps
            for e in snap.entities
            for p in e.publications
            for c in p.citers
        }
        for rec in ingest.assemble(snaps, AUTHOR):
            assert rec.doi.value in seen
            for citers in rec.citers_by_source.values():
                assert {c.value for c in citers} <= seen


class TestEntityLookup:
    def test_find_entity_resolves_group_order_free(self):
        a = DatabaseSnapshot(
            "s", (SnapshotEntity(EntityRef(AUTHOR.kind, AUTHOR.id, "Zoology"), ()),)
        )
        b = DatabaseSnapshot(
            "w", (SnapshotEntity(EntityRef(AUTHOR.kind, AUTHOR.id, "Anatomy"), ()),)
        )
        expected = EntityRef(AUTHOR.kind, AUTHOR.id, "Anatomy")
        assert ingest.find_entity([a, b], AUTHOR.kind, AUTHOR.id) == expected
        assert ingest.find_entity([b, a], AUTHOR.kind, AUTHOR.id) == expected

    def test_list_entities_sorted_and_deduped(self):
        a = DatabaseSnapshot(
            "s",
            (
                SnapshotEntity(JOURNAL, ()),
                SnapshotEntity(AUTHOR, ()),
            ),
        )
        b = DatabaseSnapshot("w", (SnapshotEntity(AUTHOR, ()),))
        entities = ingest.list_entities([a, b])
        assert [e.id for e in entities] == [AUTHOR.id, JOURNAL.id]
