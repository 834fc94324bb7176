import json
import socket
import subprocess
import sys
import time

import pytest
import requests

from conflate import report
from conflate.cli import main

from conftest import AUTHOR, entity_payload, pub, snapshot_payload, table2_payloads


def free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_until_up(url, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            requests.get(f"{url}/chain", timeout=1)
            return
        except requests.RequestException:
            time.sleep(0.1)
    raise RuntimeError(f"node at {url} did not come up")


@pytest.fixture(scope="module")
def live_node(tmp_path_factory):
    port = free_port()
    persist = tmp_path_factory.mktemp("node") / "chain.jsonl"
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "conflate.cli",
            "serve",
            "--port",
            str(port),
            "--difficulty",
            "1",
            "--persist",
            str(persist),
            "--clock",
            "1700000000",
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        wait_until_up(url)
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


class TestCompute:
    def test_partial_overlap_fixture(self, table2_files, tmp_path, capsys):
        out = tmp_path / "entity.csv"
        code = main(
            ["compute", "--kind", "author", "--id", AUTHOR.id, "--out", str(out)]
            + [arg for f in table2_files(2) for arg in ("--sources", f)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        conflate_line = next(
            line for line in printed.splitlines() if line.startswith("conflate")
        )
        assert conflate_line.split() == ["conflate", "1", "3", "1", "3.00"]
        ref, rows = report.import_entity_csv(out)
        assert ref == AUTHOR
        assert rows[0].weighted == 3

    def test_single_source_fixture(self, table2_files, tmp_path, capsys):
        out = tmp_path / "entity.csv"
        code = main(
            ["compute", "--kind", "author", "--id", AUTHOR.id, "--out", str(out)]
            + [arg for f in table2_files(1) for arg in ("--sources", f)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        conflate_line = next(
            line for line in printed.splitlines() if line.startswith("conflate")
        )
        assert int(conflate_line.split()[2]) == 2

    def test_unknown_entity(self, table2_files, tmp_path, capsys):
        code = main(
            [
                "compute",
                "--kind",
                "author",
                "--id",
                "0000-0009-9999-9999",
                "--out",
                str(tmp_path / "x.csv"),
            ]
            + [arg for f in table2_files(2) for arg in ("--sources", f)]
        )
        assert code == 3

    def test_malformed_id_is_usage_error(self, table2_files, tmp_path):
        code = main(
            ["compute", "--kind", "author", "--id", "garbage", "--out",
             str(tmp_path / "x.csv")]
            + [arg for f in table2_files(2) for arg in ("--sources", f)]
        )
        assert code == 2

    def test_unparseable_snapshot(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        code = main(
            [
                "compute",
                "--kind",
                "author",
                "--id",
                AUTHOR.id,
                "--sources",
                str(bad),
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )
        assert code == 2

    def test_printed_summary_matches_reimported_csv(
        self, table2_files, tmp_path, capsys
    ):
        out = tmp_path / "entity.csv"
        main(
            ["compute", "--kind", "author", "--id", AUTHOR.id, "--out", str(out)]
            + [arg for f in table2_files(2) for arg in ("--sources", f)]
        )
        printed = capsys.readouterr().out
        conflate_line = next(
            line for line in printed.splitlines() if line.startswith("conflate")
        )
        _, rows = report.import_entity_csv(out)
        n = 2
        total_common = sum(r.common for r in rows)
        total_unique = sum(r.unique for r in rows)
        recomputed = total_common + -(-total_unique // n)
        assert int(conflate_line.split()[2]) == recomputed


class TestReport:
    def fixture_files(self, write_snapshot):
        author2 = dict(
            kind="author", id="0000-0002-0000-0001", group="Sciences",
            publications=[pub("10.1/z", "10.9/x")],
        )
        journal = dict(
            kind="journal", id="1234-5678", group="Engineering",
            publications=[pub("10.1/j")],
        )
        scopus, wos = table2_payloads(2)
        scopus["entities"].extend([author2, journal])
        return [
            write_snapshot("s.json", scopus),
            write_snapshot("w.json", wos),
        ]

    def test_group_summary(self, write_snapshot, tmp_path, capsys):
        out = tmp_path / "groups.csv"
        code = main(
            ["report", "--out", str(out), "--group-by", "group"]
            + [arg for f in self.fixture_files(write_snapshot) for arg in ("--sources", f)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("group,entities,articles_scopus,articles_wos,articles_conflate")
        groups = {line.split(",")[0] for line in lines[1:]}
        assert groups == {"Sciences", "Engineering"}
        printed = capsys.readouterr().out
        assert "std dev" in printed

    def test_group_by_kind(self, write_snapshot, tmp_path):
        out = tmp_path / "kinds.csv"
        code = main(
            ["report", "--out", str(out), "--group-by", "kind"]
            + [arg for f in self.fixture_files(write_snapshot) for arg in ("--sources", f)]
        )
        assert code == 0
        groups = [line.split(",")[0] for line in out.read_text().splitlines()[1:]]
        assert groups == ["author", "journal"]

    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[]")
        code = main(
            ["report", "--sources", str(bad), "--out", str(tmp_path / "g.csv")]
        )
        assert code == 2


class TestClientCommands:
    def entity_csv(self, tmp_path):
        path = tmp_path / "entity.csv"
        path.write_text(
            "entity_kind,entity_id,group,doi,sources,common_citations,"
            "unique_citations,union_citations,weighted_citations\n"
            "author,0000-0001-2345-6789,Sciences,10.1000/p1,scopus+wos,2,2,4,3\n"
            "author,0000-0001-2345-6789,Sciences,10.1000/p2,scopus+wos,1,1,2,2\n"
            "author,0000-0001-2345-6789,Sciences,10.1000/p3,scopus,0,3,3,2\n",
            encoding="utf-8",
        )
        return str(path)

    def test_post_mine_resync_flow(self, live_node, tmp_path, capsys):
        code = main(["post", self.entity_csv(tmp_path), "--node-url", live_node])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["accepted"] == 3

        code = main(["mine", "--node-url", live_node])
        assert code == 0
        mined = json.loads(capsys.readouterr().out)
        assert mined["entry_count"] == 3

        code = main(["mine", "--node-url", live_node])
        assert code == 5
        capsys.readouterr()

        code = main(["resync", "--node-url", live_node])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["replaced"] is False

    def test_connection_failure(self, tmp_path, capsys):
        dead = f"http://127.0.0.1:{free_port()}"
        code = main(["mine", "--node-url", dead])
        assert code == 4

    def test_post_missing_file(self, tmp_path, capsys):
        code = main(["post", str(tmp_path / "nope.csv"), "--node-url", "http://x"])
        assert code == 2
