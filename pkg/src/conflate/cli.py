"""Command-line front door.

    conflate compute --kind author --id <orcid> --sources a.json --sources b.json --out entity.csv
    conflate report  --sources a.json --sources b.json --group-by group --out groups.csv
    conflate serve   --port 8000 --difficulty 3 --persist chain.jsonl
    conflate post    entity.csv --node-url http://127.0.0.1:8000
    conflate mine    --node-url http://127.0.0.1:8000
    conflate resync  --node-url http://127.0.0.1:8000

Exit codes: 0 ok, 2 parse/usage error, 3 unknown entity, 4 node
unreachable, 5 server-reported error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import requests

from . import engine, ingest, ledger, report
from .model import CONFLATE_LABEL, ConflateError, EntityKind, EntityRef, InvalidEntityId
from .ingest import UnknownEntity

EXIT_PARSE = 2
EXIT_UNKNOWN_ENTITY = 3
EXIT_CONNECTION = 4
EXIT_SERVER = 5

DEFAULT_PORT = 8000
DEFAULT_NODE_URL = f"http://127.0.0.1:{DEFAULT_PORT}"


def _env(name: str, default):
    return os.environ.get(f"CONFLATE_{name}", default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conflate",
        description="Weighted unified citation metrics and the ledger node serving them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser(
        "compute", help="conflate one entity's metrics from snapshot files"
    )
    compute.add_argument(
        "--kind", required=True, choices=[k.value for k in EntityKind]
    )
    compute.add_argument("--id", required=True, help="ORCID / organization name / ISSN")
    compute.add_argument(
        "--sources",
        action="append",
        required=True,
        metavar="FILE",
        help="snapshot file; repeat once per database",
    )
    compute.add_argument("--out", required=True, help="entity CSV output path")

    rep = sub.add_parser(
        "report", help="group-level totals and mean/std-dev statistics"
    )
    rep.add_argument("--sources", action="append", required=True, metavar="FILE")
    rep.add_argument(
        "--group-by", default="group", choices=["group", "kind"],
        help="label to aggregate on (default: group)",
    )
    rep.add_argument("--out", required=True, help="group summary CSV output path")

    serve = sub.add_parser("serve", help="run a ledger node")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=int(_env("PORT", DEFAULT_PORT)))
    serve.add_argument(
        "--difficulty",
        type=int,
        default=int(_env("DIFFICULTY", ledger.DEFAULT_DIFFICULTY)),
        help="leading zero hex digits required of block hashes",
    )
    serve.add_argument(
        "--persist",
        default=_env("CHAIN_FILE", None),
        help="chain file, one block per line; loaded at start when present",
    )
    serve.add_argument(
        "--peer",
        action="append",
        default=None,
        metavar="URL",
        help="peer base address; repeatable (default: CONFLATE_PEERS, comma-separated)",
    )
    serve.add_argument(
        "--clock",
        type=int,
        default=None,
        metavar="EPOCH_SECONDS",
        help="fixed timestamp for reproducible mining",
    )

    for name, help_text in (
        ("post", "post an entity CSV to a node"),
        ("mine", "ask a node to mine its pending entries"),
        ("resync", "ask a node to adopt the longest valid peer chain"),
    ):
        client = sub.add_parser(name, help=help_text)
        client.add_argument(
            "--node-url", default=_env("NODE_URL", DEFAULT_NODE_URL)
        )
        if name == "post":
            client.add_argument("file", help="entity CSV file")
            client.add_argument(
                "--n-sources",
                type=int,
                default=None,
                help="conflated database count when it cannot be inferred from the CSV",
            )
    return parser


def _load_filtered(paths: list[str]) -> list[ingest.DatabaseSnapshot]:
    return [ingest.filter_snapshot(s) for s in ingest.load_snapshots(paths)]


def _print_indicators(indicators: dict[str, engine.IndicatorRow]) -> None:
    width = max(len(label) for label in indicators)
    print(f"{'':<{width}}  {'articles':>9} {'citations':>10} {'h-index':>8} {'mean':>9}")
    for label, row in indicators.items():
        print(
            f"{label:<{width}}  {row.articles:>9} {row.citations:>10} "
            f"{row.h_index:>8} {row.mean_citations:>9.2f}"
        )


def cmd_compute(args) -> int:
    kind = EntityKind(args.kind)
    try:
        EntityRef(kind, args.id)
    except InvalidEntityId as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        snapshots = _load_filtered(args.sources)
        entity = ingest.find_entity(snapshots, kind, args.id)
        records = ingest.assemble(snapshots, entity)
    except UnknownEntity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_ENTITY
    except ConflateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    metrics = engine.conflate_entity(
        entity, records, [s.source_name for s in snapshots]
    )
    report.export_entity_csv(metrics, args.out)
    print(f"{entity.kind.value} {entity.id}  group={entity.group or '-'}")
    _print_indicators(engine.related_indicators(metrics))
    print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    try:
        snapshots = _load_filtered(args.sources)
        entities = ingest.list_entities(snapshots)
    except ConflateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    names = [s.source_name for s in snapshots]
    metrics = [
        engine.conflate_entity(e, ingest.assemble(snapshots, e), names)
        for e in entities
    ]
    group_by = (lambda m: m.entity.kind.value) if args.group_by == "kind" else None
    try:
        summaries = report.aggregate(metrics, group_by)
        stats = report.summary_stats(metrics)
    except report.EmptyInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    labels = sorted(names) + [CONFLATE_LABEL]
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["group", "entities"]
            + [f"articles_{lb}" for lb in labels]
            + [f"citations_{lb}" for lb in labels]
            + [f"avg_h_{lb}" for lb in labels]
        )
        for s in summaries:
            writer.writerow(
                [s.group, s.entity_count]
                + [s.articles[lb] for lb in labels]
                + [s.citations[lb] for lb in labels]
                + [s.avg_h[lb] for lb in labels]
            )

    print(f"{len(metrics)} entities in {len(summaries)} groups; wrote {args.out}")
    print("mean / population std dev per source:")
    for label in labels:
        line = stats[label]
        print(
            f"  {label}: articles {line['articles'].mean:.2f}/{line['articles'].std:.2f}"
            f"  citations {line['citations'].mean:.2f}/{line['citations'].std:.2f}"
            f"  h {line['h'].mean:.2f}/{line['h'].std:.2f}"
        )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .node import NodeState, create_app

    peers = args.peer
    if peers is None:
        env_peers = _env("PEERS", "")
        peers = [p for p in env_peers.split(",") if p.strip()]
    clock = (lambda: args.clock) if args.clock is not None else time.time
    try:
        state = NodeState(
            difficulty=args.difficulty,
            clock=clock,
            persist_path=args.persist,
            peers=peers,
            self_port=args.port,
        )
    except ConflateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    uvicorn.run(create_app(state), host=args.host, port=args.port, log_level="warning")
    return 0


def _client_call(method: str, url: str, **kwargs) -> tuple[int, dict]:
    try:
        response = requests.request(method, url, timeout=30, **kwargs)
    except requests.RequestException as exc:
        print(f"error: cannot reach node: {exc}", file=sys.stderr)
        return EXIT_CONNECTION, {}
    try:
        payload = response.json()
    except ValueError:
        payload = {"error": response.text}
    print(json.dumps(payload, indent=2))
    if response.status_code >= 400:
        return EXIT_SERVER, payload
    return 0, payload


def cmd_post(args) -> int:
    try:
        body = open(args.file, encoding="utf-8").read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    params = {}
    if args.n_sources is not None:
        params["n_sources"] = str(args.n_sources)
    code, _ = _client_call(
        "POST",
        f"{args.node_url}/profile",
        params=params,
        data=body.encode("utf-8"),
        headers={"content-type": "text/plain; charset=utf-8"},
    )
    return code


def cmd_mine(args) -> int:
    code, _ = _client_call("POST", f"{args.node_url}/mine")
    return code


def cmd_resync(args) -> int:
    code, _ = _client_call("POST", f"{args.node_url}/resync")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "compute": cmd_compute,
        "report": cmd_report,
        "serve": cmd_serve,
        "post": cmd_post,
        "mine": cmd_mine,
        "resync": cmd_resync,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
