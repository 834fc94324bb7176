"""HTTP ledger node: post entity CSVs, mine, serve the chain, resync.

Routes (all bodies JSON unless noted):

    POST /profile   entity CSV as text body -> {"accepted": n}
    POST /mine      -> {"index", "hash", "entry_count", "summary"}
    GET  /chain     -> {"length", "difficulty", "blocks": [...]}
    POST /peers     {"address": "http://host:port"} -> {"peers": [...]}
    POST /resync    -> {"replaced", "length", "peers_checked", "failed_peers"}

All state mutations (post, mine, resync) serialize through one lock;
reads of the chain take an immutable snapshot and are never blocked by
mining. The node refuses to start from a persisted chain that fails
validation, and after that every chain it serves validates by
construction.

The entity CSV carries no explicit database count, so the node infers N
as the number of distinct source names across the posted rows; a
``n_sources`` query parameter overrides the inference (needed when an
entity was indexed by fewer databases than the run conflated). Rows are
rejected unless common + unique equals the distinct citer count and the
weighted count recomputes under the pay-off rule.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import urlparse

import requests
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from . import ledger, report
from .model import ConflateError
from .report import CsvFormatError

PEER_TIMEOUT_SECONDS = 5.0


class ProfileRejected(ConflateError):
    """A posted CSV failed validation; carries row/column diagnostics."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class BadPeerAddress(ConflateError):
    pass


@dataclass(frozen=True)
class ResyncResult:
    replaced: bool
    length: int
    peers_checked: int
    failed_peers: tuple[str, ...]


def normalize_peer_address(address: str) -> str:
    parsed = urlparse(address.strip())
    if parsed.scheme not in ("http", "https") or not parsed.hostname:
        raise BadPeerAddress(f"not a usable peer address: {address!r}")
    port = f":{parsed.port}" if parsed.port else ""
    return f"{parsed.scheme}://{parsed.hostname}{port}"


def fetch_peer_chain(address: str, difficulty: int) -> ledger.Chain:
    """GET a peer's full chain and decode it under our difficulty."""
    response = requests.get(f"{address}/chain", timeout=PEER_TIMEOUT_SECONDS)
    response.raise_for_status()
    data = response.json()
    blocks = data.get("blocks")
    if not isinstance(blocks, list) or not blocks:
        raise ledger.LedgerFormatError(f"{address}: chain response has no blocks")
    return ledger.Chain(
        blocks=[
            ledger.block_from_dict(b, f"{address} block[{i}]")
            for i, b in enumerate(blocks)
        ],
        difficulty=difficulty,
    )


class NodeState:
    """All mutable node state, guarded by one mutation lock."""

    def __init__(
        self,
        difficulty: int = ledger.DEFAULT_DIFFICULTY,
        clock: Callable[[], float] = time.time,
        persist_path: str | Path | None = None,
        peers: Sequence[str] = (),
        self_port: int | None = None,
        fetch_chain: Callable[[str, int], ledger.Chain] = fetch_peer_chain,
    ):
        self._lock = threading.Lock()
        self.difficulty = difficulty
        self.clock = clock
        self.persist_path = Path(persist_path) if persist_path else None
        self.self_port = self_port
        self._fetch_chain = fetch_chain

        if self.persist_path and self.persist_path.exists():
            chain = ledger.load_chain(self.persist_path, difficulty)
            verdict = ledger.validate_chain(chain)
            if not verdict:
                raise ledger.LedgerFormatError(
                    f"persisted chain is invalid at block "
                    f"{verdict.first_failure_index}: {verdict.reason}"
                )
            self._blocks: tuple[ledger.Block, ...] = tuple(chain.blocks)
        else:
            self._blocks = tuple(ledger.genesis(difficulty).blocks)
            self._persist()

        self._pending: dict[ledger.LedgerEntry, None] = {}
        self._pending_meta: tuple[str, str] | None = None
        self.peers: set[str] = set()
        for peer in peers:
            self.register_peer(peer)

    # -- chain access -------------------------------------------------

    def chain_snapshot(self) -> ledger.Chain:
        return ledger.Chain(blocks=list(self._blocks), difficulty=self.difficulty)

    @property
    def pending_entries(self) -> tuple[ledger.LedgerEntry, ...]:
        return tuple(self._pending)

    def _persist(self) -> None:
        if self.persist_path:
            ledger.save_chain(self.chain_snapshot(), self.persist_path)

    # -- mutations ----------------------------------------------------

    def post_profile(self, body: str, n_sources: int | None = None) -> int:
        """Validate an entity CSV body and queue its rows as pending
        ledger entries. Returns the number of accepted rows; a row
        identical to an already-pending entry is accepted but queued
        once (posts are idempotent)."""
        try:
            ref, rows = report.parse_entity_csv(body)
        except CsvFormatError as exc:
            raise ProfileRejected(str(exc), row=exc.row, column=exc.column) from exc
        if not rows:
            return 0
        assert ref is not None  # rows imply entity columns

        if n_sources is None:
            names = {s for row in rows for s in row.sources}
            n_sources = max(len(names), 1)
        elif n_sources < 1:
            raise ProfileRejected("n_sources must be >= 1")

        entries = []
        for i, row in enumerate(rows, start=1):
            if row.common + row.unique != row.union:
                raise ProfileRejected(
                    f"row {i}: common ({row.common}) + unique ({row.unique}) != "
                    f"distinct citers ({row.union})",
                    row=i,
                    column="union_citations",
                )
            entry = ledger.LedgerEntry(
                record_doi=row.doi.value,
                n_sources=n_sources,
                common_count=row.common,
                unique_count=row.unique,
                weighted_citations=row.weighted,
            )
            if row.weighted != ledger.recomputed_weight(entry):
                raise ProfileRejected(
                    f"row {i}: weighted_citations ({row.weighted}) does not "
                    f"recompute as ceil(common + unique/{n_sources}); pass an "
                    "explicit n_sources if the inferred database count is wrong",
                    row=i,
                    column="weighted_citations",
                )
            entries.append(entry)

        meta = (ref.kind.value, ref.id)
        with self._lock:
            if self._pending and self._pending_meta != meta:
                raise ProfileRejected(
                    f"pending entries belong to {self._pending_meta[1]!r}; "
                    "mine them before posting another entity"
                )
            self._pending_meta = meta
            for entry in entries:
                self._pending[entry] = None
        return len(entries)

    def mine(self) -> ledger.Block:
        """Mine one block from all pending entries, append it, clear
        pending, and persist."""
        with self._lock:
            if not self._pending:
                raise ledger.EmptyPending("nothing to mine")
            kind, entity_id = self._pending_meta
            block = ledger.mine_block(
                self.chain_snapshot(),
                tuple(self._pending),
                ledger_kind=kind,
                entity_id=entity_id,
                clock=self.clock,
            )
            self._blocks = self._blocks + (block,)
            self._pending.clear()
            self._pending_meta = None
            self._persist()
            return block

    def register_peer(self, address: str) -> str:
        normalized = normalize_peer_address(address)
        parsed = urlparse(normalized)
        if (
            self.self_port is not None
            and parsed.port == self.self_port
            and parsed.hostname in ("localhost", "127.0.0.1", "0.0.0.0")
        ):
            raise BadPeerAddress(f"refusing to register self: {address!r}")
        with self._lock:
            self.peers.add(normalized)
        return normalized

    def resync(self) -> ResyncResult:
        """Fetch every registered peer's chain and adopt the longest
        valid one; unreachable or undecodable peers are skipped and
        reported."""
        with self._lock:
            candidates = []
            failed = []
            peers = sorted(self.peers)
            for peer in peers:
                try:
                    candidates.append(self._fetch_chain(peer, self.difficulty))
                except (requests.RequestException, ConflateError):
                    failed.append(peer)
            local = self.chain_snapshot()
            resolved = ledger.resolve(local, candidates)
            replaced = resolved is not local
            if replaced:
                self._blocks = tuple(resolved.blocks)
                self._persist()
            return ResyncResult(
                replaced=replaced,
                length=len(self._blocks),
                peers_checked=len(peers),
                failed_peers=tuple(failed),
            )


def create_app(state: NodeState) -> FastAPI:
    app = FastAPI(title="conflate ledger node")
    # The browser UI is served from a different port (5000 by
    # convention), so cross-origin requests are the normal case.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.node = state

    @app.post("/profile")
    async def post_profile(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        n_sources = request.query_params.get("n_sources")
        if n_sources is not None:
            try:
                n_sources = int(n_sources)
            except ValueError:
                return JSONResponse(
                    {"error": f"n_sources must be an integer: {n_sources!r}"},
                    status_code=400,
                )
        try:
            accepted = await run_in_threadpool(state.post_profile, body, n_sources)
        except ProfileRejected as exc:
            return JSONResponse(
                {"error": str(exc), "row": exc.row, "column": exc.column},
                status_code=400,
            )
        return {"accepted": accepted}

    @app.post("/mine")
    async def mine():
        try:
            block = await run_in_threadpool(state.mine)
        except ledger.EmptyPending:
            return JSONResponse({"error": "nothing to mine"}, status_code=409)
        return {
            "index": block.index,
            "hash": block.hash,
            "entry_count": len(block.entries),
            "summary": {
                "weighted_citations": block.summary.weighted_citations,
                "h_index": block.summary.h_index,
            },
        }

    @app.get("/chain")
    def chain():
        snapshot = state.chain_snapshot()
        return {
            "length": len(snapshot.blocks),
            "difficulty": snapshot.difficulty,
            "blocks": [ledger.block_to_dict(b) for b in snapshot.blocks],
        }

    @app.post("/peers")
    async def peers(request: Request):
        data = await request.json()
        address = data.get("address") if isinstance(data, dict) else None
        if not isinstance(address, str):
            return JSONResponse(
                {"error": "body must be {\"address\": \"http://host:port\"}"},
                status_code=400,
            )
        try:
            state.register_peer(address)
        except BadPeerAddress as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {"peers": sorted(state.peers)}

    @app.post("/resync")
    async def resync():
        result = await run_in_threadpool(state.resync)
        return {
            "replaced": result.replaced,
            "length": result.length,
            "peers_checked": result.peers_checked,
            "failed_peers": list(result.failed_peers),
        }

    return app
