"""Append-only hash-chained informetric ledgers.

A chain's blocks each commit a batch of ledger entries: one entry per
publication (the record, keyed by DOI), whose citations are the
transactions. Blocks are found by hash-prefix proof-of-work and carry a
summary (total weighted citations plus h-index over per-entry union
citer counts) that every validator recomputes from the entries — the
summation consensus rule. That makes semantic tampering detectable even
when the tamperer re-mines the block.

Canonical hashing byte layout (also documented in the README): the
SHA-256 input is the concatenation of length-prefixed fields, in order

    index, timestamp, ledger_kind, entity_id,
    entry_count, entries..., summary_weighted, summary_h,
    previous_hash, nonce

where every field is rendered as its UTF-8 string (integers in decimal)
preceded by its byte length as a 4-byte big-endian integer, and each
entry contributes record_doi, n_sources, common_count, unique_count,
weighted_citations, transaction_count, then per transaction the citer
DOI and its source tag. The stored ``hash`` field is the lowercase hex
digest and is excluded from its own input.

Entry-level arithmetic invariants are deliberately enforced by
``validate_chain`` rather than by constructors, so tampered states
remain representable (otherwise tamper evidence could not be tested or
even expressed).
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import engine
from .model import ConflateError

GENESIS_PREVIOUS_HASH = "0" * 64
GENESIS_TIMESTAMP = 0
DEFAULT_DIFFICULTY = 3


class EmptyPending(ConflateError):
    """Raised when mining is requested with nothing to commit."""


class LedgerFormatError(ConflateError):
    """A serialized block or chain could not be decoded."""


@dataclass(frozen=True)
class CitationTransaction:
    """One citing work: its DOI and the '+'-joined tag of the source
    databases that reported it."""

    citer_doi: str
    source_tag: str


@dataclass(frozen=True)
class LedgerEntry:
    """One publication committed to the ledger.

    ``transactions`` lists the individual citers when the entry was
    built straight from engine output; entries reconstructed from the
    entity CSV carry counts only (the CSV does not contain citer DOIs).
    """

    record_doi: str
    n_sources: int
    common_count: int
    unique_count: int
    weighted_citations: int
    transactions: tuple[CitationTransaction, ...] = ()

    def __post_init__(self) -> None:
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if min(self.common_count, self.unique_count, self.weighted_citations) < 0:
            raise ValueError("negative citation count")

    @property
    def union_count(self) -> int:
        return self.common_count + self.unique_count


def recomputed_weight(entry: LedgerEntry) -> int:
    """The pay-off rule applied to the entry's stored counts."""
    return math.ceil(
        entry.common_count + Fraction(entry.unique_count, entry.n_sources)
    )


@dataclass(frozen=True)
class BlockSummary:
    weighted_citations: int
    h_index: int


@dataclass(frozen=True)
class Block:
    index: int
    timestamp: int
    ledger_kind: str
    entity_id: str
    entries: tuple[LedgerEntry, ...]
    summary: BlockSummary
    previous_hash: str
    nonce: int
    hash: str


@dataclass
class Chain:
    blocks: list[Block]
    difficulty: int

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]


def compute_summary(entries: Iterable[LedgerEntry]) -> BlockSummary:
    """Recompute a block summary from its entries: pay-off-weighted
    total plus h-index over per-entry union citer counts."""
    entries = list(entries)
    return BlockSummary(
        weighted_citations=sum(recomputed_weight(e) for e in entries),
        h_index=engine.h_index(e.union_count for e in entries),
    )


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def _lp_str(value: str) -> bytes:
    return _lp(value.encode("utf-8"))


def _lp_int(value: int) -> bytes:
    return _lp_str(str(value))


def _entry_bytes(entry: LedgerEntry) -> bytes:
    parts = [
        _lp_str(entry.record_doi),
        _lp_int(entry.n_sources),
        _lp_int(entry.common_count),
        _lp_int(entry.unique_count),
        _lp_int(entry.weighted_citations),
        _lp_int(len(entry.transactions)),
    ]
    for tx in entry.transactions:
        parts.append(_lp_str(tx.citer_doi))
        parts.append(_lp_str(tx.source_tag))
    return b"".join(parts)


def _prefix_bytes(
    index: int,
    timestamp: int,
    ledger_kind: str,
    entity_id: str,
    entries: Sequence[LedgerEntry],
    summary: BlockSummary,
    previous_hash: str,
) -> bytes:
    parts = [
        _lp_int(index),
        _lp_int(timestamp),
        _lp_str(ledger_kind),
        _lp_str(entity_id),
        _lp_int(len(entries)),
    ]
    parts.extend(_entry_bytes(e) for e in entries)
    parts.append(_lp_int(summary.weighted_citations))
    parts.append(_lp_int(summary.h_index))
    parts.append(_lp_str(previous_hash))
    return b"".join(parts)


def block_bytes(
    index: int,
    timestamp: int,
    ledger_kind: str,
    entity_id: str,
    entries: Sequence[LedgerEntry],
    summary: BlockSummary,
    previous_hash: str,
    nonce: int,
) -> bytes:
    """Canonical serialization of every hashed block field, in order."""
    return _prefix_bytes(
        index, timestamp, ledger_kind, entity_id, entries, summary, previous_hash
    ) + _lp_int(nonce)


def block_hash(block: Block) -> str:
    """Recompute the digest of a block from its stored fields."""
    return hashlib.sha256(
        block_bytes(
            block.index,
            block.timestamp,
            block.ledger_kind,
            block.entity_id,
            block.entries,
            block.summary,
            block.previous_hash,
            block.nonce,
        )
    ).hexdigest()


def meets_difficulty(digest: str, difficulty: int) -> bool:
    return digest.startswith("0" * difficulty)


def genesis(difficulty: int, timestamp: int = GENESIS_TIMESTAMP) -> Chain:
    """A fresh chain holding only the genesis block. The default
    timestamp is fixed so independently started nodes share a genesis."""
    if difficulty < 1:
        raise ValueError("difficulty must be >= 1")
    summary = BlockSummary(0, 0)
    block = Block(
        index=0,
        timestamp=timestamp,
        ledger_kind="",
        entity_id="",
        entries=(),
        summary=summary,
        previous_hash=GENESIS_PREVIOUS_HASH,
        nonce=0,
        hash=hashlib.sha256(
            block_bytes(0, timestamp, "", "", (), summary, GENESIS_PREVIOUS_HASH, 0)
        ).hexdigest(),
    )
    return Chain(blocks=[block], difficulty=difficulty)


def mine_block(
    chain: Chain,
    pending: Sequence[LedgerEntry],
    ledger_kind: str,
    entity_id: str,
    clock: Callable[[], float] = time.time,
) -> Block:
    """Find the next block committing ``pending``.

    The nonce is scanned upward from 0, so with a fixed clock the found
    nonce and hash are reproducible. The block is returned, not
    appended.

    Raises:
        EmptyPending: no entries to commit.
    """
    if not pending:
        raise EmptyPending("no pending entries to mine")
    entries = tuple(pending)
    summary = compute_summary(entries)
    index = len(chain.blocks)
    timestamp = int(clock())
    previous_hash = chain.tip.hash
    prefix = _prefix_bytes(
        index, timestamp, ledger_kind, entity_id, entries, summary, previous_hash
    )
    nonce = 0
    while True:
        digest = hashlib.sha256(prefix + _lp_int(nonce)).hexdigest()
        if meets_difficulty(digest, chain.difficulty):
            return Block(
                index=index,
                timestamp=timestamp,
                ledger_kind=ledger_kind,
                entity_id=entity_id,
                entries=entries,
                summary=summary,
                previous_hash=previous_hash,
                nonce=nonce,
                hash=digest,
            )
        nonce += 1


@dataclass(frozen=True)
class ChainVerdict:
    valid: bool
    first_failure_index: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.valid


def validate_chain(chain: Chain) -> ChainVerdict:
    """Full chain validation.

    Checks, per block: position, stored hash against recomputation,
    difficulty (non-genesis), the previous-hash link, and the summation
    consensus — the stored summary and every entry's weighted count must
    equal their recomputation from the stored citation counts. Entries
    carrying explicit transactions must also agree with their counts.
    """
    if not chain.blocks:
        return ChainVerdict(False, None, "chain has no blocks")
    for i, block in enumerate(chain.blocks):
        def fail(reason: str) -> ChainVerdict:
            return ChainVerdict(False, i, reason)

        if block.index != i:
            return fail(f"index {block.index} at position {i}")
        if i == 0:
            if block.previous_hash != GENESIS_PREVIOUS_HASH:
                return fail("genesis previous_hash is not all-zero")
        else:
            if block.previous_hash != chain.blocks[i - 1].hash:
                return fail("previous_hash does not match prior block")
            if not meets_difficulty(block.hash, chain.difficulty):
                return fail("hash does not meet difficulty")
        if block_hash(block) != block.hash:
            return fail("stored hash does not match recomputation")
        for entry in block.entries:
            if entry.n_sources < 1 or min(
                entry.common_count, entry.unique_count, entry.weighted_citations
            ) < 0:
                return fail(f"entry {entry.record_doi!r} has invalid counts")
            if entry.weighted_citations != recomputed_weight(entry):
                return fail(
                    f"entry {entry.record_doi!r} weighted count fails the pay-off rule"
                )
            if entry.transactions:
                distinct = len({tx.citer_doi for tx in entry.transactions})
                if distinct != entry.union_count:
                    return fail(
                        f"entry {entry.record_doi!r} transactions disagree with counts"
                    )
        if block.summary != compute_summary(block.entries):
            return fail("summary does not match recomputation from entries")
    return ChainVerdict(True)


def resolve(local: Chain, candidates: Sequence[Chain]) -> Chain:
    """Longest-valid-chain rule: adopt the longest valid candidate that
    shares our genesis and is strictly longer than the local chain; ties
    keep the local chain. Never returns an invalid chain in place of a
    valid local one."""
    best = local
    best_len = len(local.blocks)
    for candidate in candidates:
        if len(candidate.blocks) <= best_len:
            continue
        if candidate.blocks[0].hash != local.blocks[0].hash:
            continue
        if not validate_chain(Chain(candidate.blocks, local.difficulty)):
            continue
        best = candidate
        best_len = len(candidate.blocks)
    return best


# ---------------------------------------------------------------------------
# Wire / persistence form: one JSON object per block.

def entry_to_dict(entry: LedgerEntry) -> dict:
    return {
        "record_doi": entry.record_doi,
        "n_sources": entry.n_sources,
        "common_count": entry.common_count,
        "unique_count": entry.unique_count,
        "weighted_citations": entry.weighted_citations,
        "transactions": [
            {"citer_doi": tx.citer_doi, "source_tag": tx.source_tag}
            for tx in entry.transactions
        ],
    }


def block_to_dict(block: Block) -> dict:
    return {
        "index": block.index,
        "timestamp": block.timestamp,
        "ledger_kind": block.ledger_kind,
        "entity_id": block.entity_id,
        "entries": [entry_to_dict(e) for e in block.entries],
        "summary": {
            "weighted_citations": block.summary.weighted_citations,
            "h_index": block.summary.h_index,
        },
        "previous_hash": block.previous_hash,
        "nonce": block.nonce,
        "hash": block.hash,
    }


def _require(data: dict, key: str, kind: type, context: str):
    value = data.get(key)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise LedgerFormatError(f"{context}: {key!r} must be {kind.__name__}")
    return value


def entry_from_dict(data: dict, context: str = "entry") -> LedgerEntry:
    if not isinstance(data, dict):
        raise LedgerFormatError(f"{context}: must be an object")
    transactions = data.get("transactions", [])
    if not isinstance(transactions, list):
        raise LedgerFormatError(f"{context}: 'transactions' must be a list")
    txs = tuple(
        CitationTransaction(
            _require(tx, "citer_doi", str, context),
            _require(tx, "source_tag", str, context),
        )
        for tx in transactions
    )
    try:
        return LedgerEntry(
            record_doi=_require(data, "record_doi", str, context),
            n_sources=_require(data, "n_sources", int, context),
            common_count=_require(data, "common_count", int, context),
            unique_count=_require(data, "unique_count", int, context),
            weighted_citations=_require(data, "weighted_citations", int, context),
            transactions=txs,
        )
    except ValueError as exc:
        raise LedgerFormatError(f"{context}: {exc}") from exc


def block_from_dict(data: dict, context: str = "block") -> Block:
    if not isinstance(data, dict):
        raise LedgerFormatError(f"{context}: must be an object")
    entries_raw = data.get("entries")
    if not isinstance(entries_raw, list):
        raise LedgerFormatError(f"{context}: 'entries' must be a list")
    summary_raw = data.get("summary")
    if not isinstance(summary_raw, dict):
        raise LedgerFormatError(f"{context}: 'summary' must be an object")
    return Block(
        index=_require(data, "index", int, context),
        timestamp=_require(data, "timestamp", int, context),
        ledger_kind=_require(data, "ledger_kind", str, context),
        entity_id=_require(data, "entity_id", str, context),
        entries=tuple(
            entry_from_dict(e, f"{context}.entries[{i}]")
            for i, e in enumerate(entries_raw)
        ),
        summary=BlockSummary(
            weighted_citations=_require(
                summary_raw, "weighted_citations", int, f"{context}.summary"
            ),
            h_index=_require(summary_raw, "h_index", int, f"{context}.summary"),
        ),
        previous_hash=_require(data, "previous_hash", str, context),
        nonce=_require(data, "nonce", int, context),
        hash=_require(data, "hash", str, context),
    )


def save_chain(chain: Chain, path: str | Path) -> None:
    """Persist the chain, one canonical JSON block per line. The write
    is atomic (temp file + rename)."""
    path = Path(path)
    lines = [
        json.dumps(block_to_dict(b), sort_keys=True, separators=(",", ":"))
        for b in chain.blocks
    ]
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def load_chain(path: str | Path, difficulty: int) -> Chain:
    """Load a persisted chain. The difficulty is configuration, not part
    of the file.

    Raises:
        LedgerFormatError: undecodable line or invalid block structure.
    """
    blocks = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LedgerFormatError(f"{path}:{lineno}: {exc.msg}") from exc
        blocks.append(block_from_dict(data, f"{path}:{lineno}"))
    if not blocks:
        raise LedgerFormatError(f"{path}: no blocks")
    return Chain(blocks=blocks, difficulty=difficulty)


def entry_from_publication(
    doi, citers_by_source, n_sources: int
) -> LedgerEntry:
    """Build a fully-populated entry (with citer transactions) straight
    from engine-level data: a publication DOI plus its per-source citer
    sets."""
    part = engine.partition(citers_by_source, n_sources)
    score = engine.weighted_score(part)
    by_citer: dict[str, list[str]] = {}
    for source, citers in citers_by_source.items():
        for citer in citers:
            by_citer.setdefault(str(citer), []).append(source)
    transactions = tuple(
        CitationTransaction(citer, "+".join(sorted(sources)))
        for citer, sources in sorted(by_citer.items())
    )
    return LedgerEntry(
        record_doi=str(doi),
        n_sources=n_sources,
        common_count=len(part.common),
        unique_count=len(part.unique),
        weighted_citations=score.s,
        transactions=transactions,
    )
