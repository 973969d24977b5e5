"""Durable append-only storage for chains and consensus votes.

Each chain persists to one log file of length-prefixed records: a 4-byte
big-endian payload length followed by the canonical JSON payload. Chain
records carry the block plus its claimed header digest, so recovery can
distinguish on-disk corruption from structural chain violations. Recovery
replays the log, truncating a trailing partial record (a crash mid-write).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

from .canonical import CanonicalizationError, canonical_json, from_hex, to_hex
from .chain import Block, ChainVerdict, ChainVerifier, parse_block
from .errors import StorageError

_LEN = struct.Struct(">I")
MAX_RECORD_SIZE = 64 * 1024 * 1024


def write_record(fh, payload: bytes) -> None:
    fh.write(_LEN.pack(len(payload)))
    fh.write(payload)


def read_records(path: Path) -> tuple[list[bytes], int]:
    """Read whole records; returns (records, clean_length). Bytes past
    clean_length form a partial trailing record and should be truncated."""
    records: list[bytes] = []
    if not path.exists():
        return records, 0
    data = path.read_bytes()
    offset = 0
    while offset + _LEN.size <= len(data):
        (n,) = _LEN.unpack_from(data, offset)
        if n > MAX_RECORD_SIZE:
            break  # corrupt length prefix; treat the rest as garbage
        end = offset + _LEN.size + n
        if end > len(data):
            break
        records.append(data[offset + _LEN.size : end])
        offset = end
    return records, offset


class AppendLog:
    """One append-only log file, fsynced per append."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = None

    def recover(self) -> list[bytes]:
        records, clean = read_records(self.path)
        if self.path.exists() and clean < self.path.stat().st_size:
            with open(self.path, "r+b") as fh:
                fh.truncate(clean)
        return records

    def append(self, payload: bytes) -> None:
        if self._fh is None:
            self._fh = open(self.path, "ab")
        write_record(self._fh, payload)
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def block_record(block: Block) -> bytes:
    """Canonical storage record: the block plus its claimed header digest."""
    return canonical_json({"block": block.to_wire(), "digest": to_hex(block.digest())})


def parse_record(payload: bytes) -> tuple[Block, bytes] | None:
    """Decode one storage record; None when the bytes are corrupt.

    Stored records must be byte-identical to the canonical serialization of
    their content: any extra, renamed, or re-encoded field would otherwise
    be silently absorbed by parsing and escape tamper detection."""
    try:
        data = json.loads(payload.decode("utf-8"))
        block = parse_block(data["block"])
        claimed = from_hex(data["digest"], size=32, what="claimed digest")
    except (
        UnicodeDecodeError,
        json.JSONDecodeError,
        KeyError,
        TypeError,
        ValueError,
        CanonicalizationError,
    ):
        return None
    if block_record(block) != payload:
        return None
    return block, claimed


def verify_records(records: list[bytes], chain_id: str) -> tuple[list[Block], ChainVerdict]:
    """Verify serialized records in height order; any corruption or chain
    violation is reported at the first offending height."""
    if not records:
        return [], ChainVerdict.first_invalid(0, "linkage")
    blocks: list[Block] = []
    verifier = ChainVerifier(chain_id)
    for i, payload in enumerate(records):
        parsed = parse_record(payload)
        if parsed is None:
            return blocks, ChainVerdict.first_invalid(i, "digest-mismatch")
        block, claimed = parsed
        reason = verifier.add_block(block, claimed)
        if reason is not None:
            return blocks, ChainVerdict.first_invalid(i, reason)
        blocks.append(block)
    return blocks, ChainVerdict.ok()


class ChainStore:
    """Per-chain block log under <data_dir>/chains/<chain_id>.log."""

    def __init__(self, data_dir: Path, chain_id: str):
        self.chain_id = chain_id
        self.log = AppendLog(Path(data_dir) / "chains" / f"{chain_id}.log")

    def append_block(self, block: Block) -> None:
        self.log.append(block_record(block))

    def load_and_verify(self) -> tuple[list[Block], ChainVerdict]:
        """Replay the log, verifying every stored record: parse, claimed
        digest, linkage, events digest, proposer, and quorum. Returns the
        verified prefix and the verdict (Valid, or the first violation)."""
        return verify_records(self.log.recover(), self.chain_id)

    def close(self) -> None:
        self.log.close()


class VoteStore:
    """Durable record of this node's consensus votes, one log per chain.

    A vote is persisted before it is ever sent, so a crashed-and-restarted
    node can never certify two different blocks at one height. Own proposals
    are stored alongside so an interrupted proposer can resume them.
    """

    def __init__(self, data_dir: Path, chain_id: str):
        self.log = AppendLog(Path(data_dir) / "votes" / f"{chain_id}.log")
        self.votes: dict[int, dict] = {}
        for payload in self.log.recover():
            try:
                entry = json.loads(payload.decode("utf-8"))
                self.votes[entry["height"]] = entry
            except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError):
                raise StorageError(f"corrupt vote record in {self.log.path}")

    def voted_digest(self, height: int) -> str | None:
        entry = self.votes.get(height)
        return entry["digest"] if entry else None

    def record(self, height: int, digest_hex: str, certificate: dict, proposal: dict | None = None) -> None:
        entry = {
            "certificate": certificate,
            "digest": digest_hex,
            "height": height,
            "proposal": proposal,
        }
        self.log.append(canonical_json(entry))
        self.votes[height] = entry

    def proposal_at(self, height: int) -> dict | None:
        entry = self.votes.get(height)
        return entry.get("proposal") if entry else None

    def close(self) -> None:
        self.log.close()
