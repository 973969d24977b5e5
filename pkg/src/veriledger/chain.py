"""Hash-linked blocks, quorum certification, and chain verification.

Every block header commits to the previous header's digest, so modifying a
committed block invalidates everything after it. Blocks are certified by
floor(2n/3)+1 validator signatures over the header digest, with a
deterministic round-robin proposer per height.

The genesis block carries a config section in its body (validators, access
policy, optional parent anchor) so the genesis digest commits to the
chain's identity, and its timestamp is fixed to 0 so two builds from the
same inputs are byte-identical.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .canonical import (
    DIGEST_SIZE,
    ZERO_DIGEST,
    CanonicalizationError,
    canonical_digest,
    canonical_json,
    from_hex,
    to_hex,
)
from .errors import (
    ConfigurationError,
    InvalidEvent,
    QuorumNotMet,
    UnknownKind,
    WrongProposer,
)
from .events import EventRecord, parse_event, validate_event
from .keys import SIGNATURE_SIZE, SigningKey
from .membership import AccessPolicy, Membership

VERIFY_REASONS = ("digest-mismatch", "linkage", "quorum", "proposer", "events-digest")


def select_proposer(height: int, membership: Membership) -> str:
    """Round-robin proposer: members sorted by id, height mod n."""
    if len(membership) == 0:
        raise ConfigurationError("membership must be non-empty")
    ids = membership.sorted_ids
    return ids[height % len(ids)]


@dataclass(frozen=True)
class BlockHeader:
    chain_id: str
    height: int
    prev_digest: bytes
    events_digest: bytes
    timestamp: int
    proposer: str

    def to_wire(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "events_digest": to_hex(self.events_digest),
            "height": self.height,
            "prev_digest": to_hex(self.prev_digest),
            "proposer": self.proposer,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "BlockHeader":
        return cls(
            chain_id=data["chain_id"],
            height=data["height"],
            prev_digest=from_hex(data["prev_digest"], size=DIGEST_SIZE, what="prev_digest"),
            events_digest=from_hex(data["events_digest"], size=DIGEST_SIZE, what="events_digest"),
            timestamp=data["timestamp"],
            proposer=data["proposer"],
        )

    def digest(self) -> bytes:
        return canonical_digest(canonical_json(self.to_wire()))


@dataclass(frozen=True)
class Certificate:
    member_id: str
    signature: bytes

    def to_wire(self) -> dict:
        return {"member_id": self.member_id, "signature": to_hex(self.signature)}

    @classmethod
    def from_wire(cls, data: Mapping) -> "Certificate":
        return cls(
            member_id=data["member_id"],
            signature=from_hex(data["signature"], size=SIGNATURE_SIZE, what="signature"),
        )


def certify(header_digest: bytes, key: SigningKey) -> Certificate:
    """Sign a header digest, producing this member's certificate."""
    return Certificate(key.member_id, key.sign(header_digest))


@dataclass(frozen=True)
class GenesisConfig:
    validators: tuple  # tuple[Member, ...]
    policy: AccessPolicy
    parent_anchor: bytes | None = None

    def membership(self) -> Membership:
        return Membership(self.validators)

    def to_wire(self) -> dict:
        return {
            "parent_anchor": None if self.parent_anchor is None else to_hex(self.parent_anchor),
            "policy": self.policy.to_wire(),
            "validators": [m.to_wire() for m in self.validators],
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "GenesisConfig":
        from .membership import Member

        anchor = data.get("parent_anchor")
        return cls(
            validators=tuple(Member.from_wire(m) for m in data["validators"]),
            policy=AccessPolicy.from_wire(data["policy"]),
            parent_anchor=None if anchor is None else from_hex(anchor, size=DIGEST_SIZE, what="parent_anchor"),
        )


def body_wire(events: Sequence[EventRecord], config: GenesisConfig | None) -> dict:
    return {
        "config": None if config is None else config.to_wire(),
        "events": [e.to_wire() for e in events],
    }


def events_digest_of(events: Sequence[EventRecord], config: GenesisConfig | None = None) -> bytes:
    return canonical_digest(canonical_json(body_wire(events, config)))


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    events: tuple[EventRecord, ...]
    certificates: tuple[Certificate, ...]
    config: GenesisConfig | None = None

    def digest(self) -> bytes:
        return self.header.digest()

    def to_wire(self) -> dict:
        wire = body_wire(self.events, self.config)
        wire["certificates"] = [c.to_wire() for c in self.certificates]
        wire["header"] = self.header.to_wire()
        return wire

    @classmethod
    def from_wire(cls, data: Mapping) -> "Block":
        config = data.get("config")
        return cls(
            header=BlockHeader.from_wire(data["header"]),
            events=tuple(parse_event(e) for e in data["events"]),
            certificates=tuple(Certificate.from_wire(c) for c in data["certificates"]),
            config=None if config is None else GenesisConfig.from_wire(config),
        )


def parse_block(data: Mapping) -> Block:
    try:
        return Block.from_wire(data)
    except (KeyError, TypeError, ValueError, UnknownKind, ConfigurationError) as e:
        raise CanonicalizationError(f"malformed block: {e}") from e


def build_genesis(
    chain_id: str,
    membership: Membership,
    policy: AccessPolicy,
    parent_anchor: bytes | None = None,
) -> Block:
    """Deterministic genesis: height 0, zero prev digest, timestamp 0."""
    if len(membership) == 0:
        raise ConfigurationError("membership must be non-empty")
    config = GenesisConfig(tuple(membership), policy, parent_anchor)
    header = BlockHeader(
        chain_id=chain_id,
        height=0,
        prev_digest=ZERO_DIGEST,
        events_digest=events_digest_of((), config),
        timestamp=0,
        proposer=select_proposer(0, membership),
    )
    return Block(header=header, events=(), certificates=(), config=config)


def validate_quorum(block: Block, membership: Membership) -> bool:
    """True iff >= floor(2n/3)+1 distinct members validly signed the header
    digest. Signatures from non-members and duplicate signers are ignored."""
    digest = block.header.digest()
    signed: set[str] = set()
    for cert in block.certificates:
        if cert.member_id in signed:
            continue
        key = membership.verify_key(cert.member_id)
        if key is None:
            continue
        if key.verify(cert.signature, digest):
            signed.add(cert.member_id)
    return len(signed) >= membership.quorum


@dataclass(frozen=True)
class ChainVerdict:
    valid: bool
    height: int | None = None
    reason: str | None = None

    @classmethod
    def ok(cls) -> "ChainVerdict":
        return cls(True)

    @classmethod
    def first_invalid(cls, height: int, reason: str) -> "ChainVerdict":
        assert reason in VERIFY_REASONS
        return cls(False, height, reason)

    def to_wire(self) -> dict:
        if self.valid:
            return {"status": "valid"}
        return {"height": self.height, "reason": self.reason, "status": "first-invalid"}


class ChainVerifier:
    """Incremental verifier: feed blocks in height order, get the first
    violation. Used both for whole-chain verification and for vetting blocks
    arriving from peers or storage."""

    def __init__(self, expected_chain_id: str | None = None):
        self.chain_id = expected_chain_id
        self.membership: Membership | None = None
        self.prev_digest: bytes | None = None
        self.height = 0

    def add_block(self, block: Block, claimed_digest: bytes | None = None) -> str | None:
        """Returns a violation reason, or None if the block checks out."""
        h = self.height
        header = block.header
        if self.chain_id is None:
            self.chain_id = header.chain_id
        if header.chain_id != self.chain_id or header.height != h:
            return "linkage"
        if claimed_digest is not None and header.digest() != claimed_digest:
            return "digest-mismatch"
        if h == 0:
            if header.prev_digest != ZERO_DIGEST:
                return "linkage"
            if block.config is None:
                return "events-digest"
            try:
                membership = block.config.membership()
                expected = build_genesis(
                    self.chain_id, membership, block.config.policy, block.config.parent_anchor
                )
            except ConfigurationError:
                return "digest-mismatch"
            if block.events or header != expected.header:
                return "digest-mismatch"
            self.membership = membership
        else:
            assert self.membership is not None and self.prev_digest is not None
            if header.prev_digest != self.prev_digest:
                return "linkage"
            if block.config is not None:
                return "events-digest"
            if header.events_digest != events_digest_of(block.events, None):
                return "events-digest"
            if header.proposer != select_proposer(h, self.membership):
                return "proposer"
            if not self._certified(block):
                return "quorum"
        self.prev_digest = header.digest()
        self.height += 1
        return None

    def _certified(self, block: Block) -> bool:
        # Committed blocks must carry only valid, distinct member certificates;
        # a single corrupted certificate is a verification failure even when
        # enough others remain. This is stricter than vote counting on purpose.
        assert self.membership is not None
        digest = block.header.digest()
        seen: set[str] = set()
        for cert in block.certificates:
            key = self.membership.verify_key(cert.member_id)
            if key is None or cert.member_id in seen:
                return False
            if not key.verify(cert.signature, digest):
                return False
            seen.add(cert.member_id)
        return len(seen) >= self.membership.quorum


def verify_chain(blocks: Sequence[Block], expected_chain_id: str | None = None) -> ChainVerdict:
    """Recompute digests, linkage, proposer rule, and quorum over a whole
    chain; report the first violating height."""
    if not blocks:
        return ChainVerdict.first_invalid(0, "linkage")
    verifier = ChainVerifier(expected_chain_id)
    for i, block in enumerate(blocks):
        reason = verifier.add_block(block)
        if reason is not None:
            return ChainVerdict.first_invalid(i, reason)
    return ChainVerdict.ok()


class ChainState:
    """In-memory state of one chain: committed blocks plus the pending
    event queue. Mutation is single-writer (callers serialize appends per
    chain); readers only ever observe fully committed blocks."""

    def __init__(self, genesis: Block, directory: Membership | None = None):
        if genesis.config is None or genesis.header.height != 0:
            raise ConfigurationError("chain must start from a genesis block")
        self.chain_id = genesis.header.chain_id
        self.config = genesis.config
        self.membership = genesis.config.membership()
        self.policy = genesis.config.policy
        # Directory of identities allowed to author events; defaults to the
        # validator set when no wider consortium is supplied.
        self.directory = directory if directory is not None else self.membership
        self.blocks: list[Block] = [genesis]
        self.head_digest: bytes = genesis.digest()
        self.pending_events: deque[EventRecord] = deque()
        self._event_index: dict[str, int] = {}  # event_id -> committed height
        self._pending_ids: set[str] = set()
        # Event instances (id + exact signature bytes) already validated
        # against the immutable directory; the verdict cannot change, so
        # re-proposals of the same events skip the expensive re-validation.
        self._valid_ids: set[tuple[str, bytes]] = set()

    @property
    def height(self) -> int:
        return self.blocks[-1].header.height

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    def committed_event_height(self, event_id: str) -> int | None:
        return self._event_index.get(event_id)

    def has_event(self, event_id: str) -> bool:
        return event_id in self._event_index or event_id in self._pending_ids

    def enqueue(self, event: EventRecord) -> bool:
        """Queue a validated event; returns False if already known."""
        if self.has_event(event.event_id):
            return False
        self.pending_events.append(event)
        self._pending_ids.add(event.event_id)
        return True

    def next_header(self, events: Sequence[EventRecord], proposer: str, timestamp: int) -> BlockHeader:
        return BlockHeader(
            chain_id=self.chain_id,
            height=self.height + 1,
            prev_digest=self.head_digest,
            events_digest=events_digest_of(events, None),
            timestamp=timestamp,
            proposer=proposer,
        )

    def validate_events(self, events: Sequence[EventRecord]) -> None:
        seen: set[str] = set()
        for i, event in enumerate(events):
            instance = (event.event_id, event.submitter_signature)
            if instance not in self._valid_ids:
                violations = validate_event(event, self.directory)
                if violations:
                    raise InvalidEvent(i, ",".join(violations))
                self._valid_ids.add(instance)
            if event.event_id in seen or event.event_id in self._event_index:
                raise InvalidEvent(i, "duplicate")
            seen.add(event.event_id)

    def append_block(
        self,
        events: Sequence[EventRecord],
        proposer: str,
        certificates: Iterable[Certificate],
        timestamp: int,
    ) -> Block:
        """Validate and append the next block. Certificates must already be
        collected over the header this call will build. Raises WrongProposer,
        InvalidEvent, or QuorumNotMet; on success the new block is linked to
        the previous head and included events leave the pending queue."""
        expected = select_proposer(self.height + 1, self.membership)
        if proposer != expected:
            raise WrongProposer(f"expected {expected}, got {proposer}")
        self.validate_events(events)
        header = self.next_header(events, proposer, timestamp)
        block = Block(
            header=header,
            events=tuple(events),
            certificates=tuple(sorted(certificates, key=lambda c: c.member_id)),
        )
        if not validate_quorum(block, self.membership):
            raise QuorumNotMet(
                f"need {self.membership.quorum} valid certificates at height {header.height}"
            )
        self.accept_block(block)
        return block

    def accept_block(self, block: Block) -> None:
        """Append a block that has already been fully verified."""
        self.blocks.append(block)
        self.head_digest = block.digest()
        for event in block.events:
            self._event_index[event.event_id] = block.header.height
            if event.event_id in self._pending_ids:
                self._pending_ids.discard(event.event_id)
        if block.events:
            self.pending_events = deque(
                e for e in self.pending_events if e.event_id not in self._event_index
            )
            self._pending_ids = {e.event_id for e in self.pending_events}

    def verify(self) -> ChainVerdict:
        return verify_chain(self.blocks, self.chain_id)

    def committed_events(self) -> list[tuple[int, int, EventRecord]]:
        """All committed events as (height, index_in_block, event), in order."""
        out = []
        for block in self.blocks:
            for i, event in enumerate(block.events):
                out.append((block.header.height, i, event))
        return out
