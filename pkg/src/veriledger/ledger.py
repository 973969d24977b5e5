"""Multi-chain ledger: one main chain plus access-controlled satellites.

A satellite chain is created by a subset of consortium members; its data is
readable and writable only by that subset. Each satellite's genesis embeds
the main-chain head digest at creation, and satellite heads are anchored
back onto the main chain as kind-7 events, binding satellite history to
main-chain integrity.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .canonical import canonical_digest, canonical_json, to_hex
from .chain import (
    Block,
    ChainState,
    ChainVerdict,
    Certificate,
    build_genesis,
    verify_chain,
)
from .errors import (
    CreatorNotMember,
    EmptyMembership,
    NotAMember,
    UnknownChain,
    UnknownMember,
    UnknownSatellite,
)
from .events import AnchorBody, EventKind, EventRecord, make_event, validate_event
from .keys import SigningKey
from .membership import AccessPolicy, Membership, WRITER_ROLES
from .storage import ChainStore

MAIN_CHAIN_ID = "main"


@dataclass(frozen=True)
class Access:
    allowed: bool
    reason: str | None = None

    @classmethod
    def allow(cls) -> "Access":
        return cls(True)

    @classmethod
    def deny(cls, reason: str) -> "Access":
        return cls(False, reason)


@dataclass
class SatelliteChain:
    chain_id: str
    policy: AccessPolicy
    parent_anchor: bytes
    chain: ChainState


def satellite_chain_id(creator: str, members: Iterable[str], parent_anchor: bytes) -> str:
    """Deterministic satellite id from its founding facts."""
    seed = canonical_json(
        {"creator": creator, "members": sorted(members), "parent": to_hex(parent_anchor)}
    )
    return "sat-" + canonical_digest(seed).hex()[:16]


class Ledger:
    """Owns every chain this node keeps, their stores, and access control.

    Chain mutation (enqueue, append) is serialized per chain behind a lock;
    reads observe only committed blocks and may run concurrently.
    """

    def __init__(
        self,
        directory: Membership,
        validators: Membership,
        data_dir: Path | None = None,
        main_chain_id: str = MAIN_CHAIN_ID,
    ):
        self.directory = directory
        self.validators = validators
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.main_chain_id = main_chain_id
        self.chains: dict[str, ChainState] = {}
        self.satellites: dict[str, SatelliteChain] = {}
        self._stores: dict[str, ChainStore] = {}
        self._locks: dict[str, threading.RLock] = {}

        main_policy = AccessPolicy(
            chain_id=main_chain_id,
            members=frozenset(directory.sorted_ids),
            read_rule="all-consortium",
        )
        genesis = build_genesis(main_chain_id, validators, main_policy)
        self._open_chain(genesis, directory)

    # -- chain plumbing ----------------------------------------------------

    def _open_chain(self, genesis: Block, directory: Membership) -> ChainState:
        chain_id = genesis.header.chain_id
        self._locks[chain_id] = threading.RLock()
        store = None
        if self.data_dir is not None:
            store = ChainStore(self.data_dir, chain_id)
            blocks, verdict = store.load_and_verify()
            if blocks:
                if blocks[0].digest() != genesis.digest():
                    raise UnknownChain(
                        f"stored chain {chain_id} does not match configured genesis"
                    )
                state = ChainState(blocks[0], directory)
                for block in blocks[1:]:
                    state.accept_block(block)
                self.chains[chain_id] = state
                self._stores[chain_id] = store
                return state
            store.append_block(genesis)
        state = ChainState(genesis, directory)
        self.chains[chain_id] = state
        if store is not None:
            self._stores[chain_id] = store
        return state

    def lock(self, chain_id: str) -> threading.RLock:
        try:
            return self._locks[chain_id]
        except KeyError:
            raise UnknownChain(chain_id)

    def chain(self, chain_id: str) -> ChainState:
        try:
            return self.chains[chain_id]
        except KeyError:
            raise UnknownChain(chain_id)

    @property
    def main(self) -> ChainState:
        return self.chains[self.main_chain_id]

    def close(self) -> None:
        for store in self._stores.values():
            store.close()

    # -- access control ------------------------------------------------------

    def check_access(self, identity: str, chain_id: str, action: str) -> Access:
        """Main chain: reads for every consortium member, writes for members
        holding a writer role. Satellites: everything requires policy
        membership. Raises UnknownChain for chains this node does not know."""
        chain = self.chain(chain_id)
        policy = chain.policy
        member = self.directory.get(identity)
        if member is None:
            return Access.deny("unknown-identity")
        if action not in ("read", "write"):
            return Access.deny("unknown-action")
        if action == "read" and policy.read_rule == "all-consortium":
            return Access.allow()
        if identity not in policy.members:
            return Access.deny("not-a-member")
        if action == "write" and chain_id == self.main_chain_id:
            if not (member.roles & WRITER_ROLES):
                return Access.deny("role-not-authorized")
        return Access.allow()

    # -- event intake --------------------------------------------------------

    def enqueue_event(self, chain_id: str, event: EventRecord) -> tuple[bool, int | None]:
        """Validated-event intake. Returns (newly_enqueued, committed_height).
        Duplicates by event id are reported, not re-queued."""
        chain = self.chain(chain_id)
        with self.lock(chain_id):
            height = chain.committed_event_height(event.event_id)
            if height is not None:
                return False, height
            return chain.enqueue(event), None

    def validate_for(self, chain_id: str, event: EventRecord) -> list[str]:
        self.chain(chain_id)
        return validate_event(event, self.directory)

    # -- commit path -----------------------------------------------------

    def append_block(
        self,
        chain_id: str,
        events: Sequence[EventRecord],
        proposer: str,
        certificates: Iterable[Certificate],
        timestamp: int,
    ) -> Block:
        """Single-writer append: the block is persisted before this returns."""
        chain = self.chain(chain_id)
        with self.lock(chain_id):
            block = chain.append_block(events, proposer, certificates, timestamp)
            store = self._stores.get(chain_id)
            if store is not None:
                store.append_block(block)
            return block

    def accept_block(self, chain_id: str, block: Block) -> None:
        """Append an externally verified (synced) block, persisting it."""
        chain = self.chain(chain_id)
        with self.lock(chain_id):
            store = self._stores.get(chain_id)
            if store is not None:
                store.append_block(block)
            chain.accept_block(block)

    # -- satellites ------------------------------------------------------

    def create_satellite_chain(
        self,
        creator: str,
        members: Iterable[str],
        parent_head_digest: bytes | None = None,
    ) -> SatelliteChain:
        """Create a satellite whose data only `members` may access. The
        satellite genesis embeds the current main-chain head digest."""
        member_ids = frozenset(members)
        if not member_ids:
            raise EmptyMembership("satellite needs at least one member")
        unknown = [m for m in member_ids if m not in self.directory]
        if unknown:
            raise UnknownMember(", ".join(sorted(unknown)))
        if creator not in member_ids:
            raise CreatorNotMember(creator)
        anchor = parent_head_digest if parent_head_digest is not None else self.main.head_digest
        chain_id = satellite_chain_id(creator, member_ids, anchor)
        if chain_id in self.satellites:
            return self.satellites[chain_id]
        policy = AccessPolicy(chain_id=chain_id, members=member_ids, read_rule="members-only")
        validators = Membership(self.directory.get(m) for m in sorted(member_ids))
        genesis = build_genesis(chain_id, validators, policy, parent_anchor=anchor)
        state = self._open_chain(genesis, self.directory)
        satellite = SatelliteChain(chain_id, policy, anchor, state)
        self.satellites[chain_id] = satellite
        return satellite

    def restore_satellites(self) -> None:
        """Re-open every satellite chain present in the data directory."""
        if self.data_dir is None:
            return
        chains_dir = self.data_dir / "chains"
        if not chains_dir.exists():
            return
        for path in sorted(chains_dir.glob("*.log")):
            chain_id = path.stem
            if chain_id in self.chains:
                continue
            probe = ChainStore(self.data_dir, chain_id)
            blocks, _ = probe.load_and_verify()
            probe.close()
            if blocks and blocks[0].config is not None and blocks[0].config.parent_anchor is not None:
                self.open_satellite(blocks[0])

    def open_satellite(self, genesis: Block) -> SatelliteChain:
        """Adopt a satellite created elsewhere from its genesis block."""
        chain_id = genesis.header.chain_id
        if chain_id in self.satellites:
            return self.satellites[chain_id]
        config = genesis.config
        if config is None or config.parent_anchor is None:
            raise UnknownSatellite(f"{chain_id} has no satellite genesis")
        state = self._open_chain(genesis, self.directory)
        satellite = SatelliteChain(chain_id, config.policy, config.parent_anchor, state)
        self.satellites[chain_id] = satellite
        return satellite

    def anchor_satellite(
        self,
        satellite_id: str,
        submitter_key: SigningKey,
        now: int,
        satellite_head_digest: bytes | None = None,
    ) -> EventRecord:
        """Record a satellite head on the main chain as a kind-7 event.
        Re-anchoring an unchanged head is allowed (heartbeat)."""
        satellite = self.satellites.get(satellite_id)
        if satellite is None:
            raise UnknownSatellite(satellite_id)
        submitter = submitter_key.member_id
        if submitter not in satellite.policy.members:
            raise NotAMember(f"{submitter} is not in satellite {satellite_id}")
        head = satellite.chain.head
        digest = satellite_head_digest if satellite_head_digest is not None else head.digest()
        body = AnchorBody(
            satellite_id=satellite_id,
            satellite_height=head.header.height,
            satellite_head_digest=digest,
        )
        event = make_event(EventKind.ANCHOR, body, submitter_key, submitted_at=now)
        self.enqueue_event(self.main_chain_id, event)
        return event

    def verify_anchors(self) -> list[str]:
        """Cross-check every committed anchor event against the satellite it
        references; returns violation strings (empty when consistent)."""
        problems = []
        for height, _, event in self.main.committed_events():
            if event.kind != EventKind.ANCHOR:
                continue
            body: AnchorBody = event.body
            satellite = self.satellites.get(body.satellite_id)
            if satellite is None:
                problems.append(f"anchor at {height}: unknown satellite {body.satellite_id}")
                continue
            blocks = satellite.chain.blocks
            if body.satellite_height >= len(blocks):
                problems.append(
                    f"anchor at {height}: satellite height {body.satellite_height} beyond head"
                )
                continue
            actual = blocks[body.satellite_height].digest()
            if actual != body.satellite_head_digest:
                problems.append(f"anchor at {height}: digest mismatch")
        return problems

    def verify_all(self) -> dict[str, ChainVerdict]:
        return {cid: verify_chain(c.blocks, cid) for cid, c in self.chains.items()}
