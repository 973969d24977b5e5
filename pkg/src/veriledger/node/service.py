"""Consortium node: REST dispatch, block production, votes, peer sync.

Consensus per chain is propose/vote/commit over the validator set:

  - the round-robin proposer for the next height broadcasts a proposal when
    pending events exist, and re-broadcasts the same proposal each interval
    until it commits (so late or dropped votes still count);
  - every validator votes at most once per height, persists the vote before
    sending it, and broadcasts its certificate to all peers;
  - any node holding the proposal plus a quorum of valid certificates
    assembles and appends the block.

Nodes that miss messages catch up through GET /v1/peer/blocks, verifying
linkage and quorum before appending. All outbound traffic goes through an
outbox the runner (HTTP loop or simulation scheduler) drains, which keeps
the service logic single-threaded and deterministic under test.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any

from ..audit import derive_device_status, generate_audit_report
from ..canonical import (
    CanonicalizationError,
    canonical_json,
    digest_hex,
    from_hex,
    to_hex,
)
from ..chain import (
    Block,
    BlockHeader,
    Certificate,
    ChainState,
    certify,
    events_digest_of,
    parse_block,
    select_proposer,
    validate_quorum,
)
from ..errors import (
    ConfigurationError,
    CreatorNotMember,
    EmptyMembership,
    LedgerError,
    UnknownChain,
    UnknownKind,
    UnknownMember,
)
from ..events import EventKind, EventRecord, parse_event
from ..keys import SigningKey
from ..ledger import Ledger
from ..membership import Membership
from .config import NodeConfig

AUTH_SKEW_MS = 5 * 60 * 1000
MAX_EVENTS_PER_BLOCK = 256
MAX_BLOCKS_PER_FETCH = 500


class WallClock:
    @staticmethod
    def now_ms() -> int:
        return int(time.time() * 1000)


@dataclass
class Request:
    method: str
    target: str  # path plus query string, exactly as signed
    headers: dict[str, str]
    body: bytes = b""

    @property
    def path(self) -> str:
        return self.target.split("?", 1)[0]

    @property
    def query(self) -> dict[str, str]:
        if "?" not in self.target:
            return {}
        out = {}
        for part in self.target.split("?", 1)[1].split("&"):
            if "=" in part:
                k, v = part.split("=", 1)
                out[k] = v
        return out


@dataclass
class Response:
    status: int
    body: dict

    @classmethod
    def error(cls, status: int, message: str, **extra) -> "Response":
        return cls(status, {"error": message, **extra})


@dataclass
class Outbound:
    """A message the runner must deliver: fire-and-forget cast, or request
    whose response is fed back through handle_response with `tag`."""

    peer: str
    method: str
    target: str
    body: dict | None = None
    tag: tuple | None = None  # None -> cast


def auth_payload(method: str, target: str, body: bytes, timestamp: int) -> bytes:
    return canonical_json(
        {
            "body_digest": digest_hex(body),
            "method": method,
            "target": target,
            "timestamp": timestamp,
        }
    )


def sign_headers(
    key: SigningKey, method: str, target: str, body: bytes, now_ms: int
) -> dict[str, str]:
    payload = auth_payload(method, target, body, now_ms)
    return {
        "x-member": key.member_id,
        "x-timestamp": str(now_ms),
        "x-signature": to_hex(key.sign(payload)),
    }


@dataclass
class _Proposal:
    chain_id: str
    height: int
    digest: bytes
    header: BlockHeader
    events: tuple[EventRecord, ...]
    wire: dict


class NodeService:
    """One consortium node. Share-nothing except through the wire."""

    def __init__(
        self,
        config: NodeConfig,
        signing_key: SigningKey,
        clock=None,
    ):
        if signing_key.member_id != config.member_id:
            raise ConfigurationError("signing key does not match node identity")
        self.config = config
        self.key = signing_key
        self.member_id = config.member_id
        self.clock = clock if clock is not None else WallClock()
        self.directory: Membership = config.membership
        self.validators: Membership = config.validators()
        self.ledger = Ledger(
            self.directory, self.validators, config.data_dir, config.main_chain_id
        )
        self.registry = config.device_registry()
        self.outbox: list[Outbound] = []
        self.flagged_peers: set[str] = set()
        self.stats = {"blocks_committed": 0, "events_accepted": 0, "votes_cast": 0}
        self._lock = threading.RLock()
        self._vote_stores: dict[str, Any] = {}
        self._votes: dict[tuple[str, int, bytes], dict[str, Certificate]] = {}
        self._proposals: dict[tuple[str, int, bytes], _Proposal] = {}
        self._my_proposal: dict[str, _Proposal] = {}
        self._wanted_satellites: dict[str, tuple[int, bytes]] = {}
        self.ledger.restore_satellites()
        for chain_id in list(self.ledger.chains):
            self._recover_votes(chain_id)
        self._scan_anchors(self.ledger.main)

    # ------------------------------------------------------------------
    # vote persistence

    def _vote_store(self, chain_id: str):
        from ..storage import VoteStore

        store = self._vote_stores.get(chain_id)
        if store is None:
            store = VoteStore(self.config.data_dir, chain_id)
            self._vote_stores[chain_id] = store
        return store

    def _recover_votes(self, chain_id: str) -> None:
        """Resume an interrupted proposal of our own after a restart."""
        store = self._vote_store(chain_id)
        chain = self.ledger.chain(chain_id)
        entry = store.votes.get(chain.height + 1)
        if not entry or not entry.get("proposal"):
            return
        try:
            proposal = self._parse_proposal(entry["proposal"])
        except (CanonicalizationError, KeyError):
            return
        if proposal.header.proposer == self.member_id:
            self._remember(proposal)
            self._my_proposal[chain_id] = proposal
            cert = Certificate.from_wire(entry["certificate"])
            self._pool(proposal).setdefault(cert.member_id, cert)

    # ------------------------------------------------------------------
    # ticking: block production and sync

    def tick(self, now_ms: int | None = None) -> None:
        now = now_ms if now_ms is not None else self.clock.now_ms()
        with self._lock:
            for chain_id in list(self.ledger.chains):
                if self.member_id in self.ledger.chain(chain_id).membership:
                    self._produce(chain_id, now)
            self._request_sync()

    def _chain_peers(self, chain_id: str) -> list[str]:
        """Peers worth talking to about a chain: its validators, minus us."""
        chain = self.ledger.chains.get(chain_id)
        peers = []
        for p in self.config.peers:
            if p.member_id == self.member_id:
                continue
            if chain is not None and p.member_id not in chain.membership:
                continue
            peers.append(p.member_id)
        return peers

    def _cast(self, peer: str, method: str, target: str, body: dict | None) -> None:
        self.outbox.append(Outbound(peer, method, target, body))

    def _produce(self, chain_id: str, now: int) -> None:
        chain = self.ledger.chain(chain_id)
        height = chain.height + 1
        if select_proposer(height, chain.membership) != self.member_id:
            return
        mine = self._my_proposal.get(chain_id)
        if mine is not None and mine.height == height:
            self._broadcast_proposal(mine)  # retry: same digest, so old votes count
            self._try_commit(mine.chain_id, mine.height, mine.digest)
            return
        events = self._proposable_events(chain)
        if not events:
            return
        header = chain.next_header(events, self.member_id, now)
        proposal = _Proposal(
            chain_id,
            height,
            header.digest(),
            header,
            tuple(events),
            {
                "chain_id": chain_id,
                "events": [e.to_wire() for e in events],
                "header": header.to_wire(),
            },
        )
        cert = certify(proposal.digest, self.key)
        self._vote_store(chain_id).record(
            height, to_hex(proposal.digest), cert.to_wire(), proposal.wire
        )
        self.stats["votes_cast"] += 1
        self._remember(proposal)
        self._my_proposal[chain_id] = proposal
        self._pool(proposal)[cert.member_id] = cert
        self._broadcast_proposal(proposal)
        self._broadcast_vote(chain_id, height, proposal.digest, cert)
        self._try_commit(chain_id, height, proposal.digest)

    def _proposable_events(self, chain: ChainState) -> list[EventRecord]:
        out = []
        for event in list(chain.pending_events)[:MAX_EVENTS_PER_BLOCK]:
            if chain.committed_event_height(event.event_id) is None:
                out.append(event)
        return out

    def _broadcast_proposal(self, proposal: _Proposal) -> None:
        for peer in self._chain_peers(proposal.chain_id):
            self._cast(peer, "POST", "/v1/peer/propose", proposal.wire)

    def _broadcast_vote(self, chain_id: str, height: int, digest: bytes, cert: Certificate) -> None:
        body = {
            "certificate": cert.to_wire(),
            "chain_id": chain_id,
            "digest": to_hex(digest),
            "height": height,
        }
        for peer in self._chain_peers(chain_id):
            self._cast(peer, "POST", "/v1/peer/vote", body)

    def _request_sync(self) -> None:
        for chain_id in list(self.ledger.chains):
            chain = self.ledger.chain(chain_id)
            target = f"/v1/peer/blocks?chain={chain_id}&from={chain.height + 1}"
            for peer in self._chain_peers(chain_id):
                self.outbox.append(
                    Outbound(peer, "GET", target, None, tag=("sync", chain_id))
                )
        for sat_id in list(self._wanted_satellites):
            target = f"/v1/peer/blocks?chain={sat_id}&from=0"
            for p in self.config.peers:
                if p.member_id != self.member_id:
                    self.outbox.append(
                        Outbound(p.member_id, "GET", target, None, tag=("satgen", sat_id))
                    )

    # ------------------------------------------------------------------
    # consensus message handling

    def _pool(self, proposal: _Proposal) -> dict[str, Certificate]:
        return self._votes.setdefault(
            (proposal.chain_id, proposal.height, proposal.digest), {}
        )

    def _remember(self, proposal: _Proposal) -> None:
        self._proposals[(proposal.chain_id, proposal.height, proposal.digest)] = proposal

    @staticmethod
    def _parse_proposal(body: dict) -> _Proposal:
        header = BlockHeader.from_wire(body["header"])
        events = tuple(parse_event(e) for e in body["events"])
        return _Proposal(
            body["chain_id"], header.height, header.digest(), header, events, body
        )

    def handle_propose(self, sender: str, body: dict) -> Response:
        with self._lock:
            return self._handle_propose(sender, body)

    def _handle_propose(self, sender: str, body: dict) -> Response:
        try:
            chain = self.ledger.chain(body.get("chain_id"))
        except UnknownChain:
            return Response(404, {"refusal": "unknown-chain"})
        try:
            proposal = self._parse_proposal(body)
        except (CanonicalizationError, UnknownKind, KeyError, TypeError) as e:
            return Response(400, {"refusal": "invalid-event", "detail": str(e)})
        header = proposal.header
        if self.member_id not in chain.membership:
            return Response(403, {"refusal": "not-a-validator"})
        if header.proposer != sender or sender not in chain.membership:
            return Response(400, {"refusal": "wrong-proposer"})
        if header.height != chain.height + 1 or header.prev_digest != chain.head_digest:
            return Response(409, {"refusal": "wrong-parent", "head": chain.height})
        if header.proposer != select_proposer(header.height, chain.membership):
            return Response(400, {"refusal": "wrong-proposer"})
        if header.events_digest != events_digest_of(proposal.events, None) or not proposal.events:
            return Response(400, {"refusal": "invalid-event"})
        try:
            chain.validate_events(proposal.events)
        except LedgerError as e:
            return Response(400, {"refusal": "invalid-event", "detail": str(e)})

        store = self._vote_store(proposal.chain_id)
        voted = store.voted_digest(header.height)
        digest_hex_ = to_hex(proposal.digest)
        if voted is not None and voted != digest_hex_:
            return Response(409, {"refusal": "already-voted"})
        self._remember(proposal)
        if voted is None:
            cert = certify(proposal.digest, self.key)
            store.record(header.height, digest_hex_, cert.to_wire())  # persist, then send
            self.stats["votes_cast"] += 1
        else:
            cert = Certificate.from_wire(store.votes[header.height]["certificate"])
        self._pool(proposal)[cert.member_id] = cert
        self._broadcast_vote(proposal.chain_id, header.height, proposal.digest, cert)
        self._try_commit(proposal.chain_id, header.height, proposal.digest)
        return Response(200, {"certificate": cert.to_wire(), "status": "voted"})

    def handle_vote(self, sender: str, body: dict) -> Response:
        with self._lock:
            try:
                chain = self.ledger.chain(body.get("chain_id"))
                height = int(body["height"])
                digest = from_hex(body["digest"], size=32, what="digest")
                cert = Certificate.from_wire(body["certificate"])
            except UnknownChain:
                return Response(404, {"refusal": "unknown-chain"})
            except (KeyError, TypeError, ValueError, CanonicalizationError):
                return Response(400, {"refusal": "malformed-vote"})
            key = chain.membership.verify_key(cert.member_id)
            if key is None or not key.verify(cert.signature, digest):
                return Response(400, {"refusal": "bad-certificate"})
            pool = self._votes.setdefault((body["chain_id"], height, digest), {})
            pool[cert.member_id] = cert
            self._try_commit(body["chain_id"], height, digest)
            return Response(200, {"status": "ok"})

    def _try_commit(self, chain_id: str, height: int, digest: bytes) -> None:
        chain = self.ledger.chains.get(chain_id)
        if chain is None or chain.height + 1 != height:
            return
        proposal = self._proposals.get((chain_id, height, digest))
        pool = self._votes.get((chain_id, height, digest))
        if proposal is None or pool is None or len(pool) < chain.membership.quorum:
            return
        certs = tuple(sorted(pool.values(), key=lambda c: c.member_id))
        block = Block(header=proposal.header, events=proposal.events, certificates=certs)
        if self._vet_next(chain, block) is not None:
            return
        self.ledger.accept_block(chain_id, block)
        self._after_commit(chain_id, block)

    def _vet_next(self, chain: ChainState, block: Block) -> str | None:
        """Necessary checks before appending a block from votes or sync."""
        header = block.header
        if header.chain_id != chain.chain_id or header.height != chain.height + 1:
            return "linkage"
        if header.prev_digest != chain.head_digest:
            return "linkage"
        if block.config is not None or header.events_digest != events_digest_of(block.events, None):
            return "events-digest"
        if header.proposer != select_proposer(header.height, chain.membership):
            return "proposer"
        if not validate_quorum(block, chain.membership):
            return "quorum"
        return None

    @staticmethod
    def _normalize_certs(block: Block, membership: Membership) -> Block:
        """Keep only valid, distinct member certificates (sorted); invalid
        extras from the wire must not poison our stored chain."""
        digest = block.header.digest()
        keep: dict[str, Certificate] = {}
        for cert in block.certificates:
            if cert.member_id in keep:
                continue
            key = membership.verify_key(cert.member_id)
            if key is not None and key.verify(cert.signature, digest):
                keep[cert.member_id] = cert
        return Block(
            header=block.header,
            events=block.events,
            certificates=tuple(sorted(keep.values(), key=lambda c: c.member_id)),
            config=block.config,
        )

    def _after_commit(self, chain_id: str, block: Block) -> None:
        self.stats["blocks_committed"] += 1
        self.stats["events_accepted"] += len(block.events)
        height = block.header.height
        for key in [k for k in self._votes if k[0] == chain_id and k[1] <= height]:
            self._votes.pop(key, None)
        for key in [k for k in self._proposals if k[0] == chain_id and k[1] <= height]:
            self._proposals.pop(key, None)
        mine = self._my_proposal.get(chain_id)
        if mine is not None and mine.height <= height:
            del self._my_proposal[chain_id]
        if chain_id == self.config.main_chain_id:
            self._scan_anchors_in(block)
        else:
            self._maybe_anchor(chain_id, block)

    def _maybe_anchor(self, chain_id: str, block: Block) -> None:
        """The satellite block's proposer records the new head on the main
        chain, so exactly one anchor is produced per satellite block."""
        if block.header.proposer != self.member_id:
            return
        satellite = self.ledger.satellites.get(chain_id)
        if satellite is None or self.member_id not in satellite.policy.members:
            return
        anchor = self.ledger.anchor_satellite(chain_id, self.key, self.clock.now_ms())
        self._relay_event(self.config.main_chain_id, anchor)

    def _scan_anchors(self, chain: ChainState) -> None:
        for block in chain.blocks:
            self._scan_anchors_in(block)

    def _scan_anchors_in(self, block: Block) -> None:
        for event in block.events:
            if event.kind != EventKind.ANCHOR:
                continue
            sat_id = event.body.satellite_id
            if sat_id in self.ledger.chains:
                continue
            self._wanted_satellites[sat_id] = (
                event.body.satellite_height,
                event.body.satellite_head_digest,
            )

    # ------------------------------------------------------------------
    # sync responses

    def handle_response(self, tag: tuple, peer: str, status: int | None, body: dict | None) -> None:
        """Outcome of an outbox request; status None means transport failure."""
        if tag[0] == "satgen" and status == 403:
            with self._lock:
                self._wanted_satellites.pop(tag[1], None)  # not ours to read
            return
        if status != 200 or body is None:
            return
        with self._lock:
            if tag[0] == "sync":
                self._apply_sync(tag[1], peer, body)
            elif tag[0] == "satgen":
                self._adopt_satellite(tag[1], peer, body)

    def _apply_sync(self, chain_id: str, peer: str, body: dict) -> int:
        chain = self.ledger.chains.get(chain_id)
        if chain is None:
            return 0
        applied = 0
        for wire in body.get("blocks", []):
            try:
                block = parse_block(wire)
            except CanonicalizationError:
                self.flagged_peers.add(peer)
                break
            if block.header.height <= chain.height:
                continue
            reason = self._vet_next(chain, block)
            if reason is not None:
                # Behind or junk: being behind is normal, junk flags the peer.
                if reason != "linkage" or block.header.height == chain.height + 1:
                    self.flagged_peers.add(peer)
                break
            block = self._normalize_certs(block, chain.membership)
            self.ledger.accept_block(chain_id, block)
            self._after_commit(chain_id, block)
            applied += 1
        return applied

    def _adopt_satellite(self, sat_id: str, peer: str, body: dict) -> None:
        """Adopt a satellite chain only when it verifies against a committed
        anchor on the main chain: replay the fetched prefix and require the
        anchored height's digest to match."""
        wanted = self._wanted_satellites.get(sat_id)
        if wanted is None:
            return
        anchor_height, anchor_digest = wanted
        wires = body.get("blocks", [])
        if len(wires) <= anchor_height:
            return
        from ..chain import ChainVerifier

        try:
            blocks = [parse_block(w) for w in wires]
        except CanonicalizationError:
            self.flagged_peers.add(peer)
            return
        verifier = ChainVerifier(sat_id)
        for block in blocks[: anchor_height + 1]:
            if verifier.add_block(block) is not None:
                self.flagged_peers.add(peer)
                return
        if blocks[anchor_height].digest() != anchor_digest:
            self.flagged_peers.add(peer)
            return
        genesis = blocks[0]
        try:
            self.ledger.open_satellite(genesis)
        except LedgerError:
            return
        del self._wanted_satellites[sat_id]
        chain = self.ledger.chain(sat_id)
        for block in blocks[1:]:
            if self._vet_next(chain, block) is not None:
                break
            self.ledger.accept_block(sat_id, self._normalize_certs(block, chain.membership))
            self._after_commit(sat_id, block)

    # ------------------------------------------------------------------
    # authentication and dispatch

    def authenticate(self, request: Request) -> str | None:
        member_id = request.headers.get("x-member")
        ts = request.headers.get("x-timestamp")
        sig = request.headers.get("x-signature")
        if not member_id or not ts or not sig:
            return None
        key = self.directory.verify_key(member_id)
        if key is None:
            return None
        try:
            timestamp = int(ts)
            signature = from_hex(sig, size=64, what="signature")
        except (ValueError, CanonicalizationError):
            return None
        if abs(self.clock.now_ms() - timestamp) > AUTH_SKEW_MS:
            return None
        payload = auth_payload(request.method, request.target, request.body, timestamp)
        return member_id if key.verify(signature, payload) else None

    def dispatch(self, request: Request) -> Response:
        identity = self.authenticate(request)
        if identity is None:
            return Response.error(401, "unauthenticated")
        try:
            return self._route(identity, request)
        except UnknownChain as e:
            return Response.error(404, f"unknown chain: {e}")
        except LedgerError as e:
            return Response.error(400, str(e))

    def _route(self, identity: str, request: Request) -> Response:
        parts = [p for p in request.path.split("/") if p]
        method = request.method
        if parts[:1] != ["v1"] or len(parts) < 2:
            return Response.error(404, "unknown resource")
        if parts[1] == "chains" and len(parts) == 4:
            chain_id = parts[2]
            if method == "POST" and parts[3] == "events":
                return self.handle_submit_event(identity, chain_id, request)
            if method == "GET" and parts[3] == "head":
                return self.handle_get_head(identity, chain_id)
            if method == "GET" and parts[3] == "blocks":
                return self.handle_get_blocks(identity, chain_id, request.query)
        if parts[1:] == ["satellite-chains"] and method == "POST":
            return self.handle_create_satellite(identity, request)
        if parts[1] == "devices" and len(parts) == 4 and parts[3] == "status" and method == "GET":
            return self.handle_device_status(identity, parts[2])
        if parts[1:] == ["topology"] and method == "GET":
            return self.handle_topology(identity)
        if parts[1:] == ["audit", "report"] and method == "GET":
            return self.handle_audit_report(identity, request.query)
        if parts[1] == "peer" and len(parts) == 3:
            return self._route_peer(identity, parts[2], request)
        return Response.error(404, "unknown resource")

    def _route_peer(self, identity: str, action: str, request: Request) -> Response:
        body = self._json_body(request)
        if action == "propose" and request.method == "POST":
            if body is None:
                return Response.error(400, "invalid JSON body")
            return self.handle_propose(identity, body)
        if action == "vote" and request.method == "POST":
            if body is None:
                return Response.error(400, "invalid JSON body")
            return self.handle_vote(identity, body)
        if action == "blocks" and request.method == "GET":
            query = request.query
            chain_id = query.get("chain", self.config.main_chain_id)
            return self.handle_get_blocks(
                identity, chain_id, {"from": query.get("from", "0")}, peer=True
            )
        return Response.error(404, "unknown resource")

    @staticmethod
    def _json_body(request: Request) -> dict | None:
        import json

        if not request.body:
            return None
        try:
            data = json.loads(request.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        return data if isinstance(data, dict) else None

    # ------------------------------------------------------------------
    # public API handlers

    def handle_submit_event(self, identity: str, chain_id: str, request: Request) -> Response:
        access = self.ledger.check_access(identity, chain_id, "write")
        if not access.allowed:
            return Response.error(403, f"write denied: {access.reason}")
        data = self._json_body(request)
        if data is None:
            return Response.error(400, "invalid JSON body")
        try:
            event = parse_event(data)
        except (UnknownKind, CanonicalizationError) as e:
            return Response.error(400, "invalid event", violations=[str(e)])
        violations = self.ledger.validate_for(chain_id, event)
        if violations:
            return Response.error(400, "invalid event", violations=violations)
        with self._lock:
            fresh, committed_height = self.ledger.enqueue_event(chain_id, event)
        receipt = {
            "block_height": committed_height,
            "chain_id": chain_id,
            "event_id": event.event_id,
            "status": "committed" if committed_height is not None else "pending",
        }
        if fresh and request.headers.get("x-relay") != "1":
            self._relay_event(chain_id, event)
        return Response(202, receipt)

    def _relay_event(self, chain_id: str, event: EventRecord) -> None:
        """Forward a newly accepted event to peers so the next proposer,
        whichever node that is, can include it."""
        satellite = self.ledger.satellites.get(chain_id)
        for peer in self._chain_peers(chain_id):
            if satellite is not None and peer not in satellite.policy.members:
                continue
            self.outbox.append(
                Outbound(peer, "POST", f"/v1/chains/{chain_id}/events", event.to_wire(), None)
            )

    def handle_get_head(self, identity: str, chain_id: str) -> Response:
        access = self.ledger.check_access(identity, chain_id, "read")
        if not access.allowed:
            return Response.error(403, f"read denied: {access.reason}")
        chain = self.ledger.chain(chain_id)
        head = chain.head
        return Response(
            200,
            {
                "chain_id": chain_id,
                "digest": to_hex(head.digest()),
                "height": head.header.height,
                "timestamp": head.header.timestamp,
            },
        )

    def handle_get_blocks(
        self, identity: str, chain_id: str, query: dict[str, str], peer: bool = False
    ) -> Response:
        access = self.ledger.check_access(identity, chain_id, "read")
        if not access.allowed:
            return Response.error(403, f"read denied: {access.reason}")
        chain = self.ledger.chain(chain_id)
        try:
            start = int(query.get("from", "0"))
            end = int(query.get("to", str(chain.height)))
        except ValueError:
            return Response.error(400, "from/to must be integers")
        start = max(start, 0)
        end = min(end, chain.height, start + MAX_BLOCKS_PER_FETCH - 1)
        blocks = [b.to_wire() for b in chain.blocks[start : end + 1]]
        return Response(200, {"blocks": blocks, "chain_id": chain_id, "head": chain.height})

    def handle_create_satellite(self, identity: str, request: Request) -> Response:
        data = self._json_body(request)
        if data is None or "members" not in data:
            return Response.error(400, "body must list satellite members")
        try:
            with self._lock:
                satellite = self.ledger.create_satellite_chain(identity, data["members"])
                if self.member_id in satellite.policy.members:
                    anchor = self.ledger.anchor_satellite(
                        satellite.chain_id, self.key, self.clock.now_ms()
                    )
                    self._relay_event(self.config.main_chain_id, anchor)
        except (CreatorNotMember, UnknownMember) as e:
            return Response.error(403, str(e))
        except EmptyMembership as e:
            return Response.error(400, str(e))
        return Response(
            201,
            {
                "chain_id": satellite.chain_id,
                "genesis": satellite.chain.blocks[0].to_wire(),
                "policy": satellite.policy.to_wire(),
            },
        )

    def handle_device_status(self, identity: str, device_id: str) -> Response:
        access = self.ledger.check_access(identity, self.config.main_chain_id, "read")
        if not access.allowed:
            return Response.error(403, f"read denied: {access.reason}")
        if device_id not in self.registry:
            return Response.error(404, f"unknown device {device_id}")
        status = self._device_status(device_id)
        return Response(200, status.to_wire())

    def _device_status(self, device_id: str):
        events = [e for _, _, e in self.ledger.main.committed_events()]
        return derive_device_status(
            events,
            device_id,
            self.clock.now_ms(),
            self.config.freshness_window_ms,
            self.registry,
            self.directory,
        )

    def handle_topology(self, identity: str) -> Response:
        access = self.ledger.check_access(identity, self.config.main_chain_id, "read")
        if not access.allowed:
            return Response.error(403, f"read denied: {access.reason}")
        devices = []
        for device in self.config.devices:
            status = self._device_status(device.device_id)
            devices.append(
                {
                    "device_id": device.device_id,
                    "display_name": device.display_name or device.device_id,
                    "evidence": status.evidence,
                    "last_report_at": status.last_report_at,
                    "status": status.state,
                }
            )
        return Response(
            200,
            {
                "devices": devices,
                "generated_at": self.clock.now_ms(),
                "head": self.ledger.main.height,
                "links": [list(pair) for pair in self.config.links],
            },
        )

    def handle_audit_report(self, identity: str, query: dict[str, str]) -> Response:
        access = self.ledger.check_access(identity, self.config.main_chain_id, "read")
        if not access.allowed:
            return Response.error(403, f"read denied: {access.reason}")
        try:
            range_from = int(query.get("from", "0"))
            range_to = int(query.get("to", str(self.clock.now_ms())))
        except ValueError:
            return Response.error(400, "from/to must be integers")
        report = generate_audit_report(
            self.ledger.main,
            range_from,
            range_to,
            self.config.supply_policy,
            self.config.freshness_window_ms,
            self.registry,
            generated_at=self.clock.now_ms(),
        )
        return Response(200, report.to_wire())

    # ------------------------------------------------------------------

    def drain_outbox(self) -> list[Outbound]:
        with self._lock:
            out = self.outbox
            self.outbox = []
            return out

    def close(self) -> None:
        self.ledger.close()
        for store in self._vote_stores.values():
            store.close()
