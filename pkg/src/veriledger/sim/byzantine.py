"""A Byzantine validator for safety testing: equivocates when proposing
and votes for anything, including garbage digests."""

from __future__ import annotations

import random

from ..chain import certify, select_proposer
from ..node.service import NodeService, Response, _Proposal


class ByzantineNode(NodeService):
    """Runs the honest plumbing (sync, commit assembly) but violates the
    voting rules: conflicting proposals at one height, double votes, and
    votes for digests that correspond to no proposal at all."""

    def __init__(self, *args, chaos: random.Random | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.chaos = chaos or random.Random(0)
        self._variants: dict[str, tuple[int, list[_Proposal]]] = {}

    def _produce(self, chain_id: str, now: int) -> None:
        chain = self.ledger.chain(chain_id)
        height = chain.height + 1
        if select_proposer(height, chain.membership) != self.member_id:
            return
        held = self._variants.get(chain_id)
        if held is None or held[0] != height:
            events = self._proposable_events(chain)
            if not events:
                return
            variants = []
            for skew in (0, 1):  # same events, two timestamps: two digests
                header = chain.next_header(events, self.member_id, now + skew)
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
                variants.append(proposal)
                self._remember(proposal)
            self._variants[chain_id] = (height, variants)
        else:
            # Keep pushing the same conflicting pair so stale votes still
            # count; a fresh pair each tick would only deadlock the height.
            variants = held[1]

        for proposal in variants:
            cert = certify(proposal.digest, self.key)
            self._pool(proposal)[cert.member_id] = cert
            self._broadcast_vote(chain_id, height, proposal.digest, cert)
        peers = self._chain_peers(chain_id)
        self.chaos.shuffle(peers)
        split = max(1, len(peers) // 3)
        for i, peer in enumerate(peers):
            chosen = variants[0] if i < split else variants[1]
            self._cast(peer, "POST", "/v1/peer/propose", chosen.wire)
        for proposal in variants:
            self._try_commit(chain_id, height, proposal.digest)

    def _handle_propose(self, sender: str, body: dict) -> Response:
        # Vote for any proposal that parses, however many at one height.
        try:
            proposal = self._parse_proposal(body)
        except Exception:
            return Response(400, {"refusal": "invalid-event"})
        self._remember(proposal)
        cert = certify(proposal.digest, self.key)
        self._pool(proposal)[cert.member_id] = cert
        self._broadcast_vote(proposal.chain_id, proposal.height, proposal.digest, cert)
        if self.chaos.random() < 0.3:  # arbitrary vote for a phantom digest
            phantom = self.chaos.randbytes(32)
            self._broadcast_vote(
                proposal.chain_id,
                proposal.height,
                phantom,
                certify(phantom, self.key),
            )
        self._try_commit(proposal.chain_id, proposal.height, proposal.digest)
        return Response(200, {"certificate": cert.to_wire(), "status": "voted"})
