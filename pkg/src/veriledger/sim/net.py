"""In-memory network for simulated runs.

All node-to-node traffic (proposals, votes, sync) travels as scheduled
messages subject to an adversary that can drop, delay, duplicate, and
thereby reorder them, plus partitions and node crashes. Client calls
(agents, harness probes) dispatch synchronously against a reachable node,
exactly like a fast local HTTP hop, so agent logic stays natural.

A monitor records every certificate that ever crosses the wire; the
consensus-safety check runs against that record, so even votes the
adversary later drops are counted.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable

from ..canonical import canonical_json, from_hex
from ..chain import Certificate
from ..errors import TransportError
from ..node.service import NodeService, Outbound, Request, sign_headers
from .clock import Scheduler


@dataclass
class Adversary:
    """Seeded message-level fault injection for peer traffic."""

    rng: random.Random
    drop_p: float = 0.0
    dup_p: float = 0.0
    extra_delay_p: float = 0.0
    max_extra_delay_ms: int = 0

    def deliveries(self) -> list[int]:
        """Extra latencies for each copy to deliver; empty means dropped."""
        if self.rng.random() < self.drop_p:
            return []
        out = [self._delay()]
        if self.dup_p and self.rng.random() < self.dup_p:
            out.append(self._delay())
        return out

    def _delay(self) -> int:
        if self.max_extra_delay_ms and self.rng.random() < self.extra_delay_p:
            return self.rng.randint(0, self.max_extra_delay_ms)
        return 0


@dataclass
class VoteMonitor:
    """Every certificate emitted on the wire, keyed by chain and height."""

    observed: dict[tuple[str, int], dict[str, dict[str, Certificate]]] = field(
        default_factory=dict
    )

    def record_vote(self, body: dict) -> None:
        try:
            cert = Certificate.from_wire(body["certificate"])
            digest = body["digest"]
            key = (body["chain_id"], int(body["height"]))
        except Exception:
            return
        self.observed.setdefault(key, {}).setdefault(digest, {})[cert.member_id] = cert

    def certified_digests(self, validators, quorum: int) -> dict[tuple[str, int], list[str]]:
        """Digests that gathered a quorum of valid distinct certificates."""
        out: dict[tuple[str, int], list[str]] = {}
        for (chain_id, height), by_digest in self.observed.items():
            winners = []
            for digest, certs in by_digest.items():
                target = from_hex(digest, size=32, what="digest")
                valid = 0
                for member_id, cert in certs.items():
                    key = validators.verify_key(member_id)
                    if key is not None and key.verify(cert.signature, target):
                        valid += 1
                if valid >= quorum:
                    winners.append(digest)
            if winners:
                out[(chain_id, height)] = sorted(winners)
        return out


class SimNetwork:
    def __init__(
        self,
        scheduler: Scheduler,
        latency_ms: int = 5,
        request_timeout_ms: int = 400,
        adversary: Adversary | None = None,
    ):
        self.scheduler = scheduler
        self.clock = scheduler.clock
        self.latency_ms = latency_ms
        self.request_timeout_ms = request_timeout_ms
        self.adversary = adversary
        self.nodes: dict[str, NodeService] = {}
        self.down: set[str] = set()
        self.partition: dict[str, int] = {}
        self.monitor = VoteMonitor()
        self.messages_sent = 0

    def add_node(self, service: NodeService) -> None:
        self.nodes[service.member_id] = service

    # -- fault controls ----------------------------------------------------

    def kill(self, member_id: str) -> None:
        self.down.add(member_id)
        service = self.nodes.get(member_id)
        if service is not None:
            service.close()

    def restart(self, member_id: str, factory: Callable[[], NodeService]) -> NodeService:
        service = factory()
        self.nodes[member_id] = service
        self.down.discard(member_id)
        return service

    def set_partition(self, *groups: set[str]) -> None:
        self.partition = {}
        for idx, group in enumerate(groups):
            for member in group:
                self.partition[member] = idx

    def heal_partition(self) -> None:
        self.partition = {}

    def unreachable(self, src: str, dst: str) -> bool:
        if dst in self.down or src in self.down:
            return True
        if self.partition:
            if self.partition.get(src) != self.partition.get(dst):
                return True
        return False

    # -- node-to-node messaging -------------------------------------------

    def flush(self, service: NodeService) -> None:
        for message in service.drain_outbox():
            self._send(service, message)

    def _send(self, sender: NodeService, message: Outbound) -> None:
        self.messages_sent += 1
        if message.target == "/v1/peer/vote" and message.body is not None:
            self.monitor.record_vote(message.body)
        raw = canonical_json(message.body) if message.body is not None else b""
        headers = sign_headers(
            sender.key, message.method, message.target, raw, self.clock.now_ms()
        )
        headers["x-relay"] = "1"
        request = Request(message.method, message.target, headers, raw)
        src, dst = sender.member_id, message.peer

        if self.unreachable(src, dst):
            deliveries: list[int] = []
        elif self.adversary is not None:
            deliveries = self.adversary.deliveries()
        else:
            deliveries = [0]

        if message.tag is None:
            for extra in deliveries:
                self.scheduler.after(
                    self.latency_ms + extra, lambda r=request, d=dst: self._deliver_cast(r, d)
                )
            return

        if not deliveries:
            self.scheduler.after(
                self.request_timeout_ms,
                lambda: self._respond(src, message, None, None),
            )
            return
        self.scheduler.after(
            self.latency_ms + deliveries[0],
            lambda: self._deliver_request(src, dst, request, message),
        )

    def _deliver_cast(self, request: Request, dst: str) -> None:
        service = self.nodes.get(dst)
        if service is None or dst in self.down:
            return
        service.dispatch(request)
        self.flush(service)

    def _deliver_request(self, src: str, dst: str, request: Request, message: Outbound) -> None:
        service = self.nodes.get(dst)
        if service is None or dst in self.down:
            self.scheduler.after(
                self.request_timeout_ms, lambda: self._respond(src, message, None, None)
            )
            return
        response = service.dispatch(request)
        self.flush(service)
        back = [0]
        if self.unreachable(dst, src):
            back = []
        elif self.adversary is not None:
            back = self.adversary.deliveries()
        if not back:
            self.scheduler.after(
                self.request_timeout_ms, lambda: self._respond(src, message, None, None)
            )
            return
        self.scheduler.after(
            self.latency_ms + back[0],
            lambda: self._respond(src, message, response.status, response.body),
        )

    def _respond(self, src: str, message: Outbound, status, body) -> None:
        service = self.nodes.get(src)
        if service is None or src in self.down:
            return
        service.handle_response(message.tag, message.peer, status, body)
        self.flush(service)

    # -- client access ------------------------------------------------------

    def client_transport(self, target_member: str):
        """Synchronous transport for agents/operators talking to one node."""

        def transport(method: str, target: str, headers: dict, body: bytes) -> tuple[int, dict]:
            service = self.nodes.get(target_member)
            if service is None or target_member in self.down:
                raise TransportError(f"node {target_member} unreachable")
            response = service.dispatch(Request(method, target, headers, body))
            self.flush(service)
            # Mirror the HTTP boundary: responses are JSON over the wire.
            return response.status, json.loads(canonical_json(response.body))

        return transport

    def tick_node(self, member_id: str) -> None:
        service = self.nodes.get(member_id)
        if service is None or member_id in self.down:
            return
        service.tick(self.clock.now_ms())
        self.flush(service)
