"""Desk-scale scenario runner: a simulated fleet of devices with agents,
a consortium of nodes, fault and compromise injection on a virtual clock.

Everything the harness does goes through the node REST surface via
NodeClient; it never reaches into node internals. Runs are a pure function
of the scenario seed, so metrics reproduce bit-for-bit.
"""

from __future__ import annotations

import random
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ..agent import DeviceAgent, SealedKey, build_manifest
from ..audit import scan_reports
from ..canonical import canonical_digest, canonical_json
from ..errors import ConfigurationError, LedgerError, TransportError
from ..events import EventKind, SystemEventBody, make_event, parse_body, parse_event
from ..keys import SigningKey
from ..measurement import parse_report
from ..membership import Member, Membership
from ..node.client import NodeClient
from ..node.config import DeviceConfig, NodeConfig, PeerConfig
from ..node.service import NodeService
from .byzantine import ByzantineNode
from .clock import Scheduler, SimClock
from .net import Adversary, SimNetwork

MUTATIONS = ("flip-byte", "delete")


class UnknownDevice(LedgerError):
    pass


class UnknownArtifact(LedgerError):
    pass


@dataclass(frozen=True)
class Injection:
    time_ms: int
    device_id: str
    artifact_path: str
    mutation: str = "flip-byte"


@dataclass(frozen=True)
class Replay:
    time_ms: int
    device_id: str


@dataclass
class AdversaryConfig:
    drop_p: float = 0.0
    dup_p: float = 0.0
    extra_delay_p: float = 0.0
    max_extra_delay_ms: int = 0


@dataclass
class Scenario:
    seed: int = 0
    duration_ms: int = 30_000
    node_count: int = 4
    byzantine_count: int = 0
    block_interval_ms: int = 1000
    agent_period_ms: int = 1000
    agent_jitter_ms: int = 100
    device_count: int = 10
    artifacts_per_device: int = 3
    injections: tuple[Injection, ...] = ()
    replays: tuple[Replay, ...] = ()
    supply_records: tuple[dict, ...] = ()
    adversary: AdversaryConfig | None = None
    latency_ms: int = 5
    feed_interval_ms: int | None = None

    def device_ids(self) -> list[str]:
        return [f"dev-{i}" for i in range(self.device_count)]

    def artifact_paths(self) -> list[str]:
        return [f"art-{j}.bin" for j in range(self.artifacts_per_device)]

    def validate(self) -> None:
        if self.duration_ms <= 0 or self.node_count < 1:
            raise ConfigurationError("duration and node count must be positive")
        if self.byzantine_count >= self.node_count:
            raise ConfigurationError("at least one honest node required")
        devices = set(self.device_ids())
        artifacts = set(self.artifact_paths())
        for inj in self.injections:
            if inj.time_ms >= self.duration_ms:
                raise ConfigurationError(f"injection at {inj.time_ms} beyond duration")
            if inj.device_id not in devices:
                raise UnknownDevice(inj.device_id)
            if inj.artifact_path not in artifacts:
                raise UnknownArtifact(inj.artifact_path)
            if inj.mutation not in MUTATIONS:
                raise ConfigurationError(f"unknown mutation {inj.mutation}")
        for rep in self.replays:
            if rep.time_ms >= self.duration_ms:
                raise ConfigurationError(f"replay at {rep.time_ms} beyond duration")
            if rep.device_id not in devices:
                raise UnknownDevice(rep.device_id)


def scenario_from_wire(data: dict) -> Scenario:
    try:
        agent = data.get("agent", {})
        devices = data.get("devices", {})
        adversary = data.get("adversary")
        return Scenario(
            seed=data.get("seed", 0),
            duration_ms=data.get("duration_ms", 30_000),
            node_count=data.get("nodes", 4),
            byzantine_count=data.get("byzantine", 0),
            block_interval_ms=data.get("block_interval_ms", 1000),
            agent_period_ms=agent.get("period_ms", 1000),
            agent_jitter_ms=agent.get("jitter_ms", 100),
            device_count=devices.get("count", 10),
            artifacts_per_device=devices.get("artifacts_per_device", 3),
            injections=tuple(
                Injection(
                    i["time_ms"],
                    i["device_id"],
                    i.get("artifact_path", "art-0.bin"),
                    i.get("mutation", "flip-byte"),
                )
                for i in data.get("injections", [])
            ),
            replays=tuple(
                Replay(r["time_ms"], r["device_id"]) for r in data.get("replays", [])
            ),
            supply_records=tuple(data.get("supply_records", [])),
            adversary=AdversaryConfig(**adversary) if adversary else None,
            latency_ms=data.get("latency_ms", 5),
            feed_interval_ms=data.get("feed_interval_ms"),
        )
    except (KeyError, TypeError) as e:
        raise ConfigurationError(f"malformed scenario: {e}") from e


@dataclass
class Detection:
    device_id: str
    injected_at: int
    detected_at: int | None
    latency_ms: int | None

    def to_wire(self) -> dict:
        return {
            "detected_at": self.detected_at,
            "device_id": self.device_id,
            "injected_at": self.injected_at,
            "latency_ms": self.latency_ms,
        }


@dataclass
class Metrics:
    seed: int
    duration_ms: int
    blocks_produced: int
    reports_accepted: int
    reports_rejected: int
    detections: list[Detection]
    final_statuses: dict[str, str]
    supply_findings: dict[str, int]
    messages_sent: int

    def to_wire(self) -> dict:
        return {
            "blocks_produced": self.blocks_produced,
            "detections": [d.to_wire() for d in self.detections],
            "duration_ms": self.duration_ms,
            "final_statuses": self.final_statuses,
            "messages_sent": self.messages_sent,
            "reports_accepted": self.reports_accepted,
            "reports_rejected": self.reports_rejected,
            "seed": self.seed,
            "supply_findings": self.supply_findings,
        }

    def to_json(self) -> bytes:
        return canonical_json(self.to_wire())


def _seeded_key(scenario_seed: int, name: str) -> SigningKey:
    return SigningKey.from_seed(
        canonical_digest(canonical_json({"name": name, "seed": scenario_seed}))
    )


class SimHarness:
    """Builds and drives one scenario; exposes the knobs the acceptance
    suite scripts directly (partitions, kills, mid-run probes)."""

    def __init__(self, scenario: Scenario, workdir: Path | None = None):
        scenario.validate()
        self.scenario = scenario
        self._tmp = None
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="veriledger-sim-")
            workdir = Path(self._tmp.name)
        self.workdir = Path(workdir)
        self.rng = random.Random(scenario.seed)
        self.clock = SimClock()
        self.scheduler = Scheduler(self.clock)
        adversary = None
        if scenario.adversary is not None:
            adversary = Adversary(
                rng=random.Random(self.rng.randrange(2**63)),
                drop_p=scenario.adversary.drop_p,
                dup_p=scenario.adversary.dup_p,
                extra_delay_p=scenario.adversary.extra_delay_p,
                max_extra_delay_ms=scenario.adversary.max_extra_delay_ms,
            )
        self.network = SimNetwork(
            self.scheduler, latency_ms=scenario.latency_ms, adversary=adversary
        )
        self._build_world()

    # ------------------------------------------------------------------

    def _build_world(self):
        s = self.scenario
        self.node_keys = [_seeded_key(s.seed, f"node-{i}") for i in range(s.node_count)]
        self.mfr_key = _seeded_key(s.seed, "manufacturer")
        self.auditor_key = _seeded_key(s.seed, "auditor")
        self.operator_key = _seeded_key(s.seed, "operator")
        self.agent_keys = {d: _seeded_key(s.seed, f"agent-{d}") for d in s.device_ids()}

        members = [
            Member.create(k.public_bytes, f"node-{i}", ("operator", "integrator"))
            for i, k in enumerate(self.node_keys)
        ]
        members.append(Member.create(self.mfr_key.public_bytes, "manufacturer", ("manufacturer",)))
        members.append(Member.create(self.auditor_key.public_bytes, "auditor", ("auditor",)))
        members.append(Member.create(self.operator_key.public_bytes, "operator", ("operator",)))
        members.extend(
            Member.create(k.public_bytes, f"agent-{d}", ("device-agent",))
            for d, k in sorted(self.agent_keys.items())
        )
        self.directory = Membership(members)
        self.validator_ids = tuple(k.member_id for k in self.node_keys)

        device_ids = s.device_ids()
        devices = tuple(
            DeviceConfig(d, self.agent_keys[d].member_id, d) for d in device_ids
        )
        links = tuple(
            (device_ids[i], device_ids[(i + 1) % len(device_ids)])
            for i in range(len(device_ids))
        ) if len(device_ids) > 1 else ()

        self.configs: dict[str, NodeConfig] = {}
        self.services: dict[str, NodeService] = {}
        for i, key in enumerate(self.node_keys):
            config = NodeConfig(
                member_id=key.member_id,
                data_dir=self.workdir / f"node-{i}",
                membership=self.directory,
                validator_ids=self.validator_ids,
                peers=tuple(
                    PeerConfig(k.member_id) for k in self.node_keys if k is not key
                ),
                devices=devices,
                links=links,
                block_interval_ms=s.block_interval_ms,
                freshness_window_ms=10 * s.agent_period_ms,
            )
            self.configs[key.member_id] = config
            byzantine = i >= s.node_count - s.byzantine_count
            cls = ByzantineNode if byzantine else NodeService
            kwargs = {}
            if byzantine:
                kwargs["chaos"] = random.Random(self.rng.randrange(2**63))
            service = cls(config, key, clock=self.clock, **kwargs)
            self.services[key.member_id] = service
            self.network.add_node(service)

        # Device file trees and agents.
        self.device_roots: dict[str, Path] = {}
        self.agents: dict[str, DeviceAgent] = {}
        for idx, device_id in enumerate(device_ids):
            root = self.workdir / "devices" / device_id
            root.mkdir(parents=True, exist_ok=True)
            for path in s.artifact_paths():
                size = self.rng.randint(64, 2048)
                (root / path).write_bytes(self.rng.randbytes(size))
            self.device_roots[device_id] = root
            manifest = build_manifest(device_id, root, s.artifact_paths())
            agent_key = self.agent_keys[device_id]
            home_node = self.validator_ids[idx % len(self.validator_ids)]
            client = NodeClient(
                self.network.client_transport(home_node), agent_key, clock=self.clock
            )
            agent = DeviceAgent(
                manifest,
                root,
                SealedKey(agent_key),
                submit=lambda e, c=client: c.submit_event("main", e),
                period_ms=s.agent_period_ms,
                jitter_ms=s.agent_jitter_ms,
                rng=random.Random(self.rng.randrange(2**63)),
            )
            self.agents[device_id] = agent

        self._schedule_everything()

    def client_for(self, key: SigningKey, node_index: int = 0) -> NodeClient:
        member = self.validator_ids[node_index % len(self.validator_ids)]
        return NodeClient(self.network.client_transport(member), key, clock=self.clock)

    # ------------------------------------------------------------------

    def _schedule_everything(self):
        s = self.scenario
        for i, member in enumerate(self.validator_ids):
            self._schedule_node_tick(member, s.block_interval_ms + i)
        for device_id, agent in sorted(self.agents.items()):
            self._schedule_agent_tick(device_id, agent.next_delay_ms())
        if s.supply_records:
            self.scheduler.at(200, self._register_supply_records)
        for inj in s.injections:
            self.scheduler.at(inj.time_ms, lambda i=inj: self.inject(i))
        for rep in s.replays:
            self.scheduler.at(rep.time_ms, lambda r=rep: self._replay(r))
        if s.feed_interval_ms:
            self._schedule_feed(s.feed_interval_ms, 0)

    def _schedule_node_tick(self, member: str, at_ms: int):
        def tick():
            self.network.tick_node(member)
            self._schedule_node_tick(member, at_ms + self.scenario.block_interval_ms)

        self.scheduler.at(at_ms, tick)

    def _schedule_agent_tick(self, device_id: str, at_ms: int):
        def tick():
            agent = self.agents[device_id]
            try:
                agent.tick(self.clock.now_ms())
            except TransportError:
                pass
            self._schedule_agent_tick(device_id, self.clock.now_ms() + agent.next_delay_ms())

        self.scheduler.at(at_ms, tick)

    def _schedule_feed(self, interval: int, n: int):
        """Continuous trickle of system events so every height has work."""

        def feed():
            client = self.client_for(self.operator_key, node_index=n)
            body = SystemEventBody("session_creation", f"session-{n}", "load feed")
            event = make_event(EventKind.SYSTEM_EVENT, body, self.operator_key, self.clock.now_ms())
            try:
                client.submit_event("main", event)
            except TransportError:
                pass
            self._schedule_feed(interval, n + 1)

        self.scheduler.after(interval, feed)

    def _register_supply_records(self):
        client = self.client_for(self.mfr_key)
        for raw in self.scenario.supply_records:
            body = parse_body(EventKind.SUPPLY_CHAIN, raw)
            event = make_event(EventKind.SUPPLY_CHAIN, body, self.mfr_key, self.clock.now_ms())
            try:
                client.submit_event("main", event)
            except TransportError:
                pass

    # ------------------------------------------------------------------

    def inject(self, injection: Injection) -> None:
        """Mutate a device artifact at the simulated time: one flipped byte
        or a deletion, in place, before the next measurement tick."""
        root = self.device_roots.get(injection.device_id)
        if root is None:
            raise UnknownDevice(injection.device_id)
        target = root / injection.artifact_path
        if not target.exists():
            raise UnknownArtifact(injection.artifact_path)
        if injection.mutation == "delete":
            target.unlink()
            return
        data = bytearray(target.read_bytes())
        if not data:
            data = bytearray(b"\x00")
        pos = self.rng.randrange(len(data))
        data[pos] ^= 1 << self.rng.randrange(8)
        target.write_bytes(bytes(data))

    def _replay(self, replay: Replay) -> None:
        """Re-wrap a previously committed signed report in a fresh event,
        as a malicious courier would, and submit it."""
        client = self.client_for(self.mfr_key)
        try:
            blocks = self._fetch_blocks(client)
        except TransportError:
            return
        for block in blocks:
            for event in block["events"]:
                if event["kind"] != int(EventKind.TAMPER_REPORT):
                    continue
                if event["body"]["device_id"] != replay.device_id:
                    continue
                report = parse_report(event["body"])
                fresh = make_event(
                    EventKind.TAMPER_REPORT, report, self.mfr_key, self.clock.now_ms()
                )
                try:
                    client.submit_event("main", fresh)
                except TransportError:
                    pass
                return

    def _fetch_blocks(self, client: NodeClient) -> list[dict]:
        head = client.get_head("main")["height"]
        blocks: list[dict] = []
        start = 0
        while start <= head:
            page = client.get_blocks("main", start, min(head, start + 400))
            blocks.extend(page["blocks"])
            start += 401
        return blocks

    # ------------------------------------------------------------------

    def run(self) -> Metrics:
        try:
            self.scheduler.run_until(self.scenario.duration_ms)
            return self.collect_metrics()
        finally:
            self.close()

    def run_until(self, t_ms: int) -> None:
        self.scheduler.run_until(t_ms)

    def collect_metrics(self) -> Metrics:
        s = self.scenario
        probe = self.client_for(self.auditor_key, node_index=self._first_alive())
        blocks = self._fetch_blocks(probe)
        detections = [self._detect(inj, blocks) for inj in s.injections]
        statuses = {}
        for device_id in s.device_ids():
            statuses[device_id] = probe.get_device_status(device_id)["state"]
        audit = probe.get_audit_report(0, self.clock.now_ms())
        findings = {"pass": 0, "warn": 0, "fail": 0}
        for f in audit["supply_findings"]:
            findings[f["result"]] += 1
        return Metrics(
            seed=s.seed,
            duration_ms=s.duration_ms,
            blocks_produced=blocks[-1]["header"]["height"] if blocks else 0,
            reports_accepted=audit["reports_accepted"],
            reports_rejected=len(audit["rejected_reports"]),
            detections=detections,
            final_statuses=statuses,
            supply_findings=findings,
            messages_sent=self.network.messages_sent,
        )

    def _first_alive(self) -> int:
        for i, member in enumerate(self.validator_ids):
            if member not in self.network.down:
                return i
        raise TransportError("all nodes down")

    def _detect(self, injection: Injection, blocks: list[dict]) -> Detection:
        """First committed block whose accepted report flips the device to
        Compromised at or after the injection time."""
        registry = {d: self.agent_keys[d].member_id for d in self.scenario.device_ids()}
        events = []
        for block in blocks:
            ts = block["header"]["timestamp"]
            for wire in block["events"]:
                events.append((ts, parse_event(wire)))
        flat = [e for _, e in events]
        scan = scan_reports(flat, injection.device_id, registry, self.directory)
        accepted_ids = {event.event_id for event, _ in scan.accepted}
        for ts, event in events:
            if event.event_id not in accepted_ids:
                continue
            report = event.body
            if report.overall == "compromised" and report.measured_at >= injection.time_ms:
                return Detection(
                    injection.device_id, injection.time_ms, ts, ts - injection.time_ms
                )
        return Detection(injection.device_id, injection.time_ms, None, None)

    def close(self) -> None:
        for service in self.services.values():
            if service.member_id not in self.network.down:
                service.close()
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    # -- scripted faults used by the acceptance suite ----------------------

    def kill_node(self, index: int) -> None:
        self.network.kill(self.validator_ids[index])

    def restart_node(self, index: int) -> NodeService:
        member = self.validator_ids[index]
        config = self.configs[member]
        key = self.node_keys[index]

        def factory() -> NodeService:
            return NodeService(config, key, clock=self.clock)

        service = self.network.restart(member, factory)
        self.services[member] = service
        return service

    def partition(self, left: set[int], right: set[int]) -> None:
        self.network.set_partition(
            {self.validator_ids[i] for i in left},
            {self.validator_ids[i] for i in right},
        )

    def heal(self) -> None:
        self.network.heal_partition()

    def heads(self) -> dict[str, int]:
        return {
            m: self.services[m].ledger.main.height
            for m in self.validator_ids
            if m not in self.network.down
        }

    def head_digests(self) -> set[bytes]:
        return {
            self.services[m].ledger.main.head_digest
            for m in self.validator_ids
            if m not in self.network.down
        }


def run_scenario(scenario: Scenario, workdir: Path | None = None) -> Metrics:
    """Run one scenario to completion; deterministic for a given seed."""
    return SimHarness(scenario, workdir).run()
