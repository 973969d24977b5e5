"""Trust derivation from on-chain data: device statuses, supply-chain
findings, and whole-system audit reports.

Everything here is a pure function over committed chain data, so any node
(or an offline auditor holding a chain copy) derives identical verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .canonical import to_hex
from .chain import ChainState, ChainVerdict, verify_chain
from .errors import ConfigurationError
from .events import EventKind, EventRecord, SupplyChainBody
from .measurement import MeasurementReport
from .membership import Membership
from .agent import verify_report

STATES = ("Clean", "Compromised", "Stale", "Unknown")

# Default freshness window: ten agent periods. A silenced agent stops
# refreshing its clean verdict and surfaces as Stale instead of Clean.
DEFAULT_WINDOW_MS = 10_000


@dataclass(frozen=True)
class DeviceStatus:
    device_id: str
    state: str
    last_report_at: int | None = None
    last_counter: int | None = None
    evidence: str | None = None

    def to_wire(self) -> dict:
        return {
            "device_id": self.device_id,
            "evidence": self.evidence,
            "last_counter": self.last_counter,
            "last_report_at": self.last_report_at,
            "state": self.state,
        }


@dataclass(frozen=True)
class ReplayCheck:
    accepted: bool
    reason: str | None = None
    gap: int = 0


def check_replay(counter: int, last_accepted_counter: int) -> ReplayCheck:
    """Counters must strictly increase; a jump is accepted but noted."""
    if counter <= last_accepted_counter:
        return ReplayCheck(False, "replay")
    gap = counter - last_accepted_counter - 1
    return ReplayCheck(True, gap=gap)


@dataclass(frozen=True)
class RejectedReport:
    event_id: str
    device_id: str
    reason: str

    def to_wire(self) -> dict:
        return {"device_id": self.device_id, "event_id": self.event_id, "reason": self.reason}


@dataclass
class ReportScan:
    """Accepted / rejected split of the kind-6 events for one device."""

    accepted: list[tuple[EventRecord, MeasurementReport]] = field(default_factory=list)
    rejected: list[RejectedReport] = field(default_factory=list)
    counter_gaps: int = 0


def scan_reports(
    events: Sequence[EventRecord],
    device_id: str,
    registry: Mapping[str, str],
    membership: Membership,
) -> ReportScan:
    """Walk kind-6 events in chain order, accepting each report only if its
    sealed-key signature verifies against the device's registered agent key
    and its counter strictly exceeds every previously accepted one."""
    scan = ReportScan()
    agent_id = registry.get(device_id)
    key = membership.verify_key(agent_id) if agent_id else None
    last_counter = -1
    for event in events:
        if event.kind != EventKind.TAMPER_REPORT:
            continue
        report: MeasurementReport = event.body
        if report.device_id != device_id:
            continue
        if key is None:
            scan.rejected.append(RejectedReport(event.event_id, device_id, "unknown-device"))
            continue
        if not verify_report(report, key):
            scan.rejected.append(RejectedReport(event.event_id, device_id, "bad-signature"))
            continue
        outcome = check_replay(report.counter, last_counter)
        if not outcome.accepted:
            scan.rejected.append(RejectedReport(event.event_id, device_id, "replay"))
            continue
        if outcome.gap:
            scan.counter_gaps += 1
        last_counter = report.counter
        scan.accepted.append((event, report))
    return scan


def derive_device_status(
    events: Sequence[EventRecord],
    device_id: str,
    now: int,
    window_ms: int,
    registry: Mapping[str, str],
    membership: Membership,
) -> DeviceStatus:
    """Latest accepted report decides: compromised wins until a newer clean
    report; a clean report older than the freshness window means Stale; no
    accepted report at all means Unknown."""
    scan = scan_reports(events, device_id, registry, membership)
    if not scan.accepted:
        return DeviceStatus(device_id, "Unknown")
    event, report = scan.accepted[-1]
    if report.overall == "compromised":
        state = "Compromised"
    elif now - report.measured_at <= window_ms:
        state = "Clean"
    else:
        state = "Stale"
    return DeviceStatus(
        device_id,
        state,
        last_report_at=report.measured_at,
        last_counter=report.counter,
        evidence=event.event_id,
    )


@dataclass(frozen=True)
class SupplyChainPolicy:
    supplier_allowlist: frozenset[str] = frozenset()
    supplier_denylist: frozenset[str] = frozenset()
    bad_component_digests: frozenset[bytes] = frozenset()
    unknown_supplier_action: str = "warn"

    def __post_init__(self):
        if self.supplier_allowlist & self.supplier_denylist:
            raise ConfigurationError("allowlist and denylist overlap")
        if self.unknown_supplier_action not in ("warn", "fail"):
            raise ConfigurationError("unknown_supplier_action must be warn or fail")

    def to_wire(self) -> dict:
        return {
            "bad_component_digests": sorted(to_hex(d) for d in self.bad_component_digests),
            "supplier_allowlist": sorted(self.supplier_allowlist),
            "supplier_denylist": sorted(self.supplier_denylist),
            "unknown_supplier_action": self.unknown_supplier_action,
        }


@dataclass(frozen=True)
class SupplyFinding:
    device_id: str
    result: str  # pass | warn | fail
    reasons: tuple[str, ...]

    def to_wire(self) -> dict:
        return {"device_id": self.device_id, "reasons": list(self.reasons), "result": self.result}


def audit_supply_chain(record: SupplyChainBody, policy: SupplyChainPolicy) -> SupplyFinding:
    """Denylisted suppliers and known-bad component digests fail outright;
    suppliers outside the allowlist warn or fail per policy; reasons name
    every violating component."""
    failures: list[str] = []
    warnings: list[str] = []
    for c in record.components:
        if c.supplier in policy.supplier_denylist:
            failures.append(f"component {c.name}: supplier {c.supplier} denylisted")
        if c.digest in policy.bad_component_digests:
            failures.append(f"component {c.name}: digest flagged as bad")
        if (
            c.supplier not in policy.supplier_denylist
            and c.supplier not in policy.supplier_allowlist
        ):
            msg = f"component {c.name}: supplier {c.supplier} not allowlisted"
            if policy.unknown_supplier_action == "fail":
                failures.append(msg)
            else:
                warnings.append(msg)
    if failures:
        return SupplyFinding(record.device_id, "fail", tuple(failures + warnings))
    if warnings:
        return SupplyFinding(record.device_id, "warn", tuple(warnings))
    return SupplyFinding(record.device_id, "pass", ())


@dataclass(frozen=True)
class AuditReport:
    range_from: int
    range_to: int
    chain_integrity: ChainVerdict
    untrusted: bool
    device_statuses: tuple[DeviceStatus, ...]
    supply_findings: tuple[SupplyFinding, ...]
    config_changes: tuple[dict, ...]
    maintenance_summary: tuple[dict, ...]
    rejected_reports: tuple[RejectedReport, ...]
    reports_accepted: int
    generated_at: int

    def to_wire(self) -> dict:
        return {
            "chain_integrity": self.chain_integrity.to_wire(),
            "config_changes": list(self.config_changes),
            "device_statuses": [s.to_wire() for s in self.device_statuses],
            "generated_at": self.generated_at,
            "maintenance_summary": list(self.maintenance_summary),
            "range": {"from": self.range_from, "to": self.range_to},
            "rejected_reports": [r.to_wire() for r in self.rejected_reports],
            "reports_accepted": self.reports_accepted,
            "supply_findings": [f.to_wire() for f in self.supply_findings],
            "untrusted": self.untrusted,
        }


def generate_audit_report(
    chain: ChainState,
    range_from: int,
    range_to: int,
    policy: SupplyChainPolicy,
    window_ms: int,
    registry: Mapping[str, str],
    generated_at: int | None = None,
) -> AuditReport:
    """Full audit over one chain: verify integrity first, then derive every
    section from committed events whose submitted_at falls in the range.
    An integrity failure does not raise; it marks all sections untrusted."""
    verdict = verify_chain(chain.blocks, chain.chain_id)
    committed = [e for _, _, e in chain.committed_events()]
    return compose_audit_report(
        committed, verdict, chain.directory, range_from, range_to,
        policy, window_ms, registry, generated_at,
    )


def audit_stored_chain(
    data_dir,
    chain_id: str,
    directory: Membership,
    range_from: int,
    range_to: int,
    policy: SupplyChainPolicy,
    window_ms: int,
    registry: Mapping[str, str],
    generated_at: int | None = None,
) -> AuditReport:
    """Audit a persisted chain exactly as stored: on-disk tampering surfaces
    as an integrity failure rather than being silently truncated away."""
    from .storage import ChainStore

    store = ChainStore(data_dir, chain_id)
    blocks, verdict = store.load_and_verify()
    store.close()
    committed = [e for b in blocks for e in b.events]
    return compose_audit_report(
        committed, verdict, directory, range_from, range_to,
        policy, window_ms, registry, generated_at,
    )


def compose_audit_report(
    committed: Sequence[EventRecord],
    verdict: ChainVerdict,
    directory: Membership,
    range_from: int,
    range_to: int,
    policy: SupplyChainPolicy,
    window_ms: int,
    registry: Mapping[str, str],
    generated_at: int | None = None,
) -> AuditReport:
    in_range = [e for e in committed if range_from <= e.submitted_at <= range_to]

    supply_findings = []
    config_changes = []
    maintenance = []
    device_ids = sorted(registry)
    for event in in_range:
        if event.kind == EventKind.SUPPLY_CHAIN:
            supply_findings.append(audit_supply_chain(event.body, policy))
            if event.body.device_id not in device_ids:
                device_ids.append(event.body.device_id)
        elif event.kind == EventKind.NETWORK_CONFIG:
            config_changes.append(
                {
                    "config_digest": to_hex(event.body.config_digest),
                    "event_id": event.event_id,
                    "scope": event.body.scope,
                    "submitted_at": event.submitted_at,
                }
            )
        elif event.kind == EventKind.MAINTENANCE:
            maintenance.append(
                {
                    "action": event.body.action,
                    "device_id": event.body.device_id,
                    "event_id": event.event_id,
                    "submitted_at": event.submitted_at,
                    "version_after": event.body.version_after,
                    "version_before": event.body.version_before,
                }
            )

    statuses = []
    rejected: list[RejectedReport] = []
    accepted = 0
    report_devices = sorted(
        {e.body.device_id for e in in_range if e.kind == EventKind.TAMPER_REPORT}
        | set(device_ids)
    )
    for device_id in report_devices:
        scan = scan_reports(in_range, device_id, registry, directory)
        accepted += len(scan.accepted)
        rejected.extend(scan.rejected)
        statuses.append(
            derive_device_status(in_range, device_id, range_to, window_ms, registry, directory)
        )

    return AuditReport(
        range_from=range_from,
        range_to=range_to,
        chain_integrity=verdict,
        untrusted=not verdict.valid,
        device_statuses=tuple(statuses),
        supply_findings=tuple(supply_findings),
        config_changes=tuple(config_changes),
        maintenance_summary=tuple(maintenance),
        rejected_reports=tuple(rejected),
        reports_accepted=accepted,
        generated_at=generated_at if generated_at is not None else range_to,
    )
