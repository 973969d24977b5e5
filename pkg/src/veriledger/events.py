"""Typed event records: the six recorded-information kinds plus anchors.

Kind tags are the stable wire contract:

  1 supply-chain record      4 network configuration
  2 maintenance history      5 system event
  3 appliance log            6 tamper measurement report
                             7 satellite anchor

An event's identity and signature both cover its canonical core: kind,
submitter, submitted_at, and the kind-specific body. See docs/events.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping

from .canonical import (
    DIGEST_SIZE,
    CanonicalizationError,
    canonical_digest,
    canonical_json,
    from_hex,
    is_digest_hex,
    to_hex,
)
from .errors import UnknownKind
from .keys import SIGNATURE_SIZE, SigningKey
from .measurement import MeasurementReport, parse_report
from .membership import Membership


class EventKind(IntEnum):
    SUPPLY_CHAIN = 1
    MAINTENANCE = 2
    APPLIANCE_LOG = 3
    NETWORK_CONFIG = 4
    SYSTEM_EVENT = 5
    TAMPER_REPORT = 6
    ANCHOR = 7


MAINTENANCE_ACTIONS = ("update", "repair")
APPLIANCE_CLASSES = ("firewall", "ids", "auth")
SEVERITIES = ("info", "warn", "alert")
CONFIG_SCOPES = ("routing", "slice")
SYSTEM_EVENT_KINDS = ("ue_registration", "session_creation", "facility_error")


@dataclass(frozen=True)
class Component:
    name: str
    version: str
    supplier: str
    digest: bytes

    def to_wire(self) -> list:
        return [self.name, self.version, self.supplier, to_hex(self.digest)]


@dataclass(frozen=True)
class SupplyChainBody:
    device_id: str
    manufacturer: str
    components: tuple[Component, ...]

    def to_wire(self) -> dict:
        return {
            "components": [c.to_wire() for c in self.components],
            "device_id": self.device_id,
            "manufacturer": self.manufacturer,
        }

    def validate(self) -> list[str]:
        out = []
        if not self.components:
            out.append("components-empty")
        for c in self.components:
            if len(c.digest) != DIGEST_SIZE:
                out.append("component-digest-malformed")
        if not is_digest_hex(self.manufacturer):
            out.append("manufacturer-id-malformed")
        return out


@dataclass(frozen=True)
class MaintenanceBody:
    device_id: str
    action: str
    operator: str
    description: str
    version_before: str
    version_after: str

    def to_wire(self) -> dict:
        return {
            "action": self.action,
            "description": self.description,
            "device_id": self.device_id,
            "operator": self.operator,
            "version_after": self.version_after,
            "version_before": self.version_before,
        }

    def validate(self) -> list[str]:
        return [] if self.action in MAINTENANCE_ACTIONS else ["action-invalid"]


@dataclass(frozen=True)
class ApplianceLogBody:
    appliance_id: str
    appliance_class: str
    severity: str
    payload_digest: bytes
    payload: str | None = None

    def to_wire(self) -> dict:
        return {
            "appliance_class": self.appliance_class,
            "appliance_id": self.appliance_id,
            "payload": self.payload,
            "payload_digest": to_hex(self.payload_digest),
            "severity": self.severity,
        }

    def validate(self) -> list[str]:
        out = []
        if self.appliance_class not in APPLIANCE_CLASSES:
            out.append("appliance-class-invalid")
        if self.severity not in SEVERITIES:
            out.append("severity-invalid")
        if self.payload is not None:
            if canonical_digest(self.payload.encode("utf-8")) != self.payload_digest:
                out.append("payload-digest-mismatch")
        return out


@dataclass(frozen=True)
class NetworkConfigBody:
    scope: str
    config_digest: bytes
    config_text: str | None = None

    def to_wire(self) -> dict:
        return {
            "config_digest": to_hex(self.config_digest),
            "config_text": self.config_text,
            "scope": self.scope,
        }

    def validate(self) -> list[str]:
        out = []
        if self.scope not in CONFIG_SCOPES:
            out.append("scope-invalid")
        if self.config_text is not None:
            if canonical_digest(self.config_text.encode("utf-8")) != self.config_digest:
                out.append("config-digest-mismatch")
        return out


@dataclass(frozen=True)
class SystemEventBody:
    kind: str
    subject: str
    detail: str

    def to_wire(self) -> dict:
        return {"detail": self.detail, "kind": self.kind, "subject": self.subject}

    def validate(self) -> list[str]:
        return [] if self.kind in SYSTEM_EVENT_KINDS else ["kind-invalid"]


@dataclass(frozen=True)
class AnchorBody:
    satellite_id: str
    satellite_height: int
    satellite_head_digest: bytes

    def to_wire(self) -> dict:
        return {
            "satellite_head_digest": to_hex(self.satellite_head_digest),
            "satellite_height": self.satellite_height,
            "satellite_id": self.satellite_id,
        }

    def validate(self) -> list[str]:
        out = []
        if len(self.satellite_head_digest) != DIGEST_SIZE:
            out.append("anchor-digest-malformed")
        if not isinstance(self.satellite_height, int) or self.satellite_height < 0:
            out.append("anchor-height-invalid")
        return out


# Kind-6 bodies reuse the measurement report schema verbatim.
Body = (
    SupplyChainBody
    | MaintenanceBody
    | ApplianceLogBody
    | NetworkConfigBody
    | SystemEventBody
    | MeasurementReport
    | AnchorBody
)

_BODY_TYPES: dict[int, type] = {
    EventKind.SUPPLY_CHAIN: SupplyChainBody,
    EventKind.MAINTENANCE: MaintenanceBody,
    EventKind.APPLIANCE_LOG: ApplianceLogBody,
    EventKind.NETWORK_CONFIG: NetworkConfigBody,
    EventKind.SYSTEM_EVENT: SystemEventBody,
    EventKind.TAMPER_REPORT: MeasurementReport,
    EventKind.ANCHOR: AnchorBody,
}


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    kind: int
    submitter: str
    submitted_at: int
    body: Body
    submitter_signature: bytes

    def to_wire(self) -> dict:
        return {
            "body": self.body.to_wire(),
            "event_id": self.event_id,
            "kind": self.kind,
            "submitted_at": self.submitted_at,
            "submitter": self.submitter,
            "submitter_signature": to_hex(self.submitter_signature),
        }


def _core(kind: int, submitter: str, submitted_at: int, body: Body) -> dict:
    return {
        "body": body.to_wire(),
        "kind": int(kind),
        "submitted_at": submitted_at,
        "submitter": submitter,
    }


def canonicalize_event(event: EventRecord) -> bytes:
    """Canonical core bytes an event's id and signature commit to."""
    if event.kind not in _BODY_TYPES:
        raise UnknownKind(f"kind {event.kind}")
    return canonical_json(_core(event.kind, event.submitter, event.submitted_at, event.body))


def event_digest(event: EventRecord) -> bytes:
    return canonical_digest(canonicalize_event(event))


def make_event(
    kind: int,
    body: Body,
    signing_key: SigningKey,
    submitted_at: int,
    submitter: str | None = None,
) -> EventRecord:
    """Build a fully signed event; submitter defaults to the key's identity."""
    if kind not in _BODY_TYPES:
        raise UnknownKind(f"kind {kind}")
    submitter = submitter or signing_key.member_id
    core = canonical_json(_core(kind, submitter, submitted_at, body))
    return EventRecord(
        event_id=canonical_digest(core).hex(),
        kind=int(kind),
        submitter=submitter,
        submitted_at=submitted_at,
        body=body,
        submitter_signature=signing_key.sign(core),
    )


def parse_body(kind: int, data: Mapping) -> Body:
    if kind == EventKind.SUPPLY_CHAIN:
        components = tuple(
            Component(n, v, s, from_hex(d, size=DIGEST_SIZE, what="component digest"))
            for n, v, s, d in data["components"]
        )
        return SupplyChainBody(data["device_id"], data["manufacturer"], components)
    if kind == EventKind.MAINTENANCE:
        return MaintenanceBody(
            data["device_id"], data["action"], data["operator"],
            data["description"], data["version_before"], data["version_after"],
        )
    if kind == EventKind.APPLIANCE_LOG:
        return ApplianceLogBody(
            data["appliance_id"], data["appliance_class"], data["severity"],
            from_hex(data["payload_digest"], size=DIGEST_SIZE, what="payload_digest"),
            data.get("payload"),
        )
    if kind == EventKind.NETWORK_CONFIG:
        return NetworkConfigBody(
            data["scope"],
            from_hex(data["config_digest"], size=DIGEST_SIZE, what="config_digest"),
            data.get("config_text"),
        )
    if kind == EventKind.SYSTEM_EVENT:
        return SystemEventBody(data["kind"], data["subject"], data["detail"])
    if kind == EventKind.TAMPER_REPORT:
        return parse_report(data)
    if kind == EventKind.ANCHOR:
        return AnchorBody(
            data["satellite_id"],
            data["satellite_height"],
            from_hex(data["satellite_head_digest"], size=DIGEST_SIZE, what="anchor digest"),
        )
    raise UnknownKind(f"kind {kind}")


def parse_event(data: Mapping) -> EventRecord:
    """Parse a wire event dict. Raises UnknownKind or CanonicalizationError."""
    try:
        kind = data["kind"]
        if not isinstance(kind, int) or kind not in _BODY_TYPES:
            raise UnknownKind(f"kind {kind!r}")
        return EventRecord(
            event_id=data["event_id"],
            kind=kind,
            submitter=data["submitter"],
            submitted_at=data["submitted_at"],
            body=parse_body(kind, data["body"]),
            submitter_signature=from_hex(
                data["submitter_signature"], size=SIGNATURE_SIZE, what="submitter_signature"
            ),
        )
    except UnknownKind:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CanonicalizationError(f"malformed event: {e}") from e


def validate_event(event: EventRecord, membership: Membership) -> list[str]:
    """Check kind invariants, submitter registration, id, and signature.

    Returns the list of violations; empty means the event is acceptable.
    """
    if event.kind not in _BODY_TYPES:
        return ["unknown-kind"]
    violations = []
    if not isinstance(event.body, _BODY_TYPES[event.kind]):
        return ["body-kind-mismatch"]
    if event.kind == EventKind.TAMPER_REPORT:
        violations.extend(event.body.validate_shape())
        if event.body.agent_signature is None:
            violations.append("report-unsigned")
    else:
        violations.extend(event.body.validate())
    if not isinstance(event.submitted_at, int) or event.submitted_at < 0:
        violations.append("submitted-at-invalid")
    key = membership.verify_key(event.submitter)
    if key is None:
        violations.append("unknown-submitter")
    try:
        core = canonicalize_event(event)
    except CanonicalizationError:
        return violations + ["not-canonicalizable"]
    if canonical_digest(core).hex() != event.event_id:
        violations.append("id-mismatch")
    if key is not None and not key.verify(event.submitter_signature, core):
        violations.append("bad-signature")
    return violations
