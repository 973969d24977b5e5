"""Golden manifests and integrity measurement reports.

These are pure data schemas; the measuring engine lives in `agent`. The
report schema doubles as the body of kind-6 chain events, so its canonical
form is part of the wire contract.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .canonical import (
    DIGEST_SIZE,
    CanonicalizationError,
    canonical_digest,
    canonical_json,
    from_hex,
    to_hex,
)

VERDICTS = ("clean", "mismatch", "missing")
OVERALLS = ("clean", "compromised")


@dataclass(frozen=True)
class ManifestEntry:
    artifact_path: str
    expected_digest: bytes

    def to_wire(self) -> list:
        return [self.artifact_path, to_hex(self.expected_digest)]


@dataclass(frozen=True)
class Manifest:
    manifest_id: str
    device_id: str
    entries: tuple[ManifestEntry, ...]
    created_at: int

    def paths(self) -> list[str]:
        return [e.artifact_path for e in self.entries]

    def to_wire(self) -> dict:
        return {
            "created_at": self.created_at,
            "device_id": self.device_id,
            "entries": [e.to_wire() for e in self.entries],
            "manifest_id": self.manifest_id,
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "Manifest":
        entries = tuple(
            ManifestEntry(p, from_hex(d, size=DIGEST_SIZE, what="expected_digest"))
            for p, d in data["entries"]
        )
        return cls(
            manifest_id=data["manifest_id"],
            device_id=data["device_id"],
            entries=entries,
            created_at=data["created_at"],
        )


def manifest_body(device_id: str, entries: tuple[ManifestEntry, ...]) -> bytes:
    """Canonical bytes the manifest_id commits to: device and entry list only,
    so the id is a pure function of file contents."""
    return canonical_json(
        {"device_id": device_id, "entries": [e.to_wire() for e in entries]}
    )


def manifest_id_of(device_id: str, entries: tuple[ManifestEntry, ...]) -> str:
    return canonical_digest(manifest_body(device_id, entries)).hex()


@dataclass(frozen=True)
class VerdictEntry:
    artifact_path: str
    observed_digest: bytes | None
    verdict: str  # clean | mismatch | missing

    def to_wire(self) -> list:
        observed = None if self.observed_digest is None else to_hex(self.observed_digest)
        return [self.artifact_path, observed, self.verdict]


@dataclass(frozen=True)
class MeasurementReport:
    device_id: str
    manifest_id: str
    counter: int
    measured_at: int
    verdicts: tuple[VerdictEntry, ...]
    overall: str  # clean | compromised
    agent_signature: bytes | None = None

    def signable(self) -> bytes:
        """Canonical report body; the sealed agent key signs exactly this."""
        return canonical_json(
            {
                "counter": self.counter,
                "device_id": self.device_id,
                "manifest_id": self.manifest_id,
                "measured_at": self.measured_at,
                "overall": self.overall,
                "verdicts": [v.to_wire() for v in self.verdicts],
            }
        )

    def with_signature(self, signature: bytes) -> "MeasurementReport":
        return replace(self, agent_signature=signature)

    def to_wire(self) -> dict:
        if self.agent_signature is None:
            raise ValueError("report is unsigned")
        return {
            "agent_signature": to_hex(self.agent_signature),
            "counter": self.counter,
            "device_id": self.device_id,
            "manifest_id": self.manifest_id,
            "measured_at": self.measured_at,
            "overall": self.overall,
            "verdicts": [v.to_wire() for v in self.verdicts],
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "MeasurementReport":
        verdicts = []
        for row in data["verdicts"]:
            path, observed, verdict = row
            raw = None if observed is None else from_hex(observed, size=DIGEST_SIZE, what="observed_digest")
            verdicts.append(VerdictEntry(path, raw, verdict))
        return cls(
            device_id=data["device_id"],
            manifest_id=data["manifest_id"],
            counter=data["counter"],
            measured_at=data["measured_at"],
            verdicts=tuple(verdicts),
            overall=data["overall"],
            agent_signature=from_hex(data["agent_signature"], size=64, what="agent_signature"),
        )

    def validate_shape(self) -> list[str]:
        violations = []
        if self.overall not in OVERALLS:
            violations.append("overall-invalid")
        if not isinstance(self.counter, int) or self.counter < 0:
            violations.append("counter-invalid")
        seen = set()
        for v in self.verdicts:
            if v.verdict not in VERDICTS:
                violations.append("verdict-invalid")
            if v.artifact_path in seen:
                violations.append("verdict-paths-duplicate")
            seen.add(v.artifact_path)
        all_clean = all(v.verdict == "clean" for v in self.verdicts)
        if (self.overall == "clean") != all_clean:
            violations.append("overall-mismatch")
        return violations


def parse_report(data: Mapping) -> MeasurementReport:
    try:
        return MeasurementReport.from_wire(data)
    except (KeyError, TypeError, ValueError, CanonicalizationError) as e:
        raise CanonicalizationError(f"malformed measurement report: {e}") from e
