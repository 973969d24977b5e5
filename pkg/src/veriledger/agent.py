"""Device-side tamper detection: golden manifest, periodic measurement,
signed replay-protected reports.

The signing key is held behind a SealedKey capability standing in for
TEE-protected key storage: the rest of the process can request signatures
but can never read the raw private key, so an attacker who owns the file
system and the agent's state cannot forge reports.
"""

from __future__ import annotations

import random
import threading
from collections import deque
from pathlib import Path
from typing import Callable, Iterable

from .canonical import canonical_digest
from .errors import CounterRegression, EmptyArtifactSet, TransportError, UnreadableArtifact
from .events import EventKind, EventRecord, make_event
from .keys import SigningKey, VerifyKey
from .measurement import (
    Manifest,
    ManifestEntry,
    MeasurementReport,
    VerdictEntry,
    manifest_id_of,
)

DEFAULT_PERIOD_MS = 1000
DEFAULT_JITTER_MS = 100


class SealedKey:
    """Signing capability without key extraction.

    The private key lives only inside the closure created at construction;
    no attribute, repr, or serialization of this object contains raw key
    bytes, and instances refuse to pickle.
    """

    __slots__ = ("key_id", "public_bytes", "_sign")

    def __init__(self, signing_key: SigningKey):
        self.key_id = signing_key.member_id
        self.public_bytes = signing_key.public_bytes
        sign: Callable[[bytes], bytes] = signing_key.sign
        self._sign = lambda message: sign(message)

    @classmethod
    def generate(cls) -> "SealedKey":
        return cls(SigningKey.generate())

    def sign(self, message: bytes) -> bytes:
        return self._sign(message)

    def verify_key(self) -> VerifyKey:
        return VerifyKey(self.public_bytes)

    def __repr__(self) -> str:
        return f"SealedKey(key_id={self.key_id!r})"

    def __reduce__(self):
        raise TypeError("SealedKey is not serializable")


def build_manifest(
    device_id: str,
    root: Path,
    artifact_paths: Iterable[str],
    created_at: int = 0,
) -> Manifest:
    """Hash every artifact under `root` into a golden manifest. Entry order
    is sorted by path, so the manifest id does not depend on input order."""
    paths = sorted(set(artifact_paths))
    if not paths:
        raise EmptyArtifactSet("no artifact paths given")
    root = Path(root)
    entries = []
    for path in paths:
        try:
            data = (root / path).read_bytes()
        except OSError as e:
            raise UnreadableArtifact(path, str(e)) from e
        entries.append(ManifestEntry(path, canonical_digest(data)))
    entries = tuple(entries)
    return Manifest(
        manifest_id=manifest_id_of(device_id, entries),
        device_id=device_id,
        entries=entries,
        created_at=created_at,
    )


def measure(
    manifest: Manifest,
    root: Path,
    measured_at: int = 0,
    counter: int = 0,
) -> MeasurementReport:
    """Compare every manifest entry against the artifact on disk. A changed
    file yields `mismatch`, an absent one `missing`; the report is overall
    clean only when every verdict is clean. Returns an unsigned report."""
    root = Path(root)
    verdicts = []
    for entry in manifest.entries:
        target = root / entry.artifact_path
        try:
            observed = canonical_digest(target.read_bytes())
        except OSError:
            verdicts.append(VerdictEntry(entry.artifact_path, None, "missing"))
            continue
        verdict = "clean" if observed == entry.expected_digest else "mismatch"
        verdicts.append(VerdictEntry(entry.artifact_path, observed, verdict))
    overall = "clean" if all(v.verdict == "clean" for v in verdicts) else "compromised"
    return MeasurementReport(
        device_id=manifest.device_id,
        manifest_id=manifest.manifest_id,
        counter=counter,
        measured_at=measured_at,
        verdicts=tuple(verdicts),
        overall=overall,
    )


def sign_report(
    report: MeasurementReport,
    sealed_key: SealedKey,
    previous_counter: int,
) -> MeasurementReport:
    """Sign a report after checking the replay counter advanced by one."""
    if report.counter != previous_counter + 1:
        raise CounterRegression(
            f"counter {report.counter} does not follow {previous_counter}"
        )
    return report.with_signature(sealed_key.sign(report.signable()))


def verify_report(report: MeasurementReport, key: VerifyKey) -> bool:
    if report.agent_signature is None:
        return False
    return key.verify(report.agent_signature, report.signable())


class DeviceAgent:
    """Measurement loop for one device.

    Each cycle: measure, sign with the next counter, wrap as a kind-6 event,
    and submit. Failed submissions stay in an ordered buffer and are retried
    first on the next cycle, so reports always arrive in counter order and
    no report is ever dropped silently.
    """

    def __init__(
        self,
        manifest: Manifest,
        root: Path,
        sealed_key: SealedKey,
        submit: Callable[[EventRecord], None],
        period_ms: int = DEFAULT_PERIOD_MS,
        jitter_ms: int = DEFAULT_JITTER_MS,
        rng: random.Random | None = None,
    ):
        self.manifest = manifest
        self.root = Path(root)
        self.sealed_key = sealed_key
        self.member_id = sealed_key.key_id
        self._submit = submit
        self.period_ms = period_ms
        self.jitter_ms = jitter_ms
        self.rng = rng or random.Random()
        self.counter = 0
        self.last_overall: str | None = None
        self.buffer: deque[EventRecord] = deque()
        self.submitted = 0
        self.failures = 0
        self._buffer_lock = threading.Lock()

    @property
    def device_id(self) -> str:
        return self.manifest.device_id

    def next_delay_ms(self) -> int:
        jitter = self.rng.randint(-self.jitter_ms, self.jitter_ms) if self.jitter_ms else 0
        return max(1, self.period_ms + jitter)

    def measure_and_sign(self, now_ms: int) -> MeasurementReport:
        report = measure(self.manifest, self.root, measured_at=now_ms, counter=self.counter + 1)
        signed = sign_report(report, self.sealed_key, self.counter)
        self.counter = signed.counter
        self.last_overall = signed.overall
        return signed

    def tick(self, now_ms: int) -> MeasurementReport:
        """One measurement cycle: measure, sign, enqueue, flush."""
        signed = self.measure_and_sign(now_ms)
        event = make_event(EventKind.TAMPER_REPORT, signed, _SealedEventSigner(self.sealed_key), now_ms)
        with self._buffer_lock:
            self.buffer.append(event)
        self.flush(now_ms)
        return signed

    def flush(self, now_ms: int) -> int:
        """Deliver buffered reports oldest-first; stop at the first failure
        so delivery order (and thus counter order) is preserved."""
        delivered = 0
        while True:
            with self._buffer_lock:
                if not self.buffer:
                    break
                event = self.buffer[0]
            try:
                self._submit(event)
            except TransportError:
                self.failures += 1
                break
            with self._buffer_lock:
                self.buffer.popleft()
            self.submitted += 1
            delivered += 1
        return delivered

    def run(self, clock, stop: threading.Event, on_cycle: Callable[[int], None] | None = None) -> None:
        """Wall-clock loop for real deployments; the sim drives tick() itself."""
        while not stop.is_set():
            now = clock.now_ms()
            self.tick(now)
            if on_cycle is not None:
                on_cycle(now)
            stop.wait(self.next_delay_ms() / 1000.0)


class _SealedEventSigner:
    """Adapter letting make_event sign with a sealed key."""

    def __init__(self, sealed: SealedKey):
        self._sealed = sealed
        self.member_id = sealed.key_id

    def sign(self, message: bytes) -> bytes:
        return self._sealed.sign(message)
