"""Tamper-detection agent: manifests, measurement, sealed keys, buffering."""

import pickle
import random

import pytest

from veriledger.agent import (
    DeviceAgent,
    SealedKey,
    build_manifest,
    measure,
    sign_report,
    verify_report,
)
from veriledger.canonical import canonical_digest
from veriledger.errors import (
    CounterRegression,
    EmptyArtifactSet,
    TransportError,
    UnreadableArtifact,
)
from veriledger.keys import SigningKey

from conftest import seeded_key


@pytest.fixture
def device(tmp_path):
    files = {"bin/app": b"application binary", "etc/conf": b"threshold=3\n", "lib/core": b"\x00" * 256}
    for path, data in files.items():
        target = tmp_path / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    return tmp_path, list(files)


def test_manifest_then_measure_is_clean(device):
    root, paths = device
    manifest = build_manifest("dev-1", root, paths)
    report = measure(manifest, root)
    assert report.overall == "clean"
    assert [v.verdict for v in report.verdicts] == ["clean"] * len(paths)
    assert [v.artifact_path for v in report.verdicts] == manifest.paths()


def test_manifest_order_independent(device):
    root, paths = device
    a = build_manifest("dev-1", root, paths)
    b = build_manifest("dev-1", root, list(reversed(paths)))
    assert a.manifest_id == b.manifest_id
    assert [e.artifact_path for e in a.entries] == sorted(paths)


def test_manifest_empty_and_unreadable(device, tmp_path):
    root, _ = device
    with pytest.raises(EmptyArtifactSet):
        build_manifest("dev-1", root, [])
    with pytest.raises(UnreadableArtifact):
        build_manifest("dev-1", root, ["missing/file"])


def test_single_byte_change_detected(device):
    root, paths = device
    manifest = build_manifest("dev-1", root, paths)
    target = root / "etc/conf"
    data = bytearray(target.read_bytes())
    data[3] ^= 0x20
    target.write_bytes(bytes(data))
    report = measure(manifest, root)
    verdicts = {v.artifact_path: v.verdict for v in report.verdicts}
    assert verdicts["etc/conf"] == "mismatch"
    assert report.overall == "compromised"
    # The expected digest in the manifest still matches an untouched oracle hash.
    assert verdicts["bin/app"] == "clean"
    expected = canonical_digest(b"application binary")
    assert manifest.entries[0].expected_digest == expected


def test_deleted_file_is_missing(device):
    root, paths = device
    manifest = build_manifest("dev-1", root, paths)
    (root / "lib/core").unlink()
    report = measure(manifest, root)
    verdicts = {v.artifact_path: v.verdict for v in report.verdicts}
    assert verdicts["lib/core"] == "missing"
    assert report.overall == "compromised"


def test_detection_completeness_random_mutations(tmp_path):
    """Any single-byte modification of any manifest file must be caught."""
    rng = random.Random(42)
    paths = []
    for i in range(8):
        p = tmp_path / f"f{i}"
        p.write_bytes(rng.randbytes(rng.randint(1, 4096)))
        paths.append(f"f{i}")
    manifest = build_manifest("dev-p", tmp_path, paths)
    for _ in range(40):
        victim = rng.choice(paths)
        target = tmp_path / victim
        original = target.read_bytes()
        data = bytearray(original)
        pos = rng.randrange(len(data))
        old = data[pos]
        data[pos] = rng.choice([b for b in range(256) if b != old])
        target.write_bytes(bytes(data))
        report = measure(manifest, tmp_path)
        verdicts = {v.artifact_path: v.verdict for v in report.verdicts}
        assert verdicts[victim] == "mismatch"
        assert report.overall == "compromised"
        target.write_bytes(original)
    assert measure(manifest, tmp_path).overall == "clean"


class TestSignedReports:
    def test_sign_then_verify(self, device):
        root, paths = device
        manifest = build_manifest("dev-1", root, paths)
        sealed = SealedKey.generate()
        report = measure(manifest, root, measured_at=10, counter=1)
        signed = sign_report(report, sealed, previous_counter=0)
        assert verify_report(signed, sealed.verify_key())

    def test_mutated_verdict_fails_verification(self, device):
        from dataclasses import replace

        root, paths = device
        manifest = build_manifest("dev-1", root, paths)
        sealed = SealedKey.generate()
        signed = sign_report(measure(manifest, root, counter=1), sealed, 0)
        flipped = replace(signed, overall="compromised")
        assert not verify_report(flipped, sealed.verify_key())

    def test_counter_must_advance_by_one(self, device):
        root, paths = device
        manifest = build_manifest("dev-1", root, paths)
        sealed = SealedKey.generate()
        report = measure(manifest, root, counter=7)
        with pytest.raises(CounterRegression):
            sign_report(report, sealed, previous_counter=7)
        with pytest.raises(CounterRegression):
            sign_report(report, sealed, previous_counter=9)


class TestSealedKey:
    def test_sealed_key_signs_like_its_origin(self):
        origin = SigningKey.generate()
        sealed = SealedKey(origin)
        assert sealed.sign(b"m") == origin.sign(b"m")
        assert sealed.key_id == origin.member_id

    def test_no_raw_key_bytes_in_serialized_state(self, device):
        root, paths = device
        origin = seeded_key("sealed-device")
        secret_hex = origin.to_hex()
        sealed = SealedKey(origin)
        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, sealed, submit=lambda e: None
        )
        agent.tick(1000)
        dump = repr(vars(agent)) + repr(agent.__dict__) + repr(sealed) + repr(
            getattr(sealed, "_sign")
        )
        assert secret_hex not in dump
        assert secret_hex.encode() not in dump.encode()

    def test_sealed_key_refuses_pickle(self):
        with pytest.raises(TypeError):
            pickle.dumps(SealedKey.generate())


class TestAgentLoop:
    def test_counters_strictly_increase(self, device):
        root, paths = device
        delivered = []
        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, SealedKey.generate(),
            submit=delivered.append,
        )
        for i in range(10):
            agent.tick(1000 * (i + 1))
        counters = [e.body.counter for e in delivered]
        assert counters == list(range(1, 11))

    def test_unreachable_sink_buffers_then_delivers_in_order(self, device):
        root, paths = device
        delivered = []
        reachable = {"up": False}

        def submit(event):
            if not reachable["up"]:
                raise TransportError("sink down")
            delivered.append(event)

        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, SealedKey.generate(), submit=submit
        )
        agent.tick(1000)
        agent.tick(2000)
        assert delivered == [] and len(agent.buffer) == 2
        reachable["up"] = True
        agent.tick(3000)
        counters = [e.body.counter for e in delivered]
        assert counters == [1, 2, 3]
        assert not agent.buffer
        assert agent.failures == 2

    def test_tick_reports_cover_manifest_paths(self, device):
        root, paths = device
        delivered = []
        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, SealedKey.generate(),
            submit=delivered.append,
        )
        report = agent.tick(500)
        assert [v.artifact_path for v in report.verdicts] == sorted(paths)
        event = delivered[0]
        assert event.kind == 6
        assert event.submitter == agent.member_id
        assert verify_report(event.body, agent.sealed_key.verify_key())

    def test_simulated_5s_run_submits_at_least_4_reports(self, device):
        root, paths = device
        delivered = []
        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, SealedKey.generate(),
            submit=delivered.append, period_ms=1000, jitter_ms=100,
            rng=random.Random(9),
        )
        t = agent.next_delay_ms()
        while t <= 5000:
            agent.tick(t)
            t += agent.next_delay_ms()
        assert len(delivered) >= 4

    def test_jitter_within_bounds(self, device):
        root, paths = device
        agent = DeviceAgent(
            build_manifest("dev-1", root, paths), root, SealedKey.generate(),
            submit=lambda e: None, period_ms=1000, jitter_ms=100,
            rng=random.Random(3),
        )
        delays = {agent.next_delay_ms() for _ in range(200)}
        assert min(delays) >= 900 and max(delays) <= 1100
