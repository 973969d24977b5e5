"""Multi-chain ledger: satellites, access control, anchoring."""

import pytest
from hypothesis import given, settings, strategies as st

from veriledger.chain import certify, select_proposer
from veriledger.errors import (
    CreatorNotMember,
    EmptyMembership,
    NotAMember,
    UnknownChain,
    UnknownMember,
    UnknownSatellite,
)
from veriledger.events import EventKind
from veriledger.ledger import Ledger
from veriledger.membership import Member, Membership

from conftest import keys_by_id, make_members, seeded_key


def build_consortium():
    node_keys, _ = make_members(4)
    mfr_key = seeded_key("mfr")
    agent_key = seeded_key("agent")
    auditor_key = seeded_key("auditor")
    members = [
        Member.create(k.public_bytes, f"node-{i}", ("operator", "integrator"))
        for i, k in enumerate(node_keys)
    ]
    members += [
        Member.create(mfr_key.public_bytes, "mfr", ("manufacturer",)),
        Member.create(agent_key.public_bytes, "agent", ("device-agent",)),
        Member.create(auditor_key.public_bytes, "auditor", ("auditor",)),
    ]
    directory = Membership(members)
    validators = Membership(members[:4])
    return node_keys, mfr_key, agent_key, auditor_key, directory, validators


@pytest.fixture
def consortium():
    return build_consortium()


def test_main_chain_access_rules(consortium):
    node_keys, mfr, agent, auditor, directory, validators = consortium
    ledger = Ledger(directory, validators)
    node = node_keys[0].member_id
    assert ledger.check_access(node, "main", "read").allowed
    assert ledger.check_access(auditor.member_id, "main", "read").allowed
    assert ledger.check_access(mfr.member_id, "main", "write").allowed
    denied = ledger.check_access(auditor.member_id, "main", "write")
    assert not denied.allowed and denied.reason == "role-not-authorized"
    unknown = ledger.check_access("f" * 64, "main", "read")
    assert not unknown.allowed and unknown.reason == "unknown-identity"
    with pytest.raises(UnknownChain):
        ledger.check_access(node, "nope", "read")


def test_satellite_creation_and_membership_rules(consortium):
    node_keys, mfr, *_, directory, validators = consortium
    ledger = Ledger(directory, validators)
    a, b = node_keys[0].member_id, node_keys[1].member_id
    satellite = ledger.create_satellite_chain(a, [a, b])
    assert satellite.policy.read_rule == "members-only"
    assert satellite.policy.members == {a, b}
    assert satellite.chain.blocks[0].config.parent_anchor == ledger.main.head_digest

    outsider = node_keys[2].member_id
    with pytest.raises(CreatorNotMember):
        ledger.create_satellite_chain(outsider, [a, b])
    with pytest.raises(EmptyMembership):
        ledger.create_satellite_chain(a, [])
    with pytest.raises(UnknownMember):
        ledger.create_satellite_chain(a, [a, "9" * 64])


def test_satellite_access_denied_for_non_members(consortium):
    node_keys, mfr, *_, directory, validators = consortium
    ledger = Ledger(directory, validators)
    a, b, c = (node_keys[i].member_id for i in range(3))
    satellite = ledger.create_satellite_chain(a, [a, b])
    for action in ("read", "write"):
        verdict = ledger.check_access(c, satellite.chain_id, action)
        assert not verdict.allowed and verdict.reason == "not-a-member"
        assert ledger.check_access(a, satellite.chain_id, action).allowed


@settings(max_examples=40, deadline=None)
@given(size=st.integers(min_value=1, max_value=4), data=st.data())
def test_access_control_soundness_generated_policies(size, data):
    """No identity outside a satellite's member set is ever allowed."""
    node_keys, mfr, agent, auditor, directory, validators = build_consortium()
    ledger = Ledger(directory, validators)
    all_ids = directory.sorted_ids
    node_ids = validators.sorted_ids
    members = data.draw(
        st.lists(st.sampled_from(node_ids), min_size=size, max_size=size, unique=True)
    )
    satellite = ledger.create_satellite_chain(members[0], members)
    for identity in all_ids + ["0" * 64]:
        for action in ("read", "write"):
            verdict = ledger.check_access(identity, satellite.chain_id, action)
            if identity in satellite.policy.members:
                assert verdict.allowed
            else:
                assert not verdict.allowed


def _commit_pending(ledger, chain_id, keys, timestamp):
    chain = ledger.chain(chain_id)
    events = list(chain.pending_events)
    proposer = select_proposer(chain.height + 1, chain.membership)
    header = chain.next_header(events, proposer, timestamp)
    by_id = keys_by_id(keys)
    certs = [
        certify(header.digest(), by_id[m])
        for m in chain.membership.sorted_ids[: chain.membership.quorum]
    ]
    return ledger.append_block(chain_id, events, proposer, certs, timestamp)


def test_anchor_event_and_consistency(consortium):
    node_keys, *_, directory, validators = consortium
    ledger = Ledger(directory, validators)
    a, b = node_keys[0].member_id, node_keys[1].member_id
    satellite = ledger.create_satellite_chain(a, [a, b])

    event = ledger.anchor_satellite(satellite.chain_id, node_keys[0], now=5000)
    assert event.kind == EventKind.ANCHOR
    assert event.body.satellite_head_digest == satellite.chain.head_digest
    assert event.body.satellite_height == 0

    with pytest.raises(UnknownSatellite):
        ledger.anchor_satellite("sat-none", node_keys[0], now=1)
    with pytest.raises(NotAMember):
        ledger.anchor_satellite(satellite.chain_id, node_keys[2], now=1)

    # Repeated anchor of the same head is a heartbeat, not an error.
    again = ledger.anchor_satellite(satellite.chain_id, node_keys[0], now=6000)
    assert again.body.satellite_head_digest == event.body.satellite_head_digest
    assert again.event_id != event.event_id

    _commit_pending(ledger, "main", node_keys, timestamp=7000)
    assert ledger.verify_anchors() == []


def test_anchor_mismatch_reported(consortium):
    node_keys, *_, directory, validators = consortium
    ledger = Ledger(directory, validators)
    a, b = node_keys[0].member_id, node_keys[1].member_id
    satellite = ledger.create_satellite_chain(a, [a, b])
    ledger.anchor_satellite(
        satellite.chain_id, node_keys[0], now=5000, satellite_head_digest=b"\x01" * 32
    )
    _commit_pending(ledger, "main", node_keys, timestamp=6000)
    problems = ledger.verify_anchors()
    assert len(problems) == 1 and "mismatch" in problems[0]


def test_ledger_persistence_round_trip(tmp_path, consortium):
    node_keys, *_, directory, validators = consortium
    ledger = Ledger(directory, validators, data_dir=tmp_path)
    a, b = node_keys[0].member_id, node_keys[1].member_id
    satellite = ledger.create_satellite_chain(a, [a, b])
    ledger.anchor_satellite(satellite.chain_id, node_keys[0], now=100)
    _commit_pending(ledger, "main", node_keys, timestamp=200)
    main_head = ledger.main.head_digest
    ledger.close()

    reopened = Ledger(directory, validators, data_dir=tmp_path)
    reopened.restore_satellites()
    assert reopened.main.head_digest == main_head
    assert satellite.chain_id in reopened.satellites
    assert reopened.verify_anchors() == []
    reopened.close()
