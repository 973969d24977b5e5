"""Members, quorum arithmetic, and access policies."""

import pytest

from veriledger.errors import ConfigurationError
from veriledger.keys import SigningKey, member_id_of
from veriledger.membership import AccessPolicy, Member, Membership, quorum_size

from conftest import make_members, seeded_key


@pytest.mark.parametrize(
    "n,expected",
    [(1, 1), (2, 2), (3, 3), (4, 3), (5, 4), (6, 5), (7, 5), (10, 7), (13, 9)],
)
def test_quorum_is_two_thirds_plus_one(n, expected):
    assert quorum_size(n) == (2 * n) // 3 + 1 == expected


def test_member_id_is_digest_of_public_key():
    key = seeded_key("someone")
    member = Member.create(key.public_bytes, "someone", ["operator"])
    assert member.member_id == member_id_of(key.public_bytes)
    assert len(member.member_id) == 64
    assert member.member_id == member.member_id.lower()


def test_member_rejects_mismatched_id():
    key = seeded_key("a")
    with pytest.raises(ConfigurationError):
        Member("0" * 64, key.public_bytes, "a", frozenset({"operator"}))


def test_member_rejects_unknown_role():
    key = seeded_key("a")
    with pytest.raises(ConfigurationError):
        Member.create(key.public_bytes, "a", ["superuser"])


def test_membership_rejects_duplicates():
    key = seeded_key("a")
    m = Member.create(key.public_bytes, "a", ["operator"])
    with pytest.raises(ConfigurationError):
        Membership([m, m])


def test_membership_wire_round_trip():
    _, membership = make_members(3)
    again = Membership.from_wire(membership.to_wire())
    assert again.sorted_ids == membership.sorted_ids
    assert [m.to_wire() for m in again] == [m.to_wire() for m in membership]


def test_signing_key_round_trip():
    key = SigningKey.generate()
    again = SigningKey.from_hex(key.to_hex())
    assert again.member_id == key.member_id
    sig = again.sign(b"hello")
    assert key.verify_key.verify(sig, b"hello")
    assert not key.verify_key.verify(sig, b"tampered")


def test_policy_satellite_requires_members_only_read():
    _, membership = make_members(2)
    policy = AccessPolicy("sat-x", frozenset(membership.sorted_ids), "members-only")
    assert policy.read_rule == "members-only"
    with pytest.raises(ConfigurationError):
        AccessPolicy("sat-x", frozenset(), "members-only")
    with pytest.raises(ConfigurationError):
        AccessPolicy("sat-x", frozenset(membership.sorted_ids), "members-only", write_rule="anyone")
