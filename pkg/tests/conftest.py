"""Shared builders: deterministic keys, memberships, chains, and events."""

from __future__ import annotations

import random

import pytest

from veriledger.canonical import canonical_digest
from veriledger.chain import ChainState, build_genesis, certify, select_proposer
from veriledger.events import (
    ApplianceLogBody,
    Component,
    EventKind,
    MaintenanceBody,
    NetworkConfigBody,
    SupplyChainBody,
    SystemEventBody,
    make_event,
)
from veriledger.keys import SigningKey
from veriledger.membership import AccessPolicy, Member, Membership


def seeded_key(tag: str) -> SigningKey:
    return SigningKey.from_seed(canonical_digest(tag.encode("utf-8")))


def make_members(count: int, roles=("operator", "integrator"), prefix: str = "node") -> tuple[list[SigningKey], Membership]:
    keys = [seeded_key(f"{prefix}-{i}") for i in range(count)]
    members = [
        Member.create(k.public_bytes, f"{prefix}-{i}", roles) for i, k in enumerate(keys)
    ]
    return keys, Membership(members)


def policy_for(membership: Membership, chain_id: str = "main", read_rule: str = "all-consortium") -> AccessPolicy:
    return AccessPolicy(
        chain_id=chain_id, members=frozenset(membership.sorted_ids), read_rule=read_rule
    )


def new_chain(n: int = 4, chain_id: str = "main") -> tuple[ChainState, list[SigningKey]]:
    keys, membership = make_members(n)
    genesis = build_genesis(chain_id, membership, policy_for(membership, chain_id))
    return ChainState(genesis), keys


def keys_by_id(keys: list[SigningKey]) -> dict[str, SigningKey]:
    return {k.member_id: k for k in keys}


def random_body(rng: random.Random, submitter_id: str):
    kind = rng.choice(
        [
            EventKind.SUPPLY_CHAIN,
            EventKind.MAINTENANCE,
            EventKind.APPLIANCE_LOG,
            EventKind.NETWORK_CONFIG,
            EventKind.SYSTEM_EVENT,
        ]
    )
    if kind == EventKind.SUPPLY_CHAIN:
        components = tuple(
            Component(
                f"comp-{rng.randrange(1000)}",
                f"{rng.randrange(10)}.{rng.randrange(10)}",
                rng.choice(["acme", "initech", "globex"]),
                rng.randbytes(32),
            )
            for _ in range(rng.randint(1, 3))
        )
        return kind, SupplyChainBody(f"dev-{rng.randrange(100)}", submitter_id, components)
    if kind == EventKind.MAINTENANCE:
        return kind, MaintenanceBody(
            f"dev-{rng.randrange(100)}",
            rng.choice(["update", "repair"]),
            submitter_id,
            "scheduled work",
            "1.0",
            "1.1",
        )
    if kind == EventKind.APPLIANCE_LOG:
        payload = f"log-{rng.randrange(10**6)}"
        return kind, ApplianceLogBody(
            f"fw-{rng.randrange(10)}",
            rng.choice(["firewall", "ids", "auth"]),
            rng.choice(["info", "warn", "alert"]),
            canonical_digest(payload.encode("utf-8")),
            payload,
        )
    if kind == EventKind.NETWORK_CONFIG:
        text = f"route {rng.randrange(255)}.0.0.0/8 via gw{rng.randrange(9)}"
        return kind, NetworkConfigBody(
            rng.choice(["routing", "slice"]), canonical_digest(text.encode("utf-8")), text
        )
    return kind, SystemEventBody(
        rng.choice(["ue_registration", "session_creation", "facility_error"]),
        f"subject-{rng.randrange(100)}",
        "observed by test",
    )


def random_event(rng: random.Random, keys: list[SigningKey], submitted_at: int):
    key = rng.choice(keys)
    kind, body = random_body(rng, key.member_id)
    return make_event(kind, body, key, submitted_at)


def grow_chain(state: ChainState, keys: list[SigningKey], blocks: int, rng: random.Random, events_per_block: int = 1) -> None:
    """Append quorum-certified blocks of random events."""
    by_id = keys_by_id(keys)
    for _ in range(blocks):
        height = state.height + 1
        events = [
            random_event(rng, keys, submitted_at=height * 1000 + j)
            for j in range(events_per_block)
        ]
        proposer = select_proposer(height, state.membership)
        header = state.next_header(events, proposer, timestamp=height * 1000)
        digest = header.digest()
        signer_ids = rng.sample(state.membership.sorted_ids, state.membership.quorum)
        certs = [certify(digest, by_id[m]) for m in signer_ids]
        state.append_block(events, proposer, certs, timestamp=height * 1000)


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
