"""Consortium members, chain membership sets, and access policies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .canonical import CanonicalizationError, from_hex, to_hex
from .errors import ConfigurationError
from .keys import PUBLIC_KEY_SIZE, VerifyKey, member_id_of

ROLES = frozenset({"manufacturer", "operator", "integrator", "auditor", "device-agent"})

# Roles allowed to write events to the main chain; auditors are read-only.
WRITER_ROLES = frozenset({"manufacturer", "operator", "integrator", "device-agent"})

READ_RULES = ("members-only", "all-consortium")


def quorum_size(n: int) -> int:
    """Certificates required to commit a block over n members: floor(2n/3)+1."""
    return (2 * n) // 3 + 1


@dataclass(frozen=True)
class Member:
    member_id: str
    public_key: bytes
    display_name: str
    roles: frozenset[str]

    def __post_init__(self):
        if len(self.public_key) != PUBLIC_KEY_SIZE:
            raise ConfigurationError("public key must be 32 bytes")
        if self.member_id != member_id_of(self.public_key):
            raise ConfigurationError(
                f"member_id {self.member_id} does not match its public key"
            )
        bad = self.roles - ROLES
        if bad:
            raise ConfigurationError(f"unknown roles: {sorted(bad)}")

    @classmethod
    def create(cls, public_key: bytes, display_name: str, roles: Iterable[str]) -> "Member":
        return cls(member_id_of(public_key), public_key, display_name, frozenset(roles))

    def to_wire(self) -> dict:
        return {
            "display_name": self.display_name,
            "member_id": self.member_id,
            "public_key": to_hex(self.public_key),
            "roles": sorted(self.roles),
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "Member":
        try:
            return cls(
                member_id=data["member_id"],
                public_key=from_hex(data["public_key"], size=PUBLIC_KEY_SIZE, what="public_key"),
                display_name=data["display_name"],
                roles=frozenset(data["roles"]),
            )
        except (KeyError, TypeError, CanonicalizationError) as e:
            raise ConfigurationError(f"malformed member record: {e}") from e


class Membership:
    """An ordered, unique set of members with cached verification keys.

    Used both for chain validator sets (proposer selection, quorum) and for
    the consortium directory (event submitters, API identities).
    """

    def __init__(self, members: Iterable[Member]):
        self._by_id: dict[str, Member] = {}
        for m in members:
            if m.member_id in self._by_id:
                raise ConfigurationError(f"duplicate member {m.member_id}")
            self._by_id[m.member_id] = m
        self._sorted_ids = sorted(self._by_id)
        self._verify_keys = {mid: VerifyKey(m.public_key) for mid, m in self._by_id.items()}

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, member_id: str) -> bool:
        return member_id in self._by_id

    def __iter__(self):
        return (self._by_id[mid] for mid in self._sorted_ids)

    def get(self, member_id: str) -> Member | None:
        return self._by_id.get(member_id)

    def verify_key(self, member_id: str) -> VerifyKey | None:
        return self._verify_keys.get(member_id)

    @property
    def sorted_ids(self) -> list[str]:
        return list(self._sorted_ids)

    @property
    def quorum(self) -> int:
        return quorum_size(len(self._by_id))

    def to_wire(self) -> list[dict]:
        return [self._by_id[mid].to_wire() for mid in self._sorted_ids]

    @classmethod
    def from_wire(cls, data: Iterable[Mapping]) -> "Membership":
        return cls(Member.from_wire(d) for d in data)


@dataclass(frozen=True)
class AccessPolicy:
    chain_id: str
    members: frozenset[str]
    read_rule: str
    write_rule: str = "members-only"

    def __post_init__(self):
        if not self.members:
            raise ConfigurationError("policy members must be non-empty")
        if self.read_rule not in READ_RULES:
            raise ConfigurationError(f"unknown read_rule {self.read_rule}")
        if self.write_rule != "members-only":
            raise ConfigurationError("write_rule is always members-only")

    def to_wire(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "members": sorted(self.members),
            "read_rule": self.read_rule,
            "write_rule": self.write_rule,
        }

    @classmethod
    def from_wire(cls, data: Mapping) -> "AccessPolicy":
        try:
            return cls(
                chain_id=data["chain_id"],
                members=frozenset(data["members"]),
                read_rule=data["read_rule"],
                write_rule=data.get("write_rule", "members-only"),
            )
        except KeyError as e:
            raise ConfigurationError(f"malformed policy: missing {e}") from e
