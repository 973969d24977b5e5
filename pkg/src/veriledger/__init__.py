"""veriledger: consortium security-event ledger with device integrity
agents, quorum-certified chains, and an on-chain audit engine."""

__version__ = "0.1.0"

from .canonical import canonical_digest, canonical_json
from .chain import (
    Block,
    BlockHeader,
    Certificate,
    ChainState,
    ChainVerdict,
    build_genesis,
    select_proposer,
    validate_quorum,
    verify_chain,
)
from .events import EventKind, EventRecord, make_event, parse_event, validate_event
from .keys import SigningKey, VerifyKey
from .ledger import Access, Ledger, SatelliteChain
from .membership import AccessPolicy, Member, Membership, quorum_size

__all__ = [
    "Access",
    "AccessPolicy",
    "Block",
    "BlockHeader",
    "Certificate",
    "ChainState",
    "ChainVerdict",
    "EventKind",
    "EventRecord",
    "Ledger",
    "Member",
    "Membership",
    "SatelliteChain",
    "SigningKey",
    "VerifyKey",
    "build_genesis",
    "canonical_digest",
    "canonical_json",
    "make_event",
    "parse_event",
    "quorum_size",
    "select_proposer",
    "validate_event",
    "validate_quorum",
    "verify_chain",
]
