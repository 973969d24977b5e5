"""Domain error types shared across the package."""

from __future__ import annotations


class LedgerError(Exception):
    """Base class for all domain errors."""


class ConfigurationError(LedgerError):
    pass


class QuorumNotMet(LedgerError):
    pass


class WrongProposer(LedgerError):
    pass


class InvalidEvent(LedgerError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"event[{index}]: {reason}")
        self.index = index
        self.reason = reason


class UnknownKind(LedgerError):
    pass


class UnknownChain(LedgerError):
    pass


class UnknownSatellite(LedgerError):
    pass


class UnknownMember(LedgerError):
    pass


class CreatorNotMember(LedgerError):
    pass


class EmptyMembership(LedgerError):
    pass


class NotAMember(LedgerError):
    pass


class EmptyArtifactSet(LedgerError):
    pass


class UnreadableArtifact(LedgerError):
    def __init__(self, path: str, cause: str = ""):
        super().__init__(f"unreadable artifact {path}: {cause}" if cause else f"unreadable artifact {path}")
        self.path = path


class CounterRegression(LedgerError):
    pass


class TransportError(LedgerError):
    """Peer or node unreachable, timed out, or returned garbage."""


class StorageError(LedgerError):
    pass
