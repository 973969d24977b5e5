"""Canonical serialization and digests.

Every digest and signature in the system is computed over canonical JSON:
UTF-8 text, object keys sorted lexicographically, no insignificant
whitespace, integers in base 10, byte strings as lowercase hex. Floats are
rejected so that serialization is bit-stable across platforms.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

_HEX_RE = re.compile(r"^[0-9a-f]*$")


class CanonicalizationError(ValueError):
    """Value cannot be represented in canonical JSON."""


def _check(value: Any, path: str) -> None:
    if value is None or isinstance(value, (str, bool)):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        raise CanonicalizationError(f"float at {path} is not canonical; use integers")
    if isinstance(value, (bytes, bytearray)):
        raise CanonicalizationError(f"raw bytes at {path}; encode as lowercase hex first")
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise CanonicalizationError(f"non-string key at {path}")
            _check(v, f"{path}.{k}")
        return
    if isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _check(v, f"{path}[{i}]")
        return
    raise CanonicalizationError(f"unsupported type {type(value).__name__} at {path}")


def canonical_json(value: Any) -> bytes:
    """Serialize to canonical JSON bytes. Equal values yield identical bytes."""
    _check(value, "$")
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def canonical_digest(payload: bytes) -> bytes:
    """SHA-256 of a byte payload; the digest used everywhere in the system."""
    return hashlib.sha256(payload).digest()


def digest_hex(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def to_hex(raw: bytes) -> str:
    return raw.hex()


def from_hex(text: str, *, size: int | None = None, what: str = "value") -> bytes:
    if not isinstance(text, str) or not _HEX_RE.match(text) or len(text) % 2:
        raise CanonicalizationError(f"{what} is not lowercase hex: {text!r}")
    raw = bytes.fromhex(text)
    if size is not None and len(raw) != size:
        raise CanonicalizationError(f"{what} must be {size} bytes, got {len(raw)}")
    return raw


def is_digest_hex(text: Any) -> bool:
    return isinstance(text, str) and len(text) == 64 and bool(_HEX_RE.match(text))
