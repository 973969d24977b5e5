"""Canonical JSON and digest rules."""

import hashlib

import pytest
from hypothesis import given, strategies as st

from veriledger.canonical import (
    CanonicalizationError,
    canonical_digest,
    canonical_json,
    from_hex,
)

# FIPS 180 SHA-256 vectors, cross-checked against hashlib as the oracle.
SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
SHA256_ABC = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_digest_empty_input_matches_reference_vector():
    assert hashlib.sha256(b"").hexdigest() == SHA256_EMPTY
    assert canonical_digest(b"").hex() == SHA256_EMPTY


def test_digest_abc_matches_reference_vector():
    assert hashlib.sha256(b"abc").hexdigest() == SHA256_ABC
    assert canonical_digest(b"abc").hex() == SHA256_ABC


def test_digest_deterministic():
    payload = b"the same payload"
    assert canonical_digest(payload) == canonical_digest(payload)


def test_canonical_json_sorts_keys_and_strips_whitespace():
    assert canonical_json({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'


def test_canonical_json_utf8_not_escaped():
    assert canonical_json({"name": "Müller"}) == '{"name":"Müller"}'.encode("utf-8")


@pytest.mark.parametrize("bad", [1.5, b"raw", {1: "x"}, {"x": object()}])
def test_canonical_json_rejects_non_canonical_values(bad):
    with pytest.raises(CanonicalizationError):
        canonical_json({"v": bad} if not isinstance(bad, dict) else bad)


def test_from_hex_validates_size_and_charset():
    assert from_hex("00ff") == b"\x00\xff"
    with pytest.raises(CanonicalizationError):
        from_hex("00FF")
    with pytest.raises(CanonicalizationError):
        from_hex("0g")
    with pytest.raises(CanonicalizationError):
        from_hex("00", size=32)


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-(2**53), 2**53) | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_canonical_json_equal_values_equal_bytes(value):
    import json

    first = canonical_json(value)
    # Round-tripping through a parser must not change the canonical form.
    assert canonical_json(json.loads(first.decode("utf-8"))) == first
