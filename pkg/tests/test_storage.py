"""Append-only log durability and recovery."""

from veriledger.storage import AppendLog, ChainStore, VoteStore

from conftest import grow_chain, new_chain


def test_append_and_recover_round_trip(tmp_path):
    log = AppendLog(tmp_path / "x.log")
    log.append(b"one")
    log.append(b"two" * 100)
    log.close()
    again = AppendLog(tmp_path / "x.log")
    assert again.recover() == [b"one", b"two" * 100]


def test_trailing_partial_record_truncated(tmp_path):
    log = AppendLog(tmp_path / "x.log")
    log.append(b"complete")
    log.close()
    path = tmp_path / "x.log"
    good_size = path.stat().st_size
    with open(path, "ab") as fh:
        fh.write(b"\x00\x00\x00\x20partial")  # length says 32, only 7 present
    again = AppendLog(path)
    assert again.recover() == [b"complete"]
    assert path.stat().st_size == good_size
    # Appending after recovery continues cleanly.
    again.append(b"next")
    again.close()
    final = AppendLog(path)
    assert final.recover() == [b"complete", b"next"]


def test_chain_store_round_trip(tmp_path, rng):
    state, keys = new_chain(4)
    grow_chain(state, keys, 5, rng)
    store = ChainStore(tmp_path, "main")
    for block in state.blocks:
        store.append_block(block)
    store.close()

    again = ChainStore(tmp_path, "main")
    blocks, verdict = again.load_and_verify()
    again.close()
    assert verdict.valid
    assert [b.digest() for b in blocks] == [b.digest() for b in state.blocks]


def test_chain_store_rejects_garbage_record(tmp_path, rng):
    state, keys = new_chain(2)
    grow_chain(state, keys, 3, rng)
    store = ChainStore(tmp_path, "main")
    for block in state.blocks:
        store.append_block(block)
    store.log.append(b"{not json")
    store.close()

    again = ChainStore(tmp_path, "main")
    blocks, verdict = again.load_and_verify()
    again.close()
    assert len(blocks) == 4
    assert not verdict.valid
    assert (verdict.height, verdict.reason) == (4, "digest-mismatch")


def test_non_canonical_record_rejected(tmp_path, rng):
    """A record that parses to the same block but is not byte-canonical
    (renamed key absorbed by parsing) must still be flagged."""
    state, keys = new_chain(2)
    grow_chain(state, keys, 3, rng)
    store = ChainStore(tmp_path, "main")
    for block in state.blocks:
        store.append_block(block)
    store.close()

    path = tmp_path / "chains" / "main.log"
    blob = path.read_bytes()
    assert b'"config":null' in blob
    mutated = blob.replace(b'"config":null', b'"konfig":null', 1)
    assert len(mutated) == len(blob)
    path.write_bytes(mutated)

    again = ChainStore(tmp_path, "main")
    _, verdict = again.load_and_verify()
    again.close()
    assert not verdict.valid
    assert verdict.reason == "digest-mismatch"


def test_vote_store_survives_restart(tmp_path):
    store = VoteStore(tmp_path, "main")
    store.record(1, "ab" * 32, {"member_id": "m", "signature": "00" * 64}, {"p": 1})
    store.record(2, "cd" * 32, {"member_id": "m", "signature": "11" * 64})
    store.close()

    again = VoteStore(tmp_path, "main")
    assert again.voted_digest(1) == "ab" * 32
    assert again.voted_digest(2) == "cd" * 32
    assert again.voted_digest(3) is None
    assert again.proposal_at(1) == {"p": 1}
    assert again.proposal_at(2) is None
    again.close()
