import hashlib
import random
import struct

import pytest

from src.app.ledger.chain import (
    LEDGER_MAGIC,
    ChainLinkError,
    DataHashError,
    append_block,
    build_block,
    dump_ledger_json,
    expected_previous_hash,
    export_ledger,
    import_ledger,
    read_ledger_frames,
    validate_chain,
    validate_ledger_file,
)
from src.app.ledger.encoding import (
    Decoder,
    Encoder,
    DecodeError,
    decode_block,
    decode_transaction,
    encode_block,
    encode_transaction,
    transaction_spans,
)
from src.app.ledger.hashing import (
    hash_header,
    merkle_proof,
    merkle_root,
    recompute_id,
    verify_merkle_proof,
)
from src.app.ledger.state import WorldState, apply_block, replay
from src.app.models.pydantic.common import ZERO_HASH, Version
from src.app.models.pydantic.ledger import BlockHeader, KVWrite, ValidityFlag

from tests.factories import raw_transaction


def oracle_root(leaves):
    level = [hashlib.sha256(b"\x00" + leaf).digest() for leaf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hashlib.sha256(b"\x01" + level[i] + level[i + 1]).digest() for i in range(0, len(level), 2)]
    return level[0]


def make_chain(transactions, per_block=3):
    chain = []
    for start in range(0, len(transactions), per_block):
        txs = transactions[start : start + per_block]
        block = build_block(len(chain), expected_previous_hash(chain), txs, [ValidityFlag.VALID] * len(txs))
        chain = append_block(chain, block)
    return chain


def test_merkle_root_matches_oracle():
    assert merkle_root([]) == ZERO_HASH
    for count in (1, 2, 3, 5, 8, 13):
        leaves = [bytes([i]) * 32 for i in range(count)]
        assert merkle_root(leaves) == oracle_root(leaves)


def test_merkle_proofs_verify_for_every_leaf():
    leaves = [f"tx-{i}".encode() for i in range(7)]
    root = merkle_root(leaves)
    for index, leaf in enumerate(leaves):
        proof = merkle_proof(leaves, index)
        assert verify_merkle_proof(leaf, proof, root, index)
        assert not verify_merkle_proof(b"other", proof, root, index)
    assert not verify_merkle_proof(leaves[0], merkle_proof(leaves, 0), root, 1)
    with pytest.raises(IndexError):
        merkle_proof(leaves, 7)


def test_header_hash_covers_number_and_both_hashes():
    header = BlockHeader(number=7, previous_hash=b"\x11" * 32, data_hash=b"\x22" * 32)
    expected = hashlib.sha256(struct.pack(">Q", 7) + b"\x11" * 32 + b"\x22" * 32).digest()
    assert hash_header(header) == expected


def test_block_encoding_is_strict(make_transactions):
    txs = make_transactions(3)
    block = build_block(0, ZERO_HASH, txs, [ValidityFlag.VALID, ValidityFlag.CONFLICT_INVALID, ValidityFlag.VALID])
    data = encode_block(block)
    assert decode_block(data) == block
    assert decode_transaction(encode_transaction(txs[1])) == txs[1]
    with pytest.raises(DecodeError):
        decode_block(data + b"\x00")
    with pytest.raises(DecodeError):
        decode_block(data[:-1])


def test_decoder_position_tracks_consumed_bytes(make_transactions):
    data = Encoder().u64(7).blob(b"abc").text("zone").getvalue()
    dec = Decoder(data)
    assert dec.position == 0
    dec.u64()
    assert dec.position == 8
    assert dec.blob() == b"abc"
    assert dec.position == 15
    dec.text()
    assert dec.position == len(data)

    block = build_block(0, ZERO_HASH, make_transactions(2), [ValidityFlag.VALID] * 2)
    encoded = encode_block(block)
    spans = transaction_spans(encoded)
    assert [decode_transaction(encoded[start:end]) for start, end in spans] == list(block.transactions)


def test_transaction_id_recomputes(make_transactions):
    tx = make_transactions(1)[0]
    assert recompute_id(tx) == tx.id
    forged = tx.model_copy(update={"write_set": (KVWrite(key="k", value=b"v"),)})
    assert recompute_id(forged) != tx.id


def test_append_rejects_bad_links(make_transactions):
    txs = make_transactions(4)
    chain = make_chain(txs[:3])
    with pytest.raises(ChainLinkError):
        append_block(chain, build_block(5, expected_previous_hash(chain), txs[3:]))
    with pytest.raises(ChainLinkError):
        append_block(chain, build_block(1, b"\x00" * 32, txs[3:]))
    block = build_block(1, expected_previous_hash(chain), txs[3:])
    broken = block.model_copy(update={"header": block.header.model_copy(update={"data_hash": b"\x01" * 32})})
    with pytest.raises(DataHashError):
        append_block(chain, broken)


def test_first_block_links_to_zero_hash(make_transactions):
    chain = make_chain(make_transactions(2))
    assert chain[0].header.number == 0
    assert chain[0].header.previous_hash == ZERO_HASH
    assert validate_chain(chain) is None


def test_validate_chain_reports_first_bad_index(make_transactions):
    chain = make_chain(make_transactions(9))
    tx = chain[1].transactions[0].model_copy(update={"write_set": (KVWrite(key="x", value=b"y"),)})
    bad = chain[1].model_copy(update={"transactions": (tx,) + chain[1].transactions[1:]})
    assert validate_chain([chain[0], bad, chain[2]]) == 1


def test_export_import_and_json_dump(tmp_path, make_transactions):
    chain = make_chain(make_transactions(5), per_block=2)
    path = export_ledger(chain, tmp_path / "ledger-peer-0.bin")
    assert path.read_bytes().startswith(LEDGER_MAGIC)
    assert import_ledger(path) == chain
    assert validate_ledger_file(path) is None
    dump = dump_ledger_json(chain, tmp_path / "ledger-peer-0.json")
    assert chain[0].transactions[0].id.hex() in dump.read_text()


def test_validate_ledger_file_rejects_foreign_files(tmp_path):
    path = tmp_path / "not-a-ledger.bin"
    path.write_bytes(b"hello")
    with pytest.raises(DecodeError):
        validate_ledger_file(path)


def test_any_flipped_transaction_byte_is_detected(tmp_path, make_transactions):
    chain = make_chain(make_transactions(12), per_block=3)
    path = export_ledger(chain, tmp_path / "ledger.bin")
    original = path.read_bytes()
    frames = read_ledger_frames(path)
    offsets = []
    offset = len(LEDGER_MAGIC)
    for frame in frames:
        offsets.append(offset + 4)
        offset += 4 + len(frame)

    rng = random.Random(20240601)
    for _ in range(100):
        block_index = rng.randrange(len(frames))
        start, end = rng.choice(transaction_spans(frames[block_index]))
        position = offsets[block_index] + rng.randrange(start, end)
        mutated = bytearray(original)
        mutated[position] ^= rng.randrange(1, 256)
        target = tmp_path / "mutated.bin"
        target.write_bytes(bytes(mutated))
        assert validate_ledger_file(target) == block_index


def test_apply_block_writes_only_valid_transactions(bundle):
    vehicle, endorsers = bundle.vehicles[0], bundle.peers[:1]
    first = raw_transaction(vehicle, endorsers, writes=[KVWrite(key="a", value=b"1")], nonce=1)
    second = raw_transaction(vehicle, endorsers, writes=[KVWrite(key="a", value=b"2")], nonce=2)
    third = raw_transaction(vehicle, endorsers, writes=[KVWrite(key="b", value=b"3")], nonce=3)
    block = build_block(
        0, ZERO_HASH, [first, second, third], [ValidityFlag.VALID, ValidityFlag.CONFLICT_INVALID, ValidityFlag.VALID]
    )
    state = apply_block(WorldState(), block)
    assert state.value("a") == b"1"
    assert state.version("a") == Version(0, 0)
    assert state.version("b") == Version(0, 2)
    assert replay([block]) == state


def test_state_hash_is_independent_of_write_order():
    writes = [("b", b"2", Version(0, 1)), ("a", b"1", Version(0, 0)), ("c", b"3", Version(1, 0))]
    forward = WorldState().with_writes(writes)
    backward = WorldState().with_writes(list(reversed(writes)))
    assert forward.state_hash() == backward.state_hash()
    assert forward.keys() == ["a", "b", "c"]
    assert [key for key, _ in forward.scan("b")] == ["b"]
    assert WorldState().with_writes(writes[:2]).state_hash() != forward.state_hash()
