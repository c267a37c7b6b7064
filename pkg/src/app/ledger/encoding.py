"""
Canonical binary encoding for certificates, proposals, transactions and blocks.

Layout rules: unsigned integers are big-endian (8 bytes unless noted), byte
strings and UTF-8 strings carry a 4-byte length prefix, lists carry a 4-byte
count, optionals a 1-byte presence flag and enums a 1-byte ordinal. The
encoding is injective and strictly decodable: decoders reject trailing or
missing bytes.
"""

import struct
from typing import Callable, List, Sequence, Tuple, TypeVar

from pydantic import ValidationError

from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.common import HASH_SIZE, Version
from src.app.models.pydantic.identity import Certificate, Role
from src.app.models.pydantic.ledger import (
    Block,
    BlockHeader,
    Endorsement,
    KVRead,
    KVWrite,
    SignedProposal,
    Transaction,
    ValidityFlag,
)

T = TypeVar("T")

_ROLES = list(Role)
_FLAGS = list(ValidityFlag)


class DecodeError(EdgeChainError):
    """Raised when bytes are not a valid canonical encoding."""

    pass


class Encoder:
    """Append-only builder for canonical byte strings."""

    def __init__(self) -> None:
        self._parts: List[bytes] = []

    def u8(self, value: int) -> "Encoder":
        self._parts.append(struct.pack(">B", value))
        return self

    def u32(self, value: int) -> "Encoder":
        self._parts.append(struct.pack(">I", value))
        return self

    def u64(self, value: int) -> "Encoder":
        self._parts.append(struct.pack(">Q", value))
        return self

    def fixed(self, value: bytes, size: int = HASH_SIZE) -> "Encoder":
        if len(value) != size:
            raise ValueError(f"expected {size} bytes, got {len(value)}")
        self._parts.append(bytes(value))
        return self

    def blob(self, value: bytes) -> "Encoder":
        self.u32(len(value))
        self._parts.append(bytes(value))
        return self

    def text(self, value: str) -> "Encoder":
        return self.blob(value.encode("utf-8"))

    def items(self, values: Sequence[T], write: Callable[["Encoder", T], None]) -> "Encoder":
        self.u32(len(values))
        for value in values:
            write(self, value)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    """Cursor over a canonical byte string."""

    def __init__(self, data: bytes) -> None:
        self._data = bytes(data)
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise DecodeError(f"truncated input at offset {self._pos} (need {size} bytes)")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def fixed(self, size: int = HASH_SIZE) -> bytes:
        return self._take(size)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid UTF-8 string: {e}")

    def flag(self) -> bool:
        value = self.u8()
        if value > 1:
            raise DecodeError(f"invalid presence flag {value}")
        return value == 1

    def items(self, read: Callable[["Decoder"], T]) -> Tuple[T, ...]:
        count = self.u32()
        if count > len(self._data) - self._pos:
            raise DecodeError(f"list count {count} exceeds remaining input")
        return tuple(read(self) for _ in range(count))

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")


def _ordinal(values: list, ordinal: int, what: str):
    if ordinal >= len(values):
        raise DecodeError(f"invalid {what} ordinal {ordinal}")
    return values[ordinal]


# Certificates


def _write_certificate_body(enc: Encoder, cert: Certificate) -> None:
    enc.fixed(cert.subject).blob(cert.subject_public_key).u8(_ROLES.index(cert.role))
    enc.fixed(cert.issuer).u64(cert.valid_from).u64(cert.valid_to)


def encode_certificate_body(cert: Certificate) -> bytes:
    """Bytes covered by the issuer signature: every field except the signature."""
    enc = Encoder()
    _write_certificate_body(enc, cert)
    return enc.getvalue()


def _write_certificate(enc: Encoder, cert: Certificate) -> None:
    _write_certificate_body(enc, cert)
    enc.blob(cert.issuer_signature)


def _read_certificate(dec: Decoder) -> Certificate:
    subject = dec.fixed()
    public_key = dec.blob()
    role = _ordinal(_ROLES, dec.u8(), "role")
    issuer = dec.fixed()
    valid_from = dec.u64()
    valid_to = dec.u64()
    return Certificate(
        subject=subject,
        subject_public_key=public_key,
        role=role,
        issuer=issuer,
        issuer_signature=dec.blob(),
        valid_from=valid_from,
        valid_to=valid_to,
    )


def encode_certificate(cert: Certificate) -> bytes:
    enc = Encoder()
    _write_certificate(enc, cert)
    return enc.getvalue()


# Proposals and read/write sets


def _write_proposal_body(enc: Encoder, proposal: SignedProposal) -> None:
    enc.fixed(proposal.creator)
    _write_certificate(enc, proposal.creator_certificate)
    enc.text(proposal.contract).text(proposal.operation)
    enc.items(proposal.args, Encoder.blob)
    enc.blob(proposal.payload).u64(proposal.nonce).u64(proposal.created_at)


def encode_proposal_body(proposal: SignedProposal) -> bytes:
    """Bytes identified by the proposal id and signed by the client."""
    enc = Encoder()
    _write_proposal_body(enc, proposal)
    return enc.getvalue()


def _read_proposal(dec: Decoder) -> SignedProposal:
    creator = dec.fixed()
    certificate = _read_certificate(dec)
    contract = dec.text()
    operation = dec.text()
    args = dec.items(Decoder.blob)
    payload = dec.blob()
    nonce = dec.u64()
    created_at = dec.u64()
    return SignedProposal(
        creator=creator,
        creator_certificate=certificate,
        contract=contract,
        operation=operation,
        args=args,
        payload=payload,
        nonce=nonce,
        created_at=created_at,
        client_signature=dec.blob(),
    )


def _write_read(enc: Encoder, read: KVRead) -> None:
    enc.text(read.key)
    if read.version is None:
        enc.u8(0)
    else:
        enc.u8(1).u64(read.version.block_number).u64(read.version.tx_index)


def _read_read(dec: Decoder) -> KVRead:
    key = dec.text()
    version = Version(dec.u64(), dec.u64()) if dec.flag() else None
    return KVRead(key=key, version=version)


def _write_write(enc: Encoder, write: KVWrite) -> None:
    enc.text(write.key).blob(write.value)


def _read_write(dec: Decoder) -> KVWrite:
    return KVWrite(key=dec.text(), value=dec.blob())


def encode_rw_set(reads: Sequence[KVRead], writes: Sequence[KVWrite]) -> bytes:
    enc = Encoder()
    enc.items(reads, _write_read).items(writes, _write_write)
    return enc.getvalue()


def _write_endorsement(enc: Encoder, endorsement: Endorsement) -> None:
    enc.fixed(endorsement.peer).fixed(endorsement.proposal_hash)
    enc.fixed(endorsement.rw_set_hash).blob(endorsement.signature)


def _read_endorsement(dec: Decoder) -> Endorsement:
    return Endorsement(
        peer=dec.fixed(),
        proposal_hash=dec.fixed(),
        rw_set_hash=dec.fixed(),
        signature=dec.blob(),
    )


# Transactions


def _write_transaction_body(
    enc: Encoder,
    proposal: SignedProposal,
    read_set: Sequence[KVRead],
    write_set: Sequence[KVWrite],
    endorsements: Sequence[Endorsement],
) -> None:
    _write_proposal_body(enc, proposal)
    enc.blob(proposal.client_signature)
    enc.items(read_set, _write_read).items(write_set, _write_write)
    enc.items(endorsements, _write_endorsement)


def encode_transaction_body(
    proposal: SignedProposal,
    read_set: Sequence[KVRead],
    write_set: Sequence[KVWrite],
    endorsements: Sequence[Endorsement],
) -> bytes:
    """Every transaction field except its id; the id is the hash of these bytes."""
    enc = Encoder()
    _write_transaction_body(enc, proposal, read_set, write_set, endorsements)
    return enc.getvalue()


def _write_transaction(enc: Encoder, tx: Transaction) -> None:
    enc.fixed(tx.id)
    _write_transaction_body(enc, tx.proposal, tx.read_set, tx.write_set, tx.endorsements)


def _read_transaction(dec: Decoder) -> Transaction:
    tx_id = dec.fixed()
    proposal = _read_proposal(dec)
    read_set = dec.items(_read_read)
    write_set = dec.items(_read_write)
    endorsements = dec.items(_read_endorsement)
    return Transaction(
        id=tx_id,
        proposal=proposal,
        read_set=read_set,
        write_set=write_set,
        endorsements=endorsements,
    )


def encode_transaction(tx: Transaction) -> bytes:
    enc = Encoder()
    _write_transaction(enc, tx)
    return enc.getvalue()


# Blocks


def encode_header(header: BlockHeader) -> bytes:
    return Encoder().u64(header.number).fixed(header.previous_hash).fixed(header.data_hash).getvalue()


def encode_block(block: Block) -> bytes:
    """Header, length-framed transactions, then validity flags as trailing metadata."""
    enc = Encoder()
    enc.u64(block.header.number).fixed(block.header.previous_hash).fixed(block.header.data_hash)
    enc.items(block.transactions, lambda e, tx: e.blob(encode_transaction(tx)))
    enc.items(block.validity, lambda e, flag: e.u8(_FLAGS.index(flag)))
    return enc.getvalue()


def _decode_framed_transaction(dec: Decoder) -> Transaction:
    inner = Decoder(dec.blob())
    tx = _read_transaction(inner)
    inner.finish()
    return tx


def decode_block(data: bytes) -> Block:
    """Inverse of ``encode_block``; raises DecodeError on malformed input."""
    dec = Decoder(data)
    try:
        header = BlockHeader(number=dec.u64(), previous_hash=dec.fixed(), data_hash=dec.fixed())
        transactions = dec.items(_decode_framed_transaction)
        validity = dec.items(lambda d: _ordinal(_FLAGS, d.u8(), "validity flag"))
        dec.finish()
        return Block(header=header, transactions=transactions, validity=validity)
    except ValidationError as e:
        raise DecodeError(f"decoded block is not well-formed: {e}")


def decode_transaction(data: bytes) -> Transaction:
    dec = Decoder(data)
    try:
        tx = _read_transaction(dec)
    except ValidationError as e:
        raise DecodeError(f"decoded transaction is not well-formed: {e}")
    dec.finish()
    return tx


def transaction_spans(data: bytes) -> List[Tuple[int, int]]:
    """Byte ranges of each encoded transaction inside an encoded block."""
    dec = Decoder(data)
    dec.u64()
    dec.fixed()
    dec.fixed()
    spans: List[Tuple[int, int]] = []
    for _ in range(dec.u32()):
        size = dec.u32()
        start = dec.position
        dec.fixed(size)
        spans.append((start, start + size))
    return spans
