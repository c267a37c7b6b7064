"""
Hash-linked block chain: construction, append checks, validation and export.

Validity flags are block metadata outside the hashed header, so the commit-time
validation outcome never changes chain linkage.
"""

import json
import logging
import struct
from pathlib import Path
from typing import List, Optional, Sequence

from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.common import ZERO_HASH
from src.app.models.pydantic.ledger import Block, BlockHeader, Transaction, ValidityFlag

from .encoding import DecodeError, decode_block, encode_block
from .hashing import hash_header, merkle_root, recompute_id

logger = logging.getLogger(__name__)

LEDGER_MAGIC = b"EDGECHAIN-LEDGER\x00"


class ChainLinkError(EdgeChainError):
    """Block number or previous hash does not extend the chain."""

    pass


class DataHashError(EdgeChainError):
    """Block data hash differs from the Merkle root over its transaction ids."""

    pass


def expected_previous_hash(chain: Sequence[Block]) -> bytes:
    return hash_header(chain[-1].header) if chain else ZERO_HASH


def build_block(
    number: int,
    previous_hash: bytes,
    transactions: Sequence[Transaction],
    validity: Optional[Sequence[ValidityFlag]] = None,
) -> Block:
    txs = tuple(transactions)
    flags = tuple(validity) if validity is not None else (ValidityFlag.PENDING,) * len(txs)
    header = BlockHeader(
        number=number,
        previous_hash=previous_hash,
        data_hash=merkle_root([tx.id for tx in txs]),
    )
    return Block(header=header, transactions=txs, validity=flags)


def check_link(chain: Sequence[Block], block: Block) -> None:
    if block.header.number != len(chain):
        raise ChainLinkError(f"block number {block.header.number} does not follow height {len(chain)}")
    if block.header.previous_hash != expected_previous_hash(chain):
        raise ChainLinkError(f"block {block.header.number} previous_hash does not link")


def append_block(chain: Sequence[Block], block: Block) -> List[Block]:
    """Return ``chain`` extended by ``block`` after link and data-hash checks."""
    check_link(chain, block)
    if block.header.data_hash != merkle_root([tx.id for tx in block.transactions]):
        raise DataHashError(f"block {block.header.number} data_hash mismatch")
    return [*chain, block]


def _block_ok(block: Block, index: int, previous: Optional[Block]) -> bool:
    if block.header.number != index:
        return False
    expected = hash_header(previous.header) if previous is not None else ZERO_HASH
    if block.header.previous_hash != expected:
        return False
    if any(tx.id != recompute_id(tx) for tx in block.transactions):
        return False
    return block.header.data_hash == merkle_root([tx.id for tx in block.transactions])


def validate_chain(chain: Sequence[Block]) -> Optional[int]:
    """None when every link and data hash verifies, else the first bad index."""
    previous: Optional[Block] = None
    for index, block in enumerate(chain):
        if not _block_ok(block, index, previous):
            return index
        previous = block
    return None


def export_ledger(chain: Sequence[Block], path: str | Path) -> Path:
    """Write the magic header followed by one length-framed block per entry."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as file:
        file.write(LEDGER_MAGIC)
        for block in chain:
            encoded = encode_block(block)
            file.write(struct.pack(">I", len(encoded)))
            file.write(encoded)
    logger.info("Exported %d blocks to %s", len(chain), target)
    return target


def read_ledger_frames(path: str | Path) -> List[bytes]:
    data = Path(path).read_bytes()
    if not data.startswith(LEDGER_MAGIC):
        raise DecodeError(f"{path} is not an edgechain ledger file")
    frames: List[bytes] = []
    offset = len(LEDGER_MAGIC)
    while offset < len(data):
        if offset + 4 > len(data):
            raise DecodeError(f"truncated frame length at offset {offset}")
        (size,) = struct.unpack(">I", data[offset : offset + 4])
        offset += 4
        if offset + size > len(data):
            raise DecodeError(f"truncated frame at offset {offset}")
        frames.append(data[offset : offset + size])
        offset += size
    return frames


def import_ledger(path: str | Path) -> List[Block]:
    return [decode_block(frame) for frame in read_ledger_frames(path)]


def validate_ledger_file(path: str | Path) -> Optional[int]:
    """Like ``validate_chain`` but a frame that fails to decode is reported by index.

    A corrupted frame length makes every later frame unreadable, so the index
    of the frame where decoding first fails is returned in that case.
    """
    data = Path(path).read_bytes()
    if not data.startswith(LEDGER_MAGIC):
        raise DecodeError(f"{path} is not an edgechain ledger file")
    previous: Optional[Block] = None
    offset = len(LEDGER_MAGIC)
    index = 0
    while offset < len(data):
        if offset + 4 > len(data):
            return index
        (size,) = struct.unpack(">I", data[offset : offset + 4])
        offset += 4
        if offset + size > len(data):
            return index
        try:
            block = decode_block(data[offset : offset + size])
        except DecodeError as e:
            logger.info("Frame %d failed to decode: %s", index, e)
            return index
        if not _block_ok(block, index, previous):
            return index
        previous = block
        offset += size
        index += 1
    return None


def dump_ledger_json(chain: Sequence[Block], path: str | Path) -> Path:
    """Human-readable debug dump; bytes render as hex. Not hashed."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = [block.model_dump(mode="json") for block in chain]
    target.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return target
