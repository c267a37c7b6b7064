"""
Shared field types for the ledger and identity models.

Byte-valued fields are carried as ``bytes`` in Python and rendered as lowercase
hex in JSON, so debug dumps stay readable and round-trip through validation.
"""

import json
from typing import Annotated, Any, NamedTuple

from pydantic import BaseModel, BeforeValidator, Field, PlainSerializer

HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)


def _bytes_from_hex(value: Any) -> Any:
    if isinstance(value, str):
        return bytes.fromhex(value)
    return value


HexBytes = Annotated[
    bytes,
    BeforeValidator(_bytes_from_hex),
    PlainSerializer(lambda value: value.hex(), return_type=str, when_used="json"),
]

# 32-byte SHA-256 digest
Hash = Annotated[HexBytes, Field(min_length=HASH_SIZE, max_length=HASH_SIZE)]

# Vehicle and node identity derived from a public key
Pseudonym = Hash

TransactionId = Hash


class Version(NamedTuple):
    """Commit position of a state write; ordered lexicographically."""

    block_number: int
    tx_index: int


def canonical_json(model: BaseModel) -> bytes:
    """Deterministic compact JSON with sorted keys, used for contract args and state values."""
    return json.dumps(
        model.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
