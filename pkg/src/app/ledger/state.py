"""
Versioned key-value world state.

Every entry is tagged with the ``Version`` (block number, transaction index)
that wrote it. ``WorldState`` values are immutable; ``apply_block`` returns a
new state.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from src.app.models.pydantic.common import Version
from src.app.models.pydantic.ledger import Block, ValidityFlag

from .encoding import Encoder
from .hashing import sha256


@dataclass(frozen=True)
class StateEntry:
    value: bytes
    version: Version


class WorldState:
    """Read-only view of committed state; also the contract state view."""

    def __init__(self, entries: Optional[Mapping[str, StateEntry]] = None) -> None:
        self._entries: Dict[str, StateEntry] = dict(entries or {})

    def get(self, key: str) -> Optional[StateEntry]:
        return self._entries.get(key)

    def value(self, key: str) -> Optional[bytes]:
        entry = self._entries.get(key)
        return entry.value if entry else None

    def version(self, key: str) -> Optional[Version]:
        entry = self._entries.get(key)
        return entry.version if entry else None

    def scan(self, prefix: str) -> List[Tuple[str, StateEntry]]:
        """Entries whose key starts with ``prefix``, sorted by key."""
        return sorted((k, v) for k, v in self._entries.items() if k.startswith(prefix))

    def keys(self) -> List[str]:
        return sorted(self._entries)

    def items(self) -> Iterator[Tuple[str, StateEntry]]:
        for key in sorted(self._entries):
            yield key, self._entries[key]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WorldState) and self._entries == other._entries

    def with_writes(self, writes: Iterable[Tuple[str, bytes, Version]]) -> "WorldState":
        entries = dict(self._entries)
        for key, value, version in writes:
            entries[key] = StateEntry(value=value, version=version)
        return WorldState(entries)

    def encode(self) -> bytes:
        enc = Encoder()
        enc.u32(len(self._entries))
        for key, entry in self.items():
            enc.text(key).blob(entry.value)
            enc.u64(entry.version.block_number).u64(entry.version.tx_index)
        return enc.getvalue()

    def state_hash(self) -> bytes:
        """SHA-256 over the sorted canonical entries."""
        return sha256(self.encode())


def apply_block(state: WorldState, block: Block) -> WorldState:
    """Apply the write sets of valid transactions in order; invalid ones change nothing."""
    writes = [
        (write.key, write.value, Version(block.number, index))
        for index, (tx, flag) in enumerate(zip(block.transactions, block.validity))
        if flag == ValidityFlag.VALID
        for write in tx.write_set
    ]
    if not writes:
        return state
    return state.with_writes(writes)


def replay(blocks: Iterable[Block]) -> WorldState:
    state = WorldState()
    for block in blocks:
        state = apply_block(state, block)
    return state
