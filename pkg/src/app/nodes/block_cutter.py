"""
Deterministic block cutting over the Raft-committed entry stream.

Every orderer feeds the same committed entries through its own cutter, so
every orderer derives the same blocks. Envelopes fill the pending batch
greedily; a batch is cut when it reaches ``max_message_count``, when the next
envelope would push it past ``max_bytes``, or when a ``CutMarker`` for the
current block number is committed. Markers for an empty batch or a stale
block number are ignored, so no empty blocks are produced.
"""

import logging
from typing import List, Optional, Sequence, Tuple

from src.app.ledger.chain import build_block, expected_previous_hash
from src.app.models.pydantic.ledger import Block
from src.app.models.pydantic.ordering import BlockCutPolicy, CutMarker, Envelope, LogEntry

logger = logging.getLogger(__name__)


class BlockCutter:
    """Batch state plus the chain of blocks cut so far."""

    def __init__(self, policy: BlockCutPolicy) -> None:
        self.policy = policy
        self.pending: List[Envelope] = []
        self.pending_bytes = 0
        self.blocks: List[Block] = []

    @property
    def next_number(self) -> int:
        return len(self.blocks)

    def _cut(self) -> Block:
        block = build_block(
            self.next_number,
            expected_previous_hash(self.blocks),
            [envelope.transaction for envelope in self.pending],
        )
        self.blocks.append(block)
        self.pending = []
        self.pending_bytes = 0
        logger.debug("Cut block %d with %d transactions", block.number, len(block.transactions))
        return block

    def feed(self, item: Envelope | CutMarker) -> List[Block]:
        """Apply one committed item; returns the blocks it caused to be cut."""
        cut: List[Block] = []
        if isinstance(item, CutMarker):
            if item.block_number == self.next_number and self.pending:
                cut.append(self._cut())
            return cut

        if self.pending and self.pending_bytes + item.size > self.policy.max_bytes:
            cut.append(self._cut())
        self.pending.append(item)
        self.pending_bytes += item.size
        if len(self.pending) >= self.policy.max_message_count or self.pending_bytes >= self.policy.max_bytes:
            cut.append(self._cut())
        return cut

    def feed_entries(self, entries: Sequence[LogEntry]) -> List[Block]:
        cut: List[Block] = []
        for entry in entries:
            cut.extend(self.feed(entry.item))
        return cut


class BatchProjection:
    """Leader-side projection of the cutter over its whole log, committed or not.

    Used only to decide when to append a ``CutMarker`` and which block number
    it should name; it never produces blocks.
    """

    def __init__(self, policy: BlockCutPolicy) -> None:
        self.policy = policy
        self.next_number = 0
        self.count = 0
        self.bytes = 0

    def feed(self, item: Envelope | CutMarker) -> Tuple[bool, Optional[int]]:
        """Returns (batch became non-empty, number of a block cut by this item)."""
        if isinstance(item, CutMarker):
            if item.block_number == self.next_number and self.count:
                return False, self._cut()
            return False, None
        cut: Optional[int] = None
        if self.count and self.bytes + item.size > self.policy.max_bytes:
            cut = self._cut()
        started = self.count == 0
        self.count += 1
        self.bytes += item.size
        if self.count >= self.policy.max_message_count or self.bytes >= self.policy.max_bytes:
            cut = self._cut()
            started = False
        return started, cut

    def _cut(self) -> int:
        number = self.next_number
        self.next_number += 1
        self.count = 0
        self.bytes = 0
        return number

    @property
    def has_pending(self) -> bool:
        return self.count > 0


def cut_block(policy: BlockCutPolicy, pending: Sequence[Envelope], last_blocks: Sequence[Block]) -> List[Block]:
    """Greedy cut of ``pending`` envelopes followed by a timeout cut of the remainder."""
    cutter = BlockCutter(policy)
    cutter.blocks = list(last_blocks)
    blocks: List[Block] = []
    for envelope in pending:
        blocks.extend(cutter.feed(envelope))
    blocks.extend(cutter.feed(CutMarker(block_number=cutter.next_number)))
    return blocks
