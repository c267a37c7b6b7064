"""
Discrete-event network simulator.

One scheduler owns every node: a heap of ``(time, seq, event)`` ordered by
virtual time with ties broken by insertion sequence. Messages are delivered
after a sampled latency unless dropped by loss or an active partition;
timers are fenced by a per-node epoch so a crash cancels them. In real-clock
mode the same scheduler sleeps until each event's timestamp in wall time.
"""

import hashlib
import heapq
import logging
import random
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set

from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.messages import WireMessage
from src.app.models.pydantic.network import ClockMode, LinkModel, NodeAddress, NodeKind

logger = logging.getLogger(__name__)


class UnknownAddress(EdgeChainError):
    pass


class DeadlineExceeded(EdgeChainError):
    """The run condition did not hold before the deadline."""

    pass


@dataclass
class NetworkEvent:
    time: float
    seq: int
    kind: str
    src: Optional[NodeAddress] = None
    dst: Optional[NodeAddress] = None
    message: Optional[WireMessage] = None
    name: str = ""
    data: Any = None
    epoch: int = 0
    callback: Optional[Callable[[], None]] = None

    def trace_line(self) -> str:
        if self.kind == "deliver" and self.message is not None:
            type_name = type(self.message).__name__
            key = self.message.trace_key()
        else:
            type_name = self.name
            key = "" if self.data is None else str(self.data)
        return f"{self.time:.6f}|{self.kind}|{self.src or ''}|{self.dst or ''}|{type_name}|{key}"


@dataclass
class NetworkStats:
    sent: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    dropped_partition: int = 0
    dropped_crashed: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_loss + self.dropped_partition + self.dropped_crashed


class SimNode:
    """Base class for actors attached to a ``Network``.

    Subclasses override the ``on_*`` hooks. All state mutation happens inside
    hook calls, which the scheduler runs one at a time.
    """

    def __init__(self, address: NodeAddress) -> None:
        self.address = address
        self.network: Optional["Network"] = None

    @property
    def now(self) -> float:
        return self.network.now if self.network else 0.0

    @property
    def crashed(self) -> bool:
        return self.network is not None and self.network.is_crashed(self.address)

    def send(self, dst: NodeAddress, message: WireMessage) -> None:
        self.network.send(self.address, dst, message)

    def multicast(self, targets: Iterable[NodeAddress], message: WireMessage) -> None:
        self.network.multicast(self.address, targets, message)

    def set_timer(self, delay_ms: float, name: str, data: Any = None) -> int:
        return self.network.set_timer(self.address, delay_ms, name, data)

    def cancel_timer(self, timer_id: Optional[int]) -> None:
        if timer_id is not None and self.network is not None:
            self.network.cancel_timer(timer_id)

    def on_start(self) -> None:
        pass

    def on_message(self, src: NodeAddress, message: WireMessage) -> None:
        pass

    def on_timer(self, name: str, data: Any) -> None:
        pass

    def on_crash(self) -> None:
        pass

    def on_restart(self) -> None:
        pass


Observer = Callable[["Network", NetworkEvent], None]


class Network:
    """Scheduler, clock and links for a set of simulated nodes."""

    def __init__(
        self,
        seed: int = 0,
        link: Optional[LinkModel] = None,
        clock: ClockMode = ClockMode.VIRTUAL,
    ) -> None:
        self.seed = seed
        self.link = link or LinkModel()
        self.clock = clock
        self.rng = random.Random(f"edgechain-netsim-{seed}")
        self.now = 0.0
        self.stats = NetworkStats()
        self.events_processed = 0
        self._queue: List[tuple] = []
        self._seq = 0
        self._nodes: Dict[NodeAddress, SimNode] = {}
        self._crashed: Set[NodeAddress] = set()
        self._epochs: Dict[NodeAddress, int] = {}
        self._groups: Optional[Dict[NodeAddress, int]] = None
        self._cancelled: Set[int] = set()
        self._armed: Set[int] = set()
        self._observers: List[Observer] = []
        self._trace = hashlib.sha256()
        self._started = False
        self._wall_origin: Optional[float] = None

    # Topology

    def add_node(self, node: SimNode) -> SimNode:
        if node.address in self._nodes:
            raise ValueError(f"duplicate node address {node.address}")
        node.network = self
        self._nodes[node.address] = node
        self._epochs[node.address] = 0
        if self._started:
            node.on_start()
        return node

    def node(self, address: NodeAddress) -> SimNode:
        try:
            return self._nodes[address]
        except KeyError:
            raise UnknownAddress(f"unknown node {address}")

    def nodes(self, kind: Optional[NodeKind] = None) -> List[SimNode]:
        found = [n for n in self._nodes.values() if kind is None or n.address.kind == kind]
        return sorted(found, key=lambda n: (n.address.kind.value, n.address.index))

    def add_observer(self, observer: Observer) -> None:
        self._observers.append(observer)

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for node in self.nodes():
            node.on_start()

    # Sending

    def _sample_latency(self) -> float:
        jitter = self.link.jitter_ms
        offset = self.rng.uniform(-jitter, jitter) if jitter > 0 else 0.0
        return max(0.0, self.link.base_latency_ms + offset)

    def _partitioned(self, src: NodeAddress, dst: NodeAddress) -> bool:
        if self._groups is None:
            return False
        return self._groups.get(src, -1) != self._groups.get(dst, -1)

    def send(self, src: NodeAddress, dst: NodeAddress, message: WireMessage) -> None:
        if dst not in self._nodes:
            raise UnknownAddress(f"unknown destination {dst}")
        if src in self._crashed:
            return
        self.stats.sent += 1
        if self._partitioned(src, dst):
            self.stats.dropped_partition += 1
            return
        if self.link.loss_rate > 0 and self.rng.random() < self.link.loss_rate:
            self.stats.dropped_loss += 1
            return
        self._push(
            NetworkEvent(
                time=self.now + self._sample_latency(),
                seq=0,
                kind="deliver",
                src=src,
                dst=dst,
                message=message,
            )
        )

    def multicast(self, src: NodeAddress, targets: Iterable[NodeAddress], message: WireMessage) -> None:
        """Independent per-target sends."""
        for target in targets:
            self.send(src, target, message)

    # Timers and scheduled calls

    def set_timer(self, address: NodeAddress, delay_ms: float, name: str, data: Any = None) -> int:
        event = NetworkEvent(
            time=self.now + max(0.0, delay_ms),
            seq=0,
            kind="timer",
            dst=address,
            name=name,
            data=data,
            epoch=self._epochs[address],
        )
        timer_id = self._push(event)
        self._armed.add(timer_id)
        return timer_id

    def cancel_timer(self, timer_id: int) -> None:
        """Cancel a pending timer; fired or unknown ids are ignored."""
        if timer_id in self._armed:
            self._armed.discard(timer_id)
            self._cancelled.add(timer_id)

    @property
    def pending_timers(self) -> int:
        return len(self._armed)

    def call_at(self, at_ms: float, callback: Callable[[], None], label: str = "call") -> int:
        """Run ``callback`` at virtual time ``at_ms`` (scenario hooks, fault schedules)."""
        return self._push(
            NetworkEvent(time=max(self.now, at_ms), seq=0, kind="call", name=label, callback=callback)
        )

    def _push(self, event: NetworkEvent) -> int:
        self._seq += 1
        event.seq = self._seq
        heapq.heappush(self._queue, (event.time, event.seq, event))
        return event.seq

    # Faults

    def is_crashed(self, address: NodeAddress) -> bool:
        return address in self._crashed

    def crash(self, address: NodeAddress) -> None:
        node = self.node(address)
        if address in self._crashed:
            return
        self._crashed.add(address)
        self._epochs[address] += 1
        self._record(f"{self.now:.6f}|crash|{address}|||")
        logger.info("Crashed %s at %.1f ms", address, self.now)
        node.on_crash()

    def restart(self, address: NodeAddress) -> None:
        node = self.node(address)
        if address not in self._crashed:
            return
        self._crashed.discard(address)
        self._record(f"{self.now:.6f}|restart|{address}|||")
        logger.info("Restarted %s at %.1f ms", address, self.now)
        node.on_restart()

    def partition(self, groups: Sequence[Iterable[NodeAddress]]) -> None:
        """Only nodes in the same group can talk; unlisted nodes share one extra group."""
        mapping: Dict[NodeAddress, int] = {}
        for index, group in enumerate(groups):
            for address in group:
                self.node(address)
                mapping[address] = index
        rest = len(groups)
        for address in self._nodes:
            mapping.setdefault(address, rest)
        self._groups = mapping
        self._record(f"{self.now:.6f}|partition||||{len(groups)}")

    def heal(self) -> None:
        self._groups = None
        self._record(f"{self.now:.6f}|heal||||")

    # Running

    @property
    def started(self) -> bool:
        return self._started

    @property
    def pending_events(self) -> int:
        return len(self._queue)

    @property
    def trace_digest(self) -> str:
        return self._trace.hexdigest()

    def _record(self, line: str) -> None:
        self._trace.update(line.encode("utf-8") + b"\n")

    def _wait_wall_clock(self, at_ms: float) -> None:
        if self._wall_origin is None:
            self._wall_origin = time.perf_counter() - self.now / 1000.0
        delay = self._wall_origin + at_ms / 1000.0 - time.perf_counter()
        if delay > 0:
            time.sleep(delay)

    def step(self) -> bool:
        """Process one event; False when the queue is empty."""
        if not self._queue:
            return False
        self.start()
        event_time, _, event = heapq.heappop(self._queue)
        if self.clock == ClockMode.REAL:
            self._wait_wall_clock(event_time)
        self.now = event_time

        if event.kind == "deliver":
            if event.dst in self._crashed:
                self.stats.dropped_crashed += 1
                return True
            self.stats.delivered += 1
            self._dispatch(event, lambda node: node.on_message(event.src, event.message))
        elif event.kind == "timer":
            self._armed.discard(event.seq)
            if event.seq in self._cancelled:
                self._cancelled.discard(event.seq)
                return True
            if event.dst in self._crashed or event.epoch != self._epochs[event.dst]:
                return True
            self._dispatch(event, lambda node: node.on_timer(event.name, event.data))
        else:
            self._record(event.trace_line())
            self.events_processed += 1
            event.callback()
            self._notify(event)
        return True

    def _dispatch(self, event: NetworkEvent, handler: Callable[[SimNode], None]) -> None:
        self._record(event.trace_line())
        self.events_processed += 1
        handler(self._nodes[event.dst])
        self._notify(event)

    def _notify(self, event: NetworkEvent) -> None:
        for observer in self._observers:
            observer(self, event)

    def run_until(
        self,
        condition: Optional[Callable[[], bool]] = None,
        deadline: Optional[float] = None,
    ) -> float:
        """Process events until ``condition`` holds; returns elapsed virtual time.

        Without a condition, runs up to ``deadline``. With one, raises
        ``DeadlineExceeded`` if the deadline passes or the queue drains first.
        """
        if condition is None and deadline is None:
            raise ValueError("run_until needs a condition or a deadline")
        start = self.now
        self.start()
        while True:
            if condition is not None and condition():
                return self.now - start
            if not self._queue:
                if condition is None:
                    if deadline is not None:
                        self.now = max(self.now, deadline)
                    return self.now - start
                raise DeadlineExceeded(f"event queue drained at {self.now:.1f} ms")
            if deadline is not None and self._queue[0][0] > deadline:
                self.now = max(self.now, deadline)
                if condition is None:
                    return self.now - start
                raise DeadlineExceeded(f"condition not met by {deadline:.1f} ms")
            self.step()

    def run_for(self, duration_ms: float) -> float:
        return self.run_until(None, self.now + duration_ms)
