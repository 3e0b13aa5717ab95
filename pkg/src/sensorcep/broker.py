"""In-process replicated publish/subscribe log.

A cluster holds a few broker nodes (default A, B, C), each hosting a
replica log per (topic, partition). Publishing appends the message to
``replication_factor`` distinct live, up-to-date replicas before the call
returns; fewer available replicas reject the publish outright rather than
queueing it. Consumer groups track committed offsets per partition and are
served only from up-to-date replicas, so any fault schedule that keeps at
least one current replica alive loses nothing.

Everything is guarded by one reentrant lock: appends are linearizable per
partition, and fault injection may race with traffic from other threads.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field


class BrokerError(Exception):
    """Base class for cluster failures."""


class UnknownTopicError(BrokerError):
    pass


class UnknownBrokerError(BrokerError):
    pass


class UnderReplicatedError(BrokerError):
    """Publish rejected: fewer live current replicas than replication_factor."""


class PartitionUnavailableError(BrokerError):
    """No live current replica can serve a partition with undelivered messages."""


@dataclass(frozen=True)
class Message:
    offset: int
    payload: bytes
    publish_time: int


@dataclass
class BrokerNode:
    id: str
    alive: bool = True
    logs: dict = field(default_factory=dict)  # (topic, partition) -> list[Message]

    def log(self, key) -> list:
        return self.logs.setdefault(key, [])


class Cluster:
    def __init__(self, broker_ids=("A", "B", "C"), replication_factor: int = 2):
        if replication_factor > len(broker_ids):
            raise ValueError("replication_factor exceeds broker count")
        if replication_factor < 1:
            raise ValueError("replication_factor must be >= 1")
        self.brokers = {bid: BrokerNode(bid) for bid in broker_ids}
        self.order = tuple(broker_ids)
        self.replication_factor = replication_factor
        self.topics: dict[str, int] = {}
        self._meta: dict[tuple, int] = {}       # (topic, partition) -> acked log length
        self._rr: dict[str, int] = {}           # topic -> round robin counter
        self._groups: dict[tuple, int] = {}     # (group, topic, partition) -> committed
        self._clock = 0
        self._lock = threading.RLock()

    # topology

    def create_topic(self, name: str, partitions: int = 1) -> None:
        with self._lock:
            if partitions < 1:
                raise ValueError("partitions must be >= 1")
            self.topics[name] = partitions
            for p in range(partitions):
                self._meta.setdefault((name, p), 0)

    def partitions(self, topic: str) -> int:
        try:
            return self.topics[topic]
        except KeyError:
            raise UnknownTopicError(topic) from None

    def fail_broker(self, broker_id: str) -> None:
        with self._lock:
            self._node(broker_id).alive = False

    def recover_broker(self, broker_id: str) -> None:
        """Bring a broker back; its replicas resync to log end before serving."""
        with self._lock:
            node = self._node(broker_id)
            node.alive = True
            for key in list(node.logs) + [k for k in self._meta if k not in node.logs]:
                self._resync(node, key)

    def _node(self, broker_id: str) -> BrokerNode:
        try:
            return self.brokers[broker_id]
        except KeyError:
            raise UnknownBrokerError(broker_id) from None

    # replication helpers (lock held)

    def _current(self, node: BrokerNode, key) -> bool:
        return len(node.log(key)) == self._meta.get(key, 0)

    def _resync(self, node: BrokerNode, key) -> bool:
        """Copy the missing suffix from any live current replica; True if current."""
        target = self._meta.get(key, 0)
        log = node.log(key)
        if len(log) == target:
            return True
        for other in self.brokers.values():
            if other is node or not other.alive:
                continue
            source = other.log(key)
            if len(source) == target:
                log.extend(source[len(log):])
                return True
        return False

    def _preference(self, key) -> list[BrokerNode]:
        _, partition = key
        n = len(self.order)
        return [self.brokers[self.order[(partition + i) % n]] for i in range(n)]

    # data path

    def publish(self, topic: str, payload: bytes) -> int:
        """Append to the next round-robin partition; returns the offset."""
        with self._lock:
            n_parts = self.partitions(topic)
            rr = self._rr.get(topic, 0)
            self._rr[topic] = rr + 1
            partition = rr % n_parts
            return self.publish_to(topic, partition, payload)

    def publish_to(self, topic: str, partition: int, payload: bytes) -> int:
        with self._lock:
            if not 0 <= partition < self.partitions(topic):
                raise UnknownTopicError(f"{topic}[{partition}]")
            key = (topic, partition)
            replicas = []
            for node in self._preference(key):
                if not node.alive:
                    continue
                if self._current(node, key) or self._resync(node, key):
                    replicas.append(node)
                    if len(replicas) == self.replication_factor:
                        break
            if len(replicas) < self.replication_factor:
                raise UnderReplicatedError(
                    f"{topic}[{partition}]: {len(replicas)} live current replicas, "
                    f"need {self.replication_factor}")
            offset = self._meta[key]
            self._clock += 1
            message = Message(offset, payload, self._clock)
            for node in replicas:
                node.log(key).append(message)
            self._meta[key] = offset + 1
            return offset

    def log_end(self, topic: str, partition: int = 0) -> int:
        with self._lock:
            if topic not in self.topics:
                raise UnknownTopicError(topic)
            return self._meta[(topic, partition)]

    def committed(self, group: str, topic: str, partition: int = 0) -> int:
        with self._lock:
            return self._groups.get((group, topic, partition), 0)

    def consume_partition(self, topic: str, partition: int, group: str,
                          max_messages: int = 100) -> list[Message]:
        """Deliver messages past the group's commit for one partition."""
        with self._lock:
            if not 0 <= partition < self.partitions(topic):
                raise UnknownTopicError(f"{topic}[{partition}]")
            key = (topic, partition)
            gkey = (group, topic, partition)
            committed = self._groups.get(gkey, 0)
            end = self._meta[key]
            if committed >= end:
                return []
            source = None
            for node in self._preference(key):
                if node.alive and (self._current(node, key) or self._resync(node, key)):
                    source = node
                    break
            if source is None:
                raise PartitionUnavailableError(f"{topic}[{partition}] has no live current replica")
            batch = source.log(key)[committed:committed + max_messages]
            self._groups[gkey] = committed + len(batch)
            return batch

    def consume(self, topic: str, group: str, max_messages: int = 100) -> list[Message]:
        """Deliver up to max_messages across partitions, offset order per partition."""
        with self._lock:
            out: list[Message] = []
            for partition in range(self.partitions(topic)):
                room = max_messages - len(out)
                if room <= 0:
                    break
                out.extend(self.consume_partition(topic, partition, group, room))
            return out


@dataclass(frozen=True)
class FaultEvent:
    """Apply ``action`` to ``broker_id`` just before the n-th publish (1-based)."""

    at_publish: int
    action: str  # "fail" | "recover"
    broker_id: str


_FAULT_LINE = re.compile(r"^\s*at\s+(\d+)\s+(fail|recover)\s+(\S+)\s*$", re.IGNORECASE)


def parse_fault_schedule(text: str) -> list[FaultEvent]:
    """Parse lines `at <n-th publish> fail <id>` / `at <n> recover <id>`."""
    events = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _FAULT_LINE.match(line)
        if not m:
            raise ValueError(f"fault schedule line {line_number}: cannot parse {line!r}")
        events.append(FaultEvent(int(m.group(1)), m.group(2).lower(), m.group(3)))
    events.sort(key=lambda e: e.at_publish)
    return events


def run_schedule(cluster: Cluster, topic: str, payloads, schedule) -> list[int]:
    """Publish payloads while applying fault events; returns acked offsets."""
    by_index: dict[int, list[FaultEvent]] = {}
    for event in schedule:
        by_index.setdefault(event.at_publish, []).append(event)
    offsets = []
    for i, payload in enumerate(payloads, start=1):
        for event in by_index.get(i, []):
            if event.action == "fail":
                cluster.fail_broker(event.broker_id)
            else:
                cluster.recover_broker(event.broker_id)
        offsets.append(cluster.publish(topic, payload))
    return offsets
