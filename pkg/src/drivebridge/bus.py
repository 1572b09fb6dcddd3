"""In-process publish/subscribe bus with a central topic registry.

The registry only handles discovery. Once a publisher is registered,
``publish`` hands envelopes straight to every subscriber's queue, the same
way peers talk directly after the lookup step. Delivery is synchronous and
never calls back into user code.
"""

from __future__ import annotations

import logging
import re
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any

log = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 16

_TOPIC_RE = re.compile(r"^/\S*$")


def validate_topic(topic: str) -> str:
    if not isinstance(topic, str) or len(topic) < 2 or not _TOPIC_RE.match(topic):
        raise ValueError(f"invalid topic name: {topic!r}")
    return topic


@dataclass(frozen=True)
class MessageEnvelope:
    topic: str
    seq: int
    publish_time: float
    publisher: str
    payload: Any


@dataclass(frozen=True)
class RegistryRecord:
    topic: str
    publishers: frozenset = frozenset()
    subscribers: frozenset = frozenset()


class PublisherHandle:
    """Returned by :meth:`Bus.register_publisher`; owns the sequence counter."""

    def __init__(self, bus: Bus, node_id: str, topic: str):
        self.bus = bus
        self.node_id = node_id
        self.topic = topic
        self.next_seq = 0
        self.last_time: float | None = None
        self.active = True

    def publish(self, payload: Any, now: float) -> MessageEnvelope:
        return self.bus.publish(self, payload, now)

    def __repr__(self):
        return f"PublisherHandle({self.node_id!r}, {self.topic!r})"


class Subscription:
    """Bounded FIFO of envelopes for one subscriber on one topic.

    When full, the oldest envelope is discarded and ``dropped`` is incremented.
    """

    def __init__(self, node_id: str, topic: str, capacity: int):
        self.node_id = node_id
        self.topic = topic
        self.capacity = capacity
        self.dropped = 0
        self.active = True
        self._queue: deque[MessageEnvelope] = deque()
        self._lock = threading.Lock()

    def _deliver(self, env: MessageEnvelope) -> None:
        with self._lock:
            if len(self._queue) >= self.capacity:
                self._queue.popleft()
                self.dropped += 1
            self._queue.append(env)

    def take(self) -> MessageEnvelope | None:
        """Pop the oldest pending envelope, or None if the queue is empty."""
        with self._lock:
            return self._queue.popleft() if self._queue else None

    def drain(self) -> list[MessageEnvelope]:
        with self._lock:
            out = list(self._queue)
            self._queue.clear()
        return out

    def __len__(self):
        return len(self._queue)

    def __repr__(self):
        return f"Subscription({self.node_id!r}, {self.topic!r}, capacity={self.capacity})"


@dataclass
class _TopicEntry:
    publishers: dict = field(default_factory=dict)
    subscribers: dict = field(default_factory=dict)


class Bus:
    """Topic registry plus direct queue delivery.

    Registration is idempotent per (node, topic, role): registering the same
    pair twice returns the handle created the first time.
    """

    def __init__(self):
        self._topics: dict[str, _TopicEntry] = {}
        self._lock = threading.RLock()

    def register_publisher(self, node_id: str, topic: str) -> PublisherHandle:
        validate_topic(topic)
        with self._lock:
            entry = self._topics.setdefault(topic, _TopicEntry())
            handle = entry.publishers.get(node_id)
            if handle is None:
                handle = PublisherHandle(self, node_id, topic)
                entry.publishers[node_id] = handle
                log.debug("publisher %s registered on %s", node_id, topic)
            return handle

    def register_subscriber(self, node_id: str, topic: str,
                            queue_capacity: int = DEFAULT_QUEUE_CAPACITY) -> Subscription:
        validate_topic(topic)
        if not isinstance(queue_capacity, int) or queue_capacity < 1:
            raise ValueError(f"queue_capacity must be >= 1, got {queue_capacity!r}")
        with self._lock:
            entry = self._topics.setdefault(topic, _TopicEntry())
            sub = entry.subscribers.get(node_id)
            if sub is None:
                sub = Subscription(node_id, topic, queue_capacity)
                entry.subscribers[node_id] = sub
                log.debug("subscriber %s registered on %s", node_id, topic)
            return sub

    def publish(self, handle: PublisherHandle, payload: Any, now: float) -> MessageEnvelope:
        with self._lock:
            if not handle.active or handle.bus is not self:
                raise ValueError(f"{handle!r} is not registered on this bus")
            if handle.last_time is not None and now < handle.last_time:
                raise ValueError(
                    f"clock regression on {handle.topic}: {now} < {handle.last_time}")
            env = MessageEnvelope(handle.topic, handle.next_seq, now, handle.node_id, payload)
            handle.next_seq += 1
            handle.last_time = now
            for sub in self._topics[handle.topic].subscribers.values():
                sub._deliver(env)
            return env

    def lookup(self, topic: str) -> RegistryRecord:
        with self._lock:
            entry = self._topics.get(topic)
            if entry is None:
                return RegistryRecord(topic)
            return RegistryRecord(topic, frozenset(entry.publishers),
                                  frozenset(entry.subscribers))

    def unregister_publisher(self, node_id: str, topic: str) -> None:
        with self._lock:
            entry = self._topics.get(topic)
            if entry is not None and node_id in entry.publishers:
                entry.publishers.pop(node_id).active = False

    def unregister_subscriber(self, node_id: str, topic: str) -> None:
        with self._lock:
            entry = self._topics.get(topic)
            if entry is not None and node_id in entry.subscribers:
                entry.subscribers.pop(node_id).active = False

    def shutdown_node(self, node_id: str) -> None:
        """Remove every registration held by ``node_id``."""
        with self._lock:
            for topic in list(self._topics):
                self.unregister_publisher(node_id, topic)
                self.unregister_subscriber(node_id, topic)

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)
