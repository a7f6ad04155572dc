"""In-process insight bus with per-topic sequence numbers.

Topics are ``/``-separated segments. A subscription pattern is either a
literal topic, ``*`` (everything), or ``prefix/*`` which matches every topic
below ``prefix``. Deliveries are drained from a FIFO queue, so a publish
made by a handler is delivered only after the current message has reached
every subscriber.
"""

from __future__ import annotations

import itertools
import re
import threading
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from telcofed.errors import TelcoFedError

_SEGMENT = r"[A-Za-z0-9_.\-]+"
_TOPIC_RE = re.compile(rf"^{_SEGMENT}(/{_SEGMENT})*$")
_PATTERN_RE = re.compile(rf"^(\*|{_SEGMENT}(/{_SEGMENT})*(/\*)?)$")


class MalformedTopicError(TelcoFedError, ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    message: Any
    cascade: int
    serial: int = 0


Handler = Callable[[Envelope], None]


def validate_topic(topic: str) -> str:
    if not _TOPIC_RE.match(topic):
        raise MalformedTopicError(f"malformed topic {topic!r}")
    return topic


def validate_pattern(pattern: str) -> str:
    if not _PATTERN_RE.match(pattern):
        raise MalformedTopicError(f"malformed subscription pattern {pattern!r}")
    return pattern


def topic_matches(pattern: str, topic: str) -> bool:
    if pattern == "*":
        return True
    if pattern.endswith("/*"):
        return topic.startswith(pattern[:-1])
    return pattern == topic


@dataclass(eq=False)
class Subscription:
    pattern: str
    handler: Handler | None = None
    received: list[Envelope] = field(default_factory=list)
    active: bool = True
    since: int = 0

    def messages(self, topic: str | None = None) -> list[Any]:
        return [e.message for e in self.received if topic is None or e.topic == topic]


class InsightBus:
    def __init__(self) -> None:
        self._subs: list[Subscription] = []
        self._seq: dict[str, int] = {}
        self._queue: deque[Envelope] = deque()
        self._draining = False
        self._cascades = itertools.count(1)
        self._serial = 0
        self._lock = threading.RLock()

    def subscribe(self, pattern: str, handler: Handler | None = None) -> Subscription:
        with self._lock:
            sub = Subscription(validate_pattern(pattern), handler, since=self._serial)
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            sub.active = False
            self._subs = [s for s in self._subs if s is not sub]

    def new_cascade(self) -> int:
        return next(self._cascades)

    def publish(self, topic: str, message: Any, cascade: int | None = None) -> int:
        validate_topic(topic)
        with self._lock:
            seq = self._seq.get(topic, 0) + 1
            self._seq[topic] = seq
            self._serial += 1
            cascade = cascade if cascade is not None else self.new_cascade()
            env = Envelope(topic, seq, message, cascade, self._serial)
            self._queue.append(env)
            if not self._draining:
                self._drain()
        return seq

    def last_seq(self, topic: str) -> int:
        return self._seq.get(topic, 0)

    def _drain(self) -> None:
        self._draining = True
        try:
            while self._queue:
                env = self._queue.popleft()
                targets = [
                    s
                    for s in self._subs
                    if s.active and s.since < env.serial and topic_matches(s.pattern, env.topic)
                ]
                for sub in targets:
                    sub.received.append(env)
                    if sub.handler is not None:
                        sub.handler(env)
        finally:
            self._draining = False
