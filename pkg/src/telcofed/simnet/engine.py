"""Discrete-event engine with a single virtual clock.

Events run in ``(time, insertion sequence)`` order. Every processed event
and every message attempt leaves a :class:`TraceRecord`; the digest of the
exported trace identifies a run.
"""

from __future__ import annotations

import heapq
import itertools
from collections.abc import Callable
from dataclasses import dataclass, field

from telcofed import codec

NO_DIGEST = b"\x00" * 32


@dataclass(frozen=True)
class TraceRecord:
    time: int
    type: str
    src: str = "-"
    dst: str = "-"
    kind: str = "-"
    size: int = 0
    digest: bytes = NO_DIGEST

    def to_line(self) -> str:
        return f"{self.time} {self.type} {self.src} {self.dst} {self.kind} {self.size} {self.digest.hex()}"

    @classmethod
    def from_line(cls, line: str) -> TraceRecord:
        time, typ, src, dst, kind, size, dig = line.split(" ")
        return cls(int(time), typ, src, dst, kind, int(size), bytes.fromhex(dig))


@dataclass(order=True)
class _Pending:
    time: int
    seq: int
    label: str = field(compare=False)
    action: Callable[[], None] = field(compare=False)
    record: TraceRecord | None = field(compare=False, default=None)


class Simulator:
    def __init__(self) -> None:
        self.now = 0
        self.trace: list[TraceRecord] = []
        self._queue: list[_Pending] = []
        self._seq = itertools.count()
        self.processed = 0

    def schedule(
        self, delay: int, action: Callable[[], None], label: str = "event", record: TraceRecord | None = None
    ) -> int:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        return self.schedule_at(self.now + delay, action, label, record)

    def schedule_at(
        self, time: int, action: Callable[[], None], label: str = "event", record: TraceRecord | None = None
    ) -> int:
        if time < self.now:
            raise ValueError(f"cannot schedule at {time}, clock is at {self.now}")
        seq = next(self._seq)
        heapq.heappush(self._queue, _Pending(int(time), seq, label, action, record))
        return seq

    def record(self, rec: TraceRecord) -> None:
        self.trace.append(rec)

    def peek_time(self) -> int | None:
        return self._queue[0].time if self._queue else None

    def advance(self) -> _Pending | None:
        """Run the next event; ``None`` when the queue is empty."""
        if not self._queue:
            return None
        ev = heapq.heappop(self._queue)
        self.now = ev.time
        self.processed += 1
        self.trace.append(
            ev.record
            if ev.record is not None
            else TraceRecord(ev.time, "event", kind=ev.label, digest=codec.digest(ev.label.encode()))
        )
        ev.action()
        return ev

    def run(self, until: int | None = None, stop: Callable[[], bool] | None = None) -> None:
        """Process events until the queue drains, ``until`` is passed, or ``stop()`` holds."""
        while self._queue:
            if stop is not None and stop():
                return
            if until is not None and self._queue[0].time > until:
                return
            self.advance()

    def pending(self) -> int:
        return len(self._queue)

    def export_trace(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.trace)

    def trace_digest(self) -> str:
        return codec.digest(self.export_trace().encode()).hex()


def import_trace(text: str) -> list[TraceRecord]:
    return [TraceRecord.from_line(line) for line in text.splitlines() if line]
