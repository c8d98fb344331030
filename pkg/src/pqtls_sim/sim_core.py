"""Discrete-event engine and keyed random streams.

Time is an integer count of microseconds. Events fire in ``(fire_time,
sequence)`` order, where ``sequence`` is a per-queue insertion counter, so
simultaneous events run first-in first-out and every run is replayable.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
import struct
from dataclasses import dataclass, field
from typing import Callable, Hashable

from .errors import SchedulingInPast

US_PER_MS = 1000
US_PER_S = 1_000_000
DEFAULT_DEADLINE_US = 60 * US_PER_S


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


@dataclass
class SimClock:
    now: int = 0


class TerminalReason(enum.Enum):
    IDLE = "Idle"
    DEADLINE_EXCEEDED = "DeadlineExceeded"
    STOPPED = "Stopped"


@dataclass(order=True)
class _Entry:
    fire_time: int
    sequence: int
    action: Callable[[], None] = field(compare=False)
    label: str = field(compare=False, default="")


class EventQueue:
    """Priority queue of pending events bound to one clock."""

    def __init__(self, clock: SimClock | None = None, trace: bool = False):
        self.clock = clock if clock is not None else SimClock()
        self._heap: list[_Entry] = []
        self._seq = 0
        self._stop = False
        self.trace: list[tuple[int, int, str]] | None = [] if trace else None

    def __len__(self):
        return len(self._heap)

    @property
    def now(self) -> int:
        return self.clock.now

    def push(self, at: int, action: Callable[[], None], label: str = "") -> int:
        if at < self.clock.now:
            raise SchedulingInPast(at, self.clock.now)
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, _Entry(at, seq, action, label))
        return seq

    def peek_time(self) -> int | None:
        return self._heap[0].fire_time if self._heap else None

    def pop(self) -> _Entry:
        return heapq.heappop(self._heap)

    def stop(self):
        """Ask the running loop to return after the current event."""
        self._stop = True


def schedule(queue: EventQueue, at: int, ev: Callable[[], None], label: str = "") -> int:
    """Schedule ``ev`` to run at absolute time ``at`` (microseconds)."""
    return queue.push(at, ev, label)


def run_until_idle(queue: EventQueue, clock: SimClock | None = None,
                   deadline: int = DEFAULT_DEADLINE_US) -> TerminalReason:
    """Dispatch events until the queue drains, the deadline passes, or stop() is called.

    An event whose fire time lies beyond ``deadline`` is left undelivered.
    """
    if deadline <= 0:
        raise ValueError("deadline must be positive")
    if clock is not None and clock is not queue.clock:
        raise ValueError("clock does not belong to this queue")
    clock = queue.clock
    queue._stop = False
    heap = queue._heap
    trace = queue.trace
    while heap:
        if heap[0].fire_time > deadline:
            return TerminalReason.DEADLINE_EXCEEDED
        entry = heapq.heappop(heap)
        assert entry.fire_time >= clock.now
        clock.now = entry.fire_time
        if trace is not None:
            trace.append((entry.fire_time, entry.sequence, entry.label))
        entry.action()
        if queue._stop:
            return TerminalReason.STOPPED
    return TerminalReason.IDLE


def _stream_seed(master_seed: int, stream_key: tuple) -> int:
    key = struct.pack(">Q", master_seed & 0xFFFFFFFFFFFFFFFF)
    h = hashlib.blake2b(repr(stream_key).encode("utf-8"), key=key, digest_size=32)
    return int.from_bytes(h.digest(), "big")


class RunRng:
    """Random stream determined entirely by ``(master_seed, stream_key)``.

    Child streams extend the key, so components of one measurement draw from
    independent sequences that do not shift when another component draws more.
    """

    __slots__ = ("master_seed", "stream_key", "_gen")

    def __init__(self, master_seed: int, stream_key: tuple[Hashable, ...] = ()):
        self.master_seed = int(master_seed)
        self.stream_key = tuple(stream_key)
        self._gen = random.Random(_stream_seed(self.master_seed, self.stream_key))

    def child(self, *labels: Hashable) -> "RunRng":
        return RunRng(self.master_seed, self.stream_key + labels)

    def uniform(self) -> float:
        return self._gen.random()

    def normal(self, mean: float = 0.0, stddev: float = 1.0) -> float:
        if stddev < 0:
            raise ValueError("stddev must be non-negative")
        # always consume a draw so the stream position does not depend on stddev
        z = self._gen.normalvariate(0.0, 1.0)
        if stddev == 0:
            return mean
        return mean + stddev * z


def rng_uniform(rng: RunRng) -> float:
    return rng.uniform()


def rng_normal(rng: RunRng, mean: float, stddev: float) -> float:
    return rng.normal(mean, stddev)
