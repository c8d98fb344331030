"""One direction of an impaired link with netem-style semantics.

Per packet, in this order: queue admission against the packet limit, random
loss, corruption flag, duplication, delay (or zero delay when the packet is
picked for reordering), then serialization at the configured rate. Every
admitted packet consumes the same five random draws whatever the
configuration, so runs that differ only in one percentage stay paired.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from .sim_core import EventQueue, RunRng, ms_to_us

MTU = 1500
UNLIMITED = math.inf


class Direction(enum.Enum):
    CLIENT_TO_SERVER = "c2s"
    SERVER_TO_CLIENT = "s2c"


class DropReason(enum.Enum):
    QUEUE_OVERFLOW = "QueueOverflow"
    RANDOM_LOSS = "RandomLoss"


@dataclass(frozen=True)
class Dropped:
    reason: DropReason


@dataclass(frozen=True)
class LinkProfile:
    delay_ms: float = 0.0
    jitter_ms: float = 0.0
    jitter_correlation: float = 0.25
    loss_pct: float = 0.0
    corrupt_pct: float = 0.0
    duplicate_pct: float = 0.0
    reorder_pct: float = 0.0
    rate_mbps: float = UNLIMITED
    queue_limit_packets: int = 1000

    def __post_init__(self):
        for name in ("loss_pct", "corrupt_pct", "duplicate_pct", "reorder_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must lie in [0, 100], got {v}")
        if self.delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("delay and jitter must be non-negative")
        if not 0.0 <= self.jitter_correlation <= 1.0:
            raise ValueError("jitter_correlation must lie in [0, 1]")
        if not self.rate_mbps > 0:
            raise ValueError("rate_mbps must be positive")
        if self.queue_limit_packets <= 0:
            raise ValueError("queue_limit_packets must be positive")
        if self.reorder_pct > 0 and self.delay_ms <= 0:
            raise ValueError("reordering requires a positive delay")

    def with_(self, **changes) -> "LinkProfile":
        return replace(self, **changes)


@dataclass
class Packet:
    id: int
    size_bytes: int
    direction: Direction
    payload_kind: Any = None
    corrupted: bool = False

    def __post_init__(self):
        if not 1 <= self.size_bytes <= MTU:
            raise ValueError(f"packet size {self.size_bytes} outside [1, {MTU}]")

    def copy(self) -> "Packet":
        return Packet(self.id, self.size_bytes, self.direction, self.payload_kind, self.corrupted)


@dataclass
class LinkState:
    last_jitter_offset_ms: float = 0.0
    busy_until: int = 0
    departures: deque = field(default_factory=deque)
    delivered_bits: int = 0
    dropped: dict = field(default_factory=lambda: {r: 0 for r in DropReason})

    @property
    def queued_packets(self) -> int:
        return len(self.departures)


def serialization_us(size_bytes: int, rate_mbps: float) -> int:
    """Time to clock ``size_bytes`` onto a ``rate_mbps`` link, rounded up to 1 us."""
    if rate_mbps == UNLIMITED:
        return 0
    # bits / (Mbit/s) == microseconds
    return math.ceil(size_bytes * 8 / rate_mbps - 1e-9)


def transit(pkt: Packet, profile: LinkProfile, state: LinkState, rng: RunRng, now: int):
    """Push one packet through the link.

    Returns ``Dropped`` or a list of ``(deliver_at, packet)`` with one entry,
    or two when the packet is duplicated.
    """
    if pkt.size_bytes > MTU:
        raise ValueError("packet exceeds MTU")
    deps = state.departures
    while deps and deps[0] <= now:
        deps.popleft()
    if len(deps) >= profile.queue_limit_packets:
        state.dropped[DropReason.QUEUE_OVERFLOW] += 1
        return Dropped(DropReason.QUEUE_OVERFLOW)

    u_loss = rng.uniform()
    u_corrupt = rng.uniform()
    u_dup = rng.uniform()
    u_reorder = rng.uniform()
    g = rng.normal(0.0, profile.jitter_ms)

    if u_loss < profile.loss_pct / 100.0:
        state.dropped[DropReason.RANDOM_LOSS] += 1
        return Dropped(DropReason.RANDOM_LOSS)

    if u_corrupt < profile.corrupt_pct / 100.0:
        pkt = pkt.copy()
        pkt.corrupted = True
    copies = 2 if u_dup < profile.duplicate_pct / 100.0 else 1

    c = profile.jitter_correlation
    j = c * state.last_jitter_offset_ms + (1.0 - c) * g
    state.last_jitter_offset_ms = j
    if u_reorder < profile.reorder_pct / 100.0:
        delay_us = 0
    else:
        delay_us = ms_to_us(max(0.0, profile.delay_ms + j))

    s = serialization_us(pkt.size_bytes, profile.rate_mbps)
    out = []
    for k in range(copies):
        if len(deps) >= profile.queue_limit_packets:
            state.dropped[DropReason.QUEUE_OVERFLOW] += 1
            break
        departure = max(now, state.busy_until) + s
        state.busy_until = departure
        deps.append(departure)
        state.delivered_bits += pkt.size_bytes * 8
        out.append((departure + delay_us, pkt if k == 0 else pkt.copy()))
    return out


def sent_bytes_time(n_packets: int, rate: float) -> float:
    """Seconds needed to send ``n_packets`` at ``rate`` packets per second."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    return n_packets / rate


class Link:
    """A link direction wired into an event queue.

    ``send`` evaluates the packet immediately at the current clock and
    schedules ``on_deliver(packet)`` for each surviving copy.
    """

    def __init__(self, profile: LinkProfile, queue: EventQueue, rng: RunRng,
                 on_deliver: Callable[[Packet], None] | None = None, name: str = ""):
        self.profile = profile
        self.queue = queue
        self.rng = rng
        self.state = LinkState()
        self.on_deliver = on_deliver
        self.name = name
        self.log: list[tuple[int, int, object]] = []

    def send(self, pkt: Packet):
        now = self.queue.now
        result = transit(pkt, self.profile, self.state, self.rng, now)
        if isinstance(result, Dropped):
            self.log.append((now, pkt.id, result.reason))
            return result
        for deliver_at, copy in result:
            self.queue.push(deliver_at, _Deliver(self.on_deliver, copy), self.name)
        return result


class _Deliver:
    __slots__ = ("cb", "pkt")

    def __init__(self, cb, pkt):
        self.cb = cb
        self.pkt = pkt

    def __call__(self):
        self.cb(self.pkt)
