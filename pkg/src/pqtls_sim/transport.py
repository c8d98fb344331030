"""Reno-style TCP over a pair of emulated links.

The model keeps what shapes handshake latency: the three-way handshake, MSS
segmentation, slow start and congestion avoidance, per-segment cumulative
ACKs, fast retransmit on three duplicate ACKs, and an RFC 6298 retransmission
timer with exponential backoff. There is no SACK, no fast-recovery window
inflation, no delayed ACK and no receive window.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .errors import ConnectTimeout, HandshakeCorruptAbort
from .link import MTU, Direction, Link, LinkProfile, Packet, serialization_us
from .sim_core import EventQueue, RunRng, TerminalReason, ms_to_us, run_until_idle

HEADER_BYTES = 40
ACK_BYTES = HEADER_BYTES
ALPHA = 1 / 8
BETA = 1 / 4

SYN = "SYN"
SYNACK = "SYNACK"
ACK = "ACK"
DATA = "DATA"


@dataclass(frozen=True)
class TcpConfig:
    mss_bytes: int = 1460
    initcwnd_segments: int = 10
    min_rto_ms: float = 200.0
    max_rto_ms: float = 60000.0
    initial_rto_ms: float = 1000.0
    connect_included: bool = True
    dupack_threshold: int = 3
    initial_ssthresh_bytes: int = 2**31 - 1
    passthrough_prob: float = 0.0

    def __post_init__(self):
        if self.mss_bytes > MTU - HEADER_BYTES:
            raise ValueError(f"mss_bytes must not exceed {MTU - HEADER_BYTES}")
        if self.mss_bytes <= 0:
            raise ValueError("mss_bytes must be positive")
        if self.initcwnd_segments < 1:
            raise ValueError("initcwnd_segments must be at least 1")
        if not 0 < self.min_rto_ms <= self.max_rto_ms:
            raise ValueError("need 0 < min_rto_ms <= max_rto_ms")
        if not 0.0 <= self.passthrough_prob <= 1.0:
            raise ValueError("passthrough_prob must lie in [0, 1]")


@dataclass
class SegmentRecord:
    seq: int
    size_bytes: int
    send_time: int = -1
    retransmit_count: int = 0

    @property
    def end(self) -> int:
        return self.seq + self.size_bytes


@dataclass
class TcpState:
    cwnd_bytes: int
    ssthresh_bytes: int
    rto_ms: float
    mss: int
    srtt_ms: float | None = None
    rttvar_ms: float | None = None
    in_flight: dict = field(default_factory=dict)
    flight_bytes: int = 0
    dup_ack_count: int = 0
    next_seq: int = 0
    snd_una: int = 0
    backlog: deque = field(default_factory=deque)
    urgent: deque = field(default_factory=deque)


def new_state(cfg: TcpConfig) -> TcpState:
    return TcpState(
        cwnd_bytes=cfg.initcwnd_segments * cfg.mss_bytes,
        ssthresh_bytes=cfg.initial_ssthresh_bytes,
        rto_ms=_clamp_rto(cfg.initial_rto_ms, cfg),
        mss=cfg.mss_bytes,
    )


def segment_count(payload_bytes: int, mss: int) -> int:
    if payload_bytes < 0 or mss <= 0:
        raise ValueError("need payload_bytes >= 0 and mss > 0")
    return -(-payload_bytes // mss)


def _clamp_rto(rto: float, cfg: TcpConfig) -> float:
    return min(max(rto, cfg.min_rto_ms), cfg.max_rto_ms)


def update_rtt(state: TcpState, cfg: TcpConfig, sample_ms: float):
    if state.srtt_ms is None:
        state.srtt_ms = sample_ms
        state.rttvar_ms = sample_ms / 2
    else:
        state.rttvar_ms = (1 - BETA) * state.rttvar_ms + BETA * abs(state.srtt_ms - sample_ms)
        state.srtt_ms = (1 - ALPHA) * state.srtt_ms + ALPHA * sample_ms
    state.rto_ms = _clamp_rto(state.srtt_ms + 4 * state.rttvar_ms, cfg)


class AckKind(enum.Enum):
    NEW = "new"
    DUPLICATE = "duplicate"
    FAST_RETRANSMIT = "fast_retransmit"
    STALE = "stale"


class LossKind(enum.Enum):
    RTO = "Rto"
    FAST_RETRANSMIT = "FastRetransmit"


def on_ack(state: TcpState, cfg: TcpConfig, acked_seq: int, now: int) -> AckKind:
    """Process a cumulative ACK for everything below ``acked_seq``."""
    if acked_seq > state.snd_una:
        sample = None
        done = [rec for rec in state.in_flight.values() if rec.end <= acked_seq]
        for rec in done:
            del state.in_flight[rec.seq]
            state.flight_bytes -= rec.size_bytes
            if rec.retransmit_count == 0 and rec.send_time >= 0:
                sample = rec
        if state.backlog and state.backlog[0].seq < acked_seq:
            state.backlog = deque(r for r in state.backlog if r.end > acked_seq)
        if state.urgent:
            state.urgent = deque(r for r in state.urgent if r.end > acked_seq)
        state.snd_una = acked_seq
        state.dup_ack_count = 0
        if sample is not None:
            update_rtt(state, cfg, (now - sample.send_time) / 1000.0)
        if state.cwnd_bytes < state.ssthresh_bytes:
            state.cwnd_bytes += state.mss
        else:
            state.cwnd_bytes += max(1, state.mss * state.mss // state.cwnd_bytes)
        return AckKind.NEW
    if acked_seq == state.snd_una and state.in_flight:
        state.dup_ack_count += 1
        if state.dup_ack_count == cfg.dupack_threshold:
            on_loss(state, cfg, LossKind.FAST_RETRANSMIT)
            lowest = state.in_flight.get(state.snd_una)
            if lowest is not None:
                state.urgent.append(lowest)
            return AckKind.FAST_RETRANSMIT
        return AckKind.DUPLICATE
    return AckKind.STALE


def on_loss(state: TcpState, cfg: TcpConfig, kind: LossKind):
    state.ssthresh_bytes = max(state.flight_bytes // 2, 2 * state.mss)
    if kind is LossKind.FAST_RETRANSMIT:
        state.cwnd_bytes = state.ssthresh_bytes
        return
    state.cwnd_bytes = state.mss
    state.rto_ms = _clamp_rto(2 * state.rto_ms, cfg)
    state.dup_ack_count = 0
    # go-back-N: everything outstanding is resent in sequence order
    requeued = sorted(state.in_flight.values(), key=lambda r: r.seq)
    state.in_flight.clear()
    state.flight_bytes = 0
    state.urgent.clear()
    state.backlog = deque(requeued + list(state.backlog))


class CorruptDisposition(enum.Enum):
    DISCARD = "Discard"
    PASS_THROUGH = "PassThrough"


def deliver_corrupt(pkt: Packet, cfg: TcpConfig, rng: RunRng | None = None) -> CorruptDisposition:
    """Decide the fate of a packet carrying injected bit errors.

    Checksums catch almost all of them, which leaves the sender in the same
    position as after a loss. With ``passthrough_prob`` the error escapes to
    TLS instead.
    """
    if not pkt.corrupted:
        raise ValueError("packet is not corrupted")
    u = rng.uniform() if rng is not None else 1.0
    if cfg.passthrough_prob >= 1.0 or u < cfg.passthrough_prob:
        return CorruptDisposition.PASS_THROUGH
    return CorruptDisposition.DISCARD


class Receiver:
    """Cumulative-ACK receiver with an out-of-order buffer."""

    def __init__(self):
        self.rcv_nxt = 0
        self._ooo: dict[int, int] = {}
        self._waiters: list[tuple[int, Callable[[], None]]] = []

    def on_data(self, seq: int, size: int) -> int:
        if seq == self.rcv_nxt:
            self.rcv_nxt += size
            while self.rcv_nxt in self._ooo:
                self.rcv_nxt += self._ooo.pop(self.rcv_nxt)
        elif seq > self.rcv_nxt:
            self._ooo[seq] = size
        return self.rcv_nxt

    def expect(self, end_seq: int, callback: Callable[[], None]):
        if end_seq <= self.rcv_nxt:
            callback()
            return
        self._waiters.append((end_seq, callback))
        self._waiters.sort(key=lambda w: w[0])

    def fire_ready(self):
        while self._waiters and self._waiters[0][0] <= self.rcv_nxt:
            _, cb = self._waiters.pop(0)
            cb()


class TcpEndpoint:
    def __init__(self, name: str, cfg: TcpConfig, queue: EventQueue, rng: RunRng):
        self.name = name
        self.cfg = cfg
        self.queue = queue
        self.rng = rng
        self.state = new_state(cfg)
        self.receiver = Receiver()
        self.link: Link | None = None
        self.direction: Direction | None = None
        self.established = False
        self.on_established: Callable[[], None] | None = None
        self._timer_gen = 0
        self._timer_armed = False
        self._ctl_sent = -1
        self._ctl_retx = 0
        self._pkt_ids = 0
        self.window_violations = 0
        self.segments_sent = 0

    # -- packets -----------------------------------------------------------
    def _emit(self, size: int, kind: tuple):
        self._pkt_ids += 1
        self.link.send(Packet(self._pkt_ids, size, self.direction, kind))

    def _send_ack(self):
        self._emit(ACK_BYTES, (ACK, self.receiver.rcv_nxt))

    # -- timer -------------------------------------------------------------
    def _arm(self, handler: Callable[[], None]):
        self._timer_gen += 1
        gen = self._timer_gen
        self._timer_armed = True

        def fire():
            if gen == self._timer_gen:
                self._timer_armed = False
                handler()

        self.queue.push(self.queue.now + ms_to_us(self.state.rto_ms), fire, f"{self.name}:rto")

    def _cancel(self):
        self._timer_gen += 1
        self._timer_armed = False

    # -- connection setup ----------------------------------------------------
    def open_active(self):
        self._ctl_sent = self.queue.now
        self._emit(HEADER_BYTES, (SYN,))
        self._arm(self._syn_timeout)

    def _syn_timeout(self):
        self._ctl_retx += 1
        self.state.rto_ms = _clamp_rto(2 * self.state.rto_ms, self.cfg)
        self._emit(HEADER_BYTES, (SYN,))
        self._arm(self._syn_timeout)

    def _synack_timeout(self):
        self._ctl_retx += 1
        self.state.rto_ms = _clamp_rto(2 * self.state.rto_ms, self.cfg)
        self._emit(HEADER_BYTES, (SYNACK,))
        self._arm(self._synack_timeout)

    def _become_established(self):
        self.established = True
        self._cancel()
        if self._ctl_retx == 0 and self._ctl_sent >= 0:
            update_rtt(self.state, self.cfg, (self.queue.now - self._ctl_sent) / 1000.0)
        elif self._ctl_retx:
            # Karn: no sample, but drop the backoff accumulated on SYN
            self.state.rto_ms = _clamp_rto(self.cfg.initial_rto_ms, self.cfg)
        if self.on_established is not None:
            self.on_established()

    # -- data ----------------------------------------------------------------
    def send(self, payload_bytes: int) -> int:
        """Queue ``payload_bytes`` for transmission; returns the end sequence number."""
        st = self.state
        mss = st.mss
        remaining = payload_bytes
        while remaining > 0:
            size = min(mss, remaining)
            st.backlog.append(SegmentRecord(st.next_seq, size))
            st.next_seq += size
            remaining -= size
        self.pump()
        return st.next_seq

    def pump(self):
        st = self.state
        while st.urgent:
            self._transmit(st.urgent.popleft())
        while st.backlog and st.flight_bytes + st.backlog[0].size_bytes <= st.cwnd_bytes:
            rec = st.backlog.popleft()
            if rec.end <= st.snd_una:
                continue
            st.in_flight[rec.seq] = rec
            st.flight_bytes += rec.size_bytes
            if st.flight_bytes > st.cwnd_bytes:
                self.window_violations += 1
            self._transmit(rec)

    def _transmit(self, rec: SegmentRecord):
        if rec.send_time >= 0:
            rec.retransmit_count += 1
        rec.send_time = self.queue.now
        self.segments_sent += 1
        self._emit(rec.size_bytes + HEADER_BYTES, (DATA, rec.seq, rec.size_bytes))
        if not self._timer_armed:
            self._arm(self._data_timeout)

    def _data_timeout(self):
        on_loss(self.state, self.cfg, LossKind.RTO)
        self.pump()

    def _handle_ack(self, ack_no: int):
        st = self.state
        kind = on_ack(st, self.cfg, ack_no, self.queue.now)
        if kind is AckKind.NEW:
            if st.in_flight or st.backlog:
                self._arm(self._data_timeout)
            else:
                self._cancel()
        self.pump()

    # -- inbound -------------------------------------------------------------
    def receive(self, pkt: Packet):
        if pkt.corrupted:
            if deliver_corrupt(pkt, self.cfg, self.rng) is CorruptDisposition.DISCARD:
                return
            if pkt.payload_kind[0] == DATA:
                raise HandshakeCorruptAbort(
                    f"{self.name}: corrupted record reached TLS at t={self.queue.now}us")
            return
        kind = pkt.payload_kind
        tag = kind[0]
        if tag == SYN:
            if self._ctl_sent < 0:
                self._ctl_sent = self.queue.now
                self._emit(HEADER_BYTES, (SYNACK,))
                self._arm(self._synack_timeout)
            elif not self.established:
                self._emit(HEADER_BYTES, (SYNACK,))
            return
        if tag == SYNACK:
            if not self.established:
                self._become_established()
            else:
                self._send_ack()
            return
        if not self.established:
            if self._ctl_sent < 0:
                return
            self._become_established()
        if tag == ACK:
            self._handle_ack(kind[1])
        elif tag == DATA:
            self.receiver.on_data(kind[1], kind[2])
            self._send_ack()
            self.receiver.fire_ready()


class TcpConnection:
    """Client and server endpoints joined by two impaired links."""

    def __init__(self, cfg: TcpConfig, c2s: LinkProfile, s2c: LinkProfile,
                 queue: EventQueue, rng: RunRng):
        self.cfg = cfg
        self.queue = queue
        self.client = TcpEndpoint("client", cfg, queue, rng.child("client"))
        self.server = TcpEndpoint("server", cfg, queue, rng.child("server"))
        self.c2s = Link(c2s, queue, rng.child("c2s"), self.server.receive, "c2s")
        self.s2c = Link(s2c, queue, rng.child("s2c"), self.client.receive, "s2c")
        self.client.link, self.client.direction = self.c2s, Direction.CLIENT_TO_SERVER
        self.server.link, self.server.direction = self.s2c, Direction.SERVER_TO_CLIENT

    def open(self):
        self.client.open_active()


def connect(cfg: TcpConfig, links: tuple[LinkProfile, LinkProfile], queue: EventQueue,
            rng: RunRng, deadline: int = 60_000_000) -> TcpConnection:
    """Run the three-way handshake alone; returns once the client is established."""
    conn = TcpConnection(cfg, links[0], links[1], queue, rng)
    conn.client.on_established = queue.stop
    conn.open()
    reason = run_until_idle(queue, deadline=deadline)
    if reason is not TerminalReason.STOPPED:
        raise ConnectTimeout(f"client not established by t={deadline}us")
    return conn


def zero_loss_transfer_us(payload_bytes: int, delay_ms: float, rate_mbps: float,
                          cfg: TcpConfig = TcpConfig()) -> int:
    """Closed-form arrival time of the last byte for a window-fitting transfer."""
    n = segment_count(payload_bytes, cfg.mss_bytes)
    if n == 0:
        return 0
    last = payload_bytes - (n - 1) * cfg.mss_bytes
    ser = (n - 1) * serialization_us(cfg.mss_bytes + HEADER_BYTES, rate_mbps)
    ser += serialization_us(last + HEADER_BYTES, rate_mbps)
    return ser + ms_to_us(delay_ms)


__all__ = [
    "ACK_BYTES", "HEADER_BYTES", "AckKind", "CorruptDisposition", "LossKind", "Receiver",
    "SegmentRecord", "TcpConfig", "TcpConnection", "TcpEndpoint", "TcpState", "connect",
    "deliver_corrupt", "new_state", "on_ack", "on_loss", "segment_count", "update_rtt",
    "zero_loss_transfer_us",
]
