"""TLS 1.3 handshake transcripts and the client-side timing bracket."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConnectTimeout, HandshakeTimeout, KeyShareTooLarge
from .kem import KEY_SHARE_LIMIT, CostModel, KemSpec
from .link import Direction, LinkProfile
from .sim_core import DEFAULT_DEADLINE_US, EventQueue, RunRng, TerminalReason, ms_to_us, run_until_idle
from .transport import TcpConfig, TcpConnection

C2S = Direction.CLIENT_TO_SERVER
S2C = Direction.SERVER_TO_CLIENT


@dataclass(frozen=True)
class FlightProfile:
    """Byte sizes of the handshake messages that do not depend on the KEM.

    The server flight base adds up ServerHello (128), EncryptedExtensions
    (64), a one-certificate ECDSA P-256 chain (1006), CertificateVerify (200)
    and Finished (52). Record framing is folded into these constants.
    """

    client_hello_base_bytes: int = 250
    server_flight_base_bytes: int = 1450
    client_finished_bytes: int = 52

    def __post_init__(self):
        if min(self.client_hello_base_bytes, self.server_flight_base_bytes,
               self.client_finished_bytes) <= 0:
            raise ValueError("flight sizes must be positive")


@dataclass(frozen=True)
class Flight:
    name: str
    direction: Direction
    payload_bytes: int
    ops_before_send: tuple[tuple[str, float], ...] = ()

    @property
    def op_cost_ms(self) -> float:
        return sum(c for _, c in self.ops_before_send)


@dataclass(frozen=True)
class Transcript:
    alg_id: str
    flights: tuple[Flight, Flight, Flight]

    @property
    def client_hello(self) -> Flight:
        return self.flights[0]

    @property
    def server_flight(self) -> Flight:
        return self.flights[1]

    @property
    def client_finished(self) -> Flight:
        return self.flights[2]

    @property
    def op_cost_ms(self) -> float:
        return sum(f.op_cost_ms for f in self.flights)


def build_transcript(kem: KemSpec, costs: CostModel, fp: FlightProfile = FlightProfile()) -> Transcript:
    if kem.pk_bytes > KEY_SHARE_LIMIT:
        raise KeyShareTooLarge(kem.id, kem.pk_bytes)
    if kem.ct_bytes > KEY_SHARE_LIMIT:
        raise KeyShareTooLarge(kem.id, kem.ct_bytes)
    c = costs.costs(kem)
    return Transcript(kem.id, (
        Flight("ClientHello", C2S, fp.client_hello_base_bytes + kem.pk_bytes,
               (("keygen", c.keygen_ms),)),
        Flight("ServerFlight", S2C, fp.server_flight_base_bytes + kem.ct_bytes,
               (("encaps", c.encaps_ms),)),
        Flight("ClientFinished", C2S, fp.client_finished_bytes,
               (("decaps", c.decaps_ms),)),
    ))


@dataclass(frozen=True)
class LinkPair:
    c2s: LinkProfile
    s2c: LinkProfile

    @classmethod
    def symmetric(cls, profile: LinkProfile) -> "LinkPair":
        return cls(profile, profile)


@dataclass
class HandshakeRun:
    start_us: int = 0
    end_us: int | None = None
    established_us: int | None = None
    connection: TcpConnection | None = None
    reason: TerminalReason | None = None
    trace: list = field(default_factory=list)

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0


def simulate_handshake(transcript: Transcript, links: LinkPair, tcp_cfg: TcpConfig = TcpConfig(),
                       rng: RunRng | None = None, deadline_us: int = DEFAULT_DEADLINE_US,
                       trace: bool = False) -> HandshakeRun:
    """Run one handshake and return the full record; raises on failure."""
    rng = rng if rng is not None else RunRng(0)
    queue = EventQueue(trace=trace)
    conn = TcpConnection(tcp_cfg, links.c2s, links.s2c, queue, rng)
    client, server = conn.client, conn.server
    ch, sf, fin = transcript.flights
    run = HandshakeRun(connection=conn)

    def after(cost_ms: float, then):
        delay = ms_to_us(cost_ms)
        if delay == 0:
            then()
        else:
            queue.push(queue.now + delay, then, "op")

    def established():
        run.established_us = queue.now
        if not tcp_cfg.connect_included:
            run.start_us = queue.now
        after(ch.op_cost_ms, send_client_hello)

    def send_client_hello():
        end = client.send(ch.payload_bytes)
        server.receiver.expect(end, lambda: after(sf.op_cost_ms, send_server_flight))

    def send_server_flight():
        end = server.send(sf.payload_bytes)
        client.receiver.expect(end, lambda: after(fin.op_cost_ms, emit_finished))

    def emit_finished():
        run.end_us = queue.now
        queue.stop()

    client.on_established = established
    conn.open()
    run.reason = run_until_idle(queue, deadline=deadline_us)
    if queue.trace is not None:
        run.trace = queue.trace
    if run.end_us is None:
        if run.established_us is None:
            raise ConnectTimeout(f"{transcript.alg_id}: TCP connect not completed by deadline")
        raise HandshakeTimeout(f"{transcript.alg_id}: handshake not completed by deadline")
    return run


def handshake_duration(transcript: Transcript, tcp_cfg: TcpConfig, links: LinkPair,
                       rng: RunRng | None = None, deadline_us: int = DEFAULT_DEADLINE_US) -> float:
    """Client-bracket duration in milliseconds of one simulated handshake."""
    return simulate_handshake(transcript, links, tcp_cfg, rng, deadline_us).duration_ms
