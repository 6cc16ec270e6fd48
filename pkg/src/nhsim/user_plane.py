"""gNB and per-slice UPF forwarding.

Isolation is structural: a UPF only accepts packets whose TEID it handed
out. Each slice also keeps an append-only interface log, which is what
the isolation checks read back.
"""

from __future__ import annotations

import csv
import ipaddress
import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO

from nhsim.domain import MAX_PACKET_BYTES, NotFoundError, QosProfile, SNssai, Supi, ValidationError
from nhsim.simcore import SliceProcess

TEID_MAX = 0xFFFFFFFF


class Direction(str, Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"


class SessionState(str, Enum):
    ACTIVE = "active"
    RELEASED = "released"


@dataclass(frozen=True)
class UserPacket:
    flow_id: str
    size_bytes: int
    direction: Direction = Direction.UPLINK
    teid: int | None = None
    created_at: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.size_bytes <= MAX_PACKET_BYTES:
            raise ValidationError("size_bytes", f"must be in 1..{MAX_PACKET_BYTES}")


@dataclass(frozen=True)
class Tunneled:
    packet: UserPacket
    upf_id: str


@dataclass(frozen=True)
class Delivered:
    packet: UserPacket
    at: float


@dataclass(frozen=True)
class Dropped:
    cause: str
    packet: UserPacket | None = None


@dataclass
class PduSession:
    session_id: str
    supi: Supi
    slice: SNssai
    ue_ip: ipaddress.IPv4Address
    uplink_teid: int
    downlink_teid: int
    qos: QosProfile
    smf_id: str
    upf_id: str
    gnb_id: str
    state: SessionState = SessionState.ACTIVE

    @property
    def active(self) -> bool:
        return self.state is SessionState.ACTIVE


class TeidAllocator:
    """Run-wide TEID source. Values are never reused, so ownership is unambiguous."""

    def __init__(self) -> None:
        self._next = 1

    def allocate(self) -> int:
        if self._next > TEID_MAX:
            raise OverflowError("TEID space exhausted")
        teid = self._next
        self._next += 1
        return teid


class TokenBucket:
    def __init__(self, rate_mbps: float, burst_bytes: int, now: float = 0.0) -> None:
        self.rate_mbps = rate_mbps
        self.burst_bytes = burst_bytes
        self.tokens = float(burst_bytes)
        self.last_update = now

    def consume(self, size_bytes: int, now: float) -> bool:
        if now > self.last_update:
            refill = (now - self.last_update) * self.rate_mbps * 125_000.0
            self.tokens = min(float(self.burst_bytes), self.tokens + refill)
            self.last_update = now
        if self.tokens >= size_bytes:
            self.tokens -= size_bytes
            return True
        return False


@dataclass(frozen=True)
class LogEntry:
    time: float
    flow_id: str
    size: int
    direction: Direction


@dataclass(frozen=True)
class DropRecord:
    time: float
    flow_id: str
    size: int
    direction: Direction
    cause: str


@dataclass
class SliceInterfaceLog:
    slice: SNssai
    entries: list[LogEntry] = field(default_factory=list)
    enabled: bool = True

    def append(self, entry: LogEntry) -> None:
        if self.enabled:
            self.entries.append(entry)

    def flows(self) -> set[str]:
        return {e.flow_id for e in self.entries}


def slice_traffic(logs: Mapping[SNssai, SliceInterfaceLog], slice_: SNssai) -> list[LogEntry]:
    try:
        return list(logs[slice_].entries)
    except KeyError:
        raise NotFoundError(f"no interface log for slice {slice_}") from None


class Gnb:
    def __init__(self, gnb_id: str, host_id: str) -> None:
        self.gnb_id = gnb_id
        self.host_id = host_id
        self.broadcast: list = []
        self.sessions: dict[str, PduSession] = {}
        self.flows: dict[str, str] = {}

    def install(self, session: PduSession) -> None:
        self.sessions[session.session_id] = session

    def bind_flow(self, flow_id: str, session: PduSession) -> None:
        self.flows[flow_id] = session.session_id

    def session_for(self, flow_id: str) -> PduSession | None:
        sid = self.flows.get(flow_id)
        if sid is None:
            return None
        session = self.sessions.get(sid)
        if session is None or not session.active:
            return None
        return session

    def forward(self, pkt: UserPacket) -> Tunneled | Dropped:
        session = self.session_for(pkt.flow_id)
        if session is None:
            return Dropped("no-session", pkt)
        if pkt.direction is Direction.UPLINK:
            return Tunneled(replace(pkt, teid=session.uplink_teid), session.upf_id)
        # downlink: the UPF stamped the tunnel; it must be ours and live
        if pkt.teid != session.downlink_teid:
            return Dropped("invalid-tunnel", pkt)
        return Tunneled(pkt, session.upf_id)


def gnb_forward(gnb: Gnb, pkt: UserPacket) -> Tunneled | Dropped:
    return gnb.forward(pkt)


@dataclass
class BurstOutcome:
    delivered: int = 0
    rate_limited: int = 0
    overflow: int = 0
    invalid: int = 0
    last_departure: float | None = None


class Upf:
    def __init__(
        self,
        instance_id: str,
        slice_: SNssai,
        process: SliceProcess,
        log: SliceInterfaceLog,
        *,
        jitter: float = 0.1,
        seed: int | str = 0,
        stream: str | None = None,
    ) -> None:
        self.instance_id = instance_id
        self.slice = slice_
        self.process = process
        self.log = log
        self.jitter = jitter
        # jitter draws are keyed per tenant so one slice never perturbs another
        self.rng = random.Random(f"{seed}/{stream or instance_id}")
        self.by_teid: dict[int, PduSession] = {}
        self.by_flow: dict[str, PduSession] = {}
        self.buckets: dict[str, TokenBucket] = {}
        self.drops: list[DropRecord] = []
        self.record_drops = True

    def owns(self, teid: int | None) -> bool:
        session = self.by_teid.get(teid) if teid is not None else None
        return session is not None and session.active

    def install(self, session: PduSession, now: float = 0.0) -> None:
        self.by_teid[session.uplink_teid] = session
        if session.qos.limited:
            self.buckets[session.session_id] = TokenBucket(
                session.qos.session_ambr_mbps, session.qos.burst_bytes, now
            )

    def bind_flow(self, flow_id: str, session: PduSession) -> None:
        self.by_flow[flow_id] = session

    def release(self, session: PduSession) -> None:
        self.by_teid.pop(session.uplink_teid, None)
        self.buckets.pop(session.session_id, None)
        for flow_id in [f for f, s in self.by_flow.items() if s.session_id == session.session_id]:
            del self.by_flow[flow_id]

    def _drop(self, now: float, flow_id: str, size: int, direction: Direction, cause: str, count: int) -> None:
        if self.record_drops:
            rec = DropRecord(now, flow_id, size, direction, cause)
            self.drops.extend([rec] * count)

    def serve_burst(
        self,
        now: float,
        flow_id: str,
        teid: int | None,
        size: int,
        count: int,
        direction: Direction = Direction.UPLINK,
        protocol: str = "cbr",
    ) -> BurstOutcome:
        """Push ``count`` equal packets arriving together through the UPF pipeline."""
        out = BurstOutcome()
        if direction is Direction.UPLINK:
            session = self.by_teid.get(teid) if teid is not None else None
        else:
            session = self.by_flow.get(flow_id)
        if session is None or not session.active:
            out.invalid = count
            self._drop(now, flow_id, size, direction, "invalid-tunnel", count)
            return out

        capacity = self.process.capacity_mbps(protocol)
        base = size * 8 / (capacity * 1e6)
        bucket = self.buckets.get(session.session_id)
        jitter = self.jitter
        rnd = self.rng.random
        if bucket is None:
            passed = count
        else:
            passed = 0
            for _ in range(count):
                if bucket.consume(size, now):
                    passed += 1
            out.rate_limited = count - passed
        if jitter:
            services = [base * (1.0 + jitter * (2.0 * rnd() - 1.0)) for _ in range(passed)]
        else:
            services = [base] * passed
        departures = self.process.admit_burst(now, services)
        out.delivered = len(departures)
        out.overflow = passed - out.delivered
        if departures:
            out.last_departure = departures[-1]
            if self.log.enabled:
                self.log.entries.extend(LogEntry(t, flow_id, size, direction) for t in departures)
        if out.rate_limited:
            self._drop(now, flow_id, size, direction, "rate-limited", out.rate_limited)
        if out.overflow:
            self._drop(now, flow_id, size, direction, "queue-overflow", out.overflow)
        return out

    def handle(self, pkt: UserPacket, now: float, protocol: str = "cbr") -> Delivered | Dropped:
        result = self.serve_burst(now, pkt.flow_id, pkt.teid, pkt.size_bytes, 1, pkt.direction, protocol)
        if result.delivered:
            stamped = pkt
            if pkt.direction is Direction.DOWNLINK:
                stamped = replace(pkt, teid=self.by_flow[pkt.flow_id].downlink_teid)
            return Delivered(stamped, result.last_departure)
        if result.invalid:
            return Dropped("invalid-tunnel", pkt)
        if result.rate_limited:
            return Dropped("rate-limited", pkt)
        return Dropped("queue-overflow", pkt)

    def pass_shaped(self, now: float, flow_id: str, teid: int | None, size: int, count: int,
                    direction: Direction = Direction.UPLINK, spacing: float = 0.0) -> int:
        """Tunnel-check and log traffic already shaped to fit the process (fluid greedy flows).

        The ``count`` packets are logged at ``now``, ``now + spacing``, ...
        """
        if direction is Direction.UPLINK:
            session = self.by_teid.get(teid) if teid is not None else None
        else:
            session = self.by_flow.get(flow_id)
        if session is None or not session.active:
            self._drop(now, flow_id, size, direction, "invalid-tunnel", count)
            return 0
        if self.log.enabled:
            self.log.entries.extend(LogEntry(now + k * spacing, flow_id, size, direction) for k in range(count))
        return count


def upf_handle(upf: Upf, pkt: UserPacket, now: float = 0.0) -> Delivered | Dropped:
    return upf.handle(pkt, now)


LOG_CSV_HEADER = ["time", "slice_sst", "slice_sd", "flow_id", "direction", "size_bytes", "outcome"]


def write_interface_logs(upfs: Iterable[Upf], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(LOG_CSV_HEADER)
    rows = []
    for upf in upfs:
        s = upf.slice
        for e in upf.log.entries:
            rows.append((e.time, s.sst, s.sd, e.flow_id, e.direction.value, e.size, "delivered"))
        for d in upf.drops:
            rows.append((d.time, s.sst, s.sd, d.flow_id, d.direction.value, d.size, d.cause))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    for t, sst, sd, flow, direction, size, outcome in rows:
        writer.writerow([f"{t:.9f}", sst, sd, flow, direction, size, outcome])
