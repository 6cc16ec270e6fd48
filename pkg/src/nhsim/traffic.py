"""Traffic generators, per-flow measurement and run aggregation.

Greedy (TCP-like) flows are fluid: at every change in the active flow set
each slice process's capacity is water-filled across its backlogged flows,
capped by window/RTT and the session AMBR. Constant-rate (UDP-like) flows
are simulated per packet through the UPF queue, which is where loss comes
from.
"""

from __future__ import annotations

import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from nhsim.control_plane import Network
from nhsim.domain import SNssai, Supi, ValidationError
from nhsim.simcore import SimClock, SimEvent, core_share, effective_service_rate
from nhsim.user_plane import Direction, PduSession, UserPacket

DEFAULT_WINDOW_BYTES = 416_000
DEFAULT_FLOW_DURATION = 60.0


class Protocol(str, Enum):
    GREEDY = "greedy"
    CBR = "cbr"


@dataclass(frozen=True)
class FlowSpec:
    flow_id: str
    supi: Supi
    protocol: Protocol
    rate_mbps: float | None = None
    window_bytes: int | None = None
    start: float = 0.0
    duration: float = DEFAULT_FLOW_DURATION
    direction: Direction = Direction.UPLINK

    def __post_init__(self) -> None:
        if self.protocol is Protocol.CBR:
            if self.rate_mbps is None or self.rate_mbps <= 0:
                raise ValidationError(f"flows[{self.flow_id}].rate_mbps", "cbr flows require a positive rate")
        elif self.window_bytes is None:
            object.__setattr__(self, "window_bytes", DEFAULT_WINDOW_BYTES)
        if self.protocol is Protocol.GREEDY and self.window_bytes <= 0:
            raise ValidationError(f"flows[{self.flow_id}].window_bytes", "must be positive")
        if self.start < 0 or self.duration <= 0:
            raise ValidationError(f"flows[{self.flow_id}]", "start must be >= 0 and duration > 0")


@dataclass
class FlowMetrics:
    flow_id: str
    protocol: Protocol
    slice: SNssai | None = None
    offered_mbits: float = 0.0
    delivered_mbits: float = 0.0
    measured_s: float = 0.0
    offered_packets: int = 0
    delivered_packets: int = 0
    drops_by_cause: dict[str, int] = field(default_factory=dict)
    error: str | None = None

    @property
    def throughput_mbps(self) -> float:
        return self.delivered_mbits / self.measured_s if self.measured_s > 0 else 0.0

    @property
    def plr(self) -> float:
        if self.protocol is Protocol.CBR:
            if self.offered_packets == 0:
                return 0.0
            return 1.0 - self.delivered_packets / self.offered_packets
        if self.offered_mbits == 0:
            return 0.0
        return 1.0 - self.delivered_mbits / self.offered_mbits

    @property
    def dropped_packets(self) -> int:
        return sum(self.drops_by_cause.values())

    def conserved(self) -> bool:
        if self.protocol is Protocol.CBR:
            return self.offered_packets == self.delivered_packets + self.dropped_packets
        return self.offered_mbits == self.delivered_mbits and not self.drops_by_cause


@dataclass(frozen=True)
class StatSummary:
    n: int
    mean: float
    ci95_halfwidth: float | None


def aggregate(samples: Sequence[float]) -> StatSummary:
    """Mean with a two-sided 95% Student-t half-width (n >= 2)."""
    values = [float(x) for x in samples]
    n = len(values)
    if n == 0:
        raise ValueError("aggregate() needs at least one sample")
    mean = math.fsum(values) / n
    if n == 1:
        return StatSummary(1, mean, None)
    var = math.fsum((x - mean) ** 2 for x in values) / (n - 1)
    half = float(stats.t.ppf(0.975, n - 1)) * math.sqrt(var) / math.sqrt(n)
    return StatSummary(n, mean, half)


def water_fill(capacity: float, caps: Sequence[float]) -> list[float]:
    """Max-min fair split of ``capacity`` among flows with individual ceilings."""
    n = len(caps)
    rates = [0.0] * n
    remaining = max(capacity, 0.0)
    order = sorted(range(n), key=lambda i: caps[i])
    left = n
    for i in order:
        share = remaining / left
        give = min(caps[i], share)
        rates[i] = give
        remaining -= give
        left -= 1
    return rates


@dataclass
class _Flow:
    spec: FlowSpec
    session: PduSession | None
    metrics: FlowMetrics
    on: float
    off: float
    measure_from: float
    offset: float


def _path_offset(net: Network, direction: Direction) -> float:
    # uplink packets reach the core after the radio and backhaul hops
    if direction is Direction.UPLINK:
        return float(net.links.ran.delay_s + net.links.n2.delay_s)
    return 0.0


def round_trip_s(net: Network) -> float:
    return 2.0 * float(net.links.ran.delay_s + net.links.n2.delay_s)


def _prepare(net: Network, specs: Iterable[FlowSpec], horizon: float, warmup: float) -> list[_Flow]:
    flows = []
    for spec in specs:
        gnb_session = None
        ue = net.ues.get(spec.supi)
        if ue is not None:
            gnb_session = net.gnbs[ue.gnb_id].session_for(spec.flow_id)
        metrics = FlowMetrics(spec.flow_id, spec.protocol, gnb_session.slice if gnb_session else None)
        off = min(spec.start + spec.duration, horizon)
        offset = _path_offset(net, spec.direction)
        measure_from = spec.start + warmup
        metrics.measured_s = max(0.0, off - measure_from)
        if gnb_session is None:
            metrics.error = "no-session"
        flows.append(_Flow(spec, gnb_session, metrics, spec.start + offset, off + offset, measure_from + offset, offset))
    return flows


def _activity(flows: Sequence[_Flow]) -> list[tuple[float, int, int, _Flow]]:
    """Core-side start (+1) and stop (-1) transitions in deterministic order."""
    events = []
    for idx, f in enumerate(flows):
        if f.session is None or f.off <= f.on:
            continue
        events.append((f.on, 1, idx, f))
        events.append((f.off, 0, idx, f))
    # stops before starts at equal times, then by flow order
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    return events


def _apply(net: Network, flow: _Flow, delta: int) -> None:
    proc = net.core.processes.get(flow.session.slice)
    if proc is None:
        return
    proc.active_flows += delta
    if flow.spec.protocol is Protocol.CBR:
        proc.active_cbr_mbps += delta * flow.spec.rate_mbps


def greedy_allocation(net: Network, flows: Sequence[_Flow], active: set[int]) -> dict[int, float]:
    """Per-flow Mbps for the currently active greedy flows."""
    host = net.core.resource
    busy = net.core.busy_processes()
    rtt = round_trip_s(net)
    by_slice: dict[SNssai, list[int]] = {}
    for idx in sorted(active):
        f = flows[idx]
        if f.spec.protocol is Protocol.GREEDY:
            by_slice.setdefault(f.session.slice, []).append(idx)
    rates: dict[int, float] = {}
    for snssai, members in by_slice.items():
        proc = net.core.processes[snssai]
        capacity = core_share(host, busy) * effective_service_rate(host, proc.active_flows, "greedy")
        # cbr load costs 1/gamma of its rate in greedy-equivalent capacity
        capacity = max(0.0, capacity - proc.active_cbr_mbps / host.udp_rate_multiplier_gamma)
        caps = []
        for idx in members:
            f = flows[idx]
            cap = f.spec.window_bytes * 8 / rtt / 1e6
            if f.session.qos.limited:
                cap = min(cap, f.session.qos.session_ambr_mbps)
            caps.append(cap)
        for idx, rate in zip(members, water_fill(capacity, caps)):
            rates[idx] = rate
    return rates


def simulate_greedy(
    net: Network,
    flows: Sequence[_Flow],
    *,
    packet_bytes: int = 1500,
    materialize: bool = False,
) -> SimClock:
    """Fluid run of all flows; only greedy flows accumulate volume here."""
    clock = SimClock(0.0)
    active: set[int] = set()
    state = {"t": 0.0, "rates": {}}
    carry: dict[int, float] = {}

    def integrate(t_now: float) -> None:
        t_prev = state["t"]
        if t_now <= t_prev:
            return
        for idx, rate in state["rates"].items():
            f = flows[idx]
            lo = max(t_prev, f.measure_from)
            hi = min(t_now, f.off)
            if hi > lo:
                f.metrics.delivered_mbits += rate * (hi - lo)
            if materialize and rate > 0:
                _emit_packets(net, f, t_prev, t_now, rate, packet_bytes, carry, idx)
        state["t"] = t_now

    def transition(event: SimEvent) -> None:
        delta, idx = event.payload
        integrate(event.at)
        f = flows[idx]
        _apply(net, f, delta)
        if delta > 0:
            active.add(idx)
        else:
            active.discard(idx)
        state["rates"] = greedy_allocation(net, flows, active)

    for at, kind, idx, f in _activity(flows):
        clock.schedule(at, f"flow.{f.spec.flow_id}", (1 if kind else -1, idx), transition)
    clock.run()
    for f in flows:
        if f.spec.protocol is Protocol.GREEDY and f.metrics.error is None:
            f.metrics.offered_mbits = f.metrics.delivered_mbits
    return clock


def _emit_packets(net, f: _Flow, t0: float, t1: float, rate: float, size: int, carry: dict, idx: int) -> None:
    gnb = net.gnbs[f.session.gnb_id]
    bits = rate * 1e6 * (t1 - t0) + carry.get(idx, 0.0)
    count = int(bits // (size * 8))
    carry[idx] = bits - count * size * 8
    if count == 0:
        return
    step = (t1 - t0) / count
    probe = UserPacket(f.spec.flow_id, size, f.spec.direction)
    if f.spec.direction is Direction.UPLINK:
        tunneled = gnb.forward(probe)
        if not hasattr(tunneled, "upf_id"):
            return
        upf, teid = net.upfs[tunneled.upf_id], tunneled.packet.teid
    else:
        upf, teid = net.upfs[f.session.upf_id], None
    upf.pass_shaped(t0, f.spec.flow_id, teid, size, count, f.spec.direction, step)


def simulate_cbr(
    net: Network,
    flows: Sequence[_Flow],
    *,
    seed: int | str,
    packet_bytes: int = 1250,
    burst_packets: int = 8,
) -> None:
    """Packet-level run of the constant-rate flows through their UPFs."""
    times, owners, sizes = [], [], []
    for idx, f in enumerate(flows):
        if f.spec.protocol is not Protocol.CBR:
            continue
        interval = burst_packets * packet_bytes * 8 / (f.spec.rate_mbps * 1e6)
        phase = random.Random(f"{seed}/phase/{f.spec.flow_id}").uniform(0.0, interval)
        first = f.spec.start + phase
        last = f.off - f.offset
        n = max(0, math.ceil((last - first) / interval)) if last > first else 0
        created = first + interval * np.arange(n, dtype=np.float64)
        created = created[created < last]
        if f.session is None:
            in_window = int(np.count_nonzero(created >= f.measure_from - f.offset)) * burst_packets
            f.metrics.offered_packets = in_window
            if in_window:
                f.metrics.drops_by_cause["no-session"] = in_window
            continue
        times.append(created + f.offset)
        owners.append(np.full(created.shape, idx, dtype=np.int64))
        sizes.append(created.size)
    if not times:
        return
    arrival = np.concatenate(times)
    owner = np.concatenate(owners)
    seq = np.concatenate([np.arange(n, dtype=np.int64) for n in sizes])
    order = np.lexsort((seq, owner, arrival))
    arrival, owner = arrival[order].tolist(), owner[order].tolist()

    activity = _activity(flows)
    ai, n_act = 0, len(activity)
    counts = {idx: [0, 0, 0, 0, 0] for idx in range(len(flows))}  # offered, delivered, rl, ovf, inv
    bits_per_pkt = packet_bytes * 8
    upfs = net.upfs
    for t, idx in zip(arrival, owner):
        while ai < n_act and activity[ai][0] <= t:
            _, kind, _, af = activity[ai]
            _apply(net, af, 1 if kind else -1)
            ai += 1
        f = flows[idx]
        session = f.session
        upf = upfs[session.upf_id]
        teid = session.uplink_teid if f.spec.direction is Direction.UPLINK else None
        out = upf.serve_burst(t, f.spec.flow_id, teid, packet_bytes, burst_packets, f.spec.direction, "cbr")
        if t >= f.measure_from:
            c = counts[idx]
            c[0] += burst_packets
            c[1] += out.delivered
            c[2] += out.rate_limited
            c[3] += out.overflow
            c[4] += out.invalid
    while ai < n_act:
        _, kind, _, af = activity[ai]
        _apply(net, af, 1 if kind else -1)
        ai += 1

    for idx, f in enumerate(flows):
        if f.spec.protocol is not Protocol.CBR or f.session is None:
            continue
        offered, delivered, rl, ovf, inv = counts[idx]
        m = f.metrics
        m.offered_packets = offered
        m.delivered_packets = delivered
        for cause, n in (("rate-limited", rl), ("queue-overflow", ovf), ("invalid-tunnel", inv)):
            if n:
                m.drops_by_cause[cause] = n
        m.offered_mbits = offered * bits_per_pkt / 1e6
        m.delivered_mbits = delivered * bits_per_pkt / 1e6


def run_flows(
    net: Network,
    specs: Sequence[FlowSpec],
    *,
    horizon: float,
    warmup: float = 2.0,
    seed: int | str = 0,
    cbr_packet_bytes: int = 1250,
    cbr_burst_packets: int = 8,
    greedy_packet_bytes: int = 1500,
) -> list[FlowMetrics]:
    flows = _prepare(net, specs, horizon, warmup)
    simulate_greedy(net, flows, packet_bytes=greedy_packet_bytes, materialize=net.log_packets)
    simulate_cbr(net, flows, seed=seed, packet_bytes=cbr_packet_bytes, burst_packets=cbr_burst_packets)
    return [f.metrics for f in flows]

