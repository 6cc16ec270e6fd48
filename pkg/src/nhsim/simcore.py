"""Deterministic event loop and the core-host CPU model.

The CPU model is the piece that produces the slice-scaling effect: every
slice gets its own serial user-plane process, one process never uses more
than one core, and running several processes at once costs a global
efficiency factor.
"""

from __future__ import annotations

import heapq
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from nhsim.domain import NhsimError, SNssai, ValidationError

Time = Fraction | float | int


class SchedulingError(NhsimError):
    pass


@dataclass(frozen=True, order=True)
class SimEvent:
    at: Time
    seqno: int
    target: str = field(compare=False)
    payload: Any = field(compare=False, default=None)
    handler: Callable[[SimEvent], None] | None = field(compare=False, default=None, repr=False)


@dataclass(frozen=True)
class TraceEntry:
    at: Time
    seqno: int
    target: str
    label: str


class SimClock:
    """Priority queue of events keyed by ``(time, insertion seqno)``."""

    def __init__(self, now: Time = 0) -> None:
        self.now: Time = now
        self._queue: list[SimEvent] = []
        self._seq = 0
        self.trace: list[TraceEntry] = []

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(
        self,
        at: Time,
        target: str,
        payload: Any = None,
        handler: Callable[[SimEvent], None] | None = None,
    ) -> SimEvent:
        if at < self.now:
            raise SchedulingError(f"event for {target!r} at {at} is before now={self.now}")
        event = SimEvent(at, self._seq, target, payload, handler)
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay: Time, target: str, payload: Any = None, handler=None) -> SimEvent:
        return self.schedule(self.now + delay, target, payload, handler)

    def peek(self) -> SimEvent | None:
        return self._queue[0] if self._queue else None

    def step(self) -> SimEvent | None:
        if not self._queue:
            return None
        event = heapq.heappop(self._queue)
        self.now = event.at
        self.trace.append(TraceEntry(event.at, event.seqno, event.target, _label(event.payload)))
        if event.handler is not None:
            event.handler(event)
        return event

    def run_until(self, t_end: Time) -> list[TraceEntry]:
        """Dispatch every event due at or before ``t_end`` and return them in order."""
        if t_end < self.now:
            raise SchedulingError(f"t_end={t_end} is before now={self.now}")
        start = len(self.trace)
        while self._queue and self._queue[0].at <= t_end:
            self.step()
        self.now = t_end
        return self.trace[start:]

    def run(self) -> list[TraceEntry]:
        """Drain the queue completely."""
        start = len(self.trace)
        while self._queue:
            self.step()
        return self.trace[start:]


def _label(payload: Any) -> str:
    if payload is None:
        return ""
    kind = getattr(payload, "kind", None)
    if kind is not None:
        return str(getattr(kind, "value", kind))
    return str(payload)


def schedule(clock: SimClock, event: SimEvent) -> SimClock:
    """Enqueue a prebuilt event; its seqno is reassigned by the clock."""
    clock.schedule(event.at, event.target, event.payload, event.handler)
    return clock


def run_until(clock: SimClock, t_end: Time) -> list[TraceEntry]:
    return clock.run_until(t_end)


@dataclass(frozen=True)
class HostResource:
    host_id: str
    cores: int = 2
    per_core_rate_k0_mbps: float = 233.26
    per_flow_overhead_c: float = 0.039542
    multiproc_efficiency_eta: float = 0.6631
    udp_rate_multiplier_gamma: float = 1.0313
    role: str = "core"

    def __post_init__(self) -> None:
        if self.cores < 1:
            raise ValidationError(f"hosts[{self.host_id}].cores", "must be a positive integer")
        if self.per_core_rate_k0_mbps <= 0:
            raise ValidationError(f"hosts[{self.host_id}].per_core_rate_k0_mbps", "must be positive")
        if self.per_flow_overhead_c < 0:
            raise ValidationError(f"hosts[{self.host_id}].per_flow_overhead_c", "must be nonnegative")
        if not 0 < self.multiproc_efficiency_eta <= 1:
            raise ValidationError(f"hosts[{self.host_id}].multiproc_efficiency_eta", "must lie in (0, 1]")
        if self.udp_rate_multiplier_gamma <= 0:
            raise ValidationError(f"hosts[{self.host_id}].udp_rate_multiplier_gamma", "must be positive")
        if self.role not in ("core", "ran"):
            raise ValidationError(f"hosts[{self.host_id}].role", "must be 'core' or 'ran'")


def core_share(host: HostResource, n_active_processes: int) -> float:
    """Cores available to each of ``n`` concurrently busy slice processes."""
    if n_active_processes < 1:
        raise ValueError("n_active_processes must be >= 1")
    share = min(1.0, host.cores / n_active_processes)
    if n_active_processes > 1:
        share *= host.multiproc_efficiency_eta
    return share


def effective_service_rate(host: HostResource, flows_in_process: int, protocol: str = "greedy") -> float:
    """Mbps one full core sustains when a process carries ``flows_in_process`` flows."""
    rate = host.per_core_rate_k0_mbps / (1.0 + host.per_flow_overhead_c * flows_in_process)
    if protocol == "cbr":
        rate *= host.udp_rate_multiplier_gamma
    elif protocol != "greedy":
        raise ValueError(f"unknown protocol {protocol!r}")
    return rate


@dataclass(frozen=True)
class LinkProfile:
    name: str
    one_way_delay_ms: Fraction

    def __post_init__(self) -> None:
        if self.one_way_delay_ms < 0:
            raise ValidationError(f"links.{self.name}.one_way_delay_ms", "must be nonnegative")

    @property
    def delay_s(self) -> Fraction:
        return Fraction(self.one_way_delay_ms) / 1000


class SliceProcess:
    """Serial user-plane worker for one slice with a finite FIFO.

    Service time of a packet is fixed when it is admitted, from the process
    capacity at that instant.
    """

    def __init__(self, process_id: str, host: CoreHost, slice_: SNssai) -> None:
        self.process_id = process_id
        self.host = host
        self.slice = slice_
        self.active_flows = 0
        self.active_cbr_mbps = 0.0
        self._departures: deque[float] = deque()
        self._last_departure = 0.0

    @property
    def host_id(self) -> str:
        return self.host.resource.host_id

    def capacity_mbps(self, protocol: str) -> float:
        """Current capacity for ``protocol`` traffic.

        An idle process is costed as if it carried one flow, so a stray
        packet still gets a finite service time.
        """
        flows = self.active_flows
        n = self.host.busy_processes()
        if flows == 0:
            flows, n = 1, n + 1
        return core_share(self.host.resource, n) * effective_service_rate(
            self.host.resource, flows, protocol
        )

    def backlog(self, now: float) -> int:
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        return len(deps)

    def admit(self, now: float, service_s: float) -> float | None:
        """Queue one packet; return its departure time, or None when the FIFO is full."""
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        if len(deps) >= self.host.queue_packets:
            return None
        start = now if now > self._last_departure else self._last_departure
        done = start + service_s
        deps.append(done)
        self._last_departure = done
        return done

    def admit_burst(self, now: float, services: list[float]) -> list[float]:
        """Admit packets arriving together, in order, until the FIFO fills.

        Returns the departure times of the admitted prefix; the remaining
        packets overflow.
        """
        deps = self._departures
        while deps and deps[0] <= now:
            deps.popleft()
        room = self.host.queue_packets - len(deps)
        if room <= 0:
            return []
        t = now if now > self._last_departure else self._last_departure
        out = []
        for service in services[:room]:
            t += service
            out.append(t)
        deps.extend(out)
        if out:
            self._last_departure = t
        return out


class CoreHost:
    """A host running one :class:`SliceProcess` per slice."""

    def __init__(self, resource: HostResource, queue_packets: int = 512) -> None:
        self.resource = resource
        self.queue_packets = queue_packets
        self.processes: dict[SNssai, SliceProcess] = {}

    def spawn(self, slice_: SNssai) -> SliceProcess:
        if slice_ in self.processes:
            raise SchedulingError(f"host {self.resource.host_id} already runs a process for {slice_}")
        proc = SliceProcess(f"{self.resource.host_id}/upf-{slice_}", self, slice_)
        self.processes[slice_] = proc
        return proc

    def reap(self, slice_: SNssai) -> None:
        self.processes.pop(slice_, None)

    def busy_processes(self) -> int:
        return sum(1 for p in self.processes.values() if p.active_flows > 0)

    def allocated_core_equivalents(self) -> float:
        n = self.busy_processes()
        return n * core_share(self.resource, n) if n else 0.0
