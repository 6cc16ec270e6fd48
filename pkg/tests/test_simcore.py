from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhsim.domain import SNssai, ValidationError
from nhsim.simcore import (
    CoreHost,
    HostResource,
    LinkProfile,
    SchedulingError,
    SimClock,
    SimEvent,
    core_share,
    effective_service_rate,
    run_until,
    schedule,
)

HOST = HostResource("core")


def test_schedule_and_dispatch_order():
    clock = SimClock()
    seen = []
    schedule(clock, SimEvent(5, 0, "x", "late", lambda e: seen.append(e.payload)))
    assert clock.peek().at == 5
    clock.schedule(5, "a", "A", lambda e: seen.append(e.payload))
    clock.schedule(5, "b", "B", lambda e: seen.append(e.payload))
    clock.schedule(1, "c", "C", lambda e: seen.append(e.payload))
    clock.run()
    assert seen == ["C", "late", "A", "B"]


def test_schedule_in_the_past_fails():
    clock = SimClock()
    clock.run_until(3)
    with pytest.raises(SchedulingError):
        clock.schedule(2, "x")
    with pytest.raises(SchedulingError):
        clock.run_until(1)


def test_run_until_examples():
    clock = SimClock()
    assert run_until(clock, 10) == []
    assert clock.now == 10
    clock = SimClock()
    for t in (1, 2, 3):
        clock.schedule(t, f"e{t}", f"p{t}")
    trace = run_until(clock, 2)
    assert [e.target for e in trace] == ["e1", "e2"]
    assert clock.now == 2 and len(clock) == 1


def test_handlers_may_schedule_more_work():
    clock = SimClock(Fraction(0))

    def ping(event):
        if event.payload < 3:
            clock.schedule_in(Fraction(1, 3), "ping", event.payload + 1, ping)

    clock.schedule(0, "ping", 0, ping)
    trace = clock.run()
    assert [e.at for e in trace] == [0, Fraction(1, 3), Fraction(2, 3), 1]


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 5)), max_size=50))
def test_dispatch_is_time_then_insertion_ordered(items):
    def replay():
        clock = SimClock()
        for i, (t, tag) in enumerate(items):
            clock.schedule(t, f"n{tag}", i)
        return [(e.at, e.seqno, e.target, e.label) for e in clock.run()]

    first = replay()
    assert first == replay()
    keys = [(at, seq) for at, seq, _, _ in first]
    assert keys == sorted(keys)


def test_core_share_examples():
    assert core_share(HostResource("h", cores=2), 1) == 1.0
    assert core_share(HostResource("h", cores=2), 4) == pytest.approx(0.33155)
    assert core_share(HostResource("h", cores=4), 2) == pytest.approx(0.6631)
    with pytest.raises(ValueError):
        core_share(HOST, 0)


def test_effective_rate_examples():
    assert effective_service_rate(HOST, 4) == pytest.approx(201.4, abs=0.05)
    assert effective_service_rate(HOST, 8) == pytest.approx(177.2, abs=0.05)
    assert effective_service_rate(HostResource("h", per_core_rate_k0_mbps=99.0), 0) == 99.0
    assert effective_service_rate(HOST, 8, "cbr") == pytest.approx(182.75, abs=0.01)
    with pytest.raises(ValueError):
        effective_service_rate(HOST, 1, "quic")


def test_calibration_matches_two_point_fit():
    # independent solve of K/(1+4c)=201.4, K/(1+8c)=177.2
    c = (201.4 - 177.2) / (8 * 177.2 - 4 * 201.4)
    k0 = 201.4 * (1 + 4 * c)
    assert HOST.per_core_rate_k0_mbps == pytest.approx(k0, rel=1e-4)
    assert HOST.per_flow_overhead_c == pytest.approx(c, rel=1e-4)
    # eta from the four-slice, two-flows-per-slice total
    eta = 286.7 / (4 * 0.5 * k0 / (1 + 2 * c))
    assert HOST.multiproc_efficiency_eta == pytest.approx(eta, rel=1e-3)
    gamma = 184.8 * (1 - 0.0111) / 177.2
    assert HOST.udp_rate_multiplier_gamma == pytest.approx(gamma, rel=1e-3)


@given(st.integers(1, 16), st.integers(1, 12), st.floats(0.05, 1.0))
def test_core_share_properties(cores, n, eta):
    host = HostResource("h", cores=cores, multiproc_efficiency_eta=eta)
    assert core_share(host, n) <= 1.0
    assert core_share(host, n + 1) <= core_share(host, n)
    assert n * core_share(host, n) <= cores + 1e-12


@given(st.integers(0, 50), st.floats(0.0, 1.0))
def test_service_rate_nonincreasing(f, c):
    host = HostResource("h", per_flow_overhead_c=c)
    assert effective_service_rate(host, f + 1) <= effective_service_rate(host, f)


@pytest.mark.parametrize("kwargs", [{"cores": 0}, {"per_core_rate_k0_mbps": 0}, {"per_flow_overhead_c": -1},
                                    {"multiproc_efficiency_eta": 1.5}, {"multiproc_efficiency_eta": 0},
                                    {"udp_rate_multiplier_gamma": 0}, {"role": "edge"}])
def test_host_validation(kwargs):
    with pytest.raises(ValidationError):
        HostResource("h", **kwargs)


def test_link_delay():
    assert LinkProfile("n32", Fraction(37, 8)).delay_s == Fraction(37, 8000)
    with pytest.raises(ValidationError):
        LinkProfile("x", Fraction(-1))


def test_one_process_per_slice_and_core_accounting():
    host = CoreHost(HOST)
    procs = [host.spawn(SNssai(1, i)) for i in range(1, 5)]
    with pytest.raises(SchedulingError):
        host.spawn(SNssai(1, 1))
    assert host.busy_processes() == 0 and host.allocated_core_equivalents() == 0
    for p in procs:
        p.active_flows = 2
    assert host.allocated_core_equivalents() <= HOST.cores
    assert procs[0].capacity_mbps("greedy") == pytest.approx(0.33155 * effective_service_rate(HOST, 2))
    host.reap(SNssai(1, 4))
    assert len(host.processes) == 3


def test_idle_process_costed_as_one_flow():
    host = CoreHost(HOST)
    p = host.spawn(SNssai(1, 1))
    assert p.capacity_mbps("greedy") == pytest.approx(effective_service_rate(HOST, 1))


def test_fifo_admission_and_overflow():
    host = CoreHost(HOST, queue_packets=3)
    p = host.spawn(SNssai(1, 1))
    assert [p.admit(0.0, 1.0) for _ in range(3)] == [1.0, 2.0, 3.0]
    assert p.admit(0.0, 1.0) is None
    assert p.backlog(0.0) == 3
    # one departure frees one slot; service starts after the last departure
    assert p.admit(1.0, 1.0) == 4.0
    assert p.backlog(3.5) == 1
