import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import P1, P2, P3, P4, make_network, non_operator
from nhsim.control_plane import bind_flow, establish_pdu_session, register_ue
from nhsim.domain import Supi, ValidationError
from nhsim.simcore import HostResource, core_share, effective_service_rate
from nhsim.traffic import FlowSpec, Protocol, aggregate, run_flows, water_fill

HOST = HostResource("core")
PLMNS = (P1, P2, P3, P4)
WINDOW_CAP = 416_000 * 8 / 0.040 / 1e6


def test_aggregate_examples():
    s = aggregate([5, 5, 5, 5])
    assert (s.mean, s.ci95_halfwidth) == (5, 0)
    s = aggregate([1, 2, 3, 4, 5])
    # published t-table: t(0.025, 4) = 2.776
    assert s.mean == 3
    assert s.ci95_halfwidth == pytest.approx(2.776 * math.sqrt(2.5) / math.sqrt(5), abs=1e-3)
    assert s.ci95_halfwidth == pytest.approx(1.963, abs=1e-3)
    s = aggregate([7])
    assert s.mean == 7 and s.ci95_halfwidth is None
    with pytest.raises(ValueError):
        aggregate([])


def test_flow_spec_invariants():
    supi = Supi(P1, "000000001")
    with pytest.raises(ValidationError):
        FlowSpec("f", supi, Protocol.CBR)
    with pytest.raises(ValidationError):
        FlowSpec("f", supi, Protocol.GREEDY, window_bytes=0)
    with pytest.raises(ValidationError):
        FlowSpec("f", supi, Protocol.GREEDY, duration=0)
    assert FlowSpec("f", supi, Protocol.GREEDY).window_bytes == 416_000
    assert FlowSpec("f", supi, Protocol.GREEDY).duration == 60.0


def max_min_oracle(capacity, caps):
    """Enumerate which flows sit at their ceiling; the rest split equally."""
    n = len(caps)
    if n == 0:
        return []
    for size in range(n + 1):
        for capped in itertools.combinations(range(n), size):
            rest = [i for i in range(n) if i not in capped]
            used = sum(caps[i] for i in capped)
            if not rest:
                if used <= capacity + 1e-9:
                    return list(caps)
                continue
            share = (capacity - used) / len(rest)
            if share < -1e-9:
                continue
            if all(caps[i] <= share + 1e-9 for i in capped) and all(caps[i] >= share - 1e-9 for i in rest):
                return [caps[i] if i in capped else share for i in range(n)]
    raise AssertionError("no max-min allocation found")


@settings(max_examples=300)
@given(st.floats(0, 500), st.lists(st.floats(0, 200), max_size=8))
def test_water_fill_matches_oracle(capacity, caps):
    got = water_fill(capacity, caps)
    want = max_min_oracle(capacity, caps)
    assert got == pytest.approx(want, abs=1e-6)
    assert sum(got) <= capacity + 1e-6


def _build(groups, windows=None, protocol=Protocol.GREEDY, rate=None, host=HOST, seed=0):
    """groups[i] = number of flows for client i; one UE per flow."""
    specs = [non_operator(f"c{i}", PLMNS[i], n) for i, n in enumerate(groups) if n]
    net = make_network(specs, seed=seed, host=host, log_packets=False)
    flows, k = [], 0
    for spec in specs:
        for rec in spec.subscribers:
            ctx = register_ue(net, rec.supi, at=net.clock.now)
            session = establish_pdu_session(net, ctx, next(iter(ctx.allowed_snssai)))
            fid = f"f{k}"
            bind_flow(net, fid, session)
            window = windows[k] if windows else 416_000
            flows.append(FlowSpec(fid, rec.supi, protocol, rate_mbps=rate,
                                  window_bytes=window if protocol is Protocol.GREEDY else None,
                                  start=1.0, duration=10.0))
            k += 1
    return net, flows


def test_equal_flows_split_equally():
    net, flows = _build([2], windows=[10**9, 10**9])
    a, b = run_flows(net, flows, horizon=11.0)
    assert a.throughput_mbps == pytest.approx(b.throughput_mbps)
    assert a.throughput_mbps + b.throughput_mbps == pytest.approx(effective_service_rate(HOST, 2))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=4).filter(lambda g: 0 < sum(g) <= 8),
       st.data())
def test_greedy_allocation_matches_oracle(groups, data):
    n = sum(groups)
    windows = data.draw(st.lists(st.integers(20_000, 800_000), min_size=n, max_size=n))
    net, flows = _build(groups, windows=windows)
    metrics = run_flows(net, flows, horizon=11.0)
    busy = sum(1 for g in groups if g)
    k = 0
    for g in groups:
        if not g:
            continue
        cap = core_share(HOST, busy) * effective_service_rate(HOST, g)
        ceilings = [windows[k + j] * 8 / 0.040 / 1e6 for j in range(g)]
        want = max_min_oracle(cap, ceilings)
        got = [metrics[k + j].throughput_mbps for j in range(g)]
        assert got == pytest.approx(want, rel=1e-9)
        k += g


def test_work_conservation_when_unwindowed():
    net, flows = _build([3, 1], windows=[10**9] * 4)
    total = sum(m.throughput_mbps for m in run_flows(net, flows, horizon=11.0))
    expected = core_share(HOST, 2) * (effective_service_rate(HOST, 3) + effective_service_rate(HOST, 1))
    assert total == pytest.approx(expected)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=2, max_size=4), st.integers(2, 4))
def test_splitting_into_slices_never_hurts(groups, cores):
    host = HostResource("core", cores=cores)
    n = sum(groups)
    net1, f1 = _build([n], host=host)
    net4, f4 = _build(groups, host=host)
    single = sum(m.throughput_mbps for m in run_flows(net1, f1, horizon=11.0))
    split = sum(m.throughput_mbps for m in run_flows(net4, f4, horizon=11.0))
    assert split >= single - 1e-9


def test_window_caps_a_lone_flow():
    net, flows = _build([1])
    (m,) = run_flows(net, flows, horizon=11.0)
    assert m.throughput_mbps == pytest.approx(WINDOW_CAP)


def test_unregistered_ue_reports_error_and_run_continues():
    net, flows = _build([1])
    ghost = FlowSpec("ghost", Supi(P1, "000000099"), Protocol.GREEDY, start=1.0, duration=10.0)
    ghost_cbr = FlowSpec("ghost2", Supi(P1, "000000098"), Protocol.CBR, rate_mbps=5.0, start=1.0, duration=10.0)
    m, g, g2 = run_flows(net, [*flows, ghost, ghost_cbr], horizon=11.0)
    assert m.error is None and m.throughput_mbps > 0
    assert g.error == "no-session" and g.throughput_mbps == 0
    assert g2.error == "no-session" and g2.drops_by_cause["no-session"] == g2.offered_packets > 0
    assert g2.conserved()


def test_cbr_half_capacity_without_jitter_is_lossless():
    net = make_network([non_operator("a", P1)], jitter=0.0)
    ctx = register_ue(net, Supi(P1, "000000001"))
    bind_flow(net, "f", establish_pdu_session(net, ctx, next(iter(ctx.allowed_snssai))))
    capacity = effective_service_rate(HOST, 1, "cbr")
    spec = FlowSpec("f", Supi(P1, "000000001"), Protocol.CBR, rate_mbps=capacity / 2, start=0.0, duration=20.0)
    (m,) = run_flows(net, [spec], horizon=20.0, seed=4)
    assert m.plr == 0 and m.offered_packets > 0 and m.conserved()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=4).filter(lambda g: sum(g) > 0),
       st.floats(5, 120), st.integers(0, 10**6))
def test_cbr_conservation(groups, rate, seed):
    net, flows = _build(groups, protocol=Protocol.CBR, rate=rate, seed=seed)
    for m in run_flows(net, flows, horizon=11.0, seed=seed):
        assert m.conserved()
        assert m.offered_packets == m.delivered_packets + sum(m.drops_by_cause.values())
        assert 0.0 <= m.plr <= 1.0


def test_overload_loses_packets_in_queue():
    net, flows = _build([2], protocol=Protocol.CBR, rate=150.0)
    ms = run_flows(net, flows, horizon=11.0, seed=2)
    delivered = sum(m.delivered_mbits for m in ms) / ms[0].measured_s
    capacity = effective_service_rate(HOST, 2, "cbr")
    assert delivered == pytest.approx(capacity, rel=0.02)
    # drop-tail with periodic sources may concentrate loss on one flow
    assert sum(m.drops_by_cause.get("queue-overflow", 0) for m in ms) > 0
