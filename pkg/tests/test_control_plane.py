from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import P1, P2, P3, make_network, non_operator, operator
from nhsim.control_plane import (
    NH_PLMN,
    AgreementStatus,
    AuthPath,
    ControlMessage,
    Forwarded,
    Kind,
    Links,
    NfProfile,
    NfRegistry,
    NfType,
    PreconditionError,
    RegState,
    Rejected,
    RoamingAgreement,
    Sepp,
    SessionError,
    Timing,
    bind_flow,
    establish_pdu_session,
    nrf_discover,
    nrf_register,
    offboard_client,
    onboard_client,
    register_ue,
    revoke_agreement,
    sepp_forward,
)
from nhsim.domain import ConflictError, NotFoundError, Plmn, SNssai, Supi, ValidationError
from nhsim.simcore import LinkProfile
from nhsim.traffic import FlowSpec, Protocol, run_flows


def _supi(plmn, k=1):
    return Supi(plmn, f"{k:09d}")


# -- NRF ---------------------------------------------------------------------


def test_nrf_register_and_discover():
    reg = NfRegistry()
    for sd in range(1, 5):
        nrf_register(reg, NfProfile(f"smf{sd}", NfType.SMF, P1, SNssai(1, sd), "core"))
    nrf_register(reg, NfProfile("amf", NfType.AMF, P1, None, "core"))
    assert [p.instance_id for p in nrf_discover(reg, NfType.SMF, SNssai(1, 3))] == ["smf3"]
    assert nrf_discover(reg, NfType.PCF, SNssai(1, 9)) == []
    assert [p.instance_id for p in nrf_discover(reg, NfType.AMF)] == ["amf"]
    with pytest.raises(ConflictError):
        nrf_register(reg, NfProfile("smf1", NfType.SMF, P1, SNssai(1, 1), "core"))
    reg.deregister("smf1")
    assert nrf_discover(reg, NfType.SMF, SNssai(1, 1)) == []
    with pytest.raises(NotFoundError):
        reg.deregister("smf1")


def test_nf_profile_slice_invariants():
    with pytest.raises(ValidationError):
        NfProfile("upf", NfType.UPF, P1, None, "core")
    with pytest.raises(ValidationError):
        NfProfile("smf", NfType.SMF, P1, None, "core")
    with pytest.raises(ValidationError):
        NfProfile("amf", NfType.AMF, P1, SNssai(1, 1), "core")
    with pytest.raises(ValidationError):
        NfProfile("nrf", NfType.NRF, P1, SNssai(1, 1), "core")


_profiles = st.lists(
    st.tuples(st.sampled_from(list(NfType)), st.integers(1, 4), st.integers(0, 1)), max_size=25
)


@settings(max_examples=200)
@given(_profiles, st.sampled_from(list(NfType)), st.one_of(st.none(), st.integers(1, 5)))
def test_nrf_discover_matches_brute_force(entries, nf_type, sd):
    reg = NfRegistry()
    table = []
    for i, (t, s, sst) in enumerate(entries):
        snssai = None if t in (NfType.AMF, NfType.NRF) else SNssai(sst or 1, s)
        if t in (NfType.AUSF, NfType.UDM, NfType.SEPP) and s % 2:
            snssai = None
        profile = NfProfile(f"nf{i}", t, P1, snssai, "core")
        reg.register(profile)
        table.append(profile)
    query = None if sd is None else SNssai(1, sd)
    expected = [p for p in table if p.nf_type is nf_type and (query is None or p.snssai == query)]
    assert reg.discover(nf_type, query) == expected


# -- onboarding ----------------------------------------------------------------


def test_onboard_non_operator():
    net = make_network()
    alloc = onboard_client(net, non_operator("a", P1, 2))
    assert alloc.slice == SNssai(1, 1)
    assert set(net.nh_auth.udm) == {_supi(P1, 1), _supi(P1, 2)}
    assert [p.instance_id for p in net.nrf.discover(NfType.SMF, alloc.slice)] == [alloc.smf_id]
    assert [p.instance_id for p in net.nrf.discover(NfType.UPF, alloc.slice)] == [alloc.upf_id]
    assert [p.instance_id for p in net.nrf.discover(NfType.PCF, alloc.slice)] == [alloc.pcf_id]
    assert net.amf_routes[P1] == alloc.slice
    assert P1 in net.gnbs["gnb.ran1"].broadcast
    assert alloc.slice in net.core.processes
    assert len(net.nrf.discover(NfType.AMF)) == 1


def test_onboard_operator():
    net = make_network([non_operator("a", P1)])
    alloc = onboard_client(net, operator("b", P2, 3))
    assert alloc.slice == SNssai(1, 2)
    agreement = net.sepp.agreement_for(NH_PLMN, P2)
    assert agreement is not None and agreement.status is AgreementStatus.ACTIVE
    assert not [s for s in net.nh_auth.udm if s.plmn == P2]
    assert len(net.home_cores[P2].auth.udm) == 3


def test_onboard_errors():
    net = make_network([non_operator("a", P1)])
    with pytest.raises(ConflictError):
        onboard_client(net, non_operator("z", P1))
    op = operator("b", P2)
    with pytest.raises(ValidationError):
        onboard_client(net, type(op)(**{**op.__dict__, "subscribers": non_operator("x", P2).subscribers}))
    with pytest.raises(ValidationError):
        onboard_client(net, type(op)("c", P3, op.kind.NON_OPERATOR))
    with pytest.raises(ConflictError):
        onboard_client(net, non_operator("nh", NH_PLMN))


def test_onboarding_is_live_and_pools_disjoint():
    net = make_network([non_operator("a", P1)])
    ctx = register_ue(net, _supi(P1))
    establish_pdu_session(net, ctx, SNssai(1, 1))
    onboard_client(net, non_operator("c", P3))
    net.attach_ue(_supi(P3), non_operator("c", P3).subscribers[0].shared_key, "gnb.ran1")
    ctx3 = register_ue(net, _supi(P3), at=net.clock.now)
    assert ctx3.state is RegState.REGISTERED
    nets = [pool.network for pool in net.pools.values()]
    assert not nets[0].overlaps(nets[1])


# -- registration timing ----------------------------------------------------------


def _walk(links: Links, timing: Timing, roaming: bool) -> Fraction:
    """Hand walk of the fixed 12-step sequence, in ms."""
    ran, n2, sbi, n32 = (links.ran.one_way_delay_ms, links.n2.one_way_delay_ms,
                         links.sbi.one_way_delay_ms, links.n32.one_way_delay_ms)
    steps = [
        ran,             # 1 UE -> gNB
        n2,              # 2 gNB -> AMF
        sbi,             # 3 AMF -> AUSF
        sbi,             # 4 AUSF -> UDM
        sbi,             # 5 UDM -> AUSF
        sbi,             # 6 AUSF -> AMF
        n2 + ran,        # 7 AMF -> gNB -> UE
        timing.ue_compute_ms,  # 8 UE response
        ran + n2,        # 9 UE -> gNB -> AMF
        sbi,             # 10 AMF -> AUSF
        sbi,             # 11 AUSF -> AMF
        n2 + ran,        # 12 AMF -> gNB -> UE
    ]
    receptions = 11
    total = sum(steps) + receptions * timing.nf_processing_ms
    if roaming:
        total += 4 * (n32 + 2 * timing.sepp_processing_ms)
    return total


def test_default_latencies_exact(two_client_net):
    direct = register_ue(two_client_net, _supi(P1))
    roaming = register_ue(two_client_net, _supi(P2), at=two_client_net.clock.now)
    assert direct.state is RegState.REGISTERED and direct.auth_path is AuthPath.DIRECT
    assert roaming.state is RegState.REGISTERED and roaming.auth_path is AuthPath.ROAMING
    assert direct.latency_ms == Fraction(2399, 10)
    assert roaming.latency_ms == Fraction(2624, 10)
    assert roaming.latency_ms - direct.latency_ms == Fraction(45, 2)
    assert direct.latency_ms == _walk(Links.default(), Timing(), False)
    assert roaming.latency_ms == _walk(Links.default(), Timing(), True)
    assert direct.allowed_snssai == {SNssai(1, 1)} and roaming.allowed_snssai == {SNssai(1, 2)}


_ms = st.fractions(min_value=0, max_value=50, max_denominator=64)


@settings(max_examples=60, deadline=None)
@given(_ms, _ms, _ms, _ms, _ms, _ms, _ms)
def test_latency_walk_and_roaming_delta(ran, n2, sbi, n32, p_nf, p_ue, p_sepp):
    links = Links(LinkProfile("ran", ran), LinkProfile("n2", n2), LinkProfile("sbi", sbi), LinkProfile("n32", n32))
    timing = Timing(p_nf, p_ue, p_sepp)
    net = make_network([non_operator("a", P1), operator("b", P2)], links=links, timing=timing)
    direct = register_ue(net, _supi(P1))
    roaming = register_ue(net, _supi(P2), at=net.clock.now)
    assert direct.latency_ms == _walk(links, timing, False)
    assert roaming.latency_ms == _walk(links, timing, True)
    assert roaming.latency_ms - direct.latency_ms == 4 * (n32 + 2 * p_sepp)


def test_n32_crossings_and_credential_locality(two_client_net):
    net = two_client_net
    register_ue(net, _supi(P1))
    register_ue(net, _supi(P2), at=net.clock.now)
    crossings = [m for m in net.messages if m.n32]
    assert len(crossings) == 4
    assert all(m.supi == _supi(P2) for m in crossings)
    assert not [m for m in net.messages if m.n32 and m.supi.plmn == P1]


# -- rejections --------------------------------------------------------------------


def test_unknown_msin_rejected(two_client_net):
    for plmn in (P1, P2):
        ctx = register_ue(two_client_net, _supi(plmn, 99), at=two_client_net.clock.now)
        assert ctx.state is RegState.REJECTED and ctx.cause == "unknown-subscriber"


def test_unserved_plmn_rejected(two_client_net):
    ctx = register_ue(two_client_net, _supi(Plmn("002", "01")))
    assert ctx.state is RegState.REJECTED and ctx.cause == "plmn-not-served"
    assert any(m.cause == "reject.plmn-not-served" for m in two_client_net.messages)


def test_wrong_key_fails_auth(two_client_net):
    two_client_net.attach_ue(_supi(P1), bytes(16), "gnb.ran1")
    ctx = register_ue(two_client_net, _supi(P1))
    assert ctx.state is RegState.REJECTED and ctx.cause == "auth-failure"


def test_revoked_agreement_rejected(two_client_net):
    revoke_agreement(two_client_net, P2)
    ctx = register_ue(two_client_net, _supi(P2))
    assert ctx.state is RegState.REJECTED and ctx.cause == "no-roaming-agreement"
    assert any(m.kind == Kind.SEPP_REJECT.value for m in two_client_net.messages)
    assert not any(m.n32 for m in two_client_net.messages)


# -- SEPP ---------------------------------------------------------------------------


def _sepp():
    sepp = Sepp("sepp.nh", NH_PLMN, Fraction(1, 2))
    sepp.add_agreement(RoamingAgreement(NH_PLMN, P2, LinkProfile("n32", Fraction(37, 8)),
                                        status=AgreementStatus.ACTIVE))
    return sepp


def test_sepp_forward_policy():
    sepp = _sepp()
    ok = sepp_forward(sepp, ControlMessage(Kind.AUTH_CHALLENGE, "a", "b", src_plmn=P2, dst_plmn=NH_PLMN))
    assert isinstance(ok, Forwarded) and ok.delay_ms == Fraction(37, 8) + 1
    assert ok.message.kind is Kind.N32_FORWARD
    assert sepp_forward(sepp, ControlMessage(Kind.AUTH_CHALLENGE, "a", "b", src_plmn=P3, dst_plmn=NH_PLMN)) == \
        Rejected("no-agreement")
    assert sepp_forward(sepp, ControlMessage(Kind.SESSION_ESTABLISH_REQUEST, "a", "b", src_plmn=NH_PLMN,
                                             dst_plmn=P2)) == Rejected("service-not-allowed")


def test_one_live_agreement_per_plmn():
    sepp = _sepp()
    with pytest.raises(ConflictError):
        sepp.add_agreement(RoamingAgreement(NH_PLMN, P2, LinkProfile("n32", Fraction(1))))
    sepp.agreements[0].status = AgreementStatus.REVOKED
    sepp.add_agreement(RoamingAgreement(NH_PLMN, P2, LinkProfile("n32", Fraction(1))))


def test_n32_message_needs_both_plmns():
    with pytest.raises(ValidationError):
        ControlMessage(Kind.N32_FORWARD, "a", "b", src_plmn=P1)


# -- sessions -------------------------------------------------------------------------


def test_establish_session(two_client_net):
    net = two_client_net
    ctx = register_ue(net, _supi(P1))
    s = establish_pdu_session(net, ctx, SNssai(1, 1))
    assert s.upf_id == net.allocations[SNssai(1, 1)].upf_id
    assert s.ue_ip in net.pools[SNssai(1, 1)]
    assert s.uplink_teid != s.downlink_teid
    assert [p.instance_id for p in net.nrf.discover(NfType.SMF, s.slice)] == [s.smf_id]
    with pytest.raises(SessionError) as exc:
        establish_pdu_session(net, ctx, SNssai(1, 2))
    assert exc.value.cause == "slice-not-allowed"


def test_session_requires_registration(two_client_net):
    ctx = register_ue(two_client_net, _supi(P1, 42))
    with pytest.raises(PreconditionError):
        establish_pdu_session(two_client_net, ctx, SNssai(1, 1))


def test_sessions_are_unique(two_client_net):
    net = two_client_net
    sessions = []
    for plmn in (P1, P2):
        for k in (1, 2):
            ctx = register_ue(net, _supi(plmn, k), at=net.clock.now)
            sessions += [establish_pdu_session(net, ctx, next(iter(ctx.allowed_snssai))) for _ in range(2)]
    ids = [s.session_id for s in sessions]
    ips = [(s.slice, s.ue_ip) for s in sessions]
    teids = [t for s in sessions for t in (s.uplink_teid, s.downlink_teid)]
    assert len(set(ids)) == len(ids) and len(set(ips)) == len(ips) and len(set(teids)) == len(teids)


# -- offboarding -----------------------------------------------------------------------


def test_offboard_then_register_rejected(two_client_net):
    net = two_client_net
    offboard_client(net, "a")
    ctx = register_ue(net, _supi(P1))
    assert ctx.cause == "plmn-not-served"
    assert P1 not in net.gnbs["gnb.ran1"].broadcast
    assert net.nrf.discover(NfType.SMF, SNssai(1, 1)) == []
    offboard_client(net, "b")
    assert net.sepp.agreements[0].status is AgreementStatus.REVOKED
    with pytest.raises(NotFoundError):
        offboard_client(net, "nope")
    # retired SDs are not handed out again
    assert onboard_client(net, non_operator("c", P3)).slice == SNssai(1, 3)


def _b_run(with_a: bool, seed: int = 7):
    specs = ([non_operator("a", P1, 2)] if with_a else []) + [non_operator("b", P2, 2)]
    net = make_network(specs, seed=seed)
    if with_a:
        ctx = register_ue(net, _supi(P1))
        bind_flow(net, "fa", establish_pdu_session(net, ctx, SNssai(1, 1)))
        offboard_client(net, "a")
    start = len(net.messages)
    t0 = net.clock.now
    ctx = register_ue(net, _supi(P2), at=t0)
    session = establish_pdu_session(net, ctx, next(iter(ctx.allowed_snssai)))
    bind_flow(net, "fb", session)
    trace = [(m.at - t0, m.kind, m.src, m.dst, m.supi) for m in net.messages[start:]]
    flow = FlowSpec("fb", _supi(P2), Protocol.CBR, rate_mbps=150.0, start=1.0, duration=5.0)
    metrics = run_flows(net, [flow], horizon=6.0, seed=seed)[0]
    return trace, session.slice, metrics


def test_offboard_leaves_other_tenant_untouched():
    trace_ab, slice_ab, m_ab = _b_run(True)
    trace_b, slice_b, m_b = _b_run(False)

    def norm(rows, snssai):
        return [tuple(str(x).replace(str(snssai), "<slice>") for x in row) for row in rows]

    assert norm(trace_ab, slice_ab) == norm(trace_b, slice_b)
    assert (m_ab.offered_packets, m_ab.delivered_packets, m_ab.drops_by_cause) == \
        (m_b.offered_packets, m_b.delivered_packets, m_b.drops_by_cause)
