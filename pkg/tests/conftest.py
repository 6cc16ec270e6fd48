from __future__ import annotations

import pytest

from nhsim.control_plane import ClientSpec, Network, onboard_client
from nhsim.domain import ClientKind, Plmn, QosProfile, SubscriberRecord, Supi, default_key
from nhsim.simcore import HostResource


def subscribers(plmn: Plmn, count: int, start: int = 1) -> tuple[SubscriberRecord, ...]:
    out = []
    for k in range(start, start + count):
        supi = Supi(plmn, f"{k:09d}")
        out.append(SubscriberRecord(supi, default_key(supi)))
    return tuple(out)


def non_operator(client_id: str, plmn: Plmn, count: int = 1, qos: QosProfile = QosProfile()) -> ClientSpec:
    return ClientSpec(client_id, plmn, ClientKind.NON_OPERATOR, subscribers=subscribers(plmn, count), qos=qos)


def operator(client_id: str, plmn: Plmn, count: int = 1, qos: QosProfile = QosProfile()) -> ClientSpec:
    return ClientSpec(
        client_id,
        plmn,
        ClientKind.OPERATOR,
        sepp_endpoint=f"sepp.{plmn}",
        home_subscribers=subscribers(plmn, count),
        qos=qos,
    )


def make_network(specs=(), ran_hosts=("ran1",), seed: int = 0, host: HostResource | None = None, **kwargs) -> Network:
    net = Network(host or HostResource("core"), seed=seed, **kwargs)
    for host in ran_hosts:
        net.add_gnb(host)
    for spec in specs:
        onboard_client(net, spec)
        for rec in (*spec.subscribers, *spec.home_subscribers):
            net.attach_ue(rec.supi, rec.shared_key, f"gnb.{ran_hosts[0]}")
    return net


P1, P2, P3, P4 = (Plmn("001", f"{i:02d}") for i in range(1, 5))


@pytest.fixture
def two_client_net() -> Network:
    return make_network([non_operator("a", P1, 2), operator("b", P2, 2)])
