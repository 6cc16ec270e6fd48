"""Core network functions of the neutral host and the operator home cores.

Registration runs as a fixed message sequence on the simulation clock.
Non-operator subscribers are authenticated by the neutral host's own
AUSF/UDM; operator subscribers are authenticated by their home core
through the SEPP pair, which is the only inter-PLMN path.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

from nhsim.domain import (
    DEFAULT_SST,
    ClientBook,
    ClientKind,
    ClientRecord,
    ConflictError,
    IpPool,
    NhsimError,
    NonOperatorProfile,
    NotFoundError,
    OperatorProfile,
    Plmn,
    PoolPlanner,
    QosProfile,
    SliceAllocation,
    SNssai,
    SubscriberRecord,
    Supi,
    ValidationError,
    allocate_snssai,
)
from nhsim.simcore import CoreHost, HostResource, LinkProfile, SimClock, SimEvent
from nhsim.user_plane import (
    Gnb,
    PduSession,
    SessionState,
    SliceInterfaceLog,
    TeidAllocator,
    Upf,
)

NH_PLMN = Plmn("999", "70")


class PreconditionError(NhsimError):
    pass


class SessionError(NhsimError):
    def __init__(self, cause: str, message: str = "") -> None:
        super().__init__(message or cause)
        self.cause = cause


class NfType(str, Enum):
    AMF = "AMF"
    AUSF = "AUSF"
    UDM = "UDM"
    NRF = "NRF"
    PCF = "PCF"
    SMF = "SMF"
    UPF = "UPF"
    SEPP = "SEPP"


_SLICE_BOUND = {NfType.SMF, NfType.UPF}
_NEVER_SLICED = {NfType.AMF, NfType.NRF}


@dataclass(frozen=True)
class NfProfile:
    instance_id: str
    nf_type: NfType
    plmn: Plmn
    snssai: SNssai | None = None
    host_id: str = "core"

    def __post_init__(self) -> None:
        if self.nf_type in _SLICE_BOUND and self.snssai is None:
            raise ValidationError("snssai", f"{self.nf_type.value} profile must carry an S-NSSAI")
        if self.nf_type in _NEVER_SLICED and self.snssai is not None:
            raise ValidationError("snssai", f"{self.nf_type.value} profile must not carry an S-NSSAI")


class NfRegistry:
    """NRF state; discovery returns profiles in registration order."""

    def __init__(self) -> None:
        self._profiles: dict[str, NfProfile] = {}

    def register(self, profile: NfProfile) -> str:
        if profile.instance_id in self._profiles:
            raise ConflictError(f"NF instance {profile.instance_id!r} already registered")
        self._profiles[profile.instance_id] = profile
        return profile.instance_id

    def deregister(self, instance_id: str) -> NfProfile:
        try:
            return self._profiles.pop(instance_id)
        except KeyError:
            raise NotFoundError(f"NF instance {instance_id!r} not registered") from None

    def discover(self, nf_type: NfType, snssai: SNssai | None = None) -> list[NfProfile]:
        return [
            p
            for p in self._profiles.values()
            if p.nf_type is nf_type and (snssai is None or p.snssai == snssai)
        ]

    def profiles(self) -> list[NfProfile]:
        return list(self._profiles.values())

    def __len__(self) -> int:
        return len(self._profiles)


def nrf_register(registry: NfRegistry, profile: NfProfile) -> str:
    return registry.register(profile)


def nrf_discover(registry: NfRegistry, nf_type: NfType, snssai: SNssai | None = None) -> list[NfProfile]:
    return registry.discover(nf_type, snssai)


class Kind(str, Enum):
    """Stable control-message identifiers; they appear verbatim in traces."""

    REGISTRATION_REQUEST = "registration.request"
    REGISTRATION_ACCEPT = "registration.accept"
    REGISTRATION_REJECT = "registration.reject"
    AUTH_REQUEST = "auth.request"
    AUTH_VECTOR_REQUEST = "auth.vector-request"
    AUTH_VECTOR = "auth.vector"
    AUTH_CHALLENGE = "auth.challenge"
    AUTH_RESPONSE = "auth.response"
    AUTH_CONFIRM = "auth.confirm"
    AUTH_RESULT = "auth.result"
    SESSION_ESTABLISH_REQUEST = "session.establish-request"
    SESSION_CREATE = "session.create"
    POLICY_REQUEST = "session.policy-request"
    TUNNEL_SETUP = "session.tunnel-setup"
    SESSION_ESTABLISH_ACCEPT = "session.establish-accept"
    N32_FORWARD = "n32.forward"
    SEPP_REJECT = "sepp.reject"


_SERVICE_OF = {"auth": "authentication", "session": "session-management", "registration": "registration"}


def service_kind(kind: Kind) -> str:
    return _SERVICE_OF.get(kind.value.split(".", 1)[0], "other")


@dataclass(frozen=True)
class ControlMessage:
    kind: Kind
    src: str
    dst: str
    supi: Supi | None = None
    slice: SNssai | None = None
    body: dict[str, Any] = field(default_factory=dict, compare=False)
    src_plmn: Plmn | None = None
    dst_plmn: Plmn | None = None

    def __post_init__(self) -> None:
        if self.kind is Kind.N32_FORWARD and (self.src_plmn is None or self.dst_plmn is None):
            raise ValidationError("n32.forward", "must carry both source and destination PLMN")


@dataclass(frozen=True)
class MessageRecord:
    """One delivered control message, as it appears in the run trace."""

    at: Fraction
    kind: str
    src: str
    dst: str
    supi: Supi | None
    n32: bool = False
    cause: str | None = None


class AgreementStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    REVOKED = "revoked"


@dataclass
class RoamingAgreement:
    nh_plmn: Plmn
    client_plmn: Plmn
    n32_link: LinkProfile
    allowed_service_kinds: frozenset[str] = frozenset({"authentication"})
    status: AgreementStatus = AgreementStatus.PENDING

    def covers(self, a: Plmn, b: Plmn) -> bool:
        return {a, b} == {self.nh_plmn, self.client_plmn}


@dataclass(frozen=True)
class Forwarded:
    message: ControlMessage
    delay_ms: Fraction


@dataclass(frozen=True)
class Rejected:
    cause: str


class Sepp:
    def __init__(self, instance_id: str, plmn: Plmn, processing_ms: Fraction) -> None:
        self.instance_id = instance_id
        self.plmn = plmn
        self.processing_ms = Fraction(processing_ms)
        self.agreements: list[RoamingAgreement] = []

    def add_agreement(self, agreement: RoamingAgreement) -> None:
        for other in self.agreements:
            if other.client_plmn == agreement.client_plmn and other.status is not AgreementStatus.REVOKED:
                raise ConflictError(f"non-revoked agreement for {agreement.client_plmn} already exists")
        self.agreements.append(agreement)

    def agreement_for(self, a: Plmn, b: Plmn) -> RoamingAgreement | None:
        for agreement in self.agreements:
            if agreement.status is AgreementStatus.ACTIVE and agreement.covers(a, b):
                return agreement
        return None


def sepp_forward(sepp: Sepp, msg: ControlMessage) -> Forwarded | Rejected:
    """Police one outbound inter-PLMN message.

    The forwarded copy is wrapped as an N32 message; its delay covers the
    N32 link plus SEPP processing on both ends.
    """
    if msg.src_plmn is None or msg.dst_plmn is None:
        return Rejected("no-agreement")
    agreement = sepp.agreement_for(msg.src_plmn, msg.dst_plmn)
    if agreement is None:
        return Rejected("no-agreement")
    inner = msg.body.get("inner_kind", msg.kind) if msg.kind is Kind.N32_FORWARD else msg.kind
    if service_kind(Kind(inner)) not in agreement.allowed_service_kinds:
        return Rejected("service-not-allowed")
    wrapped = ControlMessage(
        Kind.N32_FORWARD,
        src=sepp.instance_id,
        dst=msg.dst,
        supi=msg.supi,
        slice=msg.slice,
        body={"inner_kind": Kind(inner), "inner": msg},
        src_plmn=msg.src_plmn,
        dst_plmn=msg.dst_plmn,
    )
    return Forwarded(wrapped, agreement.n32_link.one_way_delay_ms + 2 * sepp.processing_ms)


@dataclass(frozen=True)
class Links:
    ran: LinkProfile
    n2: LinkProfile
    sbi: LinkProfile
    n32: LinkProfile

    @classmethod
    def default(cls) -> Links:
        return cls(
            ran=LinkProfile("ran", Fraction(15)),
            n2=LinkProfile("n2", Fraction(5)),
            sbi=LinkProfile("sbi", Fraction(2)),
            n32=LinkProfile("n32", Fraction("4.625")),
        )

    def items(self) -> list[tuple[str, LinkProfile]]:
        return [("ran", self.ran), ("n2", self.n2), ("sbi", self.sbi), ("n32", self.n32)]


@dataclass(frozen=True)
class Timing:
    """Processing delays in milliseconds.

    The default NF processing time makes eleven message receptions plus
    the link budget sum to exactly 239.9 ms.
    """

    nf_processing_ms: Fraction = Fraction(1179, 110)
    ue_compute_ms: Fraction = Fraction(30)
    sepp_processing_ms: Fraction = Fraction(1, 2)


class RegState(str, Enum):
    IDLE = "idle"
    AUTHENTICATING = "authenticating"
    REGISTERED = "registered"
    REJECTED = "rejected"


class AuthPath(str, Enum):
    DIRECT = "direct"
    ROAMING = "roaming"


@dataclass
class RegistrationContext:
    supi: Supi
    serving_plmn: Plmn
    state: RegState = RegState.IDLE
    auth_path: AuthPath | None = None
    allowed_snssai: frozenset[SNssai] = frozenset()
    started_at: Fraction = Fraction(0)
    finished_at: Fraction | None = None
    cause: str | None = None

    @property
    def done(self) -> bool:
        return self.state in (RegState.REGISTERED, RegState.REJECTED)

    @property
    def latency_ms(self) -> Fraction | None:
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at) * 1000


@dataclass
class UserEquipment:
    supi: Supi
    key: bytes
    gnb_id: str

    def respond(self, nonce: bytes) -> bytes:
        return challenge_response(self.key, nonce)


def challenge_response(key: bytes, nonce: bytes) -> bytes:
    return hmac.new(key, nonce, hashlib.sha256).digest()


class AuthCore:
    """AUSF and UDM of one PLMN (the neutral host or an operator home stub)."""

    def __init__(self, name: str, plmn: Plmn, rng: random.Random) -> None:
        self.name = name
        self.plmn = plmn
        self.rng = rng
        self.udm: dict[Supi, SubscriberRecord] = {}
        self._pending: dict[Supi, bytes] = {}

    @property
    def ausf_id(self) -> str:
        return f"ausf.{self.name}"

    @property
    def udm_id(self) -> str:
        return f"udm.{self.name}"

    def import_subscribers(self, records: Iterable[SubscriberRecord]) -> None:
        for rec in records:
            if rec.supi in self.udm:
                raise ConflictError(f"subscriber {rec.supi} already provisioned")
            self.udm[rec.supi] = rec

    def vector(self, supi: Supi) -> tuple[bytes, bytes] | None:
        rec = self.udm.get(supi)
        if rec is None:
            return None
        nonce = self.rng.getrandbits(128).to_bytes(16, "big")
        return nonce, challenge_response(rec.shared_key, nonce)

    def remember(self, supi: Supi, xres: bytes) -> None:
        self._pending[supi] = xres

    def confirm(self, supi: Supi, res: bytes) -> bool:
        xres = self._pending.pop(supi, None)
        return xres is not None and hmac.compare_digest(xres, res)


@dataclass
class HomeCore:
    """Operator home network stub: AUSF, UDM and SEPP only."""

    plmn: Plmn
    auth: AuthCore
    sepp: Sepp


@dataclass(frozen=True)
class ClientSpec:
    """Descriptor handed to :func:`onboard_client`."""

    client_id: str
    plmn: Plmn
    kind: ClientKind
    name: str = ""
    sepp_endpoint: str | None = None
    subscribers: tuple[SubscriberRecord, ...] = ()
    home_subscribers: tuple[SubscriberRecord, ...] = ()
    qos: QosProfile = QosProfile()
    sst: int = DEFAULT_SST


class Network:
    """Neutral-host core, its gNBs, the UEs, and any operator home stubs."""

    def __init__(
        self,
        core_host: HostResource | None = None,
        *,
        links: Links | None = None,
        timing: Timing | None = None,
        nh_plmn: Plmn = NH_PLMN,
        seed: int = 0,
        queue_packets: int = 512,
        jitter: float = 0.1,
        log_packets: bool = True,
    ) -> None:
        self.links = links or Links.default()
        self.timing = timing or Timing()
        self.nh_plmn = nh_plmn
        self.seed = seed
        self.jitter = jitter
        self.log_packets = log_packets
        self.clock = SimClock(Fraction(0))
        self.rng = random.Random(f"{seed}/control")
        self.core = CoreHost(core_host or HostResource("core"), queue_packets)
        self.nrf = NfRegistry()
        self.clients = ClientBook()
        self.nh_auth = AuthCore("nh", nh_plmn, self.rng)
        self.sepp = Sepp("sepp.nh", nh_plmn, self.timing.sepp_processing_ms)
        self.home_cores: dict[Plmn, HomeCore] = {}
        self.amf_routes: dict[Plmn, SNssai] = {}
        self.pcf_policies: dict[SNssai, QosProfile] = {}
        self.allocations: dict[SNssai, SliceAllocation] = {}
        self.pools: dict[SNssai, IpPool] = {}
        self.upfs: dict[str, Upf] = {}
        self.logs: dict[SNssai, SliceInterfaceLog] = {}
        self.gnbs: dict[str, Gnb] = {}
        self.ues: dict[Supi, UserEquipment] = {}
        self.sessions: dict[str, PduSession] = {}
        self.contexts: list[RegistrationContext] = []
        self.messages: list[MessageRecord] = []
        self.retired: set[SNssai] = set()
        self._planner = PoolPlanner()
        self._teids = TeidAllocator()
        self._session_seq = 0
        for nf_type in (NfType.NRF, NfType.AMF, NfType.AUSF, NfType.UDM, NfType.SEPP):
            self.nrf.register(NfProfile(f"{nf_type.value.lower()}.nh", nf_type, nh_plmn, None, self.core_id))

    @property
    def core_id(self) -> str:
        return self.core.resource.host_id

    # -- topology ---------------------------------------------------------

    def add_gnb(self, host_id: str, gnb_id: str | None = None) -> Gnb:
        gnb = Gnb(gnb_id or f"gnb.{host_id}", host_id)
        if gnb.gnb_id in self.gnbs:
            raise ConflictError(f"gNB {gnb.gnb_id!r} already exists")
        gnb.broadcast = [c.plmn for c in self.clients]
        self.gnbs[gnb.gnb_id] = gnb
        return gnb

    def add_home_core(self, plmn: Plmn, subscribers: Iterable[SubscriberRecord] = ()) -> HomeCore:
        if plmn in self.home_cores:
            raise ConflictError(f"home core for {plmn} already exists")
        name = f"home-{plmn}"
        home = HomeCore(plmn, AuthCore(name, plmn, self.rng), Sepp(f"sepp.{name}", plmn, self.timing.sepp_processing_ms))
        home.auth.import_subscribers(subscribers)
        for agreement in self.sepp.agreements:
            if agreement.client_plmn == plmn:
                home.sepp.agreements.append(agreement)
        self.home_cores[plmn] = home
        return home

    def attach_ue(self, supi: Supi, key: bytes, gnb_id: str) -> UserEquipment:
        if gnb_id not in self.gnbs:
            raise NotFoundError(f"unknown gNB {gnb_id!r}")
        ue = UserEquipment(supi, key, gnb_id)
        self.ues[supi] = ue
        return ue

    def _record(self, at: Fraction, msg: ControlMessage, *, cause: str | None = None) -> None:
        self.messages.append(
            MessageRecord(at, msg.kind.value, msg.src, msg.dst, msg.supi, msg.kind is Kind.N32_FORWARD, cause)
        )

    def trace_rows(self) -> list[tuple[str, str, str, str, str, str]]:
        return [
            (f"{float(m.at) * 1000:.6f}", m.kind, m.src, m.dst, str(m.supi or ""), m.cause or "")
            for m in self.messages
        ]

    def client_of(self, supi: Supi) -> ClientRecord | None:
        return self.clients.by_plmn(supi.plmn)


def onboard_client(net: Network, spec: ClientSpec) -> SliceAllocation:
    """Provision a tenant: slice, SMF/UPF/PCF, routing, and its auth branch."""
    if net.clients.by_plmn(spec.plmn) is not None:
        raise ConflictError(f"PLMN {spec.plmn} already onboarded")
    if spec.client_id in net.clients.clients:
        raise ConflictError(f"client {spec.client_id!r} already onboarded")
    if spec.plmn == net.nh_plmn:
        raise ConflictError(f"PLMN {spec.plmn} is the neutral host's own")
    if spec.kind is ClientKind.OPERATOR:
        if spec.subscribers:
            raise ValidationError("subscribers", "operator clients keep their subscribers in the home UDM")
        if not spec.sepp_endpoint:
            raise ValidationError("sepp_endpoint", "operator clients need a SEPP endpoint")
        kind: OperatorProfile | NonOperatorProfile = OperatorProfile(spec.sepp_endpoint)
    else:
        if spec.home_subscribers:
            raise ValidationError("home_subscribers", "only operator clients have a home core")
        kind = NonOperatorProfile(tuple(spec.subscribers))
        for rec in spec.subscribers:
            if rec.supi.plmn != spec.plmn:
                raise ValidationError("subscribers", f"{rec.supi} does not belong to PLMN {spec.plmn}")
            if rec.supi in net.nh_auth.udm:
                raise ConflictError(f"subscriber {rec.supi} already provisioned")

    taken = set(net.allocations) | net.retired
    snssai = allocate_snssai(taken, spec.sst)
    record = ClientRecord(spec.client_id, spec.name or spec.client_id, spec.plmn, kind, snssai)
    net.clients.add(record)

    tag = f"{snssai}"
    smf_id, upf_id, pcf_id = f"smf.{tag}", f"upf.{tag}", f"pcf.{tag}"
    process = net.core.spawn(snssai)
    log = SliceInterfaceLog(snssai, enabled=net.log_packets)
    net.logs[snssai] = log
    net.upfs[upf_id] = Upf(upf_id, snssai, process, log, jitter=net.jitter, seed=net.seed, stream=spec.client_id)
    for nf_id, nf_type in ((smf_id, NfType.SMF), (upf_id, NfType.UPF), (pcf_id, NfType.PCF)):
        net.nrf.register(NfProfile(nf_id, nf_type, spec.plmn, snssai, net.core_id))
    net.pcf_policies[snssai] = spec.qos
    pool = net._planner.next_pool()
    net.pools[snssai] = pool
    net.amf_routes[spec.plmn] = snssai
    for gnb in net.gnbs.values():
        gnb.broadcast.append(spec.plmn)

    if spec.kind is ClientKind.OPERATOR:
        agreement = RoamingAgreement(net.nh_plmn, spec.plmn, net.links.n32)
        net.sepp.add_agreement(agreement)
        agreement.status = AgreementStatus.ACTIVE
        home = net.home_cores.get(spec.plmn)
        if home is None and spec.home_subscribers:
            home = net.add_home_core(spec.plmn, spec.home_subscribers)
        elif home is not None:
            home.sepp.agreements.append(agreement)
    else:
        net.nh_auth.import_subscribers(
            SubscriberRecord(rec.supi, rec.shared_key, frozenset({snssai})) for rec in spec.subscribers
        )

    allocation = SliceAllocation(snssai, spec.client_id, smf_id, upf_id, pcf_id, spec.qos, pool.network)
    net.allocations[snssai] = allocation
    return allocation


def revoke_agreement(net: Network, plmn: Plmn) -> RoamingAgreement:
    for agreement in net.sepp.agreements:
        if agreement.client_plmn == plmn and agreement.status is AgreementStatus.ACTIVE:
            agreement.status = AgreementStatus.REVOKED
            return agreement
    raise NotFoundError(f"no active agreement for {plmn}")


def offboard_client(net: Network, client_id: str) -> Network:
    record = net.clients.clients.get(client_id)
    if record is None:
        raise NotFoundError(f"unknown client {client_id!r}")
    snssai = record.slice
    for session in list(net.sessions.values()):
        if session.slice == snssai and session.active:
            release_session(net, session)
    allocation = net.allocations.pop(snssai)
    for nf_id in (allocation.smf_id, allocation.upf_id, allocation.pcf_id):
        net.nrf.deregister(nf_id)
    net.pcf_policies.pop(snssai, None)
    net.amf_routes.pop(record.plmn, None)
    for gnb in net.gnbs.values():
        if record.plmn in gnb.broadcast:
            gnb.broadcast.remove(record.plmn)
    if record.is_operator:
        for agreement in net.sepp.agreements:
            if agreement.client_plmn == record.plmn and agreement.status is not AgreementStatus.REVOKED:
                agreement.status = AgreementStatus.REVOKED
    else:
        for rec in record.subscribers:
            net.nh_auth.udm.pop(rec.supi, None)
    net.core.reap(snssai)
    net.retired.add(snssai)
    net.clients.remove(client_id)
    return net


# -- registration ---------------------------------------------------------------


class _Registration:
    """One UE walking the fixed registration sequence.

    Every message step charges one NF processing delay at its terminal
    receiver; a gNB relaying NAS inside a compound step is transparent.
    """

    def __init__(self, net: Network, ue: UserEquipment, ctx: RegistrationContext) -> None:
        self.net = net
        self.ue = ue
        self.ctx = ctx
        self.client: ClientRecord | None = None
        self.home: AuthCore = net.nh_auth
        t = net.timing
        ms = Fraction(1, 1000)
        self.p_nf = t.nf_processing_ms * ms
        self.p_ue = t.ue_compute_ms * ms
        self.d_ran = net.links.ran.delay_s
        self.d_n2 = net.links.n2.delay_s
        self.d_sbi = net.links.sbi.delay_s
        self.amf = "amf.nh"
        self.gnb = ue.gnb_id
        self.ue_id = f"ue.{ue.supi}"

    # plumbing

    def _send(self, msg: ControlMessage, delay: Fraction, then: Callable[[ControlMessage], None]) -> None:
        def arrive(event: SimEvent) -> None:
            self.net._record(event.at, msg)
            then(msg)

        self.net.clock.schedule_in(delay, msg.dst, msg, arrive)

    def _sbi(self, msg: ControlMessage, then: Callable[[ControlMessage], None]) -> None:
        """Service-based hop after local processing, crossing N32 when PLMNs differ."""
        if self.ctx.auth_path is AuthPath.DIRECT:
            self._send(msg, self.p_nf + self.d_sbi, then)
            return
        outbound = msg.src == self.amf
        local = self.net.sepp if outbound else self.net.home_cores[self.client.plmn].sepp
        remote_id = self.net.home_cores[self.client.plmn].sepp.instance_id if outbound else self.net.sepp.instance_id
        src_plmn, dst_plmn = (self.net.nh_plmn, self.client.plmn) if outbound else (self.client.plmn, self.net.nh_plmn)
        routed = ControlMessage(msg.kind, msg.src, msg.dst, msg.supi, msg.slice, msg.body, src_plmn, dst_plmn)
        half = self.d_sbi / 2

        def at_local_sepp(event: SimEvent) -> None:
            verdict = sepp_forward(local, routed)
            if isinstance(verdict, Rejected):
                rej = ControlMessage(Kind.SEPP_REJECT, local.instance_id, msg.src, msg.supi)
                self.net._record(event.at, rej, cause=verdict.cause)
                self._reject("no-roaming-agreement" if verdict.cause == "no-agreement" else verdict.cause,
                             from_amf_after=self.p_nf if outbound else None)
                return
            wrapped = ControlMessage(
                Kind.N32_FORWARD, local.instance_id, remote_id, msg.supi, msg.slice,
                verdict.message.body, src_plmn, dst_plmn,
            )
            sepp_ms = self.net.timing.sepp_processing_ms / 1000
            n32_s = verdict.delay_ms / 1000 - 2 * sepp_ms
            self._send(wrapped, sepp_ms + n32_s, lambda _m: self._send(msg, sepp_ms + half, then))

        self.net.clock.schedule_in(self.p_nf + half, local.instance_id, routed, at_local_sepp)

    # sequence

    def start(self) -> None:
        self.ctx.state = RegState.AUTHENTICATING
        req = ControlMessage(Kind.REGISTRATION_REQUEST, self.ue_id, self.gnb, self.ue.supi)
        self._send(req, self.d_ran, self._gnb_request)

    def _gnb_request(self, msg: ControlMessage) -> None:
        fwd = ControlMessage(Kind.REGISTRATION_REQUEST, self.gnb, self.amf, msg.supi)
        self._send(fwd, self.p_nf + self.d_n2, self._amf_request)

    def _amf_request(self, msg: ControlMessage) -> None:
        net = self.net
        client = net.client_of(self.ue.supi)
        if client is None or self.ue.supi.plmn not in net.amf_routes:
            self._reject("plmn-not-served", from_amf_after=self.p_nf)
            return
        self.client = client
        if client.is_operator:
            self.ctx.auth_path = AuthPath.ROAMING
            home = net.home_cores.get(client.plmn)
            if home is None:
                self._reject("home-unreachable", from_amf_after=self.p_nf)
                return
            self.home = home.auth
        else:
            self.ctx.auth_path = AuthPath.DIRECT
            self.home = net.nh_auth
        out = ControlMessage(Kind.AUTH_REQUEST, self.amf, self.home.ausf_id, msg.supi)
        self._sbi(out, self._ausf_request)

    def _ausf_request(self, msg: ControlMessage) -> None:
        out = ControlMessage(Kind.AUTH_VECTOR_REQUEST, self.home.ausf_id, self.home.udm_id, msg.supi)
        self._send(out, self.p_nf + self.d_sbi, self._udm_request)

    def _udm_request(self, msg: ControlMessage) -> None:
        vector = self.home.vector(msg.supi)
        body = {"ok": vector is not None}
        if vector is not None:
            body["nonce"], body["xres"] = vector
        out = ControlMessage(Kind.AUTH_VECTOR, self.home.udm_id, self.home.ausf_id, msg.supi, body=body)
        self._send(out, self.p_nf + self.d_sbi, self._ausf_vector)

    def _ausf_vector(self, msg: ControlMessage) -> None:
        if not msg.body["ok"]:
            out = ControlMessage(Kind.AUTH_RESULT, self.home.ausf_id, self.amf, msg.supi,
                                 body={"ok": False, "cause": "unknown-subscriber"})
            self._sbi(out, self._amf_result)
            return
        self.home.remember(msg.supi, msg.body["xres"])
        out = ControlMessage(Kind.AUTH_CHALLENGE, self.home.ausf_id, self.amf, msg.supi,
                             body={"nonce": msg.body["nonce"]})
        self._sbi(out, self._amf_challenge)

    def _amf_challenge(self, msg: ControlMessage) -> None:
        out = ControlMessage(Kind.AUTH_CHALLENGE, self.amf, self.ue_id, msg.supi, body=msg.body)
        self._send(out, self.p_nf + self.d_n2 + self.d_ran, self._ue_challenge)

    def _ue_challenge(self, msg: ControlMessage) -> None:
        res = self.ue.respond(msg.body["nonce"])
        out = ControlMessage(Kind.AUTH_RESPONSE, self.ue_id, self.amf, msg.supi, body={"res": res})
        self._send(out, self.p_nf + self.p_ue + self.d_ran + self.d_n2, self._amf_response)

    def _amf_response(self, msg: ControlMessage) -> None:
        out = ControlMessage(Kind.AUTH_CONFIRM, self.amf, self.home.ausf_id, msg.supi, body=msg.body)
        self._sbi(out, self._ausf_confirm)

    def _ausf_confirm(self, msg: ControlMessage) -> None:
        ok = self.home.confirm(msg.supi, msg.body["res"])
        body = {"ok": ok} if ok else {"ok": False, "cause": "auth-failure"}
        out = ControlMessage(Kind.AUTH_RESULT, self.home.ausf_id, self.amf, msg.supi, body=body)
        self._sbi(out, self._amf_result)

    def _amf_result(self, msg: ControlMessage) -> None:
        if not msg.body["ok"]:
            self._reject(msg.body["cause"], from_amf_after=self.p_nf)
            return
        snssai = self.net.amf_routes.get(self.ue.supi.plmn)
        if snssai is None:
            self._reject("plmn-not-served", from_amf_after=self.p_nf)
            return
        out = ControlMessage(Kind.REGISTRATION_ACCEPT, self.amf, self.ue_id, msg.supi, slice=snssai)

        def accepted(_m: ControlMessage) -> None:
            self._finish(RegState.REGISTERED, allowed=frozenset({snssai}))

        self._send(out, self.p_nf + self.d_n2 + self.d_ran, accepted)

    def _reject(self, cause: str, *, from_amf_after: Fraction | None) -> None:
        out = ControlMessage(Kind.REGISTRATION_REJECT, self.amf, self.ue_id, self.ue.supi, body={"cause": cause})
        delay = (from_amf_after or Fraction(0)) + self.d_n2 + self.d_ran

        def rejected(_m: ControlMessage) -> None:
            self._finish(RegState.REJECTED, cause=cause)

        def arrive(event: SimEvent) -> None:
            self.net._record(event.at, out, cause=f"reject.{cause}")
            rejected(out)

        self.net.clock.schedule_in(delay, out.dst, out, arrive)

    def _finish(self, state: RegState, *, allowed: frozenset[SNssai] = frozenset(), cause: str | None = None) -> None:
        def done(event: SimEvent) -> None:
            self.ctx.state = state
            self.ctx.allowed_snssai = allowed
            self.ctx.cause = cause
            self.ctx.finished_at = event.at

        # the UE's own NAS handling is the last processing charge
        self.net.clock.schedule_in(self.p_nf, self.ue_id, None, done)


def start_registration(net: Network, supi: Supi, at: Fraction | float | int = 0) -> RegistrationContext:
    """Schedule a registration; the returned context fills in as the clock runs."""
    at = Fraction(at) if not isinstance(at, Fraction) else at
    ue = net.ues.get(supi)
    if ue is None:
        # an unknown device still gets to knock; it will hold no valid key
        gnb_id = next(iter(net.gnbs), None)
        if gnb_id is None:
            raise PreconditionError("network has no gNB")
        ue = UserEquipment(supi, bytes(16), gnb_id)
    ctx = RegistrationContext(supi, supi.plmn, started_at=at)
    net.contexts.append(ctx)
    proc = _Registration(net, ue, ctx)
    net.clock.schedule(at, proc.ue_id, "registration.start", lambda _e: proc.start())
    return ctx


def register_ue(net: Network, supi: Supi, at: Fraction | float | int = 0) -> RegistrationContext:
    ctx = start_registration(net, supi, at)
    while not ctx.done and len(net.clock):
        net.clock.step()
    return ctx


# -- sessions ---------------------------------------------------------------------


def establish_pdu_session(net: Network, ctx: RegistrationContext, snssai: SNssai) -> PduSession:
    if ctx.state is not RegState.REGISTERED:
        raise PreconditionError(f"UE {ctx.supi} is not registered (state={ctx.state.value})")
    if snssai not in ctx.allowed_snssai:
        raise SessionError("slice-not-allowed", f"{snssai} not allowed for {ctx.supi}")
    ue = net.ues.get(ctx.supi)
    if ue is None:
        raise PreconditionError(f"no UE device for {ctx.supi}")
    now = net.clock.now
    ue_id, amf = f"ue.{ctx.supi}", "amf.nh"

    def note(kind: Kind, src: str, dst: str) -> None:
        net._record(now, ControlMessage(kind, src, dst, ctx.supi, snssai))

    note(Kind.SESSION_ESTABLISH_REQUEST, ue_id, amf)
    smfs = net.nrf.discover(NfType.SMF, snssai)
    if not smfs:
        raise SessionError("no-smf", f"no SMF serves {snssai}")
    smf_id = smfs[0].instance_id
    note(Kind.SESSION_CREATE, amf, smf_id)
    pcfs = net.nrf.discover(NfType.PCF, snssai)
    if pcfs:
        note(Kind.POLICY_REQUEST, smf_id, pcfs[0].instance_id)
    qos = net.pcf_policies.get(snssai, QosProfile())
    upfs = net.nrf.discover(NfType.UPF, snssai)
    if not upfs:
        raise SessionError("no-upf", f"no UPF serves {snssai}")
    upf = net.upfs[upfs[0].instance_id]
    ue_ip = net.pools[snssai].allocate()
    uplink, downlink = net._teids.allocate(), net._teids.allocate()
    net._session_seq += 1
    session = PduSession(
        f"pdu-{net._session_seq}", ctx.supi, snssai, ue_ip, uplink, downlink, qos, smf_id, upf.instance_id, ue.gnb_id
    )
    note(Kind.TUNNEL_SETUP, smf_id, upf.instance_id)
    upf.install(session, float(now))
    net.gnbs[ue.gnb_id].install(session)
    net.sessions[session.session_id] = session
    note(Kind.SESSION_ESTABLISH_ACCEPT, amf, ue_id)
    return session


def release_session(net: Network, session: PduSession) -> None:
    if not session.active:
        return
    session.state = SessionState.RELEASED
    upf = net.upfs.get(session.upf_id)
    if upf is not None:
        upf.release(session)
    pool = net.pools.get(session.slice)
    if pool is not None:
        pool.release(session.ue_ip)


def bind_flow(net: Network, flow_id: str, session: PduSession) -> None:
    """Install the gNB and UPF classifiers for one traffic flow."""
    net.gnbs[session.gnb_id].bind_flow(flow_id, session)
    net.upfs[session.upf_id].bind_flow(flow_id, session)
