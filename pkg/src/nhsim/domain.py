"""Identifier and tenant types shared by the whole simulator."""

from __future__ import annotations

import hashlib
import ipaddress
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

SST_MAX = 0xFF
SD_MAX = 0xFFFFFF
DEFAULT_SST = 1
MAX_PACKET_BYTES = 1500


class NhsimError(Exception):
    """Base class for every error raised by the simulator."""


class ValidationError(NhsimError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ConflictError(NhsimError):
    pass


class NotFoundError(NhsimError):
    pass


class AllocationError(NhsimError):
    pass


class ClientKind(str, Enum):
    OPERATOR = "operator"
    NON_OPERATOR = "non-operator"


def _check_digits(field_name: str, value: str, lengths: tuple[int, ...]) -> None:
    if not isinstance(value, str) or not value.isascii() or not value.isdigit():
        raise ValidationError(field_name, f"expected decimal digits, got {value!r}")
    if len(value) not in lengths:
        allowed = " or ".join(str(n) for n in lengths)
        raise ValidationError(field_name, f"length must be {allowed} digits, got {len(value)}")


@dataclass(frozen=True, order=True)
class Plmn:
    mcc: str
    mnc: str

    def __post_init__(self) -> None:
        _check_digits("mcc", self.mcc, (3,))
        _check_digits("mnc", self.mnc, (2, 3))

    def __str__(self) -> str:
        return f"{self.mcc}-{self.mnc}"


def validate_plmn(mcc: str, mnc: str) -> Plmn:
    return Plmn(mcc, mnc)


@dataclass(frozen=True, order=True)
class SNssai:
    sst: int
    sd: int

    def __post_init__(self) -> None:
        if not 0 <= self.sst <= SST_MAX:
            raise ValidationError("sst", f"{self.sst} outside 0..{SST_MAX}")
        if not 0 <= self.sd <= SD_MAX:
            raise ValidationError("sd", f"{self.sd} outside 0..{SD_MAX:#x}")

    def __str__(self) -> str:
        return f"{self.sst}-{self.sd:06x}"

    @classmethod
    def parse(cls, text: str) -> SNssai:
        sst, _, sd = text.partition("-")
        if not sd:
            raise ValidationError("snssai", f"expected '<sst>-<sd hex>', got {text!r}")
        return cls(int(sst), int(sd, 16))


def allocate_snssai(allocated: Iterable[SNssai], sst: int = DEFAULT_SST) -> SNssai:
    """Return the slice ``(sst, sd)`` with the smallest free ``sd >= 1``."""
    if not 0 <= sst <= SST_MAX:
        raise ValidationError("sst", f"{sst} outside 0..{SST_MAX}")
    used = sorted({s.sd for s in allocated if s.sst == sst and s.sd >= 1})
    sd = 1
    for taken in used:
        if taken != sd:
            break
        sd += 1
    if sd > SD_MAX:
        raise AllocationError(f"sd space exhausted for sst={sst}")
    return SNssai(sst, sd)


@dataclass(frozen=True, order=True)
class Supi:
    plmn: Plmn
    msin: str

    def __post_init__(self) -> None:
        _check_digits("msin", self.msin, (9, 10))

    def __str__(self) -> str:
        return f"{self.plmn}-{self.msin}"

    @classmethod
    def parse(cls, text: str) -> Supi:
        parts = text.split("-")
        if len(parts) != 3:
            raise ValidationError("supi", f"expected '<mcc>-<mnc>-<msin>', got {text!r}")
        return cls(Plmn(parts[0], parts[1]), parts[2])


def default_key(supi: Supi) -> bytes:
    """Deterministic 128-bit key used when a scenario omits one."""
    return hashlib.sha256(f"key:{supi}".encode()).digest()[:16]


@dataclass(frozen=True)
class SubscriberRecord:
    supi: Supi
    shared_key: bytes
    allowed_snssai: frozenset[SNssai] = frozenset()

    def __post_init__(self) -> None:
        if len(self.shared_key) != 16:
            raise ValidationError("shared_key", "must be exactly 128 bits")


@dataclass(frozen=True)
class QosProfile:
    """Per-session policy; an AMBR of 0 means the session is uncapped."""

    session_ambr_mbps: float = 0.0
    burst_bytes: int = 0

    def __post_init__(self) -> None:
        if self.session_ambr_mbps < 0:
            raise ValidationError("session_ambr_mbps", "must be nonnegative")
        if self.burst_bytes < 0:
            raise ValidationError("burst_bytes", "must be nonnegative")
        if self.session_ambr_mbps > 0 and self.burst_bytes < MAX_PACKET_BYTES:
            raise ValidationError(
                "burst_bytes", f"must hold one maximum packet ({MAX_PACKET_BYTES} bytes) when AMBR is set"
            )

    @property
    def limited(self) -> bool:
        return self.session_ambr_mbps > 0


@dataclass(frozen=True)
class OperatorProfile:
    sepp_endpoint: str


@dataclass(frozen=True)
class NonOperatorProfile:
    subscribers: tuple[SubscriberRecord, ...]

    def __post_init__(self) -> None:
        if not self.subscribers:
            raise ValidationError("subscribers", "non-operator client needs at least one subscriber")


@dataclass(frozen=True)
class ClientRecord:
    client_id: str
    name: str
    plmn: Plmn
    kind: OperatorProfile | NonOperatorProfile
    slice: SNssai

    @property
    def is_operator(self) -> bool:
        return isinstance(self.kind, OperatorProfile)

    @property
    def subscribers(self) -> tuple[SubscriberRecord, ...]:
        if isinstance(self.kind, NonOperatorProfile):
            return self.kind.subscribers
        return ()


@dataclass
class ClientBook:
    """Tenant directory enforcing one PLMN per client and one client per slice."""

    clients: dict[str, ClientRecord] = field(default_factory=dict)

    def add(self, record: ClientRecord) -> None:
        if record.client_id in self.clients:
            raise ConflictError(f"client {record.client_id!r} already exists")
        for other in self.clients.values():
            if other.plmn == record.plmn:
                raise ConflictError(f"PLMN {record.plmn} already owned by client {other.client_id!r}")
            if other.slice == record.slice:
                raise ConflictError(f"slice {record.slice} already bound to client {other.client_id!r}")
        self.clients[record.client_id] = record

    def remove(self, client_id: str) -> ClientRecord:
        try:
            return self.clients.pop(client_id)
        except KeyError:
            raise NotFoundError(f"unknown client {client_id!r}") from None

    def by_plmn(self, plmn: Plmn) -> ClientRecord | None:
        for record in self.clients.values():
            if record.plmn == plmn:
                return record
        return None

    def __iter__(self):
        return iter(self.clients.values())

    def __len__(self) -> int:
        return len(self.clients)


@dataclass
class IpPool:
    network: ipaddress.IPv4Network
    _next: int = 2
    _released: list[ipaddress.IPv4Address] = field(default_factory=list)

    def allocate(self) -> ipaddress.IPv4Address:
        if self._released:
            return self._released.pop(0)
        # .0 is the network address, .1 the slice gateway, last is broadcast
        if self._next >= self.network.num_addresses - 1:
            raise AllocationError(f"IP pool {self.network} exhausted")
        addr = self.network.network_address + self._next
        self._next += 1
        return addr

    def release(self, addr: ipaddress.IPv4Address) -> None:
        self._released.append(addr)
        self._released.sort()

    def __contains__(self, addr: ipaddress.IPv4Address) -> bool:
        return addr in self.network


class PoolPlanner:
    """Hands out contiguous /24 UE pools in onboarding order; pools are never reused."""

    def __init__(self, base: str = "10.45.0.0/16") -> None:
        self._subnets = ipaddress.IPv4Network(base).subnets(new_prefix=24)

    def next_pool(self) -> IpPool:
        try:
            return IpPool(next(self._subnets))
        except StopIteration:
            raise AllocationError("no UE address pools left") from None


@dataclass(frozen=True)
class SliceAllocation:
    slice: SNssai
    client_id: str
    smf_id: str
    upf_id: str
    pcf_id: str
    qos: QosProfile
    ue_ip_pool: ipaddress.IPv4Network
