"""Scenario files: schema, validation, canonical form and the built-in set.

Scenarios are YAML documents. Field names mirror the dataclasses below;
unknown fields, dangling references and broken invariants are rejected
with the offending path in the message.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Any

import yaml

from nhsim.control_plane import NH_PLMN, ClientSpec, Links, Timing
from nhsim.domain import (
    DEFAULT_SST,
    ClientKind,
    NhsimError,
    Plmn,
    QosProfile,
    SubscriberRecord,
    Supi,
    ValidationError,
    default_key,
)
from nhsim.simcore import HostResource, LinkProfile
from nhsim.traffic import DEFAULT_FLOW_DURATION, DEFAULT_WINDOW_BYTES, FlowSpec, Protocol
from nhsim.user_plane import Direction

DEFAULT_DURATION = 60.0
DEFAULT_RUNS = 10


class ScenarioError(ValidationError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(path, message)
        self.path = path


@dataclass(frozen=True)
class Calibration:
    nh_plmn: Plmn = NH_PLMN
    nf_processing_ms: Fraction = Timing.nf_processing_ms
    ue_compute_ms: Fraction = Timing.ue_compute_ms
    sepp_processing_ms: Fraction = Timing.sepp_processing_ms
    service_jitter: float = 0.1
    queue_packets: int = 512
    cbr_packet_bytes: int = 1250
    cbr_burst_packets: int = 8
    greedy_packet_bytes: int = 1500
    warmup_s: float = 2.0
    log_packets: bool = False

    @property
    def timing(self) -> Timing:
        return Timing(self.nf_processing_ms, self.ue_compute_ms, self.sepp_processing_ms)


@dataclass(frozen=True)
class Registration:
    supi: Supi
    time: Fraction = Fraction(0)


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int = 0
    hosts: tuple[HostResource, ...] = ()
    links: Links = field(default_factory=Links.default)
    clients: tuple[ClientSpec, ...] = ()
    ue_placement: Mapping[Supi, str] = field(default_factory=dict)
    flows: tuple[FlowSpec, ...] = ()
    registrations: tuple[Registration, ...] = ()
    duration: float = DEFAULT_DURATION
    runs: int = DEFAULT_RUNS
    calibration: Calibration = field(default_factory=Calibration)

    @property
    def core_host(self) -> HostResource:
        return next(h for h in self.hosts if h.role == "core")

    @property
    def ran_hosts(self) -> list[HostResource]:
        return [h for h in self.hosts if h.role == "ran"]

    def subscriber_keys(self) -> dict[Supi, bytes]:
        keys = {}
        for c in self.clients:
            for rec in (*c.subscribers, *c.home_subscribers):
                keys[rec.supi] = rec.shared_key
        return keys


# -- parsing helpers ------------------------------------------------------------


def _fraction(value: Any, path: str) -> Fraction:
    if isinstance(value, bool):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    try:
        return Fraction(str(value)) if not isinstance(value, Fraction) else value
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(path, f"expected a number or 'p/q' fraction, got {value!r}") from None


def _float(value: Any, path: str) -> float:
    if isinstance(value, bool):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    try:
        return float(_fraction(value, path))
    except ScenarioError:
        raise
    except (TypeError, ValueError):
        raise ScenarioError(path, f"expected a number, got {value!r}") from None


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    return value


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioError(path, f"expected a non-empty string, got {value!r}")
    return value


def _mapping(value: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(value, Mapping):
        raise ScenarioError(path, f"expected a mapping, got {type(value).__name__}")
    for key in value:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}" if path else str(key), "unknown field")
    for key in sorted(required):
        if key not in value:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return dict(value)


def _list(value: Any, path: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ScenarioError(path, f"expected a list, got {type(value).__name__}")
    return value


def _wrap(path: str, fn, *args, **kwargs):
    """Re-raise constructor validation errors with the document path attached."""
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except ValidationError as exc:
        raise ScenarioError(f"{path}.{exc.field}" if exc.field else path, str(exc).split(": ", 1)[-1]) from None


def _plmn(value: Any, path: str) -> Plmn:
    d = _mapping(value, path, {"mcc", "mnc"}, {"mcc", "mnc"})
    return _wrap(path, Plmn, str(d["mcc"]), str(d["mnc"]))


def _supi(value: Any, path: str) -> Supi:
    return _wrap(path, Supi.parse, _str(value, path))


def _subscribers(value: Any, path: str, plmn: Plmn) -> tuple[SubscriberRecord, ...]:
    records = []
    for i, item in enumerate(_list(value, path)):
        p = f"{path}[{i}]"
        d = _mapping(item, p, {"msin", "key"}, {"msin"})
        supi = _wrap(p, Supi, plmn, str(d["msin"]))
        if "key" in d:
            try:
                key = bytes.fromhex(_str(d["key"], f"{p}.key"))
            except ValueError:
                raise ScenarioError(f"{p}.key", "expected 32 hex digits") from None
        else:
            key = default_key(supi)
        records.append(_wrap(p, SubscriberRecord, supi, key))
    return tuple(records)


_HOST_FIELDS = {f.name for f in fields(HostResource)}
_CLIENT_FIELDS = {"client_id", "name", "kind", "plmn", "sepp_endpoint", "subscribers", "home_subscribers", "qos", "sst"}
_FLOW_FIELDS = {"flow_id", "supi", "protocol", "rate_mbps", "window_bytes", "start", "duration", "direction"}
_CAL_FIELDS = {f.name for f in fields(Calibration)}
_TOP_FIELDS = {f.name for f in fields(Scenario)}


def _host(value: Any, path: str) -> HostResource:
    d = _mapping(value, path, _HOST_FIELDS, {"host_id"})
    kwargs: dict[str, Any] = {"host_id": _str(d["host_id"], f"{path}.host_id")}
    for name in ("cores",):
        if name in d:
            kwargs[name] = _int(d[name], f"{path}.{name}")
    for name in ("per_core_rate_k0_mbps", "per_flow_overhead_c", "multiproc_efficiency_eta", "udp_rate_multiplier_gamma"):
        if name in d:
            kwargs[name] = _float(d[name], f"{path}.{name}")
    if "role" in d:
        kwargs["role"] = _str(d["role"], f"{path}.role")
    try:
        return HostResource(**kwargs)
    except ValidationError as exc:
        raise ScenarioError(f"{path}.{exc.field.rsplit('.', 1)[-1]}", str(exc).split(": ", 1)[-1]) from None


def _links(value: Any, path: str) -> Links:
    d = _mapping(value, path, {"ran", "n2", "sbi", "n32"})
    defaults = Links.default()
    built = {}
    for name, default in defaults.items():
        if name in d:
            p = f"{path}.{name}"
            ld = _mapping(d[name], p, {"one_way_delay_ms"}, {"one_way_delay_ms"})
            delay = _fraction(ld["one_way_delay_ms"], f"{p}.one_way_delay_ms")
            if delay < 0:
                raise ScenarioError(f"{p}.one_way_delay_ms", "must be nonnegative")
            built[name] = LinkProfile(name, delay)
        else:
            built[name] = default
    return Links(**built)


def _qos(value: Any, path: str) -> QosProfile:
    d = _mapping(value, path, {"session_ambr_mbps", "burst_bytes"})
    ambr = _float(d.get("session_ambr_mbps", 0), f"{path}.session_ambr_mbps")
    burst = _int(d.get("burst_bytes", 0), f"{path}.burst_bytes")
    return _wrap(path, QosProfile, ambr, burst)


def _client(value: Any, path: str) -> ClientSpec:
    d = _mapping(value, path, _CLIENT_FIELDS, {"client_id", "kind", "plmn"})
    kind_text = _str(d["kind"], f"{path}.kind")
    try:
        kind = ClientKind(kind_text)
    except ValueError:
        raise ScenarioError(f"{path}.kind", "must be 'operator' or 'non-operator'") from None
    plmn = _plmn(d["plmn"], f"{path}.plmn")
    subscribers = _subscribers(d.get("subscribers"), f"{path}.subscribers", plmn)
    home = _subscribers(d.get("home_subscribers"), f"{path}.home_subscribers", plmn)
    if kind is ClientKind.OPERATOR:
        if subscribers:
            raise ScenarioError(f"{path}.subscribers", "operator clients keep subscribers in home_subscribers")
        if "sepp_endpoint" not in d:
            raise ScenarioError(f"{path}.sepp_endpoint", "missing required field for operator client")
    else:
        if not subscribers:
            raise ScenarioError(f"{path}.subscribers", "non-operator client needs at least one subscriber")
        if home:
            raise ScenarioError(f"{path}.home_subscribers", "only operator clients have a home core")
        if "sepp_endpoint" in d:
            raise ScenarioError(f"{path}.sepp_endpoint", "only operator clients peer over N32")
    return ClientSpec(
        client_id=_str(d["client_id"], f"{path}.client_id"),
        plmn=plmn,
        kind=kind,
        name=str(d.get("name", "")),
        sepp_endpoint=_str(d["sepp_endpoint"], f"{path}.sepp_endpoint") if "sepp_endpoint" in d else None,
        subscribers=subscribers,
        home_subscribers=home,
        qos=_qos(d.get("qos", {}), f"{path}.qos"),
        sst=_int(d.get("sst", DEFAULT_SST), f"{path}.sst"),
    )


def _flow(value: Any, path: str) -> FlowSpec:
    d = _mapping(value, path, _FLOW_FIELDS, {"flow_id", "supi", "protocol"})
    try:
        protocol = Protocol(_str(d["protocol"], f"{path}.protocol"))
    except ValueError:
        raise ScenarioError(f"{path}.protocol", "must be 'greedy' or 'cbr'") from None
    try:
        direction = Direction(d.get("direction", "uplink"))
    except ValueError:
        raise ScenarioError(f"{path}.direction", "must be 'uplink' or 'downlink'") from None
    rate = _float(d["rate_mbps"], f"{path}.rate_mbps") if "rate_mbps" in d else None
    window = _int(d["window_bytes"], f"{path}.window_bytes") if "window_bytes" in d else None
    if protocol is Protocol.CBR and window is not None:
        raise ScenarioError(f"{path}.window_bytes", "only greedy flows have a window")
    if protocol is Protocol.GREEDY and rate is not None:
        raise ScenarioError(f"{path}.rate_mbps", "only cbr flows have a fixed rate")
    if protocol is Protocol.CBR and rate is None:
        raise ScenarioError(f"{path}.rate_mbps", "cbr flows require a rate")
    try:
        return FlowSpec(
            flow_id=_str(d["flow_id"], f"{path}.flow_id"),
            supi=_supi(d["supi"], f"{path}.supi"),
            protocol=protocol,
            rate_mbps=rate,
            window_bytes=window if window is not None else (DEFAULT_WINDOW_BYTES if protocol is Protocol.GREEDY else None),
            start=_float(d.get("start", 0), f"{path}.start"),
            duration=_float(d.get("duration", DEFAULT_FLOW_DURATION), f"{path}.duration"),
            direction=direction,
        )
    except ScenarioError:
        raise
    except ValidationError as exc:
        raise ScenarioError(path, str(exc).split(": ", 1)[-1]) from None


def _calibration(value: Any, path: str) -> Calibration:
    d = _mapping(value, path, _CAL_FIELDS)
    kw: dict[str, Any] = {}
    if "nh_plmn" in d:
        kw["nh_plmn"] = _plmn(d["nh_plmn"], f"{path}.nh_plmn")
    for name in ("nf_processing_ms", "ue_compute_ms", "sepp_processing_ms"):
        if name in d:
            kw[name] = _fraction(d[name], f"{path}.{name}")
            if kw[name] < 0:
                raise ScenarioError(f"{path}.{name}", "must be nonnegative")
    for name in ("service_jitter", "warmup_s"):
        if name in d:
            kw[name] = _float(d[name], f"{path}.{name}")
    for name in ("queue_packets", "cbr_packet_bytes", "cbr_burst_packets", "greedy_packet_bytes"):
        if name in d:
            kw[name] = _int(d[name], f"{path}.{name}")
            if kw[name] < 1:
                raise ScenarioError(f"{path}.{name}", "must be a positive integer")
    if "log_packets" in d:
        if not isinstance(d["log_packets"], bool):
            raise ScenarioError(f"{path}.log_packets", "expected true or false")
        kw["log_packets"] = d["log_packets"]
    cal = Calibration(**kw)
    if not 0 <= cal.service_jitter < 1:
        raise ScenarioError(f"{path}.service_jitter", "must lie in [0, 1)")
    if cal.warmup_s < 0:
        raise ScenarioError(f"{path}.warmup_s", "must be nonnegative")
    for name in ("cbr_packet_bytes", "greedy_packet_bytes"):
        if getattr(cal, name) > 1500:
            raise ScenarioError(f"{path}.{name}", "must not exceed the 1500-byte MTU")
    return cal


# -- loading -----------------------------------------------------------------------


def load_scenario(document: str | Mapping) -> Scenario:
    """Parse and fully validate a scenario document (YAML text or parsed mapping)."""
    if isinstance(document, str):
        try:
            data = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise ScenarioError("<document>", f"not valid YAML: {exc}") from None
    else:
        data = document
    d = _mapping(data, "", _TOP_FIELDS, {"name"})
    name = _str(d["name"], "name")
    seed = _int(d.get("seed", 0), "seed")
    if not -(2**63) <= seed < 2**64:
        raise ScenarioError("seed", "must fit in 64 bits")
    hosts = tuple(_host(h, f"hosts[{i}]") for i, h in enumerate(_list(d.get("hosts"), "hosts")))
    links = _links(d.get("links", {}), "links")
    clients = tuple(_client(c, f"clients[{i}]") for i, c in enumerate(_list(d.get("clients"), "clients")))
    placement_raw = d.get("ue_placement") or {}
    if not isinstance(placement_raw, Mapping):
        raise ScenarioError("ue_placement", "expected a mapping of SUPI to RAN host")
    placement = {_supi(k, f"ue_placement[{k!r}]"): _str(v, f"ue_placement[{k!r}]") for k, v in placement_raw.items()}
    flows = tuple(_flow(f, f"flows[{i}]") for i, f in enumerate(_list(d.get("flows"), "flows")))
    regs = []
    for i, r in enumerate(_list(d.get("registrations"), "registrations")):
        p = f"registrations[{i}]"
        rd = _mapping(r, p, {"supi", "time"}, {"supi"})
        t = _fraction(rd.get("time", 0), f"{p}.time")
        if t < 0:
            raise ScenarioError(f"{p}.time", "must be nonnegative")
        regs.append(Registration(_supi(rd["supi"], f"{p}.supi"), t))
    duration = _float(d.get("duration", DEFAULT_DURATION), "duration")
    runs = _int(d.get("runs", DEFAULT_RUNS), "runs")
    calibration = _calibration(d.get("calibration", {}), "calibration")
    scenario = Scenario(name, seed, hosts, links, clients, placement, flows, tuple(regs), duration, runs, calibration)
    validate(scenario)
    return scenario


def validate(s: Scenario) -> Scenario:
    if s.duration <= 0:
        raise ScenarioError("duration", "invariant violated: duration > 0")
    if s.runs < 1:
        raise ScenarioError("runs", "invariant violated: runs >= 1")
    host_ids = [h.host_id for h in s.hosts]
    for i, hid in enumerate(host_ids):
        if hid in host_ids[:i]:
            raise ScenarioError(f"hosts[{i}].host_id", f"duplicate host {hid!r}")
    cores = [h for h in s.hosts if h.role == "core"]
    if len(cores) != 1:
        raise ScenarioError("hosts", f"invariant violated: exactly one host with role 'core' (found {len(cores)})")
    ran_ids = {h.host_id for h in s.hosts if h.role == "ran"}

    seen_ids, seen_plmns = {}, {}
    known: dict[Supi, str] = {}
    for i, c in enumerate(s.clients):
        p = f"clients[{i}]"
        if c.client_id in seen_ids:
            raise ScenarioError(f"{p}.client_id", f"duplicate client id {c.client_id!r}")
        if c.plmn in seen_plmns:
            raise ScenarioError(f"{p}.plmn", f"invariant violated: PLMN {c.plmn} already used by {seen_plmns[c.plmn]}")
        if c.plmn == s.calibration.nh_plmn:
            raise ScenarioError(f"{p}.plmn", "clashes with the neutral host PLMN")
        seen_ids[c.client_id] = p
        seen_plmns[c.plmn] = p
        field_name = "home_subscribers" if c.kind is ClientKind.OPERATOR else "subscribers"
        for j, rec in enumerate(c.subscribers or c.home_subscribers):
            if rec.supi in known:
                raise ScenarioError(f"{p}.{field_name}[{j}]", f"duplicate SUPI {rec.supi}")
            known[rec.supi] = f"{p}.{field_name}[{j}]"

    def need(supi: Supi, path: str) -> None:
        if supi not in known:
            raise ScenarioError(path, f"dangling reference: SUPI {supi} not found in any clients[*].subscribers or home_subscribers")

    for supi, host in s.ue_placement.items():
        need(supi, f"ue_placement[{str(supi)!r}]")
        if host not in ran_ids:
            raise ScenarioError(
                f"ue_placement[{str(supi)!r}]",
                f"dangling reference: {known[supi]} placed on {host!r}, which is not a RAN host in hosts[*]",
            )
    flow_ids = set()
    for i, f in enumerate(s.flows):
        if f.flow_id in flow_ids:
            raise ScenarioError(f"flows[{i}].flow_id", f"duplicate flow id {f.flow_id!r}")
        flow_ids.add(f.flow_id)
        need(f.supi, f"flows[{i}].supi")
        if f.supi not in s.ue_placement:
            raise ScenarioError(f"flows[{i}].supi", f"dangling reference: {f.supi} has no ue_placement entry")
    for i, r in enumerate(s.registrations):
        if r.supi not in s.ue_placement:
            raise ScenarioError(f"registrations[{i}].supi", f"dangling reference: {r.supi} has no ue_placement entry")
    return s


# -- canonical form ------------------------------------------------------------------


def _num(value: Fraction | float | int) -> Any:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value)
        as_float = float(value)
        if Fraction(repr(as_float)) == value:
            return as_float
        return f"{value.numerator}/{value.denominator}"
    return value


def _plmn_doc(p: Plmn) -> dict:
    return {"mcc": p.mcc, "mnc": p.mnc}


def _subs_doc(records) -> list[dict]:
    return [{"msin": r.supi.msin, "key": r.shared_key.hex()} for r in records]


def to_document(s: Scenario) -> dict:
    """The canonical mapping form; :func:`load_scenario` of it returns an equal Scenario."""
    clients = []
    for c in s.clients:
        cd: dict[str, Any] = {"client_id": c.client_id, "name": c.name, "kind": c.kind.value, "plmn": _plmn_doc(c.plmn)}
        if c.sepp_endpoint is not None:
            cd["sepp_endpoint"] = c.sepp_endpoint
        if c.subscribers:
            cd["subscribers"] = _subs_doc(c.subscribers)
        if c.home_subscribers:
            cd["home_subscribers"] = _subs_doc(c.home_subscribers)
        cd["qos"] = {"session_ambr_mbps": c.qos.session_ambr_mbps, "burst_bytes": c.qos.burst_bytes}
        cd["sst"] = c.sst
        clients.append(cd)
    flows = []
    for f in s.flows:
        fd: dict[str, Any] = {"flow_id": f.flow_id, "supi": str(f.supi), "protocol": f.protocol.value}
        if f.protocol is Protocol.CBR:
            fd["rate_mbps"] = f.rate_mbps
        else:
            fd["window_bytes"] = f.window_bytes
        fd.update(start=f.start, duration=f.duration, direction=f.direction.value)
        flows.append(fd)
    cal = s.calibration
    return {
        "name": s.name,
        "seed": s.seed,
        "duration": s.duration,
        "runs": s.runs,
        "hosts": [{f.name: getattr(h, f.name) for f in fields(HostResource)} for h in s.hosts],
        "links": {name: {"one_way_delay_ms": _num(link.one_way_delay_ms)} for name, link in s.links.items()},
        "clients": clients,
        "ue_placement": {str(k): v for k, v in s.ue_placement.items()},
        "flows": flows,
        "registrations": [{"supi": str(r.supi), "time": _num(r.time)} for r in s.registrations],
        "calibration": {
            "nh_plmn": _plmn_doc(cal.nh_plmn),
            "nf_processing_ms": _num(cal.nf_processing_ms),
            "ue_compute_ms": _num(cal.ue_compute_ms),
            "sepp_processing_ms": _num(cal.sepp_processing_ms),
            "service_jitter": cal.service_jitter,
            "queue_packets": cal.queue_packets,
            "cbr_packet_bytes": cal.cbr_packet_bytes,
            "cbr_burst_packets": cal.cbr_burst_packets,
            "greedy_packet_bytes": cal.greedy_packet_bytes,
            "warmup_s": cal.warmup_s,
            "log_packets": cal.log_packets,
        },
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(to_document(s), sort_keys=False, default_flow_style=False)


# -- built-ins ------------------------------------------------------------------------

CORE_VM = "vm1"
RAN_VMS = ("vm2", "vm3", "vm4", "vm5")

# client PLMNs in onboarding order; the second is the operator
_CLIENT_PLMNS = (Plmn("001", "01"), Plmn("001", "02"), Plmn("001", "03"), Plmn("001", "04"))


def _paper_hosts() -> tuple[HostResource, ...]:
    return (HostResource(CORE_VM, cores=2), *(HostResource(vm, cores=1, role="ran") for vm in RAN_VMS))


def _records(plmn: Plmn, count: int) -> tuple[SubscriberRecord, ...]:
    out = []
    for k in range(1, count + 1):
        supi = Supi(plmn, f"{k:09d}")
        out.append(SubscriberRecord(supi, default_key(supi)))
    return tuple(out)


def _client_spec(idx: int, plmn: Plmn, n_users: int, operator: bool) -> ClientSpec:
    letter = "abcd"[idx]
    if operator:
        return ClientSpec(
            client_id=f"operator-{letter}",
            plmn=plmn,
            kind=ClientKind.OPERATOR,
            name=f"Operator client {letter.upper()}",
            sepp_endpoint=f"sepp.{plmn}",
            home_subscribers=_records(plmn, n_users),
        )
    return ClientSpec(
        client_id=f"client-{letter}",
        plmn=plmn,
        kind=ClientKind.NON_OPERATOR,
        name=f"Non-operator client {letter.upper()}",
        subscribers=_records(plmn, n_users),
    )


def _throughput_scenario(name: str, n_users: int, four: bool, protocol: Protocol, rate: float | None) -> Scenario:
    per_vm = n_users // len(RAN_VMS)
    if four:
        clients = tuple(_client_spec(i, plmn, per_vm, operator=(i == 1)) for i, plmn in enumerate(_CLIENT_PLMNS))
        placement = {}
        for client, vm in zip(clients, RAN_VMS):
            for rec in (*client.subscribers, *client.home_subscribers):
                placement[rec.supi] = vm
    else:
        clients = (_client_spec(0, _CLIENT_PLMNS[0], n_users, operator=False),)
        placement = {rec.supi: RAN_VMS[i // per_vm] for i, rec in enumerate(clients[0].subscribers)}
    flows = []
    for i, supi in enumerate(placement):
        flows.append(
            FlowSpec(
                flow_id=f"f{i + 1}",
                supi=supi,
                protocol=protocol,
                rate_mbps=rate,
                window_bytes=DEFAULT_WINDOW_BYTES if protocol is Protocol.GREEDY else None,
                start=1.0,
                duration=60.0,
            )
        )
    return Scenario(
        name=name,
        seed=1,
        hosts=_paper_hosts(),
        clients=clients,
        ue_placement=placement,
        flows=tuple(flows),
        registrations=tuple(Registration(supi) for supi in placement),
        duration=61.0,
        runs=10,
    )


def _auth_scenario() -> Scenario:
    clients = (
        _client_spec(0, _CLIENT_PLMNS[0], 1, operator=False),
        _client_spec(1, _CLIENT_PLMNS[1], 1, operator=True),
    )
    placement = {clients[0].subscribers[0].supi: RAN_VMS[0], clients[1].home_subscribers[0].supi: RAN_VMS[1]}
    return Scenario(
        name="paper-auth",
        seed=1,
        hosts=(HostResource(CORE_VM, cores=2), HostResource(RAN_VMS[0], cores=1, role="ran"),
               HostResource(RAN_VMS[1], cores=1, role="ran")),
        clients=clients,
        ue_placement=placement,
        registrations=tuple(Registration(supi) for supi in placement),
        duration=1.0,
        runs=10,
    )


_BUILTINS = {
    "paper-auth": _auth_scenario,
    "paper-table2-single": lambda: _throughput_scenario("paper-table2-single", 8, False, Protocol.GREEDY, None),
    "paper-table2-four": lambda: _throughput_scenario("paper-table2-four", 8, True, Protocol.GREEDY, None),
    "paper-table3-single": lambda: _throughput_scenario("paper-table3-single", 4, False, Protocol.GREEDY, None),
    "paper-table3-four": lambda: _throughput_scenario("paper-table3-four", 4, True, Protocol.GREEDY, None),
    "paper-table4-single": lambda: _throughput_scenario("paper-table4-single", 8, False, Protocol.CBR, 23.1),
    "paper-table4-four": lambda: _throughput_scenario("paper-table4-four", 8, True, Protocol.CBR, 23.1),
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin_document(name: str) -> str:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise NhsimError(f"unknown built-in scenario {name!r}; try one of {', '.join(_BUILTINS)}") from None
    return dump_scenario(factory())


def builtin(name: str) -> Scenario:
    return load_scenario(builtin_document(name))
