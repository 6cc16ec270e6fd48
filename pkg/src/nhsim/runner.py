"""Turn a scenario into a network, drive it, and collect per-run results."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from fractions import Fraction

from nhsim.control_plane import (
    AuthPath,
    Network,
    PreconditionError,
    RegistrationContext,
    RegState,
    SessionError,
    bind_flow,
    establish_pdu_session,
    onboard_client,
    start_registration,
)
from nhsim.scenario import Scenario
from nhsim.traffic import FlowMetrics, Protocol, run_flows
from nhsim.user_plane import PduSession


@dataclass(frozen=True)
class AuthSample:
    supi: str
    path: AuthPath | None
    state: RegState
    latency_ms: Fraction | None
    cause: str | None


@dataclass
class RunResult:
    scenario: str
    run: int
    seed: int
    flows: list[FlowMetrics]
    auth: list[AuthSample]
    network: Network = field(repr=False)
    session_errors: dict[str, str] = field(default_factory=dict)


def build_network(scenario: Scenario, seed: int, *, log_packets: bool | None = None) -> Network:
    cal = scenario.calibration
    net = Network(
        scenario.core_host,
        links=scenario.links,
        timing=cal.timing,
        nh_plmn=cal.nh_plmn,
        seed=seed,
        queue_packets=cal.queue_packets,
        jitter=cal.service_jitter,
        log_packets=cal.log_packets if log_packets is None else log_packets,
    )
    for host in scenario.ran_hosts:
        net.add_gnb(host.host_id)
    for spec in scenario.clients:
        onboard_client(net, spec)
    keys = scenario.subscriber_keys()
    for supi, host_id in scenario.ue_placement.items():
        net.attach_ue(supi, keys[supi], f"gnb.{host_id}")
    return net


def _sessions(net: Network, contexts: Iterable[RegistrationContext]) -> tuple[dict, dict[str, str]]:
    sessions: dict = {}
    errors: dict[str, str] = {}
    for ctx in contexts:
        if ctx.state is not RegState.REGISTERED or ctx.supi in sessions:
            continue
        try:
            snssai = min(ctx.allowed_snssai)
            sessions[ctx.supi] = establish_pdu_session(net, ctx, snssai)
        except (PreconditionError, SessionError, ValueError) as exc:
            errors[str(ctx.supi)] = getattr(exc, "cause", str(exc))
    return sessions, errors


def run_once(scenario: Scenario, run_index: int = 0, *, log_packets: bool | None = None) -> RunResult:
    """One repetition with seed ``scenario.seed + run_index``."""
    seed = scenario.seed + run_index
    net = build_network(scenario, seed, log_packets=log_packets)
    contexts = [start_registration(net, r.supi, r.time) for r in scenario.registrations]
    net.clock.run()
    sessions, errors = _sessions(net, contexts)
    for spec in scenario.flows:
        session: PduSession | None = sessions.get(spec.supi)
        if session is not None:
            bind_flow(net, spec.flow_id, session)
    cal = scenario.calibration
    metrics = run_flows(
        net,
        scenario.flows,
        horizon=scenario.duration,
        warmup=cal.warmup_s,
        seed=seed,
        cbr_packet_bytes=cal.cbr_packet_bytes,
        cbr_burst_packets=cal.cbr_burst_packets,
        greedy_packet_bytes=cal.greedy_packet_bytes,
    )
    for spec, m in zip(scenario.flows, metrics):
        if m.error == "no-session" and str(spec.supi) in errors:
            m.error = errors[str(spec.supi)]
    auth = [AuthSample(str(c.supi), c.auth_path, c.state, c.latency_ms, c.cause) for c in contexts]
    return RunResult(scenario.name, run_index, seed, metrics, auth, net, errors)


def run_scenario(scenario: Scenario, *, runs: int | None = None, seed: int | None = None) -> list[RunResult]:
    """All repetitions of ``scenario`` in seed order."""
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    n = scenario.runs if runs is None else runs
    return [run_once(scenario, i) for i in range(n)]


def _only(scenario: Scenario, protocol: Protocol) -> Scenario:
    return replace(scenario, flows=tuple(f for f in scenario.flows if f.protocol is protocol))


def run_greedy_flows(scenario: Scenario, run_index: int = 0) -> list[FlowMetrics]:
    return run_once(_only(scenario, Protocol.GREEDY), run_index).flows


def run_cbr_flows(scenario: Scenario, run_index: int = 0) -> list[FlowMetrics]:
    return run_once(_only(scenario, Protocol.CBR), run_index).flows


def measure_auth_latencies(scenario: Scenario, *, runs: int | None = None) -> dict[str, list[Fraction]]:
    """Registration latencies in ms, grouped by authentication path.

    Only the control plane is exercised; flows in the scenario are ignored.
    """
    bare = replace(scenario, flows=())
    out: dict[str, list[Fraction]] = {p.value: [] for p in AuthPath}
    for result in run_scenario(bare, runs=runs):
        for sample in result.auth:
            if sample.state is RegState.REGISTERED and sample.path is not None:
                out[sample.path.value].append(sample.latency_ms)
    return out

