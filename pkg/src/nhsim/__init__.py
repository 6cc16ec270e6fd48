"""Discrete-event simulator of a multi-tenant neutral-host 5G network."""

from nhsim.control_plane import Network, establish_pdu_session, offboard_client, onboard_client, register_ue
from nhsim.domain import ClientKind, NhsimError, Plmn, SNssai, Supi, ValidationError
from nhsim.runner import measure_auth_latencies, run_cbr_flows, run_greedy_flows, run_once, run_scenario
from nhsim.scenario import Scenario, builtin, builtin_names, dump_scenario, load_scenario
from nhsim.traffic import FlowMetrics, FlowSpec, Protocol, aggregate

__version__ = "0.1.0"

__all__ = [
    "ClientKind",
    "FlowMetrics",
    "FlowSpec",
    "Network",
    "NhsimError",
    "Plmn",
    "Protocol",
    "SNssai",
    "Scenario",
    "Supi",
    "ValidationError",
    "aggregate",
    "builtin",
    "builtin_names",
    "dump_scenario",
    "establish_pdu_session",
    "load_scenario",
    "measure_auth_latencies",
    "offboard_client",
    "onboard_client",
    "register_ue",
    "run_cbr_flows",
    "run_greedy_flows",
    "run_once",
    "run_scenario",
]
