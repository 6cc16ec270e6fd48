"""Rendering of run results: metrics CSV and summary JSON."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from collections.abc import Sequence
from pathlib import Path

from nhsim.control_plane import AuthPath, RegState
from nhsim.domain import NhsimError
from nhsim.runner import RunResult
from nhsim.traffic import Protocol, StatSummary, aggregate

METRICS_HEADER = [
    "scenario",
    "run",
    "seed",
    "flow_id",
    "slice",
    "protocol",
    "throughput_mbps",
    "plr",
    "offered_mbits",
    "delivered_mbits",
]


class OutputError(NhsimError):
    pass


def format_mbps(value: float) -> str:
    return f"{value:.1f}"


def format_plr(ratio: float) -> str:
    """Loss ratio rendered as a percentage with two decimals (0.0111 -> '1.11')."""
    return f"{ratio * 100:.2f}"


def metrics_csv(results: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for r in results:
        for m in r.flows:
            writer.writerow([
                r.scenario,
                r.run,
                r.seed,
                m.flow_id,
                str(m.slice) if m.slice is not None else "",
                m.protocol.value,
                format_mbps(m.throughput_mbps),
                format_plr(m.plr),
                f"{m.offered_mbits:.3f}",
                f"{m.delivered_mbits:.3f}",
            ])
    return buf.getvalue()


def _stat(summary: StatSummary, digits: int, scale: float = 1.0) -> dict:
    half = summary.ci95_halfwidth
    return {
        "n": summary.n,
        "mean": round(summary.mean * scale, digits),
        "ci95": None if half is None else round(half * scale, digits),
    }


def _configuration(name: str, runs: list[RunResult]) -> dict:
    out: dict = {"scenario": name, "runs": len(runs), "seeds": [r.seed for r in runs]}
    totals = [sum(m.throughput_mbps for m in r.flows if m.error is None) for r in runs]
    if any(r.flows for r in runs):
        total = aggregate(totals)
        out["total_throughput_mbps"] = round(total.mean, 1)
        out["total_throughput_ci95"] = None if total.ci95_halfwidth is None else round(total.ci95_halfwidth, 1)
    cbr_runs = [[m.plr for m in r.flows if m.protocol is Protocol.CBR and m.error is None] for r in runs]
    if any(cbr_runs):
        plr = aggregate([sum(x) / len(x) for x in cbr_runs if x])
        out["mean_plr_pct"] = round(plr.mean * 100, 2)
        out["mean_plr_ci95"] = None if plr.ci95_halfwidth is None else round(plr.ci95_halfwidth * 100, 2)

    flows = []
    if runs and runs[0].flows:
        for i, first in enumerate(runs[0].flows):
            per_run = [r.flows[i] for r in runs]
            entry = {
                "flow_id": first.flow_id,
                "slice": str(first.slice) if first.slice is not None else None,
                "protocol": first.protocol.value,
                "throughput_mbps": _stat(aggregate([m.throughput_mbps for m in per_run]), 1),
                "plr_pct": _stat(aggregate([m.plr for m in per_run]), 2, 100.0),
            }
            errors = sorted({m.error for m in per_run if m.error})
            if errors:
                entry["errors"] = errors
            flows.append(entry)
    out["flows"] = flows

    drops: Counter[str] = Counter()
    for r in runs:
        for m in r.flows:
            drops.update(m.drops_by_cause)
    out["drops_by_cause"] = dict(sorted(drops.items()))

    auth: dict = {}
    rejections: Counter[str] = Counter()
    for path in AuthPath:
        samples = [
            s.latency_ms for r in runs for s in r.auth if s.state is RegState.REGISTERED and s.path is path
        ]
        if samples:
            auth[path.value] = _stat(aggregate([float(x) for x in samples]), 3)
    for r in runs:
        for s in r.auth:
            if s.state is RegState.REJECTED:
                rejections[s.cause or "unknown"] += 1
    if auth:
        out["auth_latency_ms"] = auth
    if rejections:
        out["rejections"] = dict(sorted(rejections.items()))
    return out


def summary_json(results: Sequence[RunResult]) -> str:
    groups: dict[str, list[RunResult]] = {}
    for r in results:
        groups.setdefault(r.scenario, []).append(r)
    doc = {"configurations": [_configuration(name, runs) for name, runs in groups.items()]}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit_results(results: Sequence[RunResult], fmt: str = "both") -> dict[str, str]:
    """Render documents keyed by kind ('csv', 'json')."""
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    docs = {}
    if fmt in ("csv", "both"):
        docs["csv"] = metrics_csv(results)
    if fmt in ("json", "both"):
        docs["json"] = summary_json(results)
    return docs


def write_results(docs: dict[str, str], out_dir: str | Path, stem: str) -> list[Path]:
    out = Path(out_dir)
    names = {"csv": f"{stem}.metrics.csv", "json": f"{stem}.summary.json"}
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for kind, text in docs.items():
            path = out / names[kind]
            path.write_text(text, encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise OutputError(f"cannot write results to {out}: {exc.strerror or exc}") from None
    return written
