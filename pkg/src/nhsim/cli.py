"""Command-line entry point: ``nhsim run|reproduce|validate|list-scenarios|show``."""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from dataclasses import replace

from nhsim.domain import NhsimError, ValidationError
from nhsim.results import OutputError, emit_results, write_results
from nhsim.runner import RunResult, run_scenario
from nhsim.scenario import Scenario, builtin, builtin_document, builtin_names, load_scenario
from nhsim.traffic import Protocol, aggregate

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

# published measurements the simulated values are printed against
REFERENCE = {
    "table2": {"single": 177.2, "four": 286.7, "change": 61.8},
    "table3": {"single": 201.4, "four": 325.7, "change": 61.7},
    "table4": {"single": 1.11, "four": 0.036, "change": -96.8},
    "auth": {"direct": 239.9, "roaming": 262.4, "delta": 22.5},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _fail(kind: str, message: str, code: int, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload), file=sys.stderr)
    return code


def _read(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    return load_scenario(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="directory for output files")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--runs", type=int, help="override the repetition count")
    p.add_argument("--quiet", action="store_true", help="suppress console output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nhsim", description="Neutral-host 5G network simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("file")
    _common(p)

    p = sub.add_parser("reproduce", help="run a built-in single/four-slice pair and compare")
    p.add_argument("target", choices=("table2", "table3", "table4", "auth"))
    _common(p)

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("file")

    sub.add_parser("list-scenarios", help="list built-in scenarios")

    p = sub.add_parser("show", help="print a built-in scenario in canonical form")
    p.add_argument("name")
    return parser


def _with_overrides(s: Scenario, args: argparse.Namespace) -> Scenario:
    if args.runs is not None:
        if args.runs < 1:
            raise UsageError("--runs must be >= 1")
        s = replace(s, runs=args.runs)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    return s


def _emit(results: list[RunResult], args: argparse.Namespace, stem: str) -> None:
    if args.out is None:
        return
    paths = write_results(emit_results(results, args.format), args.out, stem)
    if not args.quiet:
        for path in paths:
            print(f"wrote {path}")


def _total(runs: list[RunResult]) -> float:
    return aggregate([sum(m.throughput_mbps for m in r.flows if m.error is None) for r in runs]).mean


def _mean_plr_pct(runs: list[RunResult]) -> float:
    per_run = []
    for r in runs:
        plrs = [m.plr for m in r.flows if m.protocol is Protocol.CBR and m.error is None]
        per_run.append(sum(plrs) / len(plrs) if plrs else 0.0)
    return aggregate(per_run).mean * 100


def _table(rows: list[tuple[str, str, str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(f"{a:<{widths[0]}}  {b:>{widths[1]}}  {c:>{widths[2]}}" for a, b, c in rows)


def _reproduce(args: argparse.Namespace) -> int:
    ref = REFERENCE[args.target]
    if args.target == "auth":
        scenario = _with_overrides(builtin("paper-auth"), args)
        results = run_scenario(scenario)
        lat = {"direct": [], "roaming": []}
        for r in results:
            for s in r.auth:
                if s.path is not None and s.latency_ms is not None:
                    lat[s.path.value].append(s.latency_ms)
        direct = sum(lat["direct"]) / len(lat["direct"])
        roaming = sum(lat["roaming"]) / len(lat["roaming"])
        rows = [
            ("auth latency (ms)", "simulated", "reference"),
            ("direct", f"{float(direct):.1f}", f"{ref['direct']:.1f}"),
            ("roaming", f"{float(roaming):.1f}", f"{ref['roaming']:.1f}"),
            ("delta", f"{float(roaming - direct):.1f}", f"{ref['delta']:.1f}"),
        ]
        _emit(results, args, "paper-auth")
    else:
        single = run_scenario(_with_overrides(builtin(f"paper-{args.target}-single"), args))
        four = run_scenario(_with_overrides(builtin(f"paper-{args.target}-four"), args))
        results = single + four
        if args.target == "table4":
            a, b = _mean_plr_pct(single), _mean_plr_pct(four)
            change = (b - a) / a * 100 if a else 0.0
            rows = [
                ("mean PLR (%)", "simulated", "reference"),
                ("one client/slice", f"{a:.2f}", f"{ref['single']:.2f}"),
                ("four clients/slices", f"{b:.3f}", f"{ref['four']:.3f}"),
                ("change (%)", f"{change:.1f}", f"{ref['change']:.1f}"),
            ]
        else:
            a, b = _total(single), _total(four)
            rows = [
                ("total throughput (Mbps)", "simulated", "reference"),
                ("one client/slice", f"{a:.1f}", f"{ref['single']:.1f}"),
                ("four clients/slices", f"{b:.1f}", f"{ref['four']:.1f}"),
                ("change (%)", f"{(b - a) / a * 100:.1f}", f"{ref['change']:.1f}"),
            ]
        _emit(results, args, f"paper-{args.target}")
    if not args.quiet:
        print(_table(rows))
    return EXIT_OK


def _run(args: argparse.Namespace) -> int:
    scenario = _with_overrides(_read(args.file), args)
    results = run_scenario(scenario)
    if args.out is None:
        args.out = "."
    _emit(results, args, scenario.name)
    if not args.quiet:
        summary = json.loads(emit_results(results, "json")["json"])["configurations"][0]
        for key in ("total_throughput_mbps", "mean_plr_pct"):
            if key in summary:
                print(f"{key}: {summary[key]}")
        for path, stat in summary.get("auth_latency_ms", {}).items():
            print(f"auth_latency_ms.{path}: {stat['mean']}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    try:
        if args.command == "list-scenarios":
            for name in builtin_names():
                print(name)
            return EXIT_OK
        if args.command == "show":
            sys.stdout.write(builtin_document(args.name))
            return EXIT_OK
        if args.command == "validate":
            scenario = _read(args.file)
            print(json.dumps({"valid": True, "name": scenario.name}))
            return EXIT_OK
        if args.command == "reproduce":
            return _reproduce(args)
        return _run(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except ValidationError as exc:
        return _fail("validation", str(exc), EXIT_VALIDATION, path=getattr(exc, "path", exc.field))
    except OutputError as exc:
        return _fail("output", str(exc), EXIT_RUNTIME)
    except NhsimError as exc:
        return _fail("runtime", str(exc), EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
