"""Command-line scenario runner.

Verbs: ``handshake``, ``mitm``, ``li``, ``demo``.  JSON lines go to stdout,
a human summary to stderr.  Exit codes: 0 success, 1 usage error,
2 protocol failure, 3 expected denial (escrow recovery refused).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .auth import CredentialStore, TrustPolicy
from .crypto import SUITES
from .mitm import Impersonation, Outcome, expected_outcome_is_success, run_cell
from .scenarios import parse_cooperation, run_handshake, run_li

EXIT_OK, EXIT_USAGE, EXIT_PROTOCOL, EXIT_DENIED = 0, 1, 2, 3
VERBS = ("handshake", "mitm", "li")


@dataclass
class Scenario:
    """One runnable scenario; also the schema of ``--scenario`` files."""

    verb: str
    name: str = ""
    method: int = 0
    seed: int = 0
    suite: int = 0
    policy: str = TrustPolicy.STRICT.value
    impersonation: str = Impersonation.USE_COMPROMISED_KEYS.value
    all_methods: bool = False
    psk_mismatch: bool = False
    message_4: bool | None = None
    cooperate: str = "all"
    mirror: bool = True
    credentials: str | None = None  # path to a credential fixture file

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValueError(f"verb must be one of {', '.join(VERBS)}")
        if self.method not in range(5):
            raise ValueError("method must be 0..4")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite}")
        TrustPolicy(self.policy)
        Impersonation(self.impersonation)
        parse_cooperation(self.cooperate)
        if not self.name:
            self.name = f"{self.verb}-all" if self.all_methods else f"{self.verb}-m{self.method}"

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        return cls(**obj)

    def to_json(self) -> dict:
        return asdict(self)


BUILTIN_SCENARIOS = (
    Scenario("handshake", "honest-sig-sig", method=0, seed=7),
    Scenario("handshake", "honest-psk", method=4, seed=7),
    Scenario("mitm", "mitm-compromised", method=0, seed=42),
    Scenario("mitm", "mitm-own-keys-strict", method=0, seed=42, impersonation=Impersonation.USE_OWN_KEYS.value),
    Scenario("li", "li-all-cooperate", method=3, seed=42),
    Scenario("li", "li-authority-only", method=3, seed=42, cooperate="authority-only"),
)


@dataclass
class Output:
    json_only: bool = False
    out: object = field(default_factory=lambda: sys.stdout)
    err: object = field(default_factory=lambda: sys.stderr)

    def emit(self, obj: dict) -> None:
        self.out.write(json.dumps(obj, sort_keys=True) + "\n")

    def say(self, text: str) -> None:
        if not self.json_only:
            self.err.write(text + "\n")


# -- verbs -------------------------------------------------------------------


def cmd_handshake(sc: Scenario, io: Output) -> int:
    result = run_handshake(
        sc.method,
        sc.seed,
        TrustPolicy(sc.policy),
        psk_mismatch=sc.psk_mismatch,
        message_4=sc.message_4,
        suite=SUITES[sc.suite],
        credentials=CredentialStore.load(sc.credentials) if sc.credentials else None,
    )
    for record in result.transcript:
        io.emit({"type": "transcript", **record})
    io.emit({"scenario": sc.name, **result.to_json()})
    ok = result.completed and result.exporters_match
    if ok:
        io.say(f"[{sc.name}] method {sc.method}: handshake completed, exporter secrets match")
        return EXIT_OK
    f = result.failure or {}
    io.say(f"[{sc.name}] method {sc.method}: handshake failed at {f.get('party')} message {f.get('message_round')}: {f.get('error')}")
    return EXIT_PROTOCOL


def _cells(sc: Scenario):
    if sc.all_methods:
        return [(m, imp, pol) for m in range(5) for imp in Impersonation for pol in TrustPolicy]
    return [(sc.method, Impersonation(sc.impersonation), TrustPolicy(sc.policy))]


def cmd_mitm(sc: Scenario, io: Output) -> int:
    rows = []
    for method, imp, pol in _cells(sc):
        report = run_cell(method, imp, pol, sc.seed, SUITES[sc.suite])
        expected_success = expected_outcome_is_success(imp, pol)
        matches = (report.outcome is Outcome.SUCCESS) == expected_success
        io.emit({"type": "attack_report", "scenario": sc.name, "matches_expected": matches, **report.to_json()})
        rows.append((method, imp.value, pol.value, report.outcome.value, report.failure_code, matches))
    all_ok = all(r[-1] for r in rows)
    io.emit(
        {
            "type": "attack_summary",
            "scenario": sc.name,
            "cells": len(rows),
            "matching": sum(r[-1] for r in rows),
            "table": [
                {"method": m, "impersonation": i, "policy": p, "outcome": o, "failure_code": c, "matches_expected": ok}
                for m, i, p, o, c, ok in rows
            ],
        }
    )
    io.say(f"{'method':<7}{'impersonation':<20}{'policy':<12}{'outcome':<18}{'code':<22}expected")
    for m, i, p, o, c, ok in rows:
        io.say(f"{m:<7}{i:<20}{p:<12}{o:<18}{(c or '-'):<22}{'yes' if ok else 'NO'}")
    io.say(f"[{sc.name}] {sum(r[-1] for r in rows)}/{len(rows)} cells match the expected outcome")
    return EXIT_OK if all_ok else EXIT_PROTOCOL


def cmd_li(sc: Scenario, io: Output) -> int:
    cooperating = parse_cooperation(sc.cooperate)
    result = run_li(sc.method, sc.seed, cooperating, mirror=sc.mirror, suite=SUITES[sc.suite])
    io.emit({"scenario": sc.name, **result.to_json()})
    frames = len(result.record.mirrored_frames)
    if not result.completed:
        io.say(f"[{sc.name}] handshake did not complete")
        return EXIT_PROTOCOL
    if result.record.recovered_secret is not None:
        if not result.recovered_matches:
            io.say(f"[{sc.name}] recovered secret does not match the session")
            return EXIT_PROTOCOL
        io.say(
            f"[{sc.name}] {frames} frames mirrored; secret recovered with {'+'.join(cooperating)}; "
            f"{len(result.decrypted_records)} records decrypted"
        )
        return EXIT_OK
    io.say(f"[{sc.name}] {frames} frames mirrored; recovery denied: {result.recovery_error}")
    return EXIT_DENIED


COMMANDS = {"handshake": cmd_handshake, "mitm": cmd_mitm, "li": cmd_li}


def run_scenario(sc: Scenario, io: Output) -> int:
    return COMMANDS[sc.verb](sc, io)


def cmd_demo(scenarios, io: Output) -> int:
    """Run each scenario; 3 counts as success when the scenario expects denial."""
    worst = EXIT_OK
    for sc in scenarios:
        code = run_scenario(sc, io)
        expected = EXIT_DENIED if sc.verb == "li" and parse_cooperation(sc.cooperate) != ("I", "R", "A") else EXIT_OK
        if code != expected:
            worst = max(worst, code)
    return worst


# -- argument parsing --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--method", type=int, choices=range(5), default=0, metavar="{0..4}")
    common.add_argument("--suite", type=int, choices=sorted(SUITES), default=0)
    common.add_argument("--json-only", action="store_true", help="suppress the summary on stderr")
    common.add_argument("--scenario", type=Path, help="JSON scenario file (object or list)")

    parser = _Parser(prog="edhoc-lab", description="EDHOC handshake, MitM and lawful-interception lab")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    hs = sub.add_parser("handshake", parents=[common], help="honest handshake between I and R")
    hs.add_argument("--psk-mismatch", action="store_true", help="method 4 with different keys at I and R")
    hs.add_argument("--message-4", action=argparse.BooleanOptionalAction, default=None)
    hs.add_argument("--credentials", help="credential fixture file (JSON list) with own entries for kids I and R")
    _policy_flags(hs)

    mitm = sub.add_parser("mitm", parents=[common], help="MitM splice between I and R")
    group = mitm.add_mutually_exclusive_group()
    group.add_argument("--compromised", dest="impersonation", action="store_const", const=Impersonation.USE_COMPROMISED_KEYS.value)
    group.add_argument("--own-keys", dest="impersonation", action="store_const", const=Impersonation.USE_OWN_KEYS.value)
    mitm.add_argument("--all", dest="all_methods", action="store_true", help="full 5x2x2 matrix")
    _policy_flags(mitm)

    li = sub.add_parser("li", parents=[common], help="lawful-interception escrow scenario")
    li.add_argument("--cooperate", default="all", help="all, none, authority-only or a list like I,A")
    li.add_argument("--no-mirror", dest="mirror", action="store_false", help="control run without mirror rules")

    sub.add_parser("demo", parents=[common], help="run the built-in scenarios")
    return parser


def _policy_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--strict", dest="policy", action="store_const", const=TrustPolicy.STRICT.value)
    group.add_argument("--weak", dest="policy", action="store_const", const=TrustPolicy.WEAK_ACCEPT.value)


def _scenario_from_args(args) -> Scenario:
    kwargs = {"verb": args.verb, "method": args.method, "seed": args.seed, "suite": args.suite}
    for name in ("policy", "impersonation", "all_methods", "psk_mismatch", "message_4", "cooperate", "mirror", "credentials"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    return Scenario(**kwargs)


def load_scenarios(path: Path) -> list[Scenario]:
    data = json.loads(Path(path).read_text())
    items = data if isinstance(data, list) else [data]
    return [Scenario.from_json(item) for item in items]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    io = Output(json_only=args.json_only)
    try:
        if args.scenario is not None:
            scenarios = load_scenarios(args.scenario)
            if args.verb != "demo":
                scenarios = [s for s in scenarios if s.verb == args.verb]
            if not scenarios:
                parser.error(f"no {args.verb} scenarios in {args.scenario}")
            return cmd_demo(scenarios, io) if args.verb == "demo" or len(scenarios) > 1 else run_scenario(scenarios[0], io)
        if args.verb == "demo":
            return cmd_demo(BUILTIN_SCENARIOS, io)
        scenario = _scenario_from_args(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    try:
        return run_scenario(scenario, io)
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
