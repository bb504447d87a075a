"""Command-line front end: learn a cluster model, fuzz against it, replay
stored findings.

Subcommands
-----------
learn
    Infer the cluster's protocol state machine; writes ``machine.json``,
    ``machine.dot``, and ``transcript.jsonl`` into the output directory.
fuzz
    Run a mutation campaign against a stored machine; writes ``report.json``
    plus one case file per finding and prints a per-criterion summary.
replay
    Re-execute one stored case and check that its recorded verdict
    reproduces.

All outputs are deterministic for fixed inputs and seeds; nothing ever
writes back into an input file.  The ``STATEFUZZ_LOG`` environment variable
(debug/info/warning/error) controls diagnostic verbosity on stderr.

Exit codes: 0 success; 1 replay verdict mismatch or --fail-on-finding
triggered; 2 bad usage, configuration, or input files; 3 learning budget
exhausted; 4 nondeterministic target.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .alphabet import (
    ConfigError, enumerate_input_alphabet, input_domains, word_from_obj,
)
from .detector import ALL_CRITERIA, Baseline, Detector, Finding
from .fuzzer import CampaignReport, FuzzCase, replay_case, run_campaign
from .learner import (
    MembershipOracle, NondeterminismError, PartialResultError, lstar_learn,
    wmethod_counterexample,
)
from .mealy import MealyMachine, PrunePolicy
from .proxy import ClusterProxy, InProcessTransport
from .sulsim import (
    ALL_VULNERABILITIES, ClusterConfig, default_alphabet, spawn_cluster,
)

EXIT_OK = 0
EXIT_VERDICT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_BUDGET_EXHAUSTED = 3
EXIT_NONDETERMINISM = 4

log = logging.getLogger("statefuzz")


class ConfigFileError(ValueError):
    """Unusable run configuration or input file; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

DEFAULT_ALPHABET_SECTION = {"self_id": "dummy", "unknown_id": "nz"}
DEFAULT_LEARNER_SECTION = {
    "votes": 1,
    "eq_depth": 1,
    "max_rounds": 100,
    "max_queries": None,
    "letters": None,
}
DEFAULT_FUZZ_SECTION = {
    "budget": 2000,
    "seed": 42,
    "mutations": [1, 3],
    "weights": None,
    "dedupe": False,
    "prune_others": [],
}
_SECTIONS = ("cluster", "alphabet", "learner", "fuzz")


def load_config(path: str | None) -> dict:
    """Parse the run configuration, filling defaults section by section."""
    if path is None:
        doc = {}
    else:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigFileError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigFileError("config root must be a JSON object")
    unknown = set(doc) - {"schema_version", *_SECTIONS}
    if unknown:
        raise ConfigFileError(f"unknown config sections: {sorted(unknown)}")
    for section in _SECTIONS:
        if not isinstance(doc.get(section, {}), dict):
            raise ConfigFileError(f"config section {section!r} must be an object")
    return {
        "cluster": doc.get("cluster", {}),
        "alphabet": {**DEFAULT_ALPHABET_SECTION, **doc.get("alphabet", {})},
        "learner": {**DEFAULT_LEARNER_SECTION, **doc.get("learner", {})},
        "fuzz": {**DEFAULT_FUZZ_SECTION, **doc.get("fuzz", {})},
    }


def parse_vulns(text: str) -> frozenset:
    if text in ("", "none"):
        return frozenset()
    if text == "all":
        return ALL_VULNERABILITIES
    names = frozenset(part.strip() for part in text.split(",") if part.strip())
    bad = names - ALL_VULNERABILITIES
    if bad:
        raise ConfigFileError(
            f"unknown vulnerability flags {sorted(bad)}; "
            f"known: {sorted(ALL_VULNERABILITIES)}")
    return names


def cluster_from_config(config: dict, args) -> ClusterConfig:
    try:
        ccfg = ClusterConfig.from_dict(config["cluster"])
    except (TypeError, ConfigError) as exc:
        raise ConfigFileError(f"bad cluster section: {exc}") from exc
    if getattr(args, "vulns", None) is not None:
        ccfg = dataclasses.replace(ccfg, vulnerabilities=parse_vulns(args.vulns))
    if getattr(args, "seed", None) is not None and args.command == "learn":
        ccfg = dataclasses.replace(ccfg, seed=args.seed)
    return ccfg


def alphabet_from(ccfg: ClusterConfig, section: dict):
    unknown = set(section) - set(DEFAULT_ALPHABET_SECTION)
    if unknown:
        raise ConfigFileError(f"unknown alphabet settings: {sorted(unknown)}")
    return default_alphabet(ccfg, self_id=section["self_id"],
                            unknown_id=section["unknown_id"])


def build_proxy(ccfg: ClusterConfig, alphabet_section: dict) -> ClusterProxy:
    acfg = alphabet_from(ccfg, alphabet_section)
    return ClusterProxy(InProcessTransport(spawn_cluster(ccfg)), acfg)


# ---------------------------------------------------------------------------
# learn
# ---------------------------------------------------------------------------

def cmd_learn(args) -> int:
    config = load_config(args.config)
    lcfg = config["learner"]
    ccfg = cluster_from_config(config, args)
    proxy = build_proxy(ccfg, config["alphabet"])
    if lcfg["letters"]:
        try:
            letters = tuple(word_from_obj(lcfg["letters"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigFileError(f"bad learner.letters: {exc}") from exc
    else:
        letters = tuple(enumerate_input_alphabet(proxy.cfg))
    budget = args.budget if args.budget is not None else lcfg["max_queries"]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("learning over %d letters (votes=%s, depth=%s, budget=%s)",
             len(letters), lcfg["votes"], lcfg["eq_depth"], budget)
    with open(out_dir / "transcript.jsonl", "w", encoding="utf-8") as transcript:
        try:
            oracle = MembershipOracle(proxy.query, votes=lcfg["votes"],
                                      max_trials=budget, transcript=transcript)
        except ValueError as exc:
            raise ConfigFileError(f"bad learner section: {exc}") from exc
        try:
            result = lstar_learn(
                oracle, letters,
                lambda m: wmethod_counterexample(m, oracle,
                                                 depth=lcfg["eq_depth"]),
                max_rounds=lcfg["max_rounds"], transcript=transcript)
        except PartialResultError as exc:
            if exc.hypothesis is not None:
                (out_dir / "machine-partial.json").write_text(
                    exc.hypothesis.to_json(), encoding="utf-8")
            print(f"learning stopped early: {exc}", file=sys.stderr)
            return EXIT_BUDGET_EXHAUSTED
        except NondeterminismError as exc:
            print(f"target answered nondeterministically: {exc}", file=sys.stderr)
            return EXIT_NONDETERMINISM
    machine = result.machine
    (out_dir / "machine.json").write_text(machine.to_json(), encoding="utf-8")
    (out_dir / "machine.dot").write_text(machine.to_dot(), encoding="utf-8")
    print(f"learned {len(machine.states)} states in {result.rounds} rounds "
          f"({oracle.trials} sessions); wrote {out_dir / 'machine.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fuzz
# ---------------------------------------------------------------------------

def load_machine(path: str) -> MealyMachine:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read machine {path}: {exc}") from exc
    try:
        return MealyMachine.from_json(text)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigFileError(f"invalid machine file {path}: {exc}") from exc


def merge_reports(reports: list, seed: int, shards: int) -> CampaignReport:
    stats: dict = {}
    for report in reports:
        for key, value in report.stats.items():
            stats[key] = stats.get(key, 0) + value
    stats["shards"] = shards
    return CampaignReport(
        origin=reports[0].origin,
        rng_seed=seed,
        cases_run=sum(r.cases_run for r in reports),
        findings=tuple(f for r in reports for f in r.findings),
        errors=tuple(e for r in reports for e in r.errors),
        stats=stats,
    )


def print_summary(report: CampaignReport):
    counts = {criterion: 0 for criterion in ALL_CRITERIA}
    for _, finding in report.findings:
        for criterion in finding.criteria:
            counts[criterion] += 1
    width = max(len(criterion) for criterion in counts)
    for criterion in ALL_CRITERIA:
        print(f"{criterion:<{width}}  {counts[criterion]}")
    print(f"cases {report.cases_run}  findings {len(report.findings)}  "
          f"errors {len(report.errors)}")


def case_document(origin: str, case: FuzzCase, finding: Finding) -> str:
    doc = {"schema_version": 1, "kind": "fuzz-case", "origin": origin,
           **case.to_obj(), **finding.to_dict()}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def cmd_fuzz(args) -> int:
    config = load_config(args.config)
    fcfg = config["fuzz"]
    machine = load_machine(args.machine)
    ccfg = cluster_from_config(config, args)
    seed = args.seed if args.seed is not None else fcfg["seed"]
    budget = args.budget if args.budget is not None else fcfg["budget"]
    if budget < 1:
        raise ConfigFileError("budget must be positive")
    if args.shards < 1:
        raise ConfigFileError("shards must be positive")
    try:
        mutations_range = tuple(fcfg["mutations"])
        pruned = machine.prune(
            PrunePolicy(others_labels=frozenset(fcfg["prune_others"])))
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"bad fuzz section: {exc}") from exc
    domains = input_domains(alphabet_from(ccfg, config["alphabet"]))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    for shard in range(args.shards):
        shard_budget = budget // args.shards + (1 if shard < budget % args.shards else 0)
        if shard_budget == 0:
            continue
        shard_seed = seed if args.shards == 1 else (seed << 16) | shard
        proxy = build_proxy(ccfg, config["alphabet"])
        proxy.reset_session()
        detector = Detector(Baseline.capture(proxy))
        log.info("shard %d: %d cases, seed %d", shard, shard_budget, shard_seed)
        try:
            reports.append(run_campaign(
                proxy, pruned, detector, rng_seed=shard_seed,
                max_cases=shard_budget, domains=domains,
                weights=fcfg["weights"], dedupe=bool(fcfg["dedupe"]),
                mutations_range=mutations_range))
        except ValueError as exc:
            raise ConfigFileError(f"campaign cannot run: {exc}") from exc

    merged = reports[0] if len(reports) == 1 else merge_reports(reports, seed, args.shards)
    (out_dir / "report.json").write_text(merged.to_json(), encoding="utf-8")
    for shard, report in enumerate(reports):
        if len(reports) > 1:
            (out_dir / f"report-shard-{shard:02d}.json").write_text(
                report.to_json(), encoding="utf-8")
        for case, finding in report.findings:
            name = (f"case-{case.case_id:05d}.json" if len(reports) == 1
                    else f"case-s{shard:02d}-{case.case_id:05d}.json")
            (out_dir / name).write_text(
                case_document(report.origin, case, finding), encoding="utf-8")
    print_summary(merged)
    if args.fail_on_finding and merged.findings:
        return EXIT_VERDICT_MISMATCH
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def cmd_replay(args) -> int:
    config = load_config(args.config)
    try:
        doc = json.loads(Path(args.case).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigFileError(f"cannot read case {args.case}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"case {args.case} is not valid JSON: {exc}") from exc
    try:
        case = FuzzCase.from_obj(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigFileError(f"case {args.case} is malformed: {exc}") from exc
    stored = Finding(criteria=tuple(doc.get("criteria", ())),
                     evidence=dict(doc.get("evidence", {})))

    ccfg = cluster_from_config(config, args)
    proxy = build_proxy(ccfg, config["alphabet"])
    proxy.reset_session()
    detector = Detector(Baseline.capture(proxy))
    if "origin" in doc and doc["origin"] != detector.baseline.origin:
        raise ConfigFileError(
            "case was recorded against a different cluster configuration "
            f"(origin {doc['origin']} vs {detector.baseline.origin})")
    try:
        _, finding = replay_case(proxy, detector, case)
    except ValueError as exc:
        raise ConfigFileError(f"case cannot be replayed: {exc}") from exc

    replayed = finding if finding is not None else Finding(criteria=())
    reproduced = replayed.signature() == stored.signature()
    print(json.dumps({
        "schema_version": 1,
        "kind": "replay-report",
        "case_id": case.case_id,
        "recorded": stored.to_dict(),
        "replayed": replayed.to_dict(),
        "reproduced": reproduced,
    }, indent=1, sort_keys=True))
    return EXIT_OK if reproduced else EXIT_VERDICT_MISMATCH


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statefuzz",
        description="Protocol-state fuzzing for distributed controller "
                    "clusters: learn, fuzz, replay.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH",
                       help="JSON run configuration; defaults apply when omitted")
        p.add_argument("--seed", type=int,
                       help="override the run seed (cluster seed for learn, "
                            "campaign seed for fuzz)")
        p.add_argument("--vulns", metavar="LIST",
                       help="override seeded vulnerability flags: comma list, "
                            "'all', or 'none'")

    learn = sub.add_parser("learn", help="infer the protocol state machine")
    common(learn)
    learn.add_argument("--budget", type=int,
                       help="maximum number of query sessions")
    learn.add_argument("--out-dir", default="out", metavar="DIR")

    fuzz = sub.add_parser("fuzz", help="mutation campaign against a machine")
    fuzz.add_argument("machine", help="machine JSON written by learn")
    common(fuzz)
    fuzz.add_argument("--budget", type=int, help="total campaign cases")
    fuzz.add_argument("--out-dir", default="out", metavar="DIR")
    fuzz.add_argument("--shards", type=int, default=1,
                      help="split the budget over N independent cluster "
                           "instances with derived seeds")
    fuzz.add_argument("--fail-on-finding", action="store_true",
                      help="exit 1 when the campaign reports any finding")

    replay = sub.add_parser("replay", help="re-run one stored case")
    replay.add_argument("case", help="case JSON written by fuzz")
    common(replay)
    return parser


def setup_logging():
    name = os.environ.get("STATEFUZZ_LOG", "warning").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    handler = {"learn": cmd_learn, "fuzz": cmd_fuzz, "replay": cmd_replay}[args.command]
    try:
        return handler(args)
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
