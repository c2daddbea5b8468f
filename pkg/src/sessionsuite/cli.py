"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 a failed ``evaluate --assert`` check, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .depgraph import PageGraph, load_site_model, model_to_dict
from .errors import SessionSuiteError
from .harness.evaluate import (
    baseline_greedy,
    compare,
    measure,
    order_mismatch_warning,
)
from .harness.faults import dump_faults, load_faults, seed_faults, validate_faults
from .harness.synth import UsageProfile, generate_sessions, random_profile, random_site_model
from .ingest import ParseStats, SessionizePolicy, dump_sessions, load_sessions, parse_log, sessionize
from .profile import (
    ClusterReport,
    cluster_sessions,
    conformance_summary,
    load_service_profile,
    profile_to_dict,
)
from .reduce import TestSuite, build_suite, dumps


class InputError(Exception):
    pass


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _need_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is None:
        raise InputError(f"'{args.command}' uses randomness and needs --seed")
    return args.seed


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fp:
            return json.load(fp)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from None


def cmd_ingest(args: argparse.Namespace) -> int:
    stats = ParseStats()
    with open(args.log, encoding="utf-8", errors="replace") as fp:
        records = parse_log(fp, args.format, strict=args.strict, stats=stats)
    policy = SessionizePolicy(args.key_mode, args.idle_timeout, args.max_length)
    sessions = sessionize(records, policy)
    with open(args.out, "w", encoding="utf-8") as fp:
        dump_sessions(sessions, fp)
    print(f"lines={stats.lines} skipped={stats.skipped} sessions={len(sessions)}")
    for err in stats.errors[:5]:
        print(f"  skipped {err}", file=sys.stderr)
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    seed = _need_seed(args)
    sessions = load_sessions(args.sessions)
    profile = load_service_profile(args.profile)
    report = cluster_sessions(sessions, profile, seed)
    _write(args.out, dumps(report.to_dict(__version__)))
    print(conformance_summary(report, profile))
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    seed = _need_seed(args)
    sessions = load_sessions(args.sessions)
    profile = load_service_profile(args.profile)
    graph = PageGraph(load_site_model(args.site))
    if args.clusters:
        report = ClusterReport.from_dict(_read_json(args.clusters))
        known = {s.id for s in sessions}
        missing = [m for c in report.clusters for m in c.members if m not in known]
        if missing:
            raise InputError(f"cluster report names unknown sessions: {missing[:5]}")
    else:
        report = cluster_sessions(sessions, profile, seed)
    suite, trace = build_suite(report, sessions, graph, profile, seed, args.strict_data_order)
    _write(args.suite_out, dumps(suite.to_dict()))
    if args.trace_out:
        _write(args.trace_out, dumps(trace.to_dict()))
    kinds = {}
    for e in trace.augmentation:
        kinds[e.kind] = kinds.get(e.kind, 0) + 1
    print(
        f"cases={len(suite.cases)} requests={suite.request_count} "
        f"selected={sum(len(c.selected) for c in trace.clusters)} "
        + " ".join(f"{k}_insertions={n}" for k, n in sorted(kinds.items()))
    )
    for page in trace.unknown_pages:
        print(f"warning: unknown page {page}", file=sys.stderr)
    for page in trace.unreachable:
        print(f"warning: unreachable page {page}", file=sys.stderr)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    graph = PageGraph(load_site_model(args.site))
    sessions = load_sessions(args.sessions)
    suite = TestSuite.from_dict(_read_json(args.suite))
    if suite.graph_version != graph.version:
        raise InputError(
            f"suite was built against model {suite.graph_version}, not {graph.version}"
        )
    if args.faults:
        faults, version = load_faults(args.faults)
        if version is not None and version != graph.version:
            raise InputError(f"faults were seeded against model {version}, not {graph.version}")
        validate_faults(faults, graph)
    else:
        faults = []
    baseline = baseline_greedy(sessions, graph, args.baseline, suite.seed)
    original = measure("original", sessions, sessions, graph, faults)
    base = measure("baseline", baseline, sessions, graph, faults)
    distilled = measure("distilled", suite, sessions, graph, faults)
    warnings = []
    if not faults:
        warnings.append("empty-fault-set: no faults supplied; detection rates default to 100%")
    if not suite.strict_data_order:
        w = order_mismatch_warning(suite, graph)
        if w:
            warnings.append(w)
    report, text = compare(original, base, distilled, faults, warnings)
    report["baseline_criterion"] = args.baseline
    report["model_version"] = graph.version
    _write(args.out, dumps(report))
    if args.text_out:
        _write(args.text_out, text)
    print(text, end="")
    if args.assert_:
        orig_hits = original.detection.detected
        lost = [f for f, hit in orig_hits.items() if hit and not distilled.detection.detected[f]]
        lost_pages = [f for f in lost if f.startswith("F-page")]
        if not report["coverage"]["page_coverage_preserved"] or lost_pages:
            print("assertion failed: distilled suite lost page coverage", file=sys.stderr)
            return 1
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    seed = _need_seed(args)
    if args.random_nodes:
        model = random_site_model(args.random_nodes, seed)
        if args.site:
            _write(args.site, dumps(model_to_dict(model)))
    elif args.site:
        model = load_site_model(args.site)
    else:
        raise InputError("synth needs --site or --random-nodes")
    if args.profile and Path(args.profile).exists() and not args.random_nodes:
        profile = load_service_profile(args.profile)
    else:
        profile = random_profile(model, args.services, seed)
        if args.profile:
            _write(args.profile, dumps(profile_to_dict(profile)))
    start = args.start or model.nodes[0].key
    usage = UsageProfile(start, stop_probability=args.stop_prob, skew=args.skew)
    sessions = generate_sessions(model, usage, args.n, seed, profile)
    with open(args.out, "w", encoding="utf-8") as fp:
        dump_sessions(sessions, fp)
    print(f"sessions={len(sessions)} requests={sum(len(s.requests) for s in sessions)}")
    return 0


def cmd_seed_faults(args: argparse.Namespace) -> int:
    seed = _need_seed(args)
    graph = PageGraph(load_site_model(args.site))
    counts = {"page": args.page, "transition": args.transition, "datadep": args.datadep}
    faults = seed_faults(graph, counts, seed)
    _write(args.out, dump_faults(faults, graph.version))
    print(f"faults={len(faults)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    seed_opt = argparse.ArgumentParser(add_help=False)
    seed_opt.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")

    parser = argparse.ArgumentParser(
        prog="sessionsuite", description=__doc__.splitlines()[0], parents=[seed_opt]
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="access log -> sessions JSONL", parents=[seed_opt])
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["clf-extended", "jsonl"], default="clf-extended")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--key-mode", choices=["cookie", "client-id"], default="cookie")
    p.add_argument("--idle-timeout", type=float, default=1800.0)
    p.add_argument("--max-length", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="sessions + profile -> cluster report", parents=[seed_opt])
    p.add_argument("--sessions", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("reduce", help="select and augment -> suite + trace", parents=[seed_opt])
    p.add_argument("--sessions", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--site", required=True)
    p.add_argument("--clusters", help="cluster report from 'cluster' (recomputed if omitted)")
    p.add_argument("--suite-out", required=True)
    p.add_argument("--trace-out")
    p.add_argument("--strict-data-order", action="store_true")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("evaluate", help="original / baseline / distilled report", parents=[seed_opt])
    p.add_argument("--sessions", required=True)
    p.add_argument("--site", required=True)
    p.add_argument("--suite", required=True)
    p.add_argument("--faults")
    p.add_argument("--baseline", choices=["page", "transition"], default="page")
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--text-out")
    p.add_argument("--assert", dest="assert_", action="store_true",
                   help="exit 1 if the distilled suite loses page coverage")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic session workload", parents=[seed_opt])
    p.add_argument("--site", help="site model to walk (written when --random-nodes is given)")
    p.add_argument("--random-nodes", type=int, default=0)
    p.add_argument("--profile", help="service profile for skew (written if absent)")
    p.add_argument("--services", type=int, default=6)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--start")
    p.add_argument("--stop-prob", type=float, default=0.1)
    p.add_argument("--skew", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("seed-faults", help="sample faults from a site model", parents=[seed_opt])
    p.add_argument("--site", required=True)
    p.add_argument("--page", type=int, default=0)
    p.add_argument("--transition", type=int, default=0)
    p.add_argument("--datadep", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seed_faults)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SessionSuiteError, InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
