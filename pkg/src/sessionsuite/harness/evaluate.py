"""Reduction and fault-detection measurements, baselines and comparison reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..depgraph import PageGraph
from ..ingest import UserSession
from ..profile import ServiceProfile, cluster_sessions
from ..reduce import SelectionTrace, TestCase, TestSuite, build_suite, covered_data_edges
from .faults import FAULT_KINDS, FaultSpec
from .replay import ReplayResult, Runnable, _as_cases, replay_case


@dataclass
class Detection:
    detected: dict[str, bool]
    rate: float
    per_kind: dict[str, float | None]
    empty_fault_set: bool


def detection_rate(result: ReplayResult, faults: Sequence[FaultSpec]) -> Detection:
    visited, transitions, defuse = result.visited, result.transitions, result.defuse
    detected = {}
    for f in faults:
        if f.kind == "page":
            hit = f.target[0] in visited
        elif f.kind == "transition":
            hit = tuple(f.target) in transitions
        else:
            hit = tuple(f.target) in defuse
        detected[f.fault_id] = hit
    per_kind: dict[str, float | None] = {}
    for kind in FAULT_KINDS:
        ids = [f.fault_id for f in faults if f.kind == kind]
        per_kind[kind] = sum(detected[i] for i in ids) / len(ids) if ids else None
    if not faults:
        return Detection({}, 1.0, per_kind, True)
    return Detection(detected, sum(detected.values()) / len(faults), per_kind, False)


@dataclass
class Metrics:
    name: str
    original_sessions: int
    original_requests: int
    suite_cases: int
    suite_requests: int
    pages: set[str] = field(default_factory=set)
    transitions: int = 0
    defuse: int = 0
    detection: Detection | None = None

    @property
    def reduction_requests(self) -> float:
        if self.original_requests == 0:
            return 0.0
        return 1.0 - self.suite_requests / self.original_requests

    @property
    def reduction_cases(self) -> float:
        if self.original_sessions == 0:
            return 0.0
        return 1.0 - self.suite_cases / self.original_sessions

    def to_dict(self) -> dict:
        det = self.detection
        return {
            "name": self.name,
            "original_sessions": self.original_sessions,
            "original_requests": self.original_requests,
            "suite_cases": self.suite_cases,
            "suite_requests": self.suite_requests,
            "reduction_requests": round(self.reduction_requests, 6),
            "reduction_cases": round(self.reduction_cases, 6),
            "page_coverage": len(self.pages),
            "transition_coverage": self.transitions,
            "defuse_coverage": self.defuse,
            "detection_rate": None if det is None else round(det.rate, 6),
            "detection_per_kind": None if det is None else {
                k: None if v is None else round(v, 6) for k, v in det.per_kind.items()
            },
            "detected": None if det is None else dict(sorted(det.detected.items())),
        }


def measure(
    name: str,
    runnable: Runnable,
    original: Sequence[UserSession],
    graph: PageGraph,
    faults: Sequence[FaultSpec],
) -> Metrics:
    cases = _as_cases(runnable)
    result = ReplayResult([replay_case(cid, reqs, graph) for cid, reqs in cases])
    return Metrics(
        name=name,
        original_sessions=len(original),
        original_requests=sum(len(s.requests) for s in original),
        suite_cases=len(cases),
        suite_requests=sum(len(reqs) for _, reqs in cases),
        pages=result.visited,
        transitions=len(result.transitions),
        defuse=len(result.defuse),
        detection=detection_rate(result, faults),
    )


def _entities(session: UserSession, graph: PageGraph, criterion: str) -> set:
    keys = [graph.resolve(r) or f"?{r.url}" for r in session.requests]
    if criterion == "page":
        return set(keys)
    if criterion == "transition":
        return set(zip(keys, keys[1:]))
    raise ValueError(f"unknown baseline criterion {criterion!r}")


def baseline_greedy(
    sessions: Sequence[UserSession], graph: PageGraph, criterion: str = "page", seed: int = 0
) -> TestSuite:
    """Classic greedy set cover: take the session covering most uncovered entities."""
    remaining = {s.id: _entities(s, graph, criterion) for s in sessions}
    by_id = {s.id: s for s in sessions}
    goal = set().union(*remaining.values()) if remaining else set()
    covered: set = set()
    picked = []
    while covered != goal:
        best = max(sorted(remaining), key=lambda sid: len(remaining[sid] - covered))
        gain = remaining.pop(best) - covered
        if not gain:
            break
        covered |= gain
        picked.append(best)
    width = max(3, len(str(len(picked))))
    cases = [
        TestCase(f"bl{i:0{width}d}", sid, list(by_id[sid].requests))
        for i, sid in enumerate(picked, 1)
    ]
    return TestSuite(cases, seed, graph.version)


def distill(
    sessions: Sequence[UserSession],
    profile: ServiceProfile,
    graph: PageGraph,
    seed: int = 0,
    strict_data_order: bool = False,
) -> tuple[TestSuite, SelectionTrace]:
    """Cluster, select and augment in one call."""
    report = cluster_sessions(sessions, profile, seed)
    return build_suite(report, sessions, graph, profile, seed, strict_data_order)


def selected_sessions(trace: SelectionTrace, sessions: Sequence[UserSession]) -> list[UserSession]:
    """The sessions chosen by selection, before any augmentation."""
    by_id = {s.id: s for s in sessions}
    return [by_id[sid] for c in trace.clusters for sid in c.selected]


def compare(
    original: Metrics, baseline: Metrics, distilled: Metrics,
    faults: Sequence[FaultSpec], warnings: Sequence[str] = (),
) -> tuple[dict, str]:
    """Side-by-side report, as a JSON-ready dict and as a text table."""
    rows = [original, baseline, distilled]
    per_kind = {k: sum(1 for f in faults if f.kind == k) for k in FAULT_KINDS}
    report = {
        "fault_set": {"total": len(faults), "per_kind": per_kind, "empty": not faults},
        "rows": [m.to_dict() for m in rows],
        "coverage": {
            "original_pages": len(original.pages),
            "baseline_pages": len(baseline.pages),
            "distilled_pages": len(distilled.pages),
            "page_coverage_preserved": original.pages <= distilled.pages,
            "pages_added": sorted(distilled.pages - original.pages),
        },
        "warnings": list(warnings),
    }

    def pct(x: float | None) -> str:
        return "    -" if x is None else f"{x:6.1%}"

    head = (
        f"{'strategy':<10} {'cases':>7} {'requests':>9} {'red.req':>8} {'pages':>6} "
        f"{'detect':>7} {'page':>7} {'trans':>7} {'datadep':>7}"
    )
    lines = [head, "-" * len(head)]
    for m in rows:
        det = m.detection
        lines.append(
            f"{m.name:<10} {m.suite_cases:>7} {m.suite_requests:>9} {pct(m.reduction_requests):>8} "
            f"{len(m.pages):>6} {pct(det.rate if det else None):>7} "
            + " ".join(f"{pct(det.per_kind[k] if det else None):>7}" for k in FAULT_KINDS)
        )
    lines.append("")
    lines.append(
        f"faults: {len(faults)} ("
        + ", ".join(f"{k} {n}" for k, n in per_kind.items()) + ")"
        + ("  [empty fault set: rates reported as 100%]" if not faults else "")
    )
    lines.append(f"request reduction (distilled): {distilled.reduction_requests:.1%}")
    lines.append(
        "page coverage preserved: " + ("yes" if report["coverage"]["page_coverage_preserved"] else "NO")
        + f" (+{len(report['coverage']['pages_added'])} pages from augmentation)"
    )
    lines.append("transition faults are measured only; the method does not target them")
    for w in warnings:
        lines.append(f"warning: {w}")
    return report, "\n".join(lines) + "\n"


def order_mismatch_warning(suite: TestSuite, graph: PageGraph) -> str | None:
    """Named warning when presence-covered data edges are not exercised in order."""
    present = covered_data_edges(suite, graph, strict_order=False)
    ordered = covered_data_edges(suite, graph, strict_order=True)
    missing = sorted(present - ordered)
    if not missing:
        return None
    shown = ", ".join(f"{a}->{b}" for a, b in missing[:5])
    more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
    return f"data-order-mismatch: {len(missing)} data edge(s) present but not exercised in order: {shown}{more}"

