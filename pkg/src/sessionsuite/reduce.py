"""Distil clustered sessions into a small test suite.

Per cluster the sessions are ranked by dependence counts and taken greedily
until the cluster's URL names are covered. The selected sessions are then
augmented: data-dependent pages are placed after the pages they depend on,
pages reachable over a link edge from a marked page are inserted after it
(repeated to a fixpoint), and services without sessions get a generated case.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .depgraph import Edge, PageGraph, exercised_data_edges, node_counts, session_counts
from .errors import SchemaViolation
from .ingest import Request, UserSession
from .profile import Cluster, ClusterReport, Service, ServiceProfile, URLName, url_name_set

AUGMENT_KINDS = ("data", "link", "service-fallback")


@dataclass
class TestCase:
    __test__ = False  # not a pytest class

    case_id: str
    origin: str | None
    requests: list[Request]
    augmented: list[bool] = field(default_factory=list)
    service_id: str | None = None
    fallback: bool = False

    def __post_init__(self) -> None:
        if not self.augmented:
            self.augmented = [False] * len(self.requests)
        if len(self.augmented) != len(self.requests):
            raise ValueError("augmented flags must align with requests")

    @property
    def augmented_indices(self) -> set[int]:
        return {i for i, flag in enumerate(self.augmented) if flag}

    def insert(self, pos: int, request: Request) -> None:
        self.requests.insert(pos, request)
        self.augmented.insert(pos, True)

    def keys(self, graph: PageGraph) -> list[str | None]:
        return [graph.resolve(r) for r in self.requests]

    def copy(self) -> "TestCase":
        return TestCase(
            self.case_id, self.origin, list(self.requests), list(self.augmented),
            self.service_id, self.fallback,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.case_id,
            "origin": self.origin,
            "service": self.service_id,
            "fallback": self.fallback,
            "requests": [
                {"url": r.url, "params": [list(p) for p in r.params], "augmented": a}
                for r, a in zip(self.requests, self.augmented)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TestCase":
        reqs = [Request(r["url"], tuple((n, v) for n, v in r["params"])) for r in obj["requests"]]
        flags = [bool(r.get("augmented", False)) for r in obj["requests"]]
        return cls(
            obj["id"], obj.get("origin"), reqs, flags, obj.get("service"),
            bool(obj.get("fallback", False)),
        )


@dataclass
class TestSuite:
    __test__ = False

    cases: list[TestCase]
    seed: int = 0
    graph_version: str = ""
    strict_data_order: bool = False

    def __post_init__(self) -> None:
        ids = [c.case_id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate case ids")

    @property
    def request_count(self) -> int:
        return sum(len(c.requests) for c in self.cases)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "graph_version": self.graph_version,
            "strict_data_order": self.strict_data_order,
            "cases": [c.to_dict() for c in self.cases],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TestSuite":
        try:
            return cls(
                [TestCase.from_dict(c) for c in obj["cases"]],
                int(obj["seed"]),
                str(obj["graph_version"]),
                bool(obj.get("strict_data_order", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"malformed suite: {exc}") from None


@dataclass(frozen=True)
class AugmentEvent:
    page: str
    kind: str
    case_id: str
    after: int  # position of the request the page was placed after; -1 means at the start


@dataclass
class ClusterTrace:
    service_id: str
    ranked: list[tuple[str, int, int]]
    selected: list[str]
    covered: list[str]


@dataclass
class SelectionTrace:
    clusters: list[ClusterTrace] = field(default_factory=list)
    marked: set[str] = field(default_factory=set)
    augmentation: list[AugmentEvent] = field(default_factory=list)
    unreachable: list[str] = field(default_factory=list)
    fallback: list[tuple[str, str]] = field(default_factory=list)
    unknown_pages: list[str] = field(default_factory=list)

    def inserted_pages(self, kind: str | None = None) -> list[str]:
        return [e.page for e in self.augmentation if kind is None or e.kind == kind]

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {
                    "service": c.service_id,
                    "ranked": [{"session": s, "ddc": d, "ldc": l} for s, d, l in c.ranked],
                    "selected": c.selected,
                    "covered": c.covered,
                }
                for c in self.clusters
            ],
            "marked": sorted(self.marked),
            "augmentation": [
                {"page": e.page, "kind": e.kind, "case": e.case_id, "after": e.after}
                for e in self.augmentation
            ],
            "unreachable": self.unreachable,
            "fallback": [{"service": s, "case": c} for s, c in self.fallback],
            "unknown_pages": self.unknown_pages,
        }


def dumps(obj: dict) -> str:
    """Canonical JSON text used for every output file."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def sort_cluster(
    cluster: Cluster,
    sessions: Mapping[str, UserSession],
    counts_fn: Callable[[UserSession], tuple[int, int]],
) -> list[str]:
    """Member ids by descending data count, then link count, then ascending id."""
    keyed = []
    for sid in cluster.members:
        ddc, ldc = counts_fn(sessions[sid])[:2]
        keyed.append((-ddc, -ldc, sid))
    keyed.sort()
    return [sid for _, _, sid in keyed]


def select_from_cluster(
    ordered: Sequence[str],
    sessions: Mapping[str, UserSession],
    graph: PageGraph,
    names: Mapping[str, frozenset[URLName]] | None = None,
) -> tuple[list[str], set[str]]:
    """Walk the ranking, keeping sessions that add an uncovered URL name.

    ``names`` may carry precomputed URL-name sets keyed by session id.
    """
    if names is None:
        names = {sid: url_name_set(sessions[sid]) for sid in ordered}
    target: set[URLName] = set()
    for sid in ordered:
        target |= names[sid]
    covered: set[URLName] = set()
    selected = []
    for sid in ordered:
        if covered >= target:
            break
        if names[sid] - covered:
            selected.append(sid)
            covered |= names[sid]
    marked = set()
    for sid in selected:
        for name in names[sid]:
            key = graph.resolve(name)
            if key is not None:
                marked.add(key)
    return selected, marked


def _page_request(graph: PageGraph, key: str, rng: random.Random) -> Request:
    return graph.nodes[key].make_request(rng)


def _augment_present(
    case: TestCase, graph: PageGraph, rng: random.Random, log: list[AugmentEvent] | None
) -> int:
    keys = case.keys(graph)
    present = {k for k in keys if k is not None}
    inserted = 0
    offset = 0
    for i, b in enumerate(keys):
        if b is None:
            continue
        at = i + offset
        for a in sorted(graph.data_succ[b]):
            if a == b or a in present:
                continue
            case.insert(at + 1, _page_request(graph, a, rng))
            present.add(a)
            if log is not None:
                log.append(AugmentEvent(a, "data", case.case_id, at))
            at += 1
            offset += 1
            inserted += 1
    return inserted


def _augment_ordered(
    case: TestCase, graph: PageGraph, rng: random.Random, log: list[AugmentEvent] | None
) -> int:
    inserted = 0
    keys = case.keys(graph)
    done: set[Edge] | None = None
    while True:
        if done is None:
            done = exercised_data_edges(keys, graph)
        first: dict[str, int] = {}
        for i, k in enumerate(keys):
            if k is not None and k not in first:
                first[k] = i
        missing = [
            (i, b, a)
            for b, i in first.items()
            for a in sorted(set(graph.data_succ[b]))
            if a != b and (b, a) not in done
        ]
        if not missing:
            return inserted
        quiet = [m for m in missing if not graph.nodes[m[2]].defines]
        if quiet:
            # Pages defining nothing cannot break another pair: place them all in one sweep.
            offset = 0
            for i in sorted({m[0] for m in quiet}):
                pos = i + offset
                for j, a in enumerate(a for q, _, a in quiet if q == i):
                    case.insert(pos + 1 + j, _page_request(graph, a, rng))
                    keys.insert(pos + 1 + j, a)
                    if log is not None:
                        log.append(AugmentEvent(a, "data", case.case_id, pos + j))
                    offset += 1
                    inserted += 1
            done = None
            continue
        i, b, a = missing[0]
        trial = keys[: i + 1] + [a] + keys[i + 1:]
        defs = graph.nodes[a].defines
        at_risk = {e for e in done if graph.witness(e) & defs}
        after = exercised_data_edges(trial, graph) if at_risk else None
        if after is None or after >= at_risk:
            case.insert(i + 1, _page_request(graph, a, rng))
            keys = trial
            done = after
            if log is not None:
                log.append(AugmentEvent(a, "data", case.case_id, i))
            inserted += 1
        else:
            # Inserting here would break another pair; replay the definer at the end instead.
            end = len(case.requests)
            case.insert(end, case.requests[i])
            case.insert(end + 1, _page_request(graph, a, rng))
            keys.extend([b, a])
            done = None
            if log is not None:
                log.append(AugmentEvent(b, "data", case.case_id, end - 1))
                log.append(AugmentEvent(a, "data", case.case_id, end))
            inserted += 2


def augment_data_dependents(
    case: TestCase,
    graph: PageGraph,
    rng: random.Random | int = 0,
    strict_order: bool = False,
    log: list[AugmentEvent] | None = None,
) -> TestCase:
    """Return a copy of ``case`` with data-dependent pages inserted.

    By default a dependent page is inserted right after its definer unless
    it already occurs anywhere in the case. With ``strict_order`` every data
    edge whose definer occurs must be exercised in order (definer, then
    dependent, no redefinition in between).
    """
    rng = rng if isinstance(rng, random.Random) else random.Random(rng)
    out = case.copy()
    if strict_order:
        _augment_ordered(out, graph, rng, log)
    else:
        _augment_present(out, graph, rng, log)
    return out


def augment_unreached(
    suite: TestSuite,
    graph: PageGraph,
    marked: set[str],
    rng: random.Random | int = 0,
    log: list[AugmentEvent] | None = None,
) -> tuple[TestSuite, set[str]]:
    """Insert unmarked pages after a marked page that links to them, to a fixpoint.

    Each pass handles the pages with a direct link from the pages marked at
    the start of the pass. The predecessor occurrence used is the one in the
    lowest case, earliest position.
    """
    rng = rng if isinstance(rng, random.Random) else random.Random(rng)
    cases = [c.copy() for c in suite.cases]
    keys = [c.keys(graph) for c in cases]
    marked = set(marked)
    for ks in keys:
        marked.update(k for k in ks if k is not None)
    while True:
        frontier = [n for n in graph.order if n not in marked and graph.link_pred[n] & marked]
        placed = []
        for n1 in frontier:
            preds = graph.link_pred[n1] & marked
            spot = next(
                ((ci, pos) for ci, ks in enumerate(keys) for pos, k in enumerate(ks) if k in preds),
                None,
            )
            if spot is None:
                continue
            ci, pos = spot
            cases[ci].insert(pos + 1, _page_request(graph, n1, rng))
            keys[ci].insert(pos + 1, n1)
            placed.append(n1)
            if log is not None:
                log.append(AugmentEvent(n1, "link", cases[ci].case_id, pos))
        if not placed:
            break
        marked.update(placed)
    return TestSuite(cases, suite.seed, suite.graph_version, suite.strict_data_order), marked


def generate_for_uncovered_service(
    service: Service,
    graph: PageGraph,
    rng: random.Random | int = 0,
    case_id: str = "fallback",
    log: list[AugmentEvent] | None = None,
) -> TestCase:
    """A case visiting the service's URL names in declared order."""
    rng = rng if isinstance(rng, random.Random) else random.Random(rng)
    requests = []
    for name in service.url_names:
        key = graph.resolve(name)
        if key is not None and graph.nodes[key].name == name:
            requests.append(_page_request(graph, key, rng))
        else:
            requests.append(Request(name.url, tuple((p, "") for p in sorted(name.params))))
    case = TestCase(case_id, None, requests, [True] * len(requests), service.id, fallback=True)
    if log is not None:
        for i, name in enumerate(service.url_names):
            log.append(AugmentEvent(name.key, "service-fallback", case_id, i - 1))
    return case


def build_suite(
    report: ClusterReport,
    sessions: Sequence[UserSession],
    graph: PageGraph,
    profile: ServiceProfile,
    seed: int = 0,
    strict_data_order: bool = False,
) -> tuple[TestSuite, SelectionTrace]:
    by_id = {s.id: s for s in sessions}
    counts = node_counts(graph)
    rng = random.Random(seed)
    trace = SelectionTrace()

    names = {s.id: url_name_set(s) for s in sessions}
    unknown = set()
    for s in sessions:
        for name in names[s.id]:
            if graph.resolve(name) is None:
                unknown.add(name.key)
    trace.unknown_pages = sorted(unknown)

    def counts_fn(session: UserSession) -> tuple[int, int]:
        c = session_counts(names[session.id], graph, counts)
        return c.ddc, c.ldc

    picked: list[tuple[str, str]] = []
    for cluster in report.clusters:
        if not cluster.members:
            continue
        ordered = sort_cluster(cluster, by_id, counts_fn)
        selected, marked = select_from_cluster(ordered, by_id, graph, names)
        covered = set()
        for sid in selected:
            covered |= names[sid]
        trace.clusters.append(
            ClusterTrace(
                cluster.service_id,
                [(sid, *counts_fn(by_id[sid])) for sid in ordered],
                selected,
                sorted(n.key for n in covered),
            )
        )
        trace.marked |= marked
        picked.extend((cluster.service_id, sid) for sid in selected)

    n_fallback = sum(1 for sid in report.uncovered if any(s.id == sid for s in profile.services))
    width = max(3, len(str(len(picked) + n_fallback)))
    cases = [
        TestCase(f"tc{i:0{width}d}", sid, list(by_id[sid].requests), service_id=svc)
        for i, (svc, sid) in enumerate(picked, 1)
    ]
    log = trace.augmentation

    def data_pass(cs: list[TestCase]) -> int:
        total = 0
        for c in cs:
            if strict_data_order:
                total += _augment_ordered(c, graph, rng, log)
            else:
                total += _augment_present(c, graph, rng, log)
        return total

    data_pass(cases)
    marked = set(trace.marked)
    while True:
        before = len(log)
        suite, marked = augment_unreached(
            TestSuite(cases, seed, graph.version, strict_data_order), graph, marked, rng, log
        )
        cases = suite.cases
        linked = len(log) - before
        if not data_pass(cases) and not linked:
            break
    for c in cases:
        marked.update(k for k in c.keys(graph) if k is not None)
    trace.unreachable = [k for k in graph.order if k not in marked]

    fallback_cases = []
    for service in profile.services:
        if service.id not in report.uncovered:
            continue
        cid = f"tc{len(cases) + len(fallback_cases) + 1:0{width}d}"
        case = generate_for_uncovered_service(service, graph, rng, cid, log)
        fallback_cases.append(case)
        trace.fallback.append((service.id, cid))
    data_pass(fallback_cases)
    trace.marked = marked
    suite = TestSuite(cases + fallback_cases, seed, graph.version, strict_data_order)
    return suite, trace


def covered_data_edges(suite: TestSuite, graph: PageGraph, strict_order: bool) -> set[Edge]:
    """Data edges the suite covers under the chosen reading."""
    out: set[Edge] = set()
    for c in suite.cases:
        keys = c.keys(graph)
        if strict_order:
            out |= exercised_data_edges(keys, graph)
        else:
            present = set(keys)
            out |= {(b, a) for b, a in graph.data_edges if b in present and a in present}
    return out
