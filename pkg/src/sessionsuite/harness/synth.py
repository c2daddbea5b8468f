"""Synthetic site models, service profiles and session workloads."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..depgraph import Edge, PageNode, SiteModel, ValueSpec
from ..ingest import UserSession
from ..profile import Service, ServiceProfile, URLName


@dataclass
class UsageProfile:
    start: str
    hop_weights: dict[Edge, float] = field(default_factory=dict)
    stop_probability: float = 0.1
    skew: float | None = None  # Zipf exponent over services
    focus: float = 4.0  # weight multiplier for hops into the drawn service's pages
    max_length: int = 200

    def __post_init__(self) -> None:
        if not 0 < self.stop_probability < 1:
            raise ValueError("stop_probability must lie in (0, 1)")
        if any(w <= 0 for w in self.hop_weights.values()):
            raise ValueError("hop weights must be positive")
        if self.focus <= 0:
            raise ValueError("focus must be positive")


def _random_spec(rng: random.Random) -> ValueSpec:
    roll = rng.random()
    if roll < 0.4:
        lo = rng.randint(0, 50)
        return ValueSpec("int", lo=lo, hi=lo + rng.randint(0, 100))
    if roll < 0.7:
        return ValueSpec("enum", choices=tuple(f"opt{i}" for i in range(rng.randint(1, 4))))
    return ValueSpec("text", pattern=rng.choice(["????", "id-####", "??-??##"]))


def random_site_model(
    n_nodes: int,
    seed: int | random.Random = 0,
    extra_edges: float = 1.5,
    n_vars: int = 4,
    p_define: float = 0.15,
    p_reference: float = 0.2,
    n_declared: int = 1,
    home_links: bool = True,
) -> SiteModel:
    """A random site whose every page is link-reachable from the first one.

    A random spanning tree rooted at page 0 guarantees reachability; about
    ``extra_edges * n_nodes`` further links (back edges and self-loops
    included) are added on top. With ``home_links`` every page also links
    back to page 0, the way site navigation usually does.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if n_nodes < 1:
        raise ValueError("need at least one page")
    width = len(str(n_nodes - 1))
    variables = [f"v{i}" for i in range(n_vars)]
    nodes = []
    for i in range(n_nodes):
        params = sorted(rng.sample(["id", "q", "page", "sort"], rng.randint(0, 2)))
        specs = tuple((p, _random_spec(rng)) for p in params)
        nodes.append(
            PageNode(
                URLName(f"/p{i:0{width}d}.jsp", frozenset(params)),
                frozenset(v for v in variables if rng.random() < p_define),
                frozenset(v for v in variables if rng.random() < p_reference),
                specs,
            )
        )
    keys = [n.key for n in nodes]
    links: list[Edge] = [(keys[rng.randrange(i)], keys[i]) for i in range(1, n_nodes)]
    if home_links:
        links.extend((k, keys[0]) for k in keys[1:] if (k, keys[0]) not in links)
    present = set(links)
    for _ in range(int(extra_edges * n_nodes)):
        e = (rng.choice(keys), rng.choice(keys))
        if e not in present:
            present.add(e)
            links.append(e)
    declared: list[Edge] = []
    for _ in range(n_declared if n_nodes > 1 else 0):
        a, b = rng.sample(keys, 2)
        if (a, b) not in declared:
            declared.append((a, b))
    return SiteModel(nodes, links, declared)


def random_profile(
    model: SiteModel, n_services: int, seed: int | random.Random = 0, max_pages: int = 6
) -> ServiceProfile:
    """Services shaped like use-case scenarios: short link walks from the first page."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    succ: dict[str, list[str]] = {n.key: [] for n in model.nodes}
    for a, b in model.link_edges:
        succ[a].append(b)
    by_key = {n.key: n for n in model.nodes}
    start = model.nodes[0].key
    services = []
    for i in range(n_services):
        path = [start]
        cur = start
        for _ in range(rng.randint(1, max_pages - 1)):
            if not succ[cur]:
                break
            cur = rng.choice(succ[cur])
            if cur not in path:
                path.append(cur)
        names = tuple(by_key[k].name for k in path)
        services.append(Service(f"svc{i + 1}", f"scenario {i + 1}", names))
    return ServiceProfile(tuple(services), version=f"random-{model.version}")


def zipf_weights(n: int, exponent: float) -> list[float]:
    return [1.0 / (rank ** exponent) for rank in range(1, n + 1)]


def generate_sessions(
    model: SiteModel,
    usage: UsageProfile,
    n: int,
    seed: int | random.Random = 0,
    profile: ServiceProfile | None = None,
) -> list[UserSession]:
    """``n`` weighted random walks over link edges starting at ``usage.start``."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    by_key = {nd.key: nd for nd in model.nodes}
    if usage.start not in by_key:
        raise ValueError(f"start page {usage.start} is not in the model")
    succ: dict[str, list[str]] = {k: [] for k in by_key}
    for a, b in dict.fromkeys(model.link_edges):
        succ[a].append(b)
    targets: list[frozenset[str]] = []
    tweights: list[float] = []
    if usage.skew is not None and profile is not None and profile.services:
        keys_by_name = {nd.name: nd.key for nd in model.nodes}
        targets = [
            frozenset(keys_by_name[nm] for nm in s.url_names if nm in keys_by_name)
            for s in profile.services
        ]
        tweights = zipf_weights(len(targets), usage.skew)
    width = max(5, len(str(n)))
    sessions = []
    for i in range(n):
        focus: frozenset[str] = frozenset()
        if targets:
            focus = rng.choices(targets, tweights)[0]
        cur = usage.start
        requests = [by_key[cur].make_request(rng)]
        while len(requests) < usage.max_length and succ[cur]:
            if rng.random() < usage.stop_probability:
                break
            options = succ[cur]
            weights = [
                usage.hop_weights.get((cur, nxt), 1.0) * (usage.focus if nxt in focus else 1.0)
                for nxt in options
            ]
            cur = rng.choices(options, weights)[0]
            requests.append(by_key[cur].make_request(rng))
        sessions.append(UserSession(f"g{i + 1:0{width}d}", requests, source="synthetic"))
    return sessions
