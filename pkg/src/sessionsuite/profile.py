"""Service profiles and clustering of user sessions by maximal overlap."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyProfile, SchemaViolation
from .ingest import Request, UserSession


@dataclass(frozen=True)
class URLName:
    """Page identity: a path plus the *names* of its parameters."""

    url: str
    params: frozenset[str] = frozenset()

    @classmethod
    def of(cls, request: Request) -> "URLName":
        return cls(request.url, request.param_names)

    @property
    def key(self) -> str:
        if not self.params:
            return self.url
        return self.url + "?" + "&".join(sorted(self.params))

    def __str__(self) -> str:
        return self.key

    def __lt__(self, other: "URLName") -> bool:
        return (self.url, sorted(self.params)) < (other.url, sorted(other.params))


@dataclass(frozen=True)
class Service:
    id: str
    title: str
    url_names: tuple[URLName, ...]
    # Entries declared with an empty parameter list match their path with any parameters.
    wildcards: frozenset[URLName] = frozenset()

    def __post_init__(self) -> None:
        if not self.url_names:
            raise ValueError(f"service {self.id!r} declares no url names")


@dataclass(frozen=True)
class ServiceProfile:
    services: tuple[Service, ...]
    version: str = ""

    def __post_init__(self) -> None:
        ids = [s.id for s in self.services]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate service ids")

    def __len__(self) -> int:
        return len(self.services)

    def service(self, service_id: str) -> Service:
        for s in self.services:
            if s.id == service_id:
                return s
        raise KeyError(service_id)


@dataclass
class Cluster:
    service_id: str
    members: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TieEvent:
    session_id: str
    tied: tuple[str, ...]
    chosen: str


@dataclass
class ClusterReport:
    clusters: list[Cluster]
    unmatched: list[str]
    uncovered: list[str]
    ties: list[TieEvent]
    usage: dict[str, int]
    seed: int | None = None

    def cluster(self, service_id: str) -> Cluster:
        for c in self.clusters:
            if c.service_id == service_id:
                return c
        raise KeyError(service_id)

    def to_dict(self, tool_version: str = "") -> dict:
        return {
            "tool_version": tool_version,
            "seed": self.seed,
            "clusters": [{"service": c.service_id, "members": c.members} for c in self.clusters],
            "unmatched": self.unmatched,
            "uncovered": self.uncovered,
            "ties": [
                {"session": t.session_id, "tied": list(t.tied), "chosen": t.chosen}
                for t in self.ties
            ],
            "usage": self.usage,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ClusterReport":
        try:
            return cls(
                clusters=[Cluster(c["service"], list(c["members"])) for c in obj["clusters"]],
                unmatched=list(obj["unmatched"]),
                uncovered=list(obj["uncovered"]),
                ties=[TieEvent(t["session"], tuple(t["tied"]), t["chosen"]) for t in obj["ties"]],
                usage={k: int(v) for k, v in obj["usage"].items()},
                seed=obj.get("seed"),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise SchemaViolation(f"malformed cluster report: {exc}") from None


def _url_name_from_obj(obj: object, where: str) -> tuple[URLName, bool]:
    if not isinstance(obj, dict) or not isinstance(obj.get("url"), str):
        raise SchemaViolation(f"{where}: url name needs a string 'url'")
    url = obj["url"]
    if not url.startswith("/"):
        raise SchemaViolation(f"{where}: url {url!r} must start with '/'")
    params = obj.get("params", [])
    if not isinstance(params, list) or not all(isinstance(p, str) for p in params):
        raise SchemaViolation(f"{where}: 'params' must be a list of names")
    wildcard = not params and not obj.get("exact", False)
    return URLName(url, frozenset(params)), wildcard


def profile_from_dict(obj: object) -> ServiceProfile:
    if not isinstance(obj, dict) or not isinstance(obj.get("services"), list):
        raise SchemaViolation("profile needs a 'services' list")
    services = []
    seen = set()
    for i, raw in enumerate(obj["services"]):
        if not isinstance(raw, dict) or not isinstance(raw.get("id"), str):
            raise SchemaViolation(f"service #{i} needs a string 'id'")
        sid = raw["id"]
        if sid in seen:
            raise SchemaViolation(f"duplicate service id {sid!r}")
        seen.add(sid)
        entries = raw.get("url_names")
        if not isinstance(entries, list) or not entries:
            raise SchemaViolation(f"service {sid!r} needs a non-empty 'url_names' list")
        names: list[URLName] = []
        wild = set()
        for entry in entries:
            name, is_wild = _url_name_from_obj(entry, f"service {sid!r}")
            if name not in names:
                names.append(name)
            if is_wild:
                wild.add(name)
        services.append(Service(sid, str(raw.get("title", sid)), tuple(names), frozenset(wild)))
    if not services:
        raise EmptyProfile("profile declares no services")
    return ServiceProfile(tuple(services), str(obj.get("version", "")))


def profile_to_dict(profile: ServiceProfile) -> dict:
    def entry(s: Service, n: URLName) -> dict:
        d: dict = {"url": n.url, "params": sorted(n.params)}
        if not n.params and n not in s.wildcards:
            d["exact"] = True
        return d

    return {
        "version": profile.version,
        "services": [
            {"id": s.id, "title": s.title, "url_names": [entry(s, n) for n in s.url_names]}
            for s in profile.services
        ],
    }


def load_service_profile(path_or_fp) -> ServiceProfile:
    try:
        if hasattr(path_or_fp, "read"):
            obj = json.load(path_or_fp)
        else:
            with open(path_or_fp, encoding="utf-8") as fp:
                obj = json.load(fp)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return profile_from_dict(obj)


def url_name_set(session: UserSession | Iterable[Request]) -> frozenset[URLName]:
    if isinstance(session, frozenset):
        return session
    requests = session.requests if isinstance(session, UserSession) else session
    return frozenset(URLName.of(r) for r in requests)


def overlap(session: UserSession | frozenset[URLName], service: Service) -> int:
    """Number of the service's url names that the session visits."""
    names = session if isinstance(session, frozenset) else url_name_set(session)
    if not service.wildcards:
        return sum(1 for e in service.url_names if e in names)
    paths = {n.url for n in names}
    return sum(
        1 for e in service.url_names
        if e in names or (e in service.wildcards and e.url in paths)
    )


def best_services(session: UserSession, profile: ServiceProfile) -> tuple[int, list[str]]:
    """Maximum overlap and the ids of every service attaining it."""
    names = url_name_set(session)
    best, tied = 0, []
    for s in profile.services:
        k = overlap(names, s)
        if k > best:
            best, tied = k, [s.id]
        elif k == best and k > 0:
            tied.append(s.id)
    return best, tied


def _rng(seed: int | random.Random | None) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def associate(
    session: UserSession, profile: ServiceProfile, rng: int | random.Random | None = 0
) -> str | None:
    """Service id with the largest overlap, or ``None`` when nothing overlaps.

    Ties are broken uniformly at random from ``rng``; the candidates are
    considered in id order so the draw does not depend on profile order.
    """
    if not profile.services:
        raise EmptyProfile("cannot associate against an empty profile")
    best, tied = best_services(session, profile)
    if best == 0:
        return None
    if len(tied) == 1:
        return tied[0]
    return _rng(rng).choice(sorted(tied))


def cluster_sessions(
    sessions: Sequence[UserSession], profile: ServiceProfile, seed: int = 0
) -> ClusterReport:
    ids = [s.id for s in sessions]
    if len(set(ids)) != len(ids):
        raise ValueError("session ids must be unique")
    rng = random.Random(seed)
    members: dict[str, list[str]] = {s.id: [] for s in profile.services}
    unmatched: list[str] = []
    ties: list[TieEvent] = []
    for session in sessions:
        best, tied = best_services(session, profile)
        if best == 0:
            unmatched.append(session.id)
            continue
        if len(tied) == 1:
            chosen = tied[0]
        else:
            chosen = rng.choice(sorted(tied))
            ties.append(TieEvent(session.id, tuple(sorted(tied)), chosen))
        members[chosen].append(session.id)
    clusters = [Cluster(s.id, members[s.id]) for s in profile.services]
    return ClusterReport(
        clusters=clusters,
        unmatched=unmatched,
        uncovered=[c.service_id for c in clusters if not c.members],
        ties=ties,
        usage={c.service_id: len(c.members) for c in clusters},
        seed=seed,
    )


def conformance_summary(report: ClusterReport, profile: ServiceProfile) -> str:
    """Human-readable usage-versus-profile table."""
    total = sum(report.usage.values()) + len(report.unmatched)
    lines = [f"{'service':<12} {'title':<24} {'sessions':>8} {'share':>7}"]
    for s in profile.services:
        n = report.usage.get(s.id, 0)
        share = n / total if total else 0.0
        flag = "  (uncovered)" if s.id in report.uncovered else ""
        lines.append(f"{s.id:<12} {s.title[:24]:<24} {n:>8} {share:>7.1%}{flag}")
    lines.append(f"{'unmatched':<12} {'':<24} {len(report.unmatched):>8}")
    if report.ties:
        lines.append(f"tie events: {len(report.ties)}")
    return "\n".join(lines)
