"""Page dependence graph: link edges, data edges and dependence counts.

A site model lists the application's pages with the variables each page
defines and references, plus the navigation (link) edges between them.
Data edges are taken from the model when declared and derived otherwise:
``B -> A`` exists when some variable defined on ``B`` is referenced on
``A`` and a navigation path from ``B`` reaches ``A`` without passing
through another page that redefines it.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import DanglingEdge, SchemaViolation
from .ingest import Request, UserSession
from .profile import URLName, url_name_set

Edge = tuple[str, str]


@dataclass(frozen=True)
class ValueSpec:
    """Domain of a request parameter.

    ``kind`` is ``"int"`` (``lo``/``hi`` inclusive), ``"enum"`` (``choices``)
    or ``"text"``. A text pattern uses ``#`` for a digit and ``?`` for a
    lowercase letter; every other character is copied verbatim.
    """

    kind: str
    lo: int = 0
    hi: int = 0
    choices: tuple[str, ...] = ()
    pattern: str = "????????"

    def __post_init__(self) -> None:
        if self.kind == "int" and self.lo > self.hi:
            raise ValueError("int range needs lo <= hi")
        if self.kind == "enum" and not self.choices:
            raise ValueError("enum needs at least one choice")
        if self.kind not in ("int", "enum", "text"):
            raise ValueError(f"unknown value kind {self.kind!r}")

    def draw(self, rng: random.Random) -> str:
        if self.kind == "int":
            return str(rng.randint(self.lo, self.hi))
        if self.kind == "enum":
            return rng.choice(self.choices)
        out = []
        for ch in self.pattern:
            if ch == "#":
                out.append(rng.choice("0123456789"))
            elif ch == "?":
                out.append(rng.choice("abcdefghijklmnopqrstuvwxyz"))
            else:
                out.append(ch)
        return "".join(out)

    def to_obj(self) -> dict:
        if self.kind == "int":
            return {"int": [self.lo, self.hi]}
        if self.kind == "enum":
            return {"enum": list(self.choices)}
        return {"text": self.pattern}

    @classmethod
    def from_obj(cls, obj: object) -> "ValueSpec":
        if obj is None:
            return cls("text")
        if isinstance(obj, dict) and len(obj) == 1:
            (kind, arg), = obj.items()
            if kind == "int" and isinstance(arg, list) and len(arg) == 2 and all(
                isinstance(x, int) for x in arg
            ):
                return cls("int", lo=arg[0], hi=arg[1])
            if kind == "enum" and isinstance(arg, list) and all(isinstance(x, str) for x in arg):
                return cls("enum", choices=tuple(arg))
            if kind == "text" and isinstance(arg, str):
                return cls("text", pattern=arg)
        raise ValueError(f"bad value spec {obj!r}")


@dataclass(frozen=True)
class PageNode:
    name: URLName
    defines: frozenset[str] = frozenset()
    references: frozenset[str] = frozenset()
    param_specs: tuple[tuple[str, ValueSpec], ...] = ()

    @property
    def key(self) -> str:
        return self.name.key

    def make_request(self, rng: random.Random) -> Request:
        """A request for this page with parameter values drawn from its specs."""
        specs = dict(self.param_specs)
        return Request(
            self.name.url,
            tuple((p, specs[p].draw(rng) if p in specs else "") for p in sorted(self.name.params)),
        )


@dataclass
class SiteModel:
    nodes: list[PageNode]
    link_edges: list[Edge]
    data_edges: list[Edge] = field(default_factory=list)
    version: str = ""

    def __post_init__(self) -> None:
        keys = [n.key for n in self.nodes]
        if len(set(keys)) != len(keys):
            raise SchemaViolation("duplicate page in site model")
        known = set(keys)
        for a, b in list(self.link_edges) + list(self.data_edges):
            for end in (a, b):
                if end not in known:
                    raise DanglingEdge(f"edge {a} -> {b} names unknown page {end}")
        if not self.version:
            self.version = model_digest(self)


def _params_obj(node: PageNode) -> dict:
    specs = dict(node.param_specs)
    return {p: specs[p].to_obj() if p in specs else None for p in sorted(node.name.params)}


def model_to_dict(model: SiteModel, include_version: bool = True) -> dict:
    obj: dict = {
        "nodes": [
            {
                "url": n.name.url,
                "params": _params_obj(n),
                "defines": sorted(n.defines),
                "references": sorted(n.references),
            }
            for n in model.nodes
        ],
        "link_edges": [list(e) for e in model.link_edges],
        "data_edges": [list(e) for e in model.data_edges],
    }
    if include_version:
        obj["version"] = model.version
    return obj


def model_digest(model: SiteModel) -> str:
    blob = json.dumps(model_to_dict(model, include_version=False), sort_keys=True)
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()[:16]


def model_from_dict(obj: object) -> SiteModel:
    if not isinstance(obj, dict) or not isinstance(obj.get("nodes"), list):
        raise SchemaViolation("site model needs a 'nodes' list")
    nodes = []
    for i, raw in enumerate(obj["nodes"]):
        if not isinstance(raw, dict) or not isinstance(raw.get("url"), str):
            raise SchemaViolation(f"node #{i} needs a string 'url'")
        url = raw["url"]
        if not url.startswith("/") or "?" in url:
            raise SchemaViolation(f"node #{i}: bad url {url!r}")
        params = raw.get("params", {})
        if isinstance(params, list):
            params = {p: None for p in params}
        if not isinstance(params, dict):
            raise SchemaViolation(f"node {url}: 'params' must be an object or list")
        try:
            specs = tuple(
                (p, ValueSpec.from_obj(s)) for p, s in sorted(params.items()) if s is not None
            )
        except ValueError as exc:
            raise SchemaViolation(f"node {url}: {exc}") from None
        for fld in ("defines", "references"):
            vals = raw.get(fld, [])
            if not isinstance(vals, list) or not all(isinstance(v, str) for v in vals):
                raise SchemaViolation(f"node {url}: {fld!r} must be a list of names")
        nodes.append(
            PageNode(
                URLName(url, frozenset(params)),
                frozenset(raw.get("defines", [])),
                frozenset(raw.get("references", [])),
                specs,
            )
        )
    by_path: dict[str, list[str]] = {}
    for n in nodes:
        by_path.setdefault(n.name.url, []).append(n.key)
    keys = {n.key for n in nodes}

    def endpoint(ref: object) -> str:
        if not isinstance(ref, str):
            raise SchemaViolation(f"edge endpoint {ref!r} must be a string")
        if ref in keys:
            return ref
        cands = by_path.get(ref, [])
        if len(cands) == 1:
            return cands[0]
        if not cands:
            raise DanglingEdge(f"edge names unknown page {ref}")
        raise SchemaViolation(f"edge endpoint {ref} is ambiguous: {cands}")

    def edges(name: str) -> list[Edge]:
        raw = obj.get(name, [])
        if not isinstance(raw, list):
            raise SchemaViolation(f"{name!r} must be a list of pairs")
        out = []
        for e in raw:
            if not isinstance(e, list) or len(e) != 2:
                raise SchemaViolation(f"{name!r}: edge {e!r} is not a pair")
            out.append((endpoint(e[0]), endpoint(e[1])))
        return out

    return SiteModel(nodes, edges("link_edges"), edges("data_edges"), str(obj.get("version", "")))


def load_site_model(path_or_fp) -> SiteModel:
    try:
        if hasattr(path_or_fp, "read"):
            obj = json.load(path_or_fp)
        else:
            with open(path_or_fp, encoding="utf-8") as fp:
                obj = json.load(fp)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return model_from_dict(obj)


def derive_data_edges(model: SiteModel) -> list[Edge]:
    """Data edges implied by definitions, references and def-clear link paths."""
    succ: dict[str, list[str]] = {n.key: [] for n in model.nodes}
    for a, b in model.link_edges:
        succ[a].append(b)
    by_key = {n.key: n for n in model.nodes}
    found: set[Edge] = set()
    for src in model.nodes:
        for var in sorted(src.defines):
            seen = {src.key}
            queue = deque(succ[src.key])
            while queue:
                cur = queue.popleft()
                if cur in seen:
                    continue
                seen.add(cur)
                node = by_key[cur]
                if var in node.references:
                    found.add((src.key, cur))
                if var in node.defines:
                    continue  # killed: cannot be an interior node for var
                queue.extend(succ[cur])
    return sorted(found)


class NodeCounts(NamedTuple):
    ddc: int
    ldc: int


class SessionCounts(NamedTuple):
    ddc: int
    ldc: int
    unknown: tuple[URLName, ...] = ()


class PageGraph:
    """Site model plus the full data-edge set, with lookup helpers."""

    def __init__(self, model: SiteModel, derive: bool = True):
        self.model = model
        self.nodes = {n.key: n for n in model.nodes}
        self.order = [n.key for n in model.nodes]
        self.link_edges: list[Edge] = list(dict.fromkeys(model.link_edges))
        data = list(model.data_edges) + (derive_data_edges(model) if derive else [])
        self.data_edges: list[Edge] = list(dict.fromkeys(data))
        self.link_succ: dict[str, list[str]] = {k: [] for k in self.order}
        self.link_pred: dict[str, set[str]] = {k: set() for k in self.order}
        self.data_succ: dict[str, list[str]] = {k: [] for k in self.order}
        for a, b in self.link_edges:
            self.link_succ[a].append(b)
            self.link_pred[b].add(a)
        for a, b in self.data_edges:
            self.data_succ[a].append(b)
        self.link_set = set(self.link_edges)
        self.data_set = set(self.data_edges)
        self._by_path: dict[str, list[str]] = {}
        for n in model.nodes:
            self._by_path.setdefault(n.name.url, []).append(n.key)
        self._resolved: dict[object, str | None] = {}
        self._witness = {
            (a, b): frozenset(self.nodes[a].defines & self.nodes[b].references)
            for a, b in self.data_edges
        }
        self.data_pred: dict[str, list[tuple[str, frozenset[str]]]] = {k: [] for k in self.order}
        for a, b in self.data_edges:
            self.data_pred[b].append((a, self._witness[(a, b)]))

    @property
    def version(self) -> str:
        return self.model.version

    def resolve(self, name: URLName | Request) -> str | None:
        """Node key for a URL name: exact match, else the only page on that path."""
        try:
            return self._resolved[name]
        except KeyError:
            pass
        un = URLName.of(name) if isinstance(name, Request) else name
        key = un.key if un.key in self.nodes else None
        if key is None:
            cands = self._by_path.get(un.url)
            if cands and len(cands) == 1:
                key = cands[0]
        self._resolved[name] = key
        return key

    def witness(self, edge: Edge) -> frozenset[str]:
        """Variables carrying the dependence; empty for edges declared without one."""
        return self._witness[edge]


def node_counts(graph: PageGraph) -> dict[str, NodeCounts]:
    out = {}
    for k in graph.order:
        ddc = len({b for b in graph.data_succ[k] if b != k})
        ldc = len({b for b in graph.link_succ[k] if b != k})
        out[k] = NodeCounts(ddc, ldc)
    return out


def session_counts(
    session: UserSession | Iterable[Request],
    graph: PageGraph,
    counts: dict[str, NodeCounts] | None = None,
) -> SessionCounts:
    """Sum of per-page counts over the session's distinct URL names."""
    counts = counts if counts is not None else node_counts(graph)
    ddc = ldc = 0
    unknown = []
    keys = set()
    for name in sorted(url_name_set(session)):
        key = graph.resolve(name)
        if key is None:
            unknown.append(name)
        else:
            keys.add(key)
    for key in keys:
        c = counts[key]
        ddc += c.ddc
        ldc += c.ldc
    return SessionCounts(ddc, ldc, tuple(unknown))


def exercised_data_edges(keys: Sequence[str | None], graph: PageGraph) -> set[Edge]:
    """Data edges exercised by a page sequence.

    ``B -> A`` is exercised when ``B`` occurs and ``A`` occurs later with no
    page in between redefining a witnessing variable. Edges without a
    witnessing variable only need the ordering.
    """
    out: set[Edge] = set()
    last_def: dict[str, str] = {}  # variable -> page that defined it most recently
    seen: set[str] = set()
    for a in keys:
        if a is None:
            continue
        for b, wit in graph.data_pred[a]:
            if (b, a) in out:
                continue
            if not wit:
                if b in seen:
                    out.add((b, a))
                continue
            # B defines every witness variable, so it is intact iff it is still the last definer
            for v in wit:
                if last_def.get(v) == b:
                    out.add((b, a))
                    break
        seen.add(a)
        for v in graph.nodes[a].defines:
            last_def[v] = a
    return out
