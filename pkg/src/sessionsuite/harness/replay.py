"""Simulated execution of sessions or test cases against a page graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from ..depgraph import Edge, PageGraph, exercised_data_edges
from ..ingest import Request, UserSession
from ..reduce import TestCase, TestSuite


@dataclass
class CaseReplay:
    case_id: str
    pages: list[str]
    transitions: set[Edge]
    jumps: list[Edge]
    defuse: set[Edge]
    unknown: list[str]


@dataclass
class ReplayResult:
    cases: list[CaseReplay] = field(default_factory=list)

    @property
    def visited(self) -> set[str]:
        return {p for c in self.cases for p in c.pages}

    @property
    def transitions(self) -> set[Edge]:
        return {t for c in self.cases for t in c.transitions}

    @property
    def defuse(self) -> set[Edge]:
        return {e for c in self.cases for e in c.defuse}

    @property
    def warnings(self) -> list[str]:
        return sorted({u for c in self.cases for u in c.unknown})

    @property
    def requests(self) -> int:
        return sum(len(c.pages) + len(c.unknown) for c in self.cases)


Runnable = Union[TestSuite, Iterable[Union[UserSession, TestCase]]]


def _as_cases(runnable: Runnable) -> list[tuple[str, list[Request]]]:
    items = runnable.cases if isinstance(runnable, TestSuite) else runnable
    out = []
    for it in items:
        if isinstance(it, TestCase):
            out.append((it.case_id, it.requests))
        else:
            out.append((it.id, it.requests))
    return out


def replay_case(case_id: str, requests: list[Request], graph: PageGraph) -> CaseReplay:
    keys = [graph.resolve(r) for r in requests]
    unknown = [r.url for r, k in zip(requests, keys) if k is None]
    pages = [k for k in keys if k is not None]
    transitions: set[Edge] = set()
    jumps: list[Edge] = []
    for a, b in zip(keys, keys[1:]):
        if a is None or b is None:
            continue
        if (a, b) in graph.link_set:
            transitions.add((a, b))
        else:
            jumps.append((a, b))
    return CaseReplay(case_id, pages, transitions, jumps, exercised_data_edges(keys, graph), unknown)


def replay(runnable: Runnable, graph: PageGraph) -> ReplayResult:
    """Pages visited, link transitions taken and def-use pairs exercised, per case.

    Consecutive pages without a link edge between them count as jumps, not
    transitions. Unknown pages are reported and break adjacency.
    """
    return ReplayResult([replay_case(cid, reqs, graph) for cid, reqs in _as_cases(runnable)])
