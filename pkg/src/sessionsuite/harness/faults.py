"""Seeded faults aligned with the coverage criteria: pages, transitions, data edges."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Mapping

from ..depgraph import PageGraph
from ..errors import InsufficientPopulation, SchemaViolation

FAULT_KINDS = ("page", "transition", "datadep")


@dataclass(frozen=True)
class FaultSpec:
    fault_id: str
    kind: str
    target: tuple[str, ...]
    description: str = ""

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if len(self.target) != (1 if self.kind == "page" else 2):
            raise ValueError(f"fault {self.fault_id}: wrong target arity for {self.kind}")

    def to_dict(self) -> dict:
        return {
            "id": self.fault_id, "kind": self.kind,
            "target": list(self.target), "description": self.description,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FaultSpec":
        return cls(obj["id"], obj["kind"], tuple(obj["target"]), obj.get("description", ""))


def fault_population(graph: PageGraph, kind: str) -> list[tuple[str, ...]]:
    if kind == "page":
        return [(k,) for k in graph.order]
    if kind == "transition":
        return sorted(graph.link_edges)
    if kind == "datadep":
        return sorted(graph.data_edges)
    raise ValueError(f"unknown fault kind {kind!r}")


def seed_faults(
    graph: PageGraph, counts: Mapping[str, int], seed: int | random.Random = 0
) -> list[FaultSpec]:
    """Sample faults without replacement per kind, in the fixed kind order."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    faults = []
    for kind in FAULT_KINDS:
        k = counts.get(kind, 0)
        if k <= 0:
            continue
        population = fault_population(graph, kind)
        if k > len(population):
            raise InsufficientPopulation(
                f"asked for {k} {kind} faults but only {len(population)} candidates exist"
            )
        for i, target in enumerate(rng.sample(population, k), 1):
            desc = {
                "page": f"page {target[0]} misbehaves",
                "transition": f"navigation {' -> '.join(target)} misbehaves",
                "datadep": f"value flowing {' -> '.join(target)} is corrupted",
            }[kind]
            faults.append(FaultSpec(f"F-{kind}-{i:03d}", kind, tuple(target), desc))
    return faults


def validate_faults(faults: list[FaultSpec], graph: PageGraph) -> None:
    for f in faults:
        if f.kind == "page" and f.target[0] not in graph.nodes:
            raise SchemaViolation(f"fault {f.fault_id}: unknown page {f.target[0]}")
        if f.kind == "transition" and tuple(f.target) not in graph.link_set:
            raise SchemaViolation(f"fault {f.fault_id}: {f.target} is not a link edge")
        if f.kind == "datadep" and tuple(f.target) not in graph.data_set:
            raise SchemaViolation(f"fault {f.fault_id}: {f.target} is not a data edge")


def dump_faults(faults: list[FaultSpec], model_version: str) -> str:
    return json.dumps(
        {"model_version": model_version, "faults": [f.to_dict() for f in faults]},
        indent=2, sort_keys=True,
    ) + "\n"


def load_faults(path_or_fp) -> tuple[list[FaultSpec], str | None]:
    """Faults plus the model version they were seeded against (``None`` if absent)."""
    try:
        if hasattr(path_or_fp, "read"):
            obj = json.load(path_or_fp)
        else:
            with open(path_or_fp, encoding="utf-8") as fp:
                obj = json.load(fp)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc.msg}", exc.lineno) from None
    version = None
    if isinstance(obj, dict):
        version = obj.get("model_version")
        obj = obj.get("faults")
    if not isinstance(obj, list):
        raise SchemaViolation("faults file must hold a list of faults")
    try:
        return [FaultSpec.from_dict(f) for f in obj], version
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed fault: {exc}") from None
