"""Evaluation harness: synthetic workloads, seeded faults, replay and metrics."""

from .evaluate import (
    Detection,
    Metrics,
    baseline_greedy,
    compare,
    detection_rate,
    distill,
    measure,
    order_mismatch_warning,
    selected_sessions,
)
from .faults import FAULT_KINDS, FaultSpec, dump_faults, load_faults, seed_faults, validate_faults
from .replay import CaseReplay, ReplayResult, replay
from .synth import UsageProfile, generate_sessions, random_profile, random_site_model

__all__ = [
    "CaseReplay", "Detection", "FAULT_KINDS", "FaultSpec", "Metrics", "ReplayResult",
    "UsageProfile", "baseline_greedy", "compare", "detection_rate", "distill", "dump_faults",
    "generate_sessions", "load_faults", "measure", "order_mismatch_warning", "random_profile",
    "random_site_model", "replay", "seed_faults", "selected_sessions", "validate_faults",
]
