from .byzantine import ByzantineNode
from .clock import Scheduler, SimClock
from .harness import (
    AdversaryConfig,
    Detection,
    Injection,
    Metrics,
    Replay,
    Scenario,
    SimHarness,
    UnknownArtifact,
    UnknownDevice,
    run_scenario,
    scenario_from_wire,
)
from .net import Adversary, SimNetwork, VoteMonitor

__all__ = [
    "Adversary",
    "AdversaryConfig",
    "ByzantineNode",
    "Detection",
    "Injection",
    "Metrics",
    "Replay",
    "Scenario",
    "Scheduler",
    "SimClock",
    "SimHarness",
    "SimNetwork",
    "UnknownArtifact",
    "UnknownDevice",
    "VoteMonitor",
    "run_scenario",
    "scenario_from_wire",
]
