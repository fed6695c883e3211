"""flowcluster: logical clustering of flow-sensors.

Protocol library (flow tables, CHORD overlay, synchronized logical sinks)
plus a deterministic discrete-event simulator that measures per-cluster
delay, jitter and packet loss, wrapped in an HTTP service with a thin CLI.
"""

from .engine import MobilityConfig, ScenarioConfig, SimResult, build_topology, run
from .metrics import MetricsReport
from .model import ContextFlowTableEntry, MatchFields, Packet
from .sink import SinkCluster

__version__ = "0.1.0"

__all__ = [
    "MobilityConfig",
    "ScenarioConfig",
    "SimResult",
    "build_topology",
    "run",
    "MetricsReport",
    "ContextFlowTableEntry",
    "MatchFields",
    "Packet",
    "SinkCluster",
    "__version__",
]
