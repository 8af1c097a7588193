"""Round-accurate k-machine model simulator with sketch-based connectivity,
MST, min-cut estimation and graph verification."""

from .connectivity import Config, ConnectivityResult, ConnectivityRun, run_connectivity
from .graph import Graph, GraphError, Partition, generate, parse_spec, read_graph, rvp_partition, write_graph
from .sim import BandwidthConfig, MessageEnvelope, Network, RoundMetrics

__all__ = ["BandwidthConfig", "Config", "ConnectivityResult", "ConnectivityRun", "Graph", "GraphError",
           "MessageEnvelope", "Network", "Partition", "RoundMetrics", "generate", "parse_spec", "read_graph",
           "run_connectivity", "rvp_partition", "write_graph"]

__version__ = "0.1.0"
