"""Deterministic simulator for knowledge-network federated learning.

Clients mutually train a private local model with a tiny shared-architecture
knowledge network; the server ensembles the returned knowledge networks and
distills them into the next global knowledge network.  A weighted-averaging
baseline, non-IID Dirichlet partitioning, and communication-cost accounting
round out the toolkit.
"""

from .nets import ArchSpec, Network, init_network
from .data import Dataset, PartitionMap, dirichlet_partition, load_idx, synth_blobs
from .config import ExperimentConfig, parse_config
from .runner import run_experiment

__all__ = [
    "ArchSpec", "Network", "init_network",
    "Dataset", "PartitionMap", "dirichlet_partition", "load_idx", "synth_blobs",
    "ExperimentConfig", "parse_config", "run_experiment",
]

__version__ = "0.1.0"
