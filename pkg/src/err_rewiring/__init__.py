"""Effective-resistance graph rewiring, curvature baselines and from-scratch GNN diagnostics."""

__version__ = "0.1.0"

from ._backend import HAVE_NUMBA, USE_NUMBA, backend_name
from .graph import Graph, GraphError, from_edge_list, strongly_connected_components, symmetrize
from .resistance import (
    ResistanceReport,
    commute_time_estimate,
    effective_resistance,
    effective_resistance_directed,
    effective_resistance_undirected,
    resistance_per_hop,
)
from .curvature import curvature_all_edges, ollivier_ricci_edge, wasserstein1
from .rewiring import STRATEGIES, RewiringConfig, RewiringState, replay, rewire
from .gnn import HYPERPARAMS, TrainConfig, gradient_check, pairnorm, train
from .diagnostics import class_pair_cosine, edge_set_overlap, linear_cka, linear_probe

__all__ = [
    "HAVE_NUMBA", "USE_NUMBA", "backend_name",
    "Graph", "GraphError", "from_edge_list", "strongly_connected_components", "symmetrize",
    "ResistanceReport", "commute_time_estimate", "effective_resistance",
    "effective_resistance_directed", "effective_resistance_undirected", "resistance_per_hop",
    "curvature_all_edges", "ollivier_ricci_edge", "wasserstein1",
    "STRATEGIES", "RewiringConfig", "RewiringState", "replay", "rewire",
    "HYPERPARAMS", "TrainConfig", "gradient_check", "pairnorm", "train",
    "class_pair_cosine", "edge_set_overlap", "linear_cka", "linear_probe",
]
