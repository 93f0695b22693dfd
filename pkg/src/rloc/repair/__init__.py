"""Candidate selection and DP repair of flawed position runs."""

from .engine import RepairedEntry, RepairedTrajectory, flawed_runs, repair_sequence
from .graph import (C_FLOOR, PathResult, RepairGraph, build_repair_graph, dp_max_joint_path, edge_weight,
                    edge_weight_matrix, enumerate_paths)
from .profiles import (GridProfile, ProfileTable, build_grid_profiles, candidate_similarity,
                       grid_posterior, select_candidates, serving_distance, vertex_weights)

__all__ = [
    "C_FLOOR", "GridProfile", "PathResult", "ProfileTable", "RepairGraph", "RepairedEntry",
    "RepairedTrajectory", "build_grid_profiles", "build_repair_graph", "candidate_similarity",
    "dp_max_joint_path", "edge_weight", "edge_weight_matrix", "enumerate_paths", "flawed_runs",
    "grid_posterior", "repair_sequence", "select_candidates", "serving_distance", "vertex_weights",
]
