"""Multi-query shortest paths in graphs of convex sets.

Offline: synthesize convex quadratic cost-to-go lower bounds with
vertex-revisit penalties via semidefinite programming. Online: greedy
multi-step lookahead rollouts using those bounds, verified against
exhaustive-enumeration oracles.
"""

from .quadratic import QuadraticForm
from .sets import ConvexSetDescription, UnboundedSetError
from .graph import GcsGraph, GcsVertex, GcsEdge, Trajectory, validate_graph, enumerate_paths
from .oracle import exact_sppgcs, relaxed_walk_oracle, floyd_warshall, OracleSolution
from .synthesis import (SynthesisOptions, LowerBoundCertificate, synthesize_bounds,
                        synthesize_all_targets, evaluate_bound, verify_certificate)
from .policy import rollout, lookahead_value, step_policy, RolloutResult
from .bench import BenchmarkReport, QueryRecord, run_benchmark, sample_queries, write_report
from .render import render_svg

__all__ = [
    "QuadraticForm",
    "ConvexSetDescription",
    "UnboundedSetError",
    "GcsGraph",
    "GcsVertex",
    "GcsEdge",
    "Trajectory",
    "validate_graph",
    "enumerate_paths",
    "exact_sppgcs",
    "relaxed_walk_oracle",
    "floyd_warshall",
    "OracleSolution",
    "SynthesisOptions",
    "LowerBoundCertificate",
    "synthesize_bounds",
    "synthesize_all_targets",
    "evaluate_bound",
    "verify_certificate",
    "rollout",
    "lookahead_value",
    "step_policy",
    "RolloutResult",
    "BenchmarkReport",
    "QueryRecord",
    "run_benchmark",
    "sample_queries",
    "write_report",
    "render_svg",
]

__version__ = "0.1.0"
