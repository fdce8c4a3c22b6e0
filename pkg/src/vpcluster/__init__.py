"""Clustering of 360-degree video users by the overlap of their viewports."""

__version__ = "0.1.0"

from .clustering import Clustering, bron_kerbosch, clique_clustering
from .geometry import (
    Orientation,
    SphereGrid,
    UnitVector,
    ViewportSpec,
    euler_to_orientation,
    geodesic_distance,
    joint_overlap,
    pairwise_overlap,
    point_in_viewport,
    sphere_grid,
    view_direction,
)
from .graph import build_affinity, build_frame_graph
from .ingestion import SynthConfig, TraceDataset, load_traces, synchronize, synth_traces

__all__ = [
    "Clustering", "Orientation", "SphereGrid", "SynthConfig", "TraceDataset", "UnitVector",
    "ViewportSpec", "bron_kerbosch", "build_affinity", "build_frame_graph",
    "clique_clustering", "euler_to_orientation", "geodesic_distance", "joint_overlap",
    "load_traces", "pairwise_overlap", "point_in_viewport", "sphere_grid", "synchronize",
    "synth_traces", "view_direction",
]
