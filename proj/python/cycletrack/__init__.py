"""Cycle extraction and tracking for time-varying granular force networks."""

from ._core import (
    CycleHierarchy,
    DataError,
    ForceNetwork,
    TrackingGraph,
    Triangulation,
    generate_synthetic,
    load_dataset,
    overlap_matrix,
    run_cli,
    track,
    triangle_overlap_area,
)

__all__ = [
    "CycleHierarchy",
    "DataError",
    "ForceNetwork",
    "TrackingGraph",
    "Triangulation",
    "generate_synthetic",
    "load_dataset",
    "overlap_matrix",
    "run_cli",
    "track",
    "triangle_overlap_area",
]
