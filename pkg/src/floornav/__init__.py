"""Infrastructure-free visual localization and wayfinding on 2D floor plans.

The package turns a one-time video walkthrough of a building into a
topometric map (reference images with floor-plan poses, landmarks,
boundaries, destinations), localizes single query images against it by
global-descriptor retrieval plus local-feature verification, and guides a
user along boundary-aware shortest routes.  A deterministic synthetic world
stands in for the camera and descriptor networks so the whole loop runs
offline and under test.
"""

__version__ = "0.1.0"

from .descriptors import (
    LocalFeature,
    MatchSet,
    descriptor_distance,
    ingest_descriptor_files,
    match_local_features,
    write_descriptor_files,
)
from .errors import FloornavError
from .evaluation import ErrorTable, TestPoint, order_probability, run_sweep
from .geometry import (
    Direction,
    FloorPoint,
    FloorTransform,
    MapPoint3,
    estimate_floor_transform,
    slice_directions,
)
from .localization import (
    DescriptorIndex,
    LocalizationConfig,
    LocalizationResult,
    Localizer,
)
from .mapstore import (
    Boundary,
    Destination,
    Landmark,
    ReferenceImage,
    TopometricMap,
    build_reference_database,
    evolve_map,
    extract_boundaries,
    load_map,
    save_map,
)
from .navigation import NavGraph, Route, build_nav_graph, guide, segments_intersect, shortest_route
from .pnp import PinholeCamera, solve_pnp
from .synthetic import SyntheticWorld, WorldConfig, build_world_map

__all__ = [
    "__version__",
    "Boundary",
    "Destination",
    "DescriptorIndex",
    "Direction",
    "ErrorTable",
    "FloorPoint",
    "FloorTransform",
    "FloornavError",
    "Landmark",
    "LocalFeature",
    "LocalizationConfig",
    "LocalizationResult",
    "Localizer",
    "MapPoint3",
    "MatchSet",
    "NavGraph",
    "PinholeCamera",
    "ReferenceImage",
    "Route",
    "SyntheticWorld",
    "TestPoint",
    "TopometricMap",
    "WorldConfig",
    "build_nav_graph",
    "build_reference_database",
    "build_world_map",
    "descriptor_distance",
    "estimate_floor_transform",
    "evolve_map",
    "extract_boundaries",
    "guide",
    "ingest_descriptor_files",
    "load_map",
    "match_local_features",
    "order_probability",
    "run_sweep",
    "save_map",
    "segments_intersect",
    "shortest_route",
    "slice_directions",
    "solve_pnp",
    "write_descriptor_files",
]
