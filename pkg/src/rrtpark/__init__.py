"""Parking on random recursive trees: samplers, parking dynamics, exact
small-size combinatorics and a seeded Monte Carlo harness."""
from .car_laws import (
    AlphaOutOfRange,
    CarLaw,
    GeneralFamily,
    binary_family,
    binary_law,
    family_law,
    parse_law_spec,
)
from .parking_engine import (
    IncrementalParker,
    NotReached,
    ParkingResult,
    park,
    park_sequential,
    parked_cluster,
    theta,
)
from .rrt_core import (
    RecursiveTree,
    ball,
    sample_local_limit,
    sample_recursive_tree,
    sample_tree_at_time,
    sample_yule_tree,
    yule_to_recursive,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaOutOfRange", "CarLaw", "GeneralFamily", "binary_family", "binary_law",
    "family_law", "parse_law_spec", "IncrementalParker", "NotReached",
    "ParkingResult", "park", "park_sequential", "parked_cluster", "theta",
    "RecursiveTree", "ball", "sample_local_limit", "sample_recursive_tree",
    "sample_tree_at_time", "sample_yule_tree", "yule_to_recursive",
]
