"""Shortest-path time slicing of the Schrodinger propagator on the unit sphere."""

__version__ = "0.1.0"

from .geometry import BumpProfile, Point3, geodesic_distance, kernel, van_vleck  # noqa: E402
from .propagator import SliceConfig, SliceEigenvalues, eigenvalue, error_norm, slice_eigenvalues, time_slice  # noqa: E402
from .spectral import SphereGrid, SpectralState, analyze, exact_propagator, projector, synthesize  # noqa: E402

__all__ = [
    "BumpProfile",
    "Point3",
    "SliceConfig",
    "SliceEigenvalues",
    "SphereGrid",
    "SpectralState",
    "analyze",
    "eigenvalue",
    "error_norm",
    "exact_propagator",
    "geodesic_distance",
    "kernel",
    "projector",
    "slice_eigenvalues",
    "synthesize",
    "time_slice",
    "van_vleck",
]
