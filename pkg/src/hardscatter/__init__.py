"""Two-dimensional sound-hard scattering: geometry, meshing, FEM solves and stability studies."""

from .geometry import (
    GeometryError,
    PolyChain,
    Scatterer,
    disk,
    empty_scatterer,
    hausdorff_distance,
    load_geometry,
    polygon,
    polyline,
    pseudo_distance,
    save_geometry,
    thicken,
)
from .mesh import DomainSpec, MeshError, TriMesh, triangulate
from .scattering import FarFieldPattern, PlaneWave, decay_check, far_field
from .solver import (
    ComplexField,
    FieldRole,
    SolverError,
    make_dtn,
    solve_elliptic,
    solve_helmholtz_scattering,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexField",
    "DomainSpec",
    "FarFieldPattern",
    "FieldRole",
    "GeometryError",
    "MeshError",
    "PlaneWave",
    "PolyChain",
    "Scatterer",
    "SolverError",
    "TriMesh",
    "decay_check",
    "disk",
    "empty_scatterer",
    "far_field",
    "hausdorff_distance",
    "load_geometry",
    "make_dtn",
    "polygon",
    "polyline",
    "pseudo_distance",
    "save_geometry",
    "solve_elliptic",
    "solve_helmholtz_scattering",
    "thicken",
    "triangulate",
]
