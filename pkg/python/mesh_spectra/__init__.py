from .constants import TOOL_VERSION
from .errors import MeshParseError, MeshStructureError, NumericalError, ResourceLimitError
from .graph_spectral import (
    Band,
    LaplacianMatrix,
    SpectralBasis,
    SpectralCoefficients,
    build_laplacian,
    gft,
    igft,
)
from .mesh_core import MeshGraph, TriangleMesh, ValidationReport, build_graph, validate
from .obj_io import parse_obj, read_obj_file, write_obj, write_obj_file
from .subdiv_model import HandModel, Pose, SubdivisionOperator, build_subdivision_operator

__all__ = [
    "TOOL_VERSION",
    "MeshParseError",
    "MeshStructureError",
    "NumericalError",
    "ResourceLimitError",
    "TriangleMesh",
    "MeshGraph",
    "ValidationReport",
    "build_graph",
    "validate",
    "parse_obj",
    "write_obj",
    "read_obj_file",
    "write_obj_file",
    "LaplacianMatrix",
    "SpectralBasis",
    "SpectralCoefficients",
    "Band",
    "build_laplacian",
    "gft",
    "igft",
    "SubdivisionOperator",
    "HandModel",
    "Pose",
    "build_subdivision_operator",
]
