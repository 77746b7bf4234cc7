"""P1 finite elements for the p-capacitor problem on planar meshes."""
from ._backend import BACKEND
from .energy import energy, energy_hessian, gradient_fd_error
from .mesh import Mesh, MeshError, MeshFormatError, annulus_mesh, read_mesh, unit_square_mesh, write_mesh
from .solver import (
    ContinuationResult,
    ContinuationSchedule,
    ScalarField,
    SolverConfig,
    SolverError,
    continue_to_one,
    extrapolate_linear,
    inverse_moser,
    moser_transform,
    residual_pharmonic,
    solve_capacitor,
)

__all__ = [
    "BACKEND", "energy", "energy_hessian", "gradient_fd_error", "Mesh", "MeshError", "MeshFormatError",
    "annulus_mesh", "read_mesh", "unit_square_mesh", "write_mesh", "ContinuationResult",
    "ContinuationSchedule", "ScalarField", "SolverConfig", "SolverError", "continue_to_one",
    "extrapolate_linear", "inverse_moser", "moser_transform", "residual_pharmonic", "solve_capacitor",
]
