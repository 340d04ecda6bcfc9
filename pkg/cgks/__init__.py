"""
CGKS: compact gas-kinetic finite-volume solver for 3D Euler / Navier-Stokes
on unstructured hybrid meshes, with two third-order reconstruction paths.
"""
from .config import CaseConfig, load_case, parse_case
from .driver import (NormReport, analytic_error, bench_reconstruction, build_mesh, convergence_orders,
                     run_case, surface_forces)
from .errors import (CGKSError, ConfigError, MeshError, NonPhysicalStateError, SolverError,
                     UnmatchedPeriodicFaceError, UnsupportedElementError)
from .evolution import Solver, SolverOptions, SolverState
from .mesh import Mesh, compute_geometry
from .mesh_tools import BoxSpec, PatchKind, gen_box, gen_ogrid, pair_periodic, read_msh
from .output import write_solution

__version__ = "1.0.0"

__all__ = [
    "BoxSpec", "CaseConfig", "CGKSError", "ConfigError", "Mesh", "MeshError", "NonPhysicalStateError",
    "NormReport", "PatchKind", "Solver", "SolverError", "SolverOptions", "SolverState",
    "UnmatchedPeriodicFaceError", "UnsupportedElementError", "analytic_error", "bench_reconstruction",
    "build_mesh", "compute_geometry", "convergence_orders", "gen_box", "gen_ogrid", "load_case",
    "pair_periodic", "parse_case", "read_msh", "run_case", "surface_forces", "write_solution",
]
