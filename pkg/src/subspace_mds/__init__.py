"""Least-squares multidimensional scaling by stress majorization, in full space and in a
band-limited spectral subspace, with a constrained variant for image retargeting."""

from .laplace import (EigenBasis, EigenSolverError, SeparableGridBasis, cotan_matrices, eigenbasis,
                      fourier_basis_grid, graph_laplacian, mesh_basis)
from .mesh_io import (RasterImage, TriangleMesh, generate_grid_mesh, generate_sphere_mesh, load_image, load_mesh,
                      save_image, save_mesh)
from .metric import GeodesicOracle, GridGeodesics, MeshGeodesics, SamplingSet, farthest_point_sampling
from .retarget import (QuadraticProgram, RetargetConfig, build_retarget_problem, qp_solve, solve_constrained,
                       warp_image)
from .smacof import ConvergenceLog, SolverOptions, rre_accelerate, smacof_rre_solve, smacof_solve, smacof_step
from .spectral import (MultiresSchedule, multires_solve, regularized_interpolate, spectral_interpolate,
                       spectral_smacof, spectral_step)
from .stress import StressProblem, b_matrix, majorizer_value, relative_weights, stress_value, unit_weights

__all__ = [
    "ConvergenceLog", "EigenBasis", "EigenSolverError", "GeodesicOracle", "GridGeodesics", "MeshGeodesics",
    "MultiresSchedule", "QuadraticProgram", "RasterImage", "RetargetConfig", "SamplingSet", "SeparableGridBasis",
    "SolverOptions", "StressProblem", "TriangleMesh", "b_matrix", "build_retarget_problem", "cotan_matrices",
    "eigenbasis", "farthest_point_sampling", "fourier_basis_grid", "generate_grid_mesh", "generate_sphere_mesh",
    "graph_laplacian", "load_image", "load_mesh", "majorizer_value", "mesh_basis", "multires_solve", "qp_solve",
    "regularized_interpolate", "relative_weights", "rre_accelerate", "save_image", "save_mesh", "smacof_rre_solve",
    "smacof_solve", "smacof_step", "solve_constrained", "spectral_interpolate", "spectral_smacof", "spectral_step",
    "stress_value", "unit_weights", "warp_image",
]
