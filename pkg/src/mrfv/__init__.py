"""Adaptive multiresolution finite-volume toolkit for elliptic problems.

Cell-averaged fields on nested dyadic grids are compressed by thresholding
multiresolution details, elliptic operators are assembled directly on the
adapted grid with conservative two-level face coupling, and the resulting
sparse systems are solved iteratively.  A three-group photoionization model
built from screened solves ships as the application example.
"""

from .cells import BOUNDARY, CellId, Grid
from .errors import ConfigError, Error, GradingError, SolverError
from .forest import CellKind, Forest, LeafMap
from .mra import (KeptSet, MultiScale, ThresholdSpec, adapt, decode, encode,
                  norm_l2, norm_l2_uniform, threshold)
from .prediction import PredictionScheme
from .assembly import (BCSpec, Dirichlet, FluxScheme, Neumann, OperatorSpec,
                       Robin, Symmetry, assemble_adapted, assemble_rhs,
                       assemble_uniform, gradient)
from .sparse import MatrixStats, SparseMatrix, matrix_stats
from .linalg import SolveReport, SolverConfig, solve, spmv
from .sp3 import (PhotoGroupParams, PhysicalParams, Sp3Constants,
                  photo_source, photon_isotropic, sp3_solve_group)

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY", "BCSpec", "CellId", "CellKind", "ConfigError", "Dirichlet",
    "Error", "FluxScheme", "Forest", "GradingError", "Grid", "KeptSet",
    "LeafMap", "MatrixStats", "MultiScale", "Neumann", "OperatorSpec",
    "PhotoGroupParams", "PhysicalParams", "PredictionScheme", "Robin",
    "SolveReport", "SolverConfig", "SolverError", "Sp3Constants",
    "SparseMatrix", "Symmetry", "ThresholdSpec", "adapt", "assemble_adapted",
    "assemble_rhs", "assemble_uniform", "decode", "encode", "gradient",
    "matrix_stats", "norm_l2", "norm_l2_uniform", "photo_source",
    "photon_isotropic", "solve", "sp3_solve_group", "spmv", "threshold",
]
