"""Distributed-memory geometric multigrid for Q1 finite elements on box meshes.

Logical ranks run as threads over an in-process transport; see
:mod:`parfem.transport`.
"""
from .fespace import FEFamily, FESpace, build_fespace
from .femapper import DofClass, ParFEMapper, build_mapper
from .fecomm import ParFECommunicator, UpdateMode
from .linalg import CsrSparseMatrix, SolveStats, residual_norm, spmv
from .mesh import MeshLevel, generate_unit_mesh, refine_uniform
from .multigrid import MultigridConfig, build_hierarchy, solve_outer, v_cycle
from .partition import PartitionMap, Strategy, build_subdomain, partition_cells, refine_subdomain
from .solvers import SmootherConfig, SmootherKind
from .transport import LocalTransport, run_ranks

__version__ = "0.1.0"

__all__ = ["FEFamily", "FESpace", "build_fespace", "DofClass", "ParFEMapper", "build_mapper",
           "ParFECommunicator", "UpdateMode", "CsrSparseMatrix", "SolveStats", "residual_norm",
           "spmv", "MeshLevel", "generate_unit_mesh", "refine_uniform", "MultigridConfig",
           "build_hierarchy", "solve_outer", "v_cycle", "PartitionMap", "Strategy",
           "build_subdomain", "partition_cells", "refine_subdomain", "SmootherConfig",
           "SmootherKind", "LocalTransport", "run_ranks"]
