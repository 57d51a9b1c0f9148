"""Kelvin-Helmholtz benchmark: H(div) DG Navier-Stokes solver, spectral
oracle, quantities of interest and sensitivity harness."""
from .fem_space import VelocityField, VelocitySpace, build_space, project_initial_condition
from .kh_setup import KHConfig, initial_velocity, viscosity
from .mesh import StructuredMesh, build_quad_mesh

__version__ = "0.1.0"

__all__ = [
    "StructuredMesh",
    "build_quad_mesh",
    "VelocitySpace",
    "VelocityField",
    "build_space",
    "project_initial_condition",
    "KHConfig",
    "initial_velocity",
    "viscosity",
]
