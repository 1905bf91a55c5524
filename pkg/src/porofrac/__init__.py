"""
Phase-field modelling of fluid-driven dynamic crack propagation in
saturated porous media.

The (u, p) block of the momentum and mass balances is solved monolithically
with generalized-alpha time integration; the phase field follows in a
staggered loop driven by the tensile history field.
"""

from .constitutive import MaterialParams
from .errors import (ConfigError, InvalidArgumentError, InvalidStateError, MeshQualityError,
                     PorofracError, SolverError, StepFailure)
from .flow import FlowParams
from .mesh import Mesh, build_structured_grid
from .problem import FieldState, Physics, Problem, initial_state
from .solver import StaggeredConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FieldState", "FlowParams", "InvalidArgumentError", "InvalidStateError",
    "MaterialParams", "Mesh", "MeshQualityError", "Physics", "PorofracError", "Problem",
    "SolverError", "StaggeredConfig", "StepFailure", "build_structured_grid", "initial_state",
    "simulate",
]
