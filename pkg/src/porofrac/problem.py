"""
Discrete problem definition and the evolving field state.

A :class:`Problem` bundles the mesh, material and fluid parameters with all
boundary data in assembled (dof-level) form, so that the time stepper never
looks at the scenario description again.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from . import momentum as mo
from .constitutive import MaterialParams
from .errors import InvalidArgumentError
from .flow import FlowBC, FlowParams
from .mesh import Mesh
from .phasefield import PhaseBC, assemble_phase_system, solve_phase


@dataclass(frozen=True)
class Physics:
    """Which sub-problems are active.

    ``coupling=False`` drops both the pressure force on the skeleton and
    the volumetric-strain rate in the mass balance.  ``inertia=False``
    turns the momentum balance into quasi-static equilibrium.
    """

    mechanics: bool = True
    flow: bool = True
    coupling: bool = True
    inertia: bool = True

    def __post_init__(self):
        if not (self.mechanics or self.flow):
            raise InvalidArgumentError("at least one of mechanics and flow must be active")

    @property
    def coupled(self):
        return self.coupling and self.mechanics and self.flow


@dataclass(eq=False)
class Problem:
    mesh: Mesh
    mat: MaterialParams
    flow: Optional[FlowParams] = None
    physics: Physics = Physics()
    genalpha: mo.GenAlphaParams = mo.GenAlphaParams()
    u_fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    u_fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tractions: List[Tuple[str, Tuple[float, float]]] = field(default_factory=list)
    body_force: Tuple[float, float] = (0.0, 0.0)
    flow_bc: FlowBC = field(default_factory=FlowBC)
    phase_bc: PhaseBC = field(default_factory=PhaseBC)
    q_F: Optional[np.ndarray] = None     # (E, 4) injection field, None = flow.q_F everywhere
    density: Optional[float] = None      # mixture density, derived when None

    def __post_init__(self):
        if self.physics.flow and self.flow is None:
            raise InvalidArgumentError("flow parameters required when flow is active")
        self.u_fixed = np.asarray(self.u_fixed, dtype=np.int64)
        vals = np.asarray(self.u_fixed_values, dtype=float)
        if vals.size == 0:
            vals = np.zeros(1)
        self.u_fixed_values = np.broadcast_to(vals, self.u_fixed.shape).copy()
        if len(self.u_fixed) and (self.u_fixed.min() < 0 or
                                  self.u_fixed.max() >= 2 * self.mesh.n_nodes):
            raise InvalidArgumentError("fixed displacement dof out of range")
        if self.density is None:
            self.density = mixture_density(self.mat, self.flow)
        self._mass = None
        self._f_ext = None

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    @property
    def mass(self):
        if self._mass is None:
            self._mass = mo.mass_matrix(self.mesh, self.density)
        return self._mass

    @property
    def f_ext(self):
        """Traction and body loads; constant in time."""
        if self._f_ext is None:
            b = np.asarray(self.body_force, dtype=float) * self.density
            self._f_ext = (mo.traction_vector(self.mesh, self.tractions)
                           + mo.body_force_vector(self.mesh, b))
        return self._f_ext


def mixture_density(mat, flow):
    """(1 - eps_p) rho_s + eps_p rho_R of the saturated reservoir."""
    if flow is None:
        return mat.rho_s
    return (1.0 - flow.eps_pR) * mat.rho_s + flow.eps_pR * flow.rho_R


@dataclass
class FieldState:
    """Nodal u, v, a (2 dof/node), p and phi, plus the quadrature history H."""

    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    H: np.ndarray
    time: float = 0.0

    def copy(self):
        return replace(self, u=self.u.copy(), v=self.v.copy(), a=self.a.copy(),
                       p=self.p.copy(), phi=self.phi.copy(), H=self.H.copy())

    @property
    def dynamic(self):
        return mo.DynamicState(self.u, self.v, self.a, self.time)


def initial_state(problem, u0=(0.0, 0.0), v0=(0.0, 0.0), p0=0.0, H0=None, time=0.0):
    """State at t0 with phi solved from the seeded history.

    ``u0``/``v0`` are uniform vectors or full nodal arrays; ``p0`` a scalar
    or nodal array.  Prescribed u and p values are imposed on the initial
    fields.  The initial acceleration is not set here (see
    :func:`porofrac.solver.initial_acceleration`).
    """
    mesh = problem.mesh
    n = mesh.n_nodes

    def nodal_vec(x):
        x = np.asarray(x, dtype=float)
        return np.tile(x, n) if x.shape == (2,) else x.reshape(2 * n).copy()

    u, v = nodal_vec(u0), nodal_vec(v0)
    u[problem.u_fixed] = problem.u_fixed_values
    p = np.broadcast_to(np.asarray(p0, dtype=float), (n,)).copy()
    H = np.zeros(mesh.wdetJ.shape) if H0 is None else np.array(H0, dtype=float)
    phi = solve_phase(assemble_phase_system(mesh, H, problem.mat, problem.phase_bc))
    return FieldState(u, v, np.zeros(2 * n), p, phi, H, time)
