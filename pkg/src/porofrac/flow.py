"""
Indicator blending of reservoir/fracture fluid properties and the Darcy
pressure sub-problem.

The mass balance

    rho S dp/dt - div(rho K/mu (grad p + rho g)) = q_m - rho alpha chi_R d(eps_vol)/dt

is discretised with Q4 elements in space and backward Euler in time.
``gravity`` is the vector g appearing in ``grad p + rho g``; with y pointing
up, standard gravity is ``(0, 9.81)`` so that hydrostatic pressure
decreases with elevation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .phasefield import (LinearSystem, assemble_scalar, element_laplacian, element_load,
                         element_mass, scalar_vector)
from .mesh import edge_load_vector


@dataclass(frozen=True)
class FlowParams:
    """Reservoir (R) and fracture (F) fluid parameters.

    Units: densities kg/m^3, permeabilities m^2, compressibilities 1/Pa,
    viscosities Pa s, sources kg/(m^3 s), K_VR Pa, gravity m/s^2.
    ``K_VR=None`` uses the drained skeleton bulk modulus E/(3(1-2nu)).
    ``storage_model`` selects how S is blended across the transition band:
    ``"blended"`` interpolates S_R and S_F = c_F with the indicators,
    ``"formula"`` evaluates eps_p c + (alpha - eps_p)(1 - alpha)/K_VR with
    blended arguments (which vanishes in the fracture domain).
    """

    c1: float
    c2: float
    eps_pR: float
    alpha_R: float
    rho_R: float
    rho_F: float
    K_R: float
    K_F: float
    c_R: float
    c_F: float
    mu_R: float
    mu_F: float
    q_R: float = 0.0
    q_F: float = 0.0
    K_VR: Optional[float] = None
    gravity: Tuple[float, float] = (0.0, 0.0)
    storage_model: str = "blended"

    def __post_init__(self):
        if not (0.0 <= self.c1 < self.c2 <= 1.0):
            raise InvalidArgumentError("indicator thresholds need 0 <= c1 < c2 <= 1")
        for name in ("rho_R", "rho_F", "K_R", "K_F", "c_R", "c_F", "mu_R", "mu_F"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not 0.0 <= self.eps_pR <= self.alpha_R <= 1.0:
            raise InvalidArgumentError("need 0 <= eps_pR <= alpha_R <= 1")
        if self.K_VR is not None and not self.K_VR > 0:
            raise InvalidArgumentError("K_VR must be positive")
        if self.storage_model not in ("blended", "formula"):
            raise InvalidArgumentError("storage_model must be 'blended' or 'formula'")
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    def bulk_modulus(self, mat):
        return self.K_VR if self.K_VR is not None else mat.bulk_modulus

    def reservoir_storage(self, mat):
        return (self.eps_pR * self.c_R
                + (self.alpha_R - self.eps_pR) * (1.0 - self.alpha_R) / self.bulk_modulus(mat))


class BlendedProps(NamedTuple):
    chi_R: np.ndarray
    chi_F: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    eps_p: np.ndarray
    c: np.ndarray
    S: np.ndarray
    K: np.ndarray
    mu: np.ndarray


def indicators(phi, c1, c2):
    """Linear indicator functions (chi_R, chi_F), clamped outside [c1, c2]."""
    if not c1 < c2:
        raise InvalidArgumentError("c1 must be smaller than c2")
    phi = np.asarray(phi, dtype=float)
    chi_F = np.clip((phi - c1) / (c2 - c1), 0.0, 1.0)
    chi_R = 1.0 - chi_F
    return chi_R, chi_F


def blended_properties(phi, flow, mat):
    """Fluid/solid properties interpolated between reservoir and fracture."""
    chi_R, chi_F = indicators(phi, flow.c1, flow.c2)
    rho = flow.rho_R * chi_R + flow.rho_F * chi_F
    alpha = flow.alpha_R * chi_R + chi_F
    eps_p = flow.eps_pR * chi_R
    c = flow.c_R * chi_R + flow.c_F * chi_F
    if flow.storage_model == "blended":
        S = flow.reservoir_storage(mat) * chi_R + flow.c_F * chi_F
    else:
        S = eps_p * c + (alpha - eps_p) * (1.0 - alpha) / flow.bulk_modulus(mat)
    K = flow.K_R * chi_R + flow.K_F * chi_F
    mu = flow.mu_R * chi_R + flow.mu_F * chi_F
    return BlendedProps(chi_R, chi_F, rho, alpha, eps_p, c, S, K, mu)


def darcy_velocity(grad_p, props, gravity=(0.0, 0.0)):
    """Darcy velocity -K/mu (grad p + rho g) [m/s]."""
    grad_p = np.asarray(grad_p, dtype=float)
    g = np.asarray(gravity, dtype=float)
    mob = np.asarray(props.K / props.mu)
    return -mob[..., None] * (grad_p + np.asarray(props.rho)[..., None] * g)


def phi_at_qp(mesh, phi):
    return np.clip(np.einsum("qa,ea->eq", mesh.N_q, np.asarray(phi)[mesh.elements]), 0.0, 1.0)


def volumetric_strain(mesh, u):
    """Trace of the small strain at every quadrature point, shape (E, 4)."""
    ue = np.asarray(u).reshape(-1, 2)[mesh.elements]           # (E, 4, 2)
    return np.einsum("eqai,eai->eq", mesh.dNdx, ue)


@dataclass
class FlowBC:
    """Pressure boundary data.

    ``dirichlet_nodes``/``dirichlet_values`` fix p; ``neumann`` lists
    (boundary name, M_N) pairs with M_N the inflow mass flux [kg/(m^2 s)].
    """

    dirichlet_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    neumann: list = field(default_factory=list)

    def __post_init__(self):
        self.dirichlet_nodes = np.asarray(self.dirichlet_nodes, dtype=np.int64)
        self.dirichlet_values = np.broadcast_to(
            np.asarray(self.dirichlet_values, dtype=float), self.dirichlet_nodes.shape).copy()

    def neumann_vector(self, mesh):
        f = np.zeros(mesh.n_nodes)
        for name, flux in self.neumann:
            f += edge_load_vector(mesh, name, float(flux))
        return f


class FlowTerms(NamedTuple):
    """Element-level pieces of the pressure equation at the current phase field."""

    props: BlendedProps
    storage: np.ndarray      # (E, 4, 4) int rho S N N
    conductance: np.ndarray  # (E, 4, 4) int rho K/mu grad N grad N
    gravity: np.ndarray      # (E, 4) int grad N . (rho K/mu) rho g
    source: np.ndarray       # (E, 4) int N q_m
    coupling_coef: np.ndarray  # (E, 4) rho alpha chi_R at quadrature points


def flow_terms(mesh, phi, flow, mat, q_F=None):
    """Evaluate blended properties and element operators for nodal ``phi``.

    ``q_F`` overrides the fracture source, either a scalar or an (E, 4)
    quadrature field (zero outside injection regions).
    """
    props = blended_properties(phi_at_qp(mesh, phi), flow, mat)
    storage = element_mass(mesh, props.rho * props.S)
    mob = props.rho * props.K / props.mu
    conductance = element_laplacian(mesh, mob)
    g = np.asarray(flow.gravity)
    if np.any(g != 0.0):
        w = mob * props.rho * mesh.wdetJ
        gravity = np.einsum("eq,eqai,i->ea", w, mesh.dNdx, g)
    else:
        gravity = np.zeros(mesh.elements.shape)
    q_F = flow.q_F if q_F is None else q_F
    q = flow.q_R * props.chi_R + q_F * props.chi_F
    source = element_load(mesh, q)
    return FlowTerms(props, storage, conductance, gravity, source,
                     props.rho * props.alpha * props.chi_R)


def assemble_flow_system(mesh, phi, flow, mat, dt, p_prev, bc=None,
                         eps_vol_rate=None, q_F=None, terms=None):
    """Backward-Euler pressure system for one time step.

    (M_S/dt + K_pp) p = M_S/dt p_prev + F_src - F_grav - F_coupling + F_N

    with ``F_coupling = int N rho alpha chi_R d(eps_vol)/dt`` evaluated from
    the supplied quadrature-point rates.  ``dt=None`` gives the steady
    problem (storage dropped).
    """
    if dt is not None and not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    bc = bc if bc is not None else FlowBC()
    t = terms if terms is not None else flow_terms(mesh, phi, flow, mat, q_F)
    Ke = t.conductance if dt is None else t.conductance + t.storage / dt
    A = assemble_scalar(mesh, Ke)
    rhs = scalar_vector(mesh, t.source - t.gravity) + bc.neumann_vector(mesh)
    if dt is not None:
        M = assemble_scalar(mesh, t.storage)
        rhs += (M @ np.asarray(p_prev)) / dt
    if eps_vol_rate is not None:
        rhs -= scalar_vector(mesh, element_load(mesh, t.coupling_coef * eps_vol_rate))
    return LinearSystem(A, rhs, bc.dirichlet_nodes, bc.dirichlet_values, mesh.dissection_order())


def stored_mass(mesh, phi, flow, mat, p):
    """int rho S p over the domain, the conserved quantity of the closed system."""
    props = blended_properties(phi_at_qp(mesh, phi), flow, mat)
    p_q = np.einsum("qa,ea->eq", mesh.N_q, np.asarray(p)[mesh.elements])
    return float(np.sum(props.rho * props.S * p_q * mesh.wdetJ))
