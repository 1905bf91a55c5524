"""
Dynamic poroelastic momentum balance and generalized-alpha time stepping.

The balance is enforced at the generalized midpoint

    M a_{n+1-am} + F_int(u_{n+1-af}, phi) - Q p_{n+1-af} = F_ext

with ``Q = int B^T alpha m N`` coupling the pore pressure into the skeleton.
The unknown is u_{n+1}; v and a follow from the Newmark relations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import constitutive as cm
from .errors import InvalidArgumentError, InvalidStateError
from .mesh import edge_load_vector
from .phasefield import element_mass


@dataclass(frozen=True)
class GenAlphaParams:
    """Chung-Hulbert generalized-alpha parameters from the spectral radius."""

    rho_inf: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.rho_inf <= 1.0:
            raise InvalidArgumentError("rho_inf must lie in [0, 1]")

    @property
    def alpha_m(self):
        return (2.0 * self.rho_inf - 1.0) / (self.rho_inf + 1.0)

    @property
    def alpha_f(self):
        return self.rho_inf / (self.rho_inf + 1.0)

    @property
    def gamma(self):
        return 0.5 - self.alpha_m + self.alpha_f

    @property
    def beta(self):
        return 0.25 * (1.0 - self.alpha_m + self.alpha_f) ** 2


@dataclass
class DynamicState:
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if not (self.u.shape == self.v.shape == self.a.shape):
            raise InvalidArgumentError("u, v and a must have the same length")

    def copy(self):
        return replace(self, u=self.u.copy(), v=self.v.copy(), a=self.a.copy())


def newmark_acceleration(state, u_new, ga, dt):
    """a_{n+1} implied by a trial u_{n+1}."""
    b = ga.beta
    return ((u_new - state.u - dt * state.v) / (b * dt * dt)
            - (0.5 / b - 1.0) * state.a)


def genalpha_advance(state, u_new, ga, dt):
    """Advance (u, v, a) to t + dt given the converged displacement u_{n+1}."""
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    a_new = newmark_acceleration(state, u_new, ga, dt)
    v_new = state.v + dt * ((1.0 - ga.gamma) * state.a + ga.gamma * a_new)
    return DynamicState(np.array(u_new, dtype=float), v_new, a_new, state.time + dt)


def mass_coefficients(ga, dt):
    """(c_m, c_k): d(a_{n+1-am})/du_{n+1} and d(u_{n+1-af})/du_{n+1}."""
    return (1.0 - ga.alpha_m) / (ga.beta * dt * dt), 1.0 - ga.alpha_f


def midpoint(state, u_new, ga, dt):
    """(u_{n+1-af}, a_{n+1-am}) for a trial u_{n+1}."""
    a_new = newmark_acceleration(state, u_new, ga, dt)
    u_a = (1.0 - ga.alpha_f) * u_new + ga.alpha_f * state.u
    a_a = (1.0 - ga.alpha_m) * a_new + ga.alpha_m * state.a
    return u_a, a_a


def vector_pattern(mesh):
    try:
        return mesh._vector_pattern
    except AttributeError:
        d = mesh.element_dofs()
        rows = np.repeat(d, 8, axis=1).ravel()
        cols = np.tile(d, (1, 8)).ravel()
        object.__setattr__(mesh, "_vector_pattern", (rows, cols))
        return rows, cols


def assemble_vector_matrix(mesh, Ke):
    rows, cols = vector_pattern(mesh)
    n = 2 * mesh.n_nodes
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))


def assemble_vector_rhs(mesh, fe):
    return np.bincount(mesh.element_dofs().ravel(), weights=fe.ravel(),
                       minlength=2 * mesh.n_nodes)


def element_mass_vector(mesh, rho):
    """(E, 8, 8) consistent mass matrices for two displacement components."""
    Ms = element_mass(mesh, rho)
    Me = np.zeros((mesh.n_elements, 8, 8))
    Me[:, 0::2, 0::2] = Ms
    Me[:, 1::2, 1::2] = Ms
    return Me


def mass_matrix(mesh, rho):
    """Global consistent mass matrix int rho N^T N (2 dof per node)."""
    return assemble_vector_matrix(mesh, element_mass_vector(mesh, rho))


def qp_strain(mesh, u):
    """Tensor strain components (E, 4, 3) at every quadrature point."""
    Bu = mesh.strain_matrices()
    ue = np.asarray(u)[mesh.element_dofs()]
    return cm.voigt_to_tensor((Bu @ ue[:, None, :, None])[..., 0])


def internal_force(mesh, u, phi_qp, mat, tangent=True):
    """Element internal forces (E, 8) and tangents (E, 8, 8) at nodal ``u``.

    ``phi_qp`` is the phase field at quadrature points, shape (E, 4).
    Returns (fe, Ke or None, strain) with strain of shape (E, 4, 3).
    """
    if not np.all(np.isfinite(u)):
        raise InvalidStateError("non-finite displacement")
    Bu = mesh.strain_matrices()
    eps = qp_strain(mesh, u)
    sig = cm.effective_stress(eps, phi_qp, mat)
    w = mesh.wdetJ[..., None, None]
    BuT = np.swapaxes(Bu, -1, -2)
    fe = (BuT @ (w * sig[..., None])).sum(axis=1)[..., 0]
    Ke = element_tangent(mesh, eps, phi_qp, mat) if tangent else None
    return fe, Ke, eps


def element_tangent(mesh, strain, phi_qp, mat):
    """(E, 8, 8) element stiffness int B^T D B for quadrature strains ``strain``."""
    Bu = mesh.strain_matrices()
    D = cm.tangent_tensor(strain, phi_qp, mat)
    w = mesh.wdetJ[..., None, None]
    return (np.swapaxes(Bu, -1, -2) @ ((w * D) @ Bu)).sum(axis=1)


def element_pressure_coupling(mesh, alpha_qp):
    """(E, 8, 4) matrices int B^T alpha m N^T; ``Q @ p_e`` is the pressure force."""
    Bu = mesh.strain_matrices()
    w = np.broadcast_to(np.asarray(alpha_qp) * mesh.wdetJ, mesh.wdetJ.shape)
    Bvol = Bu[:, :, 0, :] + Bu[:, :, 1, :]                 # m^T B, (E, 4, 8)
    return np.einsum("eq,eqi,qa->eia", w, Bvol, mesh.N_q)


def traction_vector(mesh, tractions):
    """Nodal forces of constant tractions; ``tractions`` is [(boundary, (tx, ty)), ...]."""
    f = np.zeros((mesh.n_nodes, 2))
    for name, t in tractions:
        f += edge_load_vector(mesh, name, np.asarray(t, dtype=float))
    return f.ravel()


def body_force_vector(mesh, b):
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros(2 * mesh.n_nodes)
    Nint = np.einsum("eq,qa->ea", mesh.wdetJ, mesh.N_q)
    fe = np.zeros((mesh.n_elements, 8))
    fe[:, 0::2] = Nint * b[0]
    fe[:, 1::2] = Nint * b[1]
    return assemble_vector_rhs(mesh, fe)


class MomentumSystem(NamedTuple):
    residual: np.ndarray      # R_u at the trial u_{n+1}
    tangent: sp.csr_matrix    # dR_u/du_{n+1}
    strain: np.ndarray        # (E, 4, 3) at u_{n+1-af}
    fixed: np.ndarray
    fixed_values: np.ndarray


def assemble_momentum_system(mesh, state, u_trial, phi_qp, mat, M, f_ext, ga, dt,
                             p_force=None, fixed=None, fixed_values=None):
    """Residual and effective tangent of the momentum balance at a trial u_{n+1}.

    ``f_ext`` holds body and traction loads; ``p_force`` is the pressure
    force ``Q p`` already evaluated at the generalized midpoint (or None
    when the mechanics is decoupled from the flow).
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    u_a, a_a = midpoint(state, u_trial, ga, dt)
    fe, Ke, eps = internal_force(mesh, u_a, phi_qp, mat)
    R = M @ a_a + assemble_vector_rhs(mesh, fe) - f_ext
    if p_force is not None:
        R -= p_force
    c_m, c_k = mass_coefficients(ga, dt)
    K = c_m * M + c_k * assemble_vector_matrix(mesh, Ke)
    fixed = np.zeros(0, dtype=np.int64) if fixed is None else fixed
    fixed_values = np.zeros(0) if fixed_values is None else fixed_values
    return MomentumSystem(R, K.tocsr(), eps, fixed, fixed_values)


def kinetic_energy(M, v):
    return 0.5 * float(v @ (M @ v))
