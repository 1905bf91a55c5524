"""
History field, crack seeding and the linear phase-field sub-problem.

The history field lives at quadrature points, shape (n_elements, 4), in the
same layout as ``Mesh.qp_xy``.  Given the history, the phase-field equation

    (2(1-k)H + Gc/l0) phi - Gc l0 lap(phi) = 2(1-k)H

is linear, so each staggered pass needs a single sparse solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, InvalidStateError, SolverError
from .mesh import distance_to_segment

log = logging.getLogger(__name__)

DEFAULT_B = 1.0e3
CLAMP_REPORT_TOL = 1.0e-6


def scalar_pattern(mesh):
    """COO (rows, cols) of all 4x4 element blocks, cached on the mesh."""
    try:
        return mesh._scalar_pattern
    except AttributeError:
        e = mesh.elements
        rows = np.repeat(e, 4, axis=1).ravel()
        cols = np.tile(e, (1, 4)).ravel()
        object.__setattr__(mesh, "_scalar_pattern", (rows, cols))
        return rows, cols


def assemble_scalar(mesh, Ke):
    """Sum (E, 4, 4) element matrices into a CSR matrix."""
    rows, cols = scalar_pattern(mesh)
    n = mesh.n_nodes
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))


def scalar_vector(mesh, fe):
    """Sum (E, 4) element vectors into a nodal vector."""
    return np.bincount(mesh.elements.ravel(), weights=fe.ravel(), minlength=mesh.n_nodes)


def element_mass(mesh, coef):
    """Element matrices of int coef N N^T with ``coef`` per quadrature point."""
    w = np.asarray(coef) * mesh.wdetJ
    NN = np.einsum("qa,qb->qab", mesh.N_q, mesh.N_q)
    return np.einsum("eq,qab->eab", np.broadcast_to(w, mesh.wdetJ.shape), NN)


def element_laplacian(mesh, coef):
    """Element matrices of int coef grad(N) . grad(N)^T."""
    w = np.broadcast_to(np.asarray(coef) * mesh.wdetJ, mesh.wdetJ.shape)
    return np.einsum("eq,eqai,eqbi->eab", w, mesh.dNdx, mesh.dNdx)


def element_load(mesh, coef):
    """Element vectors of int coef N."""
    w = np.broadcast_to(np.asarray(coef) * mesh.wdetJ, mesh.wdetJ.shape)
    return np.einsum("eq,qa->ea", w, mesh.N_q)


def seed_value(d, mat, B=DEFAULT_B):
    """Initial history B Gc/(2 l0) (1 - 2d/l0) inside d <= l0/2, zero outside."""
    d = np.asarray(d, dtype=float)
    H0 = B * mat.Gc / (2.0 * mat.l0) * (1.0 - 2.0 * d / mat.l0)
    return np.where(d <= 0.5 * mat.l0, H0, 0.0)


def seed_crack_history(history, qp_xy, segment, mat, B=DEFAULT_B):
    """Raise the history field around a crack segment.

    Seeded cracks compose with any existing history through a pointwise max.
    """
    if not B > 0:
        raise InvalidArgumentError("B must be positive")
    d = distance_to_segment(qp_xy, segment)
    return np.maximum(history, seed_value(d, mat, B))


def update_history(history, psi_plus):
    """Irreversible update H <- max(H, psi_plus)."""
    psi_plus = np.asarray(psi_plus, dtype=float)
    if np.any(psi_plus < -1e-12):
        raise InvalidStateError("negative tensile energy density")
    return np.maximum(history, psi_plus)


@dataclass
class PhaseBC:
    """Dirichlet pins of the phase field: node indices and their values (0 or 1)."""

    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.nodes.shape:
            self.values = np.broadcast_to(self.values, self.nodes.shape).copy()
        if np.any((self.values != 0.0) & (self.values != 1.0)):
            raise InvalidArgumentError("pinned phase values must be 0 or 1")
        # later pins override earlier ones on shared nodes
        if len(self.nodes):
            _, last = np.unique(self.nodes[::-1], return_index=True)
            keep = len(self.nodes) - 1 - last
            self.nodes, self.values = self.nodes[keep], self.values[keep]

    @classmethod
    def merge(cls, *bcs):
        nodes = np.concatenate([b.nodes for b in bcs]) if bcs else np.zeros(0, np.int64)
        values = np.concatenate([b.values for b in bcs]) if bcs else np.zeros(0)
        return cls(nodes, values)


@dataclass
class LinearSystem:
    """Sparse system with Dirichlet data kept separate from the matrix."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    order: Optional[np.ndarray] = None   # fill-reducing permutation of the unknowns


def solve_dirichlet(system):
    """Solve ``A x = b`` with ``x[fixed] = fixed_values`` by static condensation."""
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    x = np.zeros(n)
    mask = np.ones(n, dtype=bool)
    mask[system.fixed] = False
    x[system.fixed] = system.fixed_values
    if system.order is None:
        free = np.flatnonzero(mask)
    else:
        free = system.order[mask[system.order]]
    if len(free) == 0:
        return x
    A_fc = A[free][:, system.fixed]
    rhs = b[free] - A_fc @ system.fixed_values
    A_ff = A[free][:, free].tocsc()
    try:
        if system.order is None:
            x[free] = spla.spsolve(A_ff, rhs)
        else:
            x[free] = spla.splu(A_ff, permc_spec="NATURAL", diag_pivot_thresh=0.01,
                                options=dict(SymmetricMode=True)).solve(rhs)
    except RuntimeError as exc:  # singular factor
        raise SolverError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    return x


def phase_operators(mesh, mat):
    """History-independent part of the phase matrix, cached per (mesh, mat)."""
    key = (mat.Gc, mat.l0)
    cache = getattr(mesh, "_phase_ops", None)
    if cache is not None and cache[0] == key:
        return cache[1]
    Ke = mat.Gc * mat.l0 * element_laplacian(mesh, 1.0) + element_mass(mesh, mat.Gc / mat.l0)
    object.__setattr__(mesh, "_phase_ops", (key, Ke))
    return Ke


def assemble_phase_system(mesh, history, mat, phase_bc=None):
    """Assemble the phase-field system for a given history field.

    K = int Gc l0 grad(N) grad(N)^T + (2(1-k)H + Gc/l0) N N^T
    f = int 2(1-k)H N

    The zero-flux condition on the outer boundary is natural.
    """
    drive = 2.0 * (1.0 - mat.k) * np.asarray(history)
    Ke = phase_operators(mesh, mat) + element_mass(mesh, drive)
    K = assemble_scalar(mesh, Ke)
    f = scalar_vector(mesh, element_load(mesh, drive))
    bc = phase_bc if phase_bc is not None else PhaseBC()
    return LinearSystem(K, f, bc.nodes, bc.values, mesh.dissection_order())


def solve_phase(system, relative_residual_tol=1e-10):
    """Solve the phase system and clamp the result to [0, 1].

    Values outside [0, 1] by more than 1e-6 are logged before clamping.
    """
    phi = solve_dirichlet(system)
    free = np.ones(len(phi), dtype=bool)
    free[system.fixed] = False
    r = (system.matrix @ phi - system.rhs)[free]
    lift = np.zeros(len(phi))
    lift[system.fixed] = system.fixed_values
    scale = max(np.linalg.norm(system.rhs[free]), np.linalg.norm((system.matrix @ lift)[free]), 1e-300)
    if np.linalg.norm(r) > relative_residual_tol * scale:
        raise SolverError("phase-field solve residual above tolerance")
    over = max(-phi.min(), phi.max() - 1.0)
    if over > CLAMP_REPORT_TOL:
        log.info("phase field clamped, overshoot %.3e", over)
    return np.clip(phi, 0.0, 1.0)


def crack_energy(mesh, phi, mat):
    """Regularised crack surface energy int Gc (phi^2/(2 l0) + l0/2 |grad phi|^2) [J/m]."""
    phi = np.asarray(phi)
    ph = phi[mesh.elements]
    val = np.einsum("qa,ea->eq", mesh.N_q, ph)
    grad = np.einsum("eqai,ea->eqi", mesh.dNdx, ph)
    dens = val ** 2 / (2.0 * mat.l0) + 0.5 * mat.l0 * np.sum(grad ** 2, axis=-1)
    return float(mat.Gc * np.sum(dens * mesh.wdetJ))


def pins_along_segment(mesh, segment, value=1.0, tol=None):
    """PhaseBC pinning every node within ``tol`` (default half an element) of a segment."""
    tol = 0.5 * min(mesh.hx, mesh.hy) if tol is None else tol
    d = distance_to_segment(mesh.nodes, segment)
    nodes = np.flatnonzero(d <= tol + 1e-12 * mesh.h)
    return PhaseBC(nodes, np.full(len(nodes), float(value)))
