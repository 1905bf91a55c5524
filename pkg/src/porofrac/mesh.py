"""
Structured Q4 meshes, bilinear shape functions and 2x2 Gauss quadrature.

Nodes are numbered row-major from the bottom-left corner; element
connectivity is counter-clockwise starting at the bottom-left node.  All
quadrature data (shape values, physical gradients, weighted Jacobians) are
computed once at construction and shared by every assembly routine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import InvalidArgumentError, MeshQualityError

# reference-square corner coordinates in CCW order
_XI_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])

_G = 1.0 / np.sqrt(3.0)
GAUSS_POINTS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
GAUSS_WEIGHTS = np.ones(4)


def q4_shape(xi, eta):
    """Bilinear shape values and reference derivatives at ``(xi, eta)``.

    Returns ``N`` with shape (4,) and ``dN`` with shape (4, 2) holding
    (dN/dxi, dN/deta) per node.
    """
    sx = _XI_NODES[:, 0]
    sy = _XI_NODES[:, 1]
    N = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta)
    dN = np.empty((4, 2))
    dN[:, 0] = 0.25 * sx * (1.0 + sy * eta)
    dN[:, 1] = 0.25 * sy * (1.0 + sx * xi)
    return N, dN


def strain_matrix(dNdx):
    """Assemble the 3x8 Voigt gradient matrix from (4, 2) physical gradients.

    Rows are (d/dx, d/dy, engineering shear); columns interleave (ux, uy)
    per node.  Works on stacked input of shape (..., 4, 2).
    """
    dNdx = np.asarray(dNdx)
    B = np.zeros(dNdx.shape[:-2] + (3, 8))
    B[..., 0, 0::2] = dNdx[..., 0]
    B[..., 1, 1::2] = dNdx[..., 1]
    B[..., 2, 0::2] = dNdx[..., 1]
    B[..., 2, 1::2] = dNdx[..., 0]
    return B


@dataclass(eq=False)
class Mesh:
    """Immutable structured quadrilateral mesh with cached quadrature data.

    Attributes
    ----------
    nodes : (n_nodes, 2) array of coordinates [m]
    elements : (n_elements, 4) int array, CCW connectivity
    boundary_nodes : dict mapping boundary name to sorted node indices
    boundary_edges : dict mapping boundary name to (m, 2) node pairs
    nx, ny : element counts along x and y
    hx, hy : element sizes [m]
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: Dict[str, np.ndarray]
    boundary_edges: Dict[str, np.ndarray]
    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple = (0.0, 0.0)
    # quadrature cache, filled in __post_init__
    N_q: np.ndarray = field(init=False, repr=False)
    dNdx: np.ndarray = field(init=False, repr=False)
    wdetJ: np.ndarray = field(init=False, repr=False)
    qp_xy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.nodes)
        if self.elements.min() < 0 or self.elements.max() >= n:
            raise MeshQualityError("element connectivity references a missing node")
        for name, idx in self.boundary_nodes.items():
            if len(idx) and (idx.min() < 0 or idx.max() >= n):
                raise MeshQualityError(f"boundary set '{name}' references a missing node")

        N_q = np.empty((4, 4))
        dN_ref = np.empty((4, 4, 2))
        for q, (xi, eta) in enumerate(GAUSS_POINTS):
            N_q[q], dN_ref[q] = q4_shape(xi, eta)

        X = self.nodes[self.elements]                       # (E, 4, 2)
        J = np.einsum("qni,enj->eqij", dN_ref, X)           # J[i, j] = dx_j / dxi_i
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(detJ <= 0.0):
            bad = int(np.argmin(detJ.min(axis=1)))
            raise MeshQualityError(f"non-positive Jacobian in element {bad}")
        Jinv = np.empty_like(J)
        Jinv[..., 0, 0] = J[..., 1, 1] / detJ
        Jinv[..., 1, 1] = J[..., 0, 0] / detJ
        Jinv[..., 0, 1] = -J[..., 0, 1] / detJ
        Jinv[..., 1, 0] = -J[..., 1, 0] / detJ
        # dN/dx_j = sum_i dN/dxi_i * dxi_i/dx_j
        dNdx = np.einsum("qni,eqij->eqnj", dN_ref, Jinv)

        for name, val in (("N_q", N_q), ("dNdx", dNdx),
                          ("wdetJ", detJ * GAUSS_WEIGHTS[None, :]),
                          ("qp_xy", np.einsum("qn,eni->eqi", N_q, X))):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        self.nodes.setflags(write=False)
        self.elements.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def h(self):
        """Nominal element size (largest edge length)."""
        return max(self.hx, self.hy)

    @property
    def extent(self):
        """(xmin, ymin, xmax, ymax) of the grid."""
        x0, y0 = self.origin
        return (x0, y0, x0 + self.nx * self.hx, y0 + self.ny * self.hy)

    def node_index(self, i, j):
        """Node at column ``i``, row ``j`` of the structured grid."""
        return j * (self.nx + 1) + i

    def element_dofs(self):
        """(E, 8) displacement dof indices, interleaved (ux, uy) per node."""
        e = self.elements
        dofs = np.empty((len(e), 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * e
        dofs[:, 1::2] = 2 * e + 1
        return dofs

    def dissection_order(self):
        """Geometric nested-dissection permutation of the nodes.

        The grid is split recursively along its longer side; each separator
        line is numbered after the two halves.  Used as a fill-reducing
        ordering for sparse factorizations.
        """
        try:
            return self._nd_order
        except AttributeError:
            pass
        row = self.nx + 1
        order = []
        stack = [(0, self.nx + 1, 0, self.ny + 1, False)]
        # iterative post-order: (box, separator_pending)
        while stack:
            x0, x1, y0, y1, emit_sep = stack.pop()
            if emit_sep:
                if x1 - x0 >= y1 - y0:
                    m = (x0 + x1) // 2
                    order.extend(j * row + m for j in range(y0, y1))
                else:
                    m = (y0 + y1) // 2
                    order.extend(m * row + i for i in range(x0, x1))
                continue
            if (x1 - x0) * (y1 - y0) <= 16:
                order.extend(j * row + i for j in range(y0, y1) for i in range(x0, x1))
                continue
            stack.append((x0, x1, y0, y1, True))
            if x1 - x0 >= y1 - y0:
                m = (x0 + x1) // 2
                stack.append((m + 1, x1, y0, y1, False))
                stack.append((x0, m, y0, y1, False))
            else:
                m = (y0 + y1) // 2
                stack.append((x0, x1, m + 1, y1, False))
                stack.append((x0, x1, y0, m, False))
        perm = np.asarray(order, dtype=np.int64)
        perm.setflags(write=False)
        object.__setattr__(self, "_nd_order", perm)
        return perm

    def strain_matrices(self):
        """(E, 4, 3, 8) Voigt gradient matrices at every quadrature point."""
        try:
            return self._Bu
        except AttributeError:
            Bu = strain_matrix(self.dNdx)
            Bu.setflags(write=False)
            object.__setattr__(self, "_Bu", Bu)
            return Bu

    def nearest_node(self, point):
        d = np.linalg.norm(self.nodes - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))

    def locate(self, point):
        """Element index and local coordinates (xi, eta) containing ``point``."""
        x0, y0, x1, y1 = self.extent
        px, py = float(point[0]), float(point[1])
        tol = 1e-9 * max(x1 - x0, y1 - y0)
        if not (x0 - tol <= px <= x1 + tol and y0 - tol <= py <= y1 + tol):
            raise InvalidArgumentError(f"point {tuple(point)} lies outside the mesh")
        i = min(max(int((px - x0) // self.hx), 0), self.nx - 1)
        j = min(max(int((py - y0) // self.hy), 0), self.ny - 1)
        xi = 2.0 * (px - (x0 + i * self.hx)) / self.hx - 1.0
        eta = 2.0 * (py - (y0 + j * self.hy)) / self.hy - 1.0
        return j * self.nx + i, (xi, eta)

    def interpolate(self, nodal, point):
        """Evaluate a nodal scalar field at an arbitrary point."""
        e, (xi, eta) = self.locate(point)
        N, _ = q4_shape(xi, eta)
        return float(N @ np.asarray(nodal)[self.elements[e]])


def build_structured_grid(width, height, nx, ny, origin=(0.0, 0.0)):
    """Axis-aligned Q4 grid over ``[x0, x0+width] x [y0, y0+height]``.

    Boundary sets ``left``, ``right``, ``bottom`` and ``top`` hold the nodes
    (and the element edges) on the four sides.  ``all`` holds every node.
    """
    if not (width > 0 and height > 0):
        raise InvalidArgumentError("width and height must be positive")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError("nx and ny must be integers >= 1")
    nx, ny = int(nx), int(ny)
    x0, y0 = float(origin[0]), float(origin[1])
    hx, hy = width / nx, height / ny

    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    # exact end coordinates, no accumulated rounding
    xs[-1] = x0 + width
    ys[-1] = y0 + height
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    n0 = (jj * (nx + 1) + ii).ravel()
    elements = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1]).astype(np.int64)

    row = nx + 1
    bottom = np.arange(nx + 1)
    top = ny * row + np.arange(nx + 1)
    left = np.arange(ny + 1) * row
    right = np.arange(ny + 1) * row + nx
    boundary_nodes = {
        "bottom": bottom, "top": top, "left": left, "right": right,
        "all": np.arange(len(nodes)),
    }
    boundary_edges = {
        "bottom": np.column_stack([bottom[:-1], bottom[1:]]),
        "right": np.column_stack([right[:-1], right[1:]]),
        "top": np.column_stack([top[1:], top[:-1]]),
        "left": np.column_stack([left[1:], left[:-1]]),
    }
    return Mesh(nodes=nodes, elements=elements, boundary_nodes=boundary_nodes,
                boundary_edges=boundary_edges, nx=nx, ny=ny, hx=hx, hy=hy,
                origin=(x0, y0))


def shape_and_gradients(mesh, element, local_coords):
    """Shape data of one element at a reference point.

    Parameters
    ----------
    mesh : Mesh
    element : int
    local_coords : (xi, eta) in [-1, 1]^2

    Returns
    -------
    N : (4,) shape values
    Bu : (3, 8) Voigt strain-displacement matrix
    Bs : (2, 4) scalar gradient matrix (rows d/dx, d/dy)
    detJ : float, Jacobian determinant [m^2]
    """
    xi, eta = local_coords
    if abs(xi) > 1.0 + 1e-12 or abs(eta) > 1.0 + 1e-12:
        raise InvalidArgumentError("local coordinates must lie in [-1, 1]^2")
    N, dN = q4_shape(xi, eta)
    X = mesh.nodes[mesh.elements[element]]
    J = dN.T @ X
    detJ = float(np.linalg.det(J))
    if detJ <= 0.0:
        raise MeshQualityError(f"degenerate element {element} (detJ={detJ:g})")
    dNdx = np.linalg.solve(J, dN.T).T
    return N, strain_matrix(dNdx), dNdx.T.copy(), detJ


def distance_to_segment(point, segment):
    """Euclidean distance from ``point`` (or an (..., 2) array) to a closed segment."""
    a = np.asarray(segment[0], dtype=float)
    b = np.asarray(segment[1], dtype=float)
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        raise InvalidArgumentError("segment endpoints must be distinct")
    p = np.asarray(point, dtype=float)
    t = np.clip(((p - a) @ ab) / L2, 0.0, 1.0)
    d = np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)
    return float(d) if d.ndim == 0 else d


def edge_load_vector(mesh, boundary, value, n_nodes=None):
    """Consistent nodal loads of a constant per-length ``value`` on a boundary.

    ``value`` is a scalar or a vector; the result has shape (n_nodes,) or
    (n_nodes, len(value)).
    """
    edges = mesh.boundary_edges[boundary]
    value = np.asarray(value, dtype=float)
    n = mesh.n_nodes if n_nodes is None else n_nodes
    out = np.zeros((n,) + value.shape)
    lengths = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    contrib = 0.5 * lengths[(...,) + (None,) * value.ndim] * value
    np.add.at(out, edges[:, 0], contrib)
    np.add.at(out, edges[:, 1], contrib)
    return out
