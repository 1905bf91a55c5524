"""
Spectral tension/compression split and the degraded elastic response.

Strains and stresses are carried as arrays of shape (..., 3) holding the
tensor components (xx, yy, xy); the shear entry is the tensor component,
not the engineering shear.  Tangent matrices are returned in engineering
Voigt form, i.e. ``sigma = D @ [exx, eyy, 2*exy]``.

Every function is vectorised over leading axes and has no side effects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError

PERTURBATION = 1.0e-9
_DEGENERACY_RTOL = 1.0e-12
_PHI_SLACK = 1.0e-9

_VOIGT_M = np.array([1.0, 1.0, 0.0])


@dataclass(frozen=True)
class MaterialParams:
    """Elastic and fracture parameters of the porous skeleton.

    Attributes
    ----------
    E : Young's modulus [Pa]
    nu : Poisson's ratio
    Gc : critical energy release rate [N/m]
    l0 : phase-field length scale [m]
    k : residual stiffness parameter, 0 < k << 1
    rho_s : solid grain density [kg/m^3]
    plane : ``"strain"`` (default) or ``"stress"``
    """

    E: float
    nu: float
    Gc: float
    l0: float
    k: float = 1.0e-9
    rho_s: float = 2700.0
    plane: str = "strain"

    def __post_init__(self):
        if not self.E > 0:
            raise InvalidArgumentError("E must be positive")
        if not -1.0 < self.nu < 0.5:
            raise InvalidArgumentError("nu must lie in (-1, 0.5)")
        if not (self.Gc > 0 and self.l0 > 0):
            raise InvalidArgumentError("Gc and l0 must be positive")
        if not 0.0 < self.k < 1.0:
            raise InvalidArgumentError("k must lie in (0, 1)")
        if self.plane not in ("strain", "stress"):
            raise InvalidArgumentError("plane must be 'strain' or 'stress'")

    @property
    def mu(self):
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self):
        """Lame's first parameter; the plane-stress value when ``plane='stress'``."""
        lam3d = self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        if self.plane == "stress":
            return 2.0 * lam3d * self.mu / (lam3d + 2.0 * self.mu)
        return lam3d

    @property
    def bulk_modulus(self):
        """Drained bulk modulus E / (3(1 - 2 nu))."""
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    def elasticity_matrix(self):
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0],
                         [lam, lam + 2 * mu, 0.0],
                         [0.0, 0.0, mu]])


class SpectralSplit(NamedTuple):
    eps_plus: np.ndarray       # (..., 3)
    eps_minus: np.ndarray      # (..., 3)
    principal: np.ndarray      # (..., 2), descending
    directions: np.ndarray     # (..., 2, 2), directions[..., a, :] is n_a


def voigt_to_tensor(voigt):
    """Engineering Voigt strain (xx, yy, gamma_xy) to tensor components."""
    t = np.array(voigt, dtype=float, copy=True)
    t[..., 2] *= 0.5
    return t


def _principal(strain):
    s = np.asarray(strain, dtype=float)
    xx, yy, xy = s[..., 0], s[..., 1], s[..., 2]
    mean = 0.5 * (xx + yy)
    half = 0.5 * (xx - yy)
    R = np.hypot(half, xy)
    theta = 0.5 * np.arctan2(xy, half)
    c, sn = np.cos(theta), np.sin(theta)
    return mean + R, mean - R, c, sn


def _dyad(c, s):
    """Tensor components (xx, yy, xy) of n (x) n for n = (c, s)."""
    return np.stack([c * c, s * s, c * s], axis=-1)


def spectral_split(strain):
    """Split a strain into tensile and compressive parts.

    Uses the closed-form eigen-decomposition of the symmetric 2x2 tensor.

    Parameters
    ----------
    strain : array_like (..., 3)
        Tensor components (xx, yy, xy).

    Returns
    -------
    SpectralSplit
    """
    e1, e2, c, s = _principal(strain)
    A1 = _dyad(c, s)
    A2 = _dyad(-s, c)
    plus = np.maximum(e1, 0.0)[..., None] * A1 + np.maximum(e2, 0.0)[..., None] * A2
    minus = np.minimum(e1, 0.0)[..., None] * A1 + np.minimum(e2, 0.0)[..., None] * A2
    dirs = np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], axis=-2)
    return SpectralSplit(plus, minus, np.stack([e1, e2], -1), dirs)


def _trace_sq(t):
    return t[..., 0] ** 2 + t[..., 1] ** 2 + 2.0 * t[..., 2] ** 2


def energy_split(strain, mat):
    """Tensile and compressive elastic energy densities [Pa]."""
    strain = np.asarray(strain, dtype=float)
    split = spectral_split(strain)
    tr = strain[..., 0] + strain[..., 1]
    psi_plus = 0.5 * mat.lam * np.maximum(tr, 0.0) ** 2 + mat.mu * _trace_sq(split.eps_plus)
    psi_minus = 0.5 * mat.lam * np.minimum(tr, 0.0) ** 2 + mat.mu * _trace_sq(split.eps_minus)
    return psi_plus, psi_minus


def psi_plus(strain, mat):
    """Tensile energy density only; the driving force of the history field."""
    return energy_split(strain, mat)[0]


def _check_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -_PHI_SLACK) or np.any(phi > 1.0 + _PHI_SLACK):
        raise InvalidStateError("phase field outside [0, 1]")
    return phi


def degradation(phi, k):
    """Quadratic stiffness degradation (1 - k)(1 - phi)^2 + k."""
    phi = np.clip(_check_phi(phi), 0.0, 1.0)
    g = (1.0 - k) * (1.0 - phi) ** 2 + k
    return float(g) if g.ndim == 0 else g


def degraded_energy(strain, phi, mat):
    """g(phi) psi_plus + psi_minus."""
    pp, pm = energy_split(strain, mat)
    return degradation(phi, mat.k) * pp + pm


def effective_stress(strain, phi, mat):
    """Degraded effective stress, tensor components (xx, yy, xy) [Pa]."""
    strain = np.asarray(strain, dtype=float)
    g = np.asarray(degradation(phi, mat.k))
    split = spectral_split(strain)
    tr = strain[..., 0] + strain[..., 1]
    lam, mu = mat.lam, mat.mu
    sig_plus = lam * np.maximum(tr, 0.0)[..., None] * _VOIGT_M + 2.0 * mu * split.eps_plus
    sig_minus = lam * np.minimum(tr, 0.0)[..., None] * _VOIGT_M + 2.0 * mu * split.eps_minus
    return g[..., None] * sig_plus + sig_minus


def total_poroelastic_stress(stress, p, alpha):
    """Total stress sigma - alpha p I."""
    out = np.array(stress, dtype=float, copy=True)
    shift = np.asarray(alpha) * np.asarray(p)
    out[..., 0] -= shift
    out[..., 1] -= shift
    return out


def tangent_tensor(strain, phi, mat, delta=PERTURBATION):
    """Consistent tangent d(sigma)/d(epsilon) as an engineering-Voigt 3x3 matrix.

    Volumetric part from the Heaviside of the trace, deviatoric part from the
    spectral projections P1 (eigen-dyads) and P2 (eigenvalue-difference
    terms).  Coincident principal strains are separated by scaling the first
    one by (1 + delta).  Zero arguments take the compressive (undegraded)
    branch so the tangent never vanishes at the unstrained state.
    """
    strain = np.asarray(strain, dtype=float)
    g = np.asarray(degradation(phi, mat.k))
    e1, e2, c, s = _principal(strain)

    scale = np.maximum(1.0, np.maximum(np.abs(e1), np.abs(e2)))
    close = np.abs(e1 - e2) <= _DEGENERACY_RTOL * scale
    e1 = np.where(close, e1 * (1.0 + delta), e1)

    hp1 = (e1 > 0.0).astype(float)
    hp2 = (e2 > 0.0).astype(float)
    diff = e1 - e2
    safe = np.where(diff != 0.0, diff, 1.0)
    r_plus = np.where(diff != 0.0,
                      (np.maximum(e1, 0.0) - np.maximum(e2, 0.0)) / safe,
                      hp1)
    r_minus = 1.0 - r_plus

    A1 = _dyad(c, s)
    A2 = _dyad(-s, c)
    # S = n1 (x) n2 + n2 (x) n1 in tensor components
    n1x, n1y, n2x, n2y = c, s, -s, c
    S = np.stack([2 * n1x * n2x, 2 * n1y * n2y, n1x * n2y + n2x * n1y], axis=-1)

    def outer(a, b):
        return a[..., :, None] * b[..., None, :]

    A11, A22, SS = outer(A1, A1), outer(A2, A2), 0.5 * outer(S, S)
    P_plus = hp1[..., None, None] * A11 + hp2[..., None, None] * A22 + r_plus[..., None, None] * SS
    P_minus = ((1.0 - hp1)[..., None, None] * A11 + (1.0 - hp2)[..., None, None] * A22
               + r_minus[..., None, None] * SS)

    tr = strain[..., 0] + strain[..., 1]
    h_tr = (tr > 0.0).astype(float)
    vol = mat.lam * (g * h_tr + (1.0 - h_tr))
    J = np.outer(_VOIGT_M, _VOIGT_M)
    return (vol[..., None, None] * J
            + 2.0 * mat.mu * (g[..., None, None] * P_plus + P_minus))


def principal_stress(stress):
    """Principal values (first >= second) of stress tensor components."""
    s1, s2, _, _ = _principal(stress)
    return s1, s2
