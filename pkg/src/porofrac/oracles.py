"""
Closed-form reference solutions used by the verification benchmarks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SeriesParams:
    """Data of the pressurised-crack diffusion problem.

    Attributes
    ----------
    L : crack (plate) length [m]
    a : hydraulic aperture [m]
    K_w : fluid bulk modulus, 1/c_F [Pa]
    mu_F : fluid viscosity [Pa s]
    n_terms : number of series terms
    """

    L: float
    a: float = 3.0e-5
    K_w: float = 1.0 / 4.55e-10
    mu_F: float = 1.0e-3
    n_terms: int = 200

    def __post_init__(self):
        if self.n_terms < 1:
            raise InvalidArgumentError("n_terms must be >= 1")
        if not (self.L > 0 and self.a > 0 and self.K_w > 0 and self.mu_F > 0):
            raise InvalidArgumentError("L, a, K_w and mu_F must be positive")

    @property
    def diffusivity(self):
        """K_w a^2 / (12 mu_F) [m^2/s], the cubic-law pressure diffusivity."""
        return self.K_w * self.a ** 2 / (12.0 * self.mu_F)


def crack_pressure_series(xi, Td, n_terms=200):
    """P/P0 along a crack pressurised at xi = 1 and sealed at xi = 0.

    P/P0 = 1 + 4/pi sum_n exp(-(2n+1)^2 pi^2 Td/4) cos((2n+1) pi xi/2) (-1)^(n+1)/(2n+1)

    ``xi`` may be an array; ``Td`` must be positive.
    """
    if not Td > 0:
        raise InvalidArgumentError("Td must be positive")
    if n_terms < 1:
        raise InvalidArgumentError("n_terms must be >= 1")
    xi = np.asarray(xi, dtype=float)
    m = 2.0 * np.arange(n_terms) + 1.0
    sign = np.where(np.arange(n_terms) % 2 == 0, -1.0, 1.0)
    coef = np.exp(-m ** 2 * (Td / 4.0) * np.pi ** 2) * sign / m
    # summing from the smallest terms up keeps the tail round-off out
    terms = np.cos(np.multiply.outer(xi, m) * np.pi / 2.0) * coef
    val = 1.0 + 4.0 / np.pi * terms[..., ::-1].sum(axis=-1)
    return float(val) if val.ndim == 0 else val


def position_to_xi(x, L, form="normalized"):
    """Series coordinate of a point at distance ``x`` from the pressurised end.

    ``form="normalized"`` gives (L - x)/L; ``form="printed"`` gives the
    alternative (L - x)/x kept for comparison.
    """
    x = np.asarray(x, dtype=float)
    if form == "normalized":
        return (L - x) / L
    if form == "printed":
        with np.errstate(divide="ignore"):
            return (L - x) / x
    raise InvalidArgumentError("form must be 'normalized' or 'printed'")


def dimensionless_time(t, params, form="consistent"):
    """Td of the crack diffusion problem.

    ``form="consistent"`` is K_w a^2 t / (12 mu_F L^2), which is
    dimensionless and equals D t / L^2 with the cubic-law diffusivity.
    ``form="printed"`` evaluates K_w a t / (12 mu_F L^2) (units 1/m).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidArgumentError("t must be non-negative")
    if form == "consistent":
        val = params.diffusivity * t / params.L ** 2
    elif form == "printed":
        val = params.K_w * params.a * t / (12.0 * params.mu_F * params.L ** 2)
    else:
        raise InvalidArgumentError("form must be 'consistent' or 'printed'")
    return float(val) if val.ndim == 0 else val


def time_from_dimensionless(Td, params):
    """Inverse of the consistent :func:`dimensionless_time`."""
    return Td * params.L ** 2 / params.diffusivity


def joint_water_head(p, y, rho, g):
    """Hydraulic head p/(rho g) + y [m]."""
    if not g > 0:
        raise InvalidArgumentError("g must be positive")
    return np.asarray(p) / (rho * g) + np.asarray(y)


class WaveReferences(NamedTuple):
    p_wave_speed: float     # m/s
    reflection_peak: float  # Pa
    period: float           # s


def consolidation_references(mat, flow, height, Ps, regime="undrained"):
    """Wave-mechanics checks for a column loaded suddenly at the top.

    The mixture density is (1 - eps_p) rho_s + eps_p rho_R.  In the
    ``"undrained"`` regime the constrained modulus is raised by the fluid,
    M_u = lambda + 2 mu + alpha^2/S, because the low permeability keeps the
    fluid from draining on the wave time scale; ``"drained"`` uses
    lambda + 2 mu alone.  The reflection peak at the fixed, impermeable base
    is 2 Ps and the fundamental period of the base-fixed column is
    4 height / c_p.
    """
    if not (height > 0):
        raise InvalidArgumentError("height must be positive")
    rho = (1.0 - flow.eps_pR) * mat.rho_s + flow.eps_pR * flow.rho_R
    modulus = mat.lam + 2.0 * mat.mu
    if regime == "undrained":
        modulus += flow.alpha_R ** 2 / flow.reservoir_storage(mat)
    elif regime != "drained":
        raise InvalidArgumentError("regime must be 'undrained' or 'drained'")
    c = math.sqrt(modulus / rho)
    return WaveReferences(c, 2.0 * Ps, 4.0 * height / c)


def undrained_pressure_ratio(mat, flow):
    """p / |sigma_yy| carried by the fluid under undrained 1D compression."""
    S = flow.reservoir_storage(mat)
    M = mat.lam + 2.0 * mat.mu + flow.alpha_R ** 2 / S
    return flow.alpha_R / S / M
