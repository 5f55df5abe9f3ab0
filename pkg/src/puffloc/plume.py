"""Gaussian puff channel model.

An instantaneous release of mass ``m_T`` at the source is advected by a
uniform horizontal wind and spreads with constant dispersion widths.
The plane ``z = 0`` reflects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# fixed dispersion widths of the reference setup (m)
DEFAULT_SIGMA = (0.0115, 0.0115, 0.0046)


@dataclass(frozen=True)
class PlumeParams:
    m_T: float
    source: tuple[float, float, float] = (0.3, 0.3, 0.0)
    wind: tuple[float, float] = (0.0, 0.0)
    sigma: tuple[float, float, float] = DEFAULT_SIGMA

    def __post_init__(self):
        if self.m_T < 0:
            raise ParameterError(f"m_T must be non-negative, got {self.m_T}")
        if len(self.sigma) != 3 or min(self.sigma) <= 0:
            raise ParameterError(f"dispersion widths must be positive, got {self.sigma}")


@dataclass(frozen=True)
class DiffusivityParams:
    K: tuple[float, float, float]

    def __post_init__(self):
        if min(self.K) <= 0:
            raise ParameterError("turbulent diffusivities must be positive")

    def sigma_at(self, t: float) -> tuple[float, float, float]:
        """Dispersion widths ``sqrt(2 K t)`` after time ``t``."""
        if t <= 0:
            raise ParameterError("t must be positive")
        return tuple(math.sqrt(2.0 * k * t) for k in self.K)


def briggs_sigma(r: float) -> tuple[float, float]:
    """Briggs (stable air) crosswind and vertical widths at distance ``r`` m.

    The along-wind width is conventionally taken equal to the crosswind one.
    """
    if r < 0:
        raise ParameterError(f"distance must be non-negative, got {r}")
    sigma_y = 0.04 * r / math.sqrt(1.0 + 0.0001 * r)
    sigma_z = 0.016 * r / (1.0 + 0.0003 * r)
    return sigma_y, sigma_z


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise ParameterError("time must be positive")


def puff_concentration_3d(p: PlumeParams, at, t):
    """Concentration (kg/m^3) of the reflected puff at ``at = (x, y, z)``.

    ``at`` components and ``t`` broadcast as numpy arrays.
    """
    _check_time(t)
    x, y, z = (np.asarray(v, dtype=float) for v in at)
    t = np.asarray(t, dtype=float)
    sx, sy, sz = p.sigma
    xT, yT, zT = p.source
    ux, uy = p.wind
    horiz = np.exp(
        -((x - xT - ux * t) ** 2) / (2 * sx**2) - (y - yT - uy * t) ** 2 / (2 * sy**2)
    )
    vert = np.exp(-((z - zT) ** 2) / (2 * sz**2)) + np.exp(-((z + zT) ** 2) / (2 * sz**2))
    c = p.m_T / ((2 * np.pi) ** 1.5 * sx * sy * sz) * horiz * vert
    return c if c.ndim else float(c)


def peak_concentration(m_T: float, sigma=DEFAULT_SIGMA) -> float:
    """Ground-level puff-center concentration ``m_T / (sqrt(2 pi^3) sx sy sz)``."""
    sx, sy, sz = sigma
    return m_T / (math.sqrt(2 * math.pi**3) * sx * sy * sz)


def sensor_concentration(p: PlumeParams, node_pos, t):
    """Ground-level concentration at a sensor node at time ``t``.

    This is the planar form the location estimator inverts; the vertical
    factor is folded into the ``sqrt(2 pi^3)`` normalization.
    """
    _check_time(t)
    x, y = (np.asarray(v, dtype=float) for v in node_pos)
    t = np.asarray(t, dtype=float)
    sx, sy, _ = p.sigma
    xT, yT, _ = p.source
    ux, uy = p.wind
    expo = -((x - xT - ux * t) ** 2) / (2 * sx**2) - (y - yT - uy * t) ** 2 / (2 * sy**2)
    c = peak_concentration(p.m_T, p.sigma) * np.exp(expo)
    return c if c.ndim else float(c)
