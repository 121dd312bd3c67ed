"""Orthonormal spherical harmonics and the truncated basis vector b(theta, phi).

Angles follow the array convention used throughout the package: ``theta`` is
the elevation measured from the +z axis in [0, pi] and ``phi`` the azimuth.
Harmonics are indexed linearly by ``t = u**2 + u + q + 1`` (1-based), so a
basis truncated at degree ``U`` has ``T = (U + 1)**2`` entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 8
_ANGLE_SLACK = 1e-12


def harmonic_index(u: int, q: int) -> int:
    """Linear 1-based index of the harmonic of degree ``u`` and order ``q``."""
    if u < 0 or abs(q) > u:
        raise ValueError(f"invalid harmonic index (u={u}, q={q})")
    return u * u + u + q + 1


def harmonic_degree_order(t: int) -> tuple[int, int]:
    """Inverse of :func:`harmonic_index`."""
    if t < 1:
        raise ValueError(f"harmonic index must be >= 1, got {t}")
    u = math.isqrt(t - 1)
    q = t - 1 - u * u - u
    return u, q


def legendre_table(degree: int, x) -> np.ndarray:
    """All associated Legendre values P_u^m(x) for 0 <= m <= u <= degree.

    Uses the standard upward recurrence in ``u`` at fixed ``m`` and keeps the
    Condon-Shortley phase ``(-1)**m``. Entries with ``m > u`` are zero.

    Returns
    -------
    ndarray, shape (degree + 1, degree + 1) + x.shape
        ``out[u, m]`` holds P_u^m(x).
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _ANGLE_SLACK):
        raise ValueError("Legendre argument must satisfy |x| <= 1")
    x = np.clip(x, -1.0, 1.0)
    s = np.sqrt(1.0 - x * x)
    out = np.zeros((degree + 1, degree + 1) + x.shape)
    pmm = np.ones_like(x)
    for m in range(degree + 1):
        if m > 0:
            pmm = -(2 * m - 1) * s * pmm
        out[m, m] = pmm
        if m + 1 <= degree:
            out[m + 1, m] = (2 * m + 1) * x * pmm
        for u in range(m + 2, degree + 1):
            out[u, m] = ((2 * u - 1) * x * out[u - 1, m] - (u + m - 1) * out[u - 2, m]) / (u - m)
    return out


def assoc_legendre(u: int, m: int, x):
    """P_u^m(x) with the Condon-Shortley phase."""
    if m < 0 or m > u:
        raise ValueError(f"order must satisfy 0 <= m <= u (u={u}, m={m})")
    value = legendre_table(u, x)[u, m]
    return float(value) if np.ndim(value) == 0 else value


def _normalization(u: int, q: int) -> float:
    a = abs(q)
    return math.sqrt((2 * u + 1) / (4 * math.pi) * math.factorial(u - a) / math.factorial(u + a))


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < -_ANGLE_SLACK) or np.any(theta > math.pi + _ANGLE_SLACK):
        raise ValueError("elevation theta must lie in [0, pi]")
    return theta


def sph_harmonic(u: int, q: int, theta, phi):
    """Orthonormal spherical harmonic Y_u^q(theta, phi).

    Negative orders use P_u^{|q|}, which gives ``Y_u^{-q} == conj(Y_u^q)``.
    """
    if u < 0 or abs(q) > u:
        raise ValueError(f"invalid harmonic index (u={u}, q={q})")
    theta = _check_theta(theta)
    p = legendre_table(u, np.cos(theta))[u, abs(q)]
    value = _normalization(u, q) * p * np.exp(1j * q * np.asarray(phi, dtype=float))
    return complex(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class HarmonicBasis:
    """Spherical-harmonic basis truncated at ``degree`` (U)."""

    degree: int = 4

    def __post_init__(self):
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"truncation degree must be in [0, {MAX_DEGREE}], got {self.degree}")

    @property
    def size(self) -> int:
        return (self.degree + 1) ** 2

    def indices(self) -> list[tuple[int, int]]:
        return [harmonic_degree_order(t) for t in range(1, self.size + 1)]

    def vectors(self, theta, phi) -> np.ndarray:
        """Basis vectors for broadcast arrays of angles, shape ``angles.shape + (T,)``."""
        theta = _check_theta(theta)
        theta, phi = np.broadcast_arrays(theta, np.asarray(phi, dtype=float))
        table = legendre_table(self.degree, np.cos(theta))
        out = np.empty(theta.shape + (self.size,), dtype=complex)
        for u in range(self.degree + 1):
            for q in range(-u, u + 1):
                t = u * u + u + q
                out[..., t] = _normalization(u, q) * table[u, abs(q)] * np.exp(1j * q * phi)
        return out


def basis_vector(basis: HarmonicBasis, theta: float, phi: float) -> np.ndarray:
    """b(theta, phi) as a length-T complex vector ordered by linear index."""
    return basis.vectors(theta, phi)
