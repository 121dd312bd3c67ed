"""Uniform planar array (XoY plane) steering vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def wavelength(carrier_hz: float) -> float:
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class UpaGeometry:
    """Planar array with ``nx * ny`` elements; element order is x-major."""

    nx: int = 4
    ny: int = 4
    dx: float = 0.05
    dy: float = 0.05
    wavelength: float = 0.1

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("array needs at least one element per axis")
        if self.dx <= 0 or self.dy <= 0 or self.wavelength <= 0:
            raise ValueError("spacings and wavelength must be positive")

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @classmethod
    def half_wavelength(cls, nx: int, ny: int, carrier_hz: float = 3e9) -> "UpaGeometry":
        lam = wavelength(carrier_hz)
        return cls(nx, ny, lam / 2, lam / 2, lam)


@dataclass(frozen=True)
class Direction:
    theta: float
    phi: float


def upa_steering(geom: UpaGeometry, theta: float, phi: float) -> np.ndarray:
    """Array response toward (theta, phi); the x-axis factor varies slowest."""
    k = 2 * np.pi / geom.wavelength
    ax = np.exp(-1j * k * np.arange(geom.nx) * geom.dx * np.sin(theta) * np.cos(phi))
    ay = np.exp(-1j * k * np.arange(geom.ny) * geom.dy * np.sin(theta) * np.sin(phi))
    return np.kron(ax, ay)
