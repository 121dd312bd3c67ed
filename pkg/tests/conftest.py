import math

import numpy as np
import pytest

from trihybrid.channel import ScenarioConfig
from trihybrid.geometry import UpaGeometry, wavelength
from trihybrid.harmonics import HarmonicBasis


def sphere_quadrature(n_theta=128, n_phi=256):
    """Gauss-Legendre nodes in cos(theta) times a uniform phi grid; weights sum to 4*pi."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.outer(w, np.full(n_phi, 2 * math.pi / n_phi))
    return tt, pp, weights


@pytest.fixture
def table_geometry():
    return UpaGeometry.half_wavelength(4, 4, 3e9)


@pytest.fixture
def basis4():
    return HarmonicBasis(4)


@pytest.fixture
def table_scenario_config():
    return ScenarioConfig(wavelength=wavelength(3e9), power=1e-5, noise_power=1e-11)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
