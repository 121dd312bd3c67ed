"""Communication and sensing performance metrics, plus radiation patterns."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Path, compact_channel, em_channel_single_path
from .geometry import UpaGeometry, upa_steering
from .harmonics import HarmonicBasis

PATTERN_NORM_TOL = 1e-9


@dataclass
class TriHybridBeamformer:
    """Digital, analog and EM precoders.

    ``analog`` is None for fully digital operation, in which case
    ``baseband`` is the N_T x K precoder itself.
    """

    baseband: np.ndarray
    analog: np.ndarray | None
    em: np.ndarray

    @property
    def digital(self) -> np.ndarray:
        """The effective precoder ``F_RF @ F_BB`` (columns are f_FD,k)."""
        if self.analog is None:
            return self.baseband
        return self.analog @ self.baseband

    @property
    def transmit_power(self) -> float:
        return float(np.sum(np.abs(self.digital) ** 2))

    def copy(self) -> "TriHybridBeamformer":
        analog = None if self.analog is None else self.analog.copy()
        return TriHybridBeamformer(self.baseband.copy(), analog, self.em.copy())


@dataclass(frozen=True)
class MetricsReport:
    sinr: np.ndarray
    sum_rate: float      # bits/s/Hz
    scnr: float          # linear
    objective: float
    beta: float


def _check_noise(noise_power):
    if noise_power <= 0:
        raise ValueError("noise power must be positive")


def sinr_and_rate(h_users: np.ndarray, f: np.ndarray, noise_power: float):
    """Per-user SINR and the sum rate in bits/s/Hz.

    ``h_users`` is (K, N_T) with realized channels as rows, ``f`` is (N_T, K).
    """
    _check_noise(noise_power)
    gains = np.abs(np.conj(h_users) @ f) ** 2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    sinr = signal / (interference + noise_power)
    return sinr, float(np.sum(np.log2(1.0 + sinr)))


def scnr(h_target: np.ndarray, h_scatterers: np.ndarray, f: np.ndarray, noise_power: float) -> float:
    """Sensing SCNR as a sum over streams of C_k / D with a common clutter term D."""
    _check_noise(noise_power)
    signal = np.abs(np.conj(h_target) @ f) ** 2
    h_scatterers = np.asarray(h_scatterers).reshape(-1, f.shape[0])
    clutter = float(np.sum(np.abs(np.conj(h_scatterers) @ f) ** 2)) + noise_power
    return float(sum(c / clutter for c in signal))


def weighted_objective(sum_rate: float, scnr_value: float, beta: float) -> float:
    return (1.0 - beta) * sum_rate + beta * scnr_value


def compute_metrics(h_users, h_target, h_scatterers, f, noise_power, beta) -> MetricsReport:
    sinr, rate = sinr_and_rate(h_users, f, noise_power)
    eta = scnr(h_target, h_scatterers, f, noise_power)
    return MetricsReport(sinr, rate, eta, weighted_objective(rate, eta, beta), beta)


def element_pattern(c: np.ndarray, basis: HarmonicBasis, theta, phi) -> np.ndarray:
    """Power gain ``|c^H b(theta, phi)|**2`` of one element on broadcast angles."""
    c = np.asarray(c)
    if abs(np.linalg.norm(c) - 1.0) > PATTERN_NORM_TOL:
        raise ValueError("element coefficients must have unit norm")
    return np.abs(basis.vectors(theta, phi) @ c.conj()) ** 2


def probe_channel(em: np.ndarray, geom: UpaGeometry, basis: HarmonicBasis, theta: float, phi: float):
    """Realized channel of a unit-gain single-path user at (theta, phi)."""
    h_em = math.sqrt(geom.size) * em_channel_single_path(Path(theta, phi, 1.0), geom, basis)
    return compact_channel(em, h_em)


def array_gain(beamformer: TriHybridBeamformer, geom: UpaGeometry, basis: HarmonicBasis,
               theta: float, phi: float, stream: int) -> float:
    """Beam power ``|h(theta, phi)^H f_k|**2`` toward a unit-gain probe user."""
    h = probe_channel(beamformer.em, geom, basis, theta, phi)
    return float(abs(np.vdot(h, beamformer.digital[:, stream])) ** 2)


def array_pattern(beamformer: TriHybridBeamformer, geom: UpaGeometry, basis: HarmonicBasis,
                  theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Vectorized :func:`array_gain` over a theta x phi grid, shape (n_theta, n_phi, K)."""
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    b = basis.vectors(tt, pp)                                   # (nt, np, T)
    steering = np.stack([upa_steering(geom, t, p) for t, p in zip(tt.ravel(), pp.ravel())])
    steering = steering.reshape(tt.shape + (geom.size,))        # (nt, np, N)
    element = b @ beamformer.em.conj().T                        # c^(n)^H b -> (nt, np, N)
    h = math.sqrt(geom.size) * steering * element
    return np.abs(np.conj(h) @ beamformer.digital) ** 2
