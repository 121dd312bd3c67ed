"""Scenario sampling and EM-domain channel synthesis.

EM-domain channel vectors are stored antenna-major: entry ``n*T + t`` is
``alpha * a_n * Y_t(theta, phi)``, so block ``n`` pairs with the coefficient
vector ``c^(n)`` of antenna ``n``. The realized (compact) channel seen by the
precoder is ``h[n] = c^(n)^H block_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import UpaGeometry, upa_steering
from .harmonics import HarmonicBasis, harmonic_degree_order, sph_harmonic


@dataclass(frozen=True)
class Path:
    theta: float
    phi: float
    gain: complex
    distance: float = math.nan


@dataclass(frozen=True)
class Scenario:
    """Placement of users, target and scatterers plus link budget.

    ``users[k]`` holds the propagation paths of user ``k`` (LoS first).
    ``beta`` weights sensing; communication gets ``1 - beta``.
    """

    users: tuple[tuple[Path, ...], ...]
    target: Path
    scatterers: tuple[Path, ...]
    power: float
    noise_power: float
    beta: float = 0.5

    def __post_init__(self):
        if len(self.users) < 1:
            raise ValueError("scenario needs at least one user")
        if any(len(p) == 0 for p in self.users):
            raise ValueError("every user needs at least one path")
        if self.power <= 0 or self.noise_power <= 0:
            raise ValueError("power and noise power must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_scatterers(self) -> int:
        return len(self.scatterers)


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int = 2
    num_scatterers: int = 2
    paths_per_user: int = 1
    theta_bounds: tuple[float, float] = (0.0, math.pi)
    phi_bounds: tuple[float, float] = (0.0, 2 * math.pi)
    range_bounds: tuple[float, float] = (10.0, 50.0)
    wavelength: float = 0.1
    target_rcs: float = 1.0
    scatterer_rcs: float = 1.0
    power: float = 1e-5
    noise_power: float = 1e-11
    beta: float = 0.5


def path_gain(kind: str, distance: float, wavelength: float, rcs: float = 1.0,
              rng: np.random.Generator | None = None) -> complex:
    """Free-space one-way or radar-equation round-trip amplitude with random phase.

    Without ``rng`` the phase is zero.
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    if kind == "one-way":
        mag = wavelength / (4 * math.pi * distance)
    elif kind == "round-trip":
        mag = math.sqrt(wavelength**2 * rcs / ((4 * math.pi) ** 3 * distance**4))
    else:
        raise ValueError(f"unknown path kind {kind!r}")
    phase = 0.0 if rng is None else rng.uniform(0.0, 2 * math.pi)
    return mag * complex(math.cos(phase), math.sin(phase))


def _check_bounds(name, bounds):
    lo, hi = bounds
    if not hi > lo:
        raise ValueError(f"empty {name} interval {bounds}")


def _position(theta, phi, r):
    return r * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def sample_scenario(config: ScenarioConfig, seed) -> Scenario:
    """Draw angles and ranges uniformly within the configured bounds.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts. NLoS user
    paths (``paths_per_user > 1``) bounce off the scatterers in order.
    """
    for name in ("theta_bounds", "phi_bounds", "range_bounds"):
        _check_bounds(name, getattr(config, name))
    if config.num_users < 1 or config.num_scatterers < 0 or config.paths_per_user < 1:
        raise ValueError("need num_users >= 1, num_scatterers >= 0, paths_per_user >= 1")
    if config.paths_per_user - 1 > config.num_scatterers:
        raise ValueError("each NLoS path needs its own scatterer")

    rng = np.random.default_rng(seed)
    lam = config.wavelength

    def place():
        return (rng.uniform(*config.theta_bounds), rng.uniform(*config.phi_bounds),
                rng.uniform(*config.range_bounds))

    user_pos = [place() for _ in range(config.num_users)]
    target_pos = place()
    scat_pos = [place() for _ in range(config.num_scatterers)]

    users = []
    for theta, phi, r in user_pos:
        paths = [Path(theta, phi, path_gain("one-way", r, lam, rng=rng), r)]
        for m in range(config.paths_per_user - 1):
            st, sp, sr = scat_pos[m]
            length = sr + float(np.linalg.norm(_position(theta, phi, r) - _position(st, sp, sr)))
            paths.append(Path(st, sp, path_gain("one-way", length, lam, rng=rng), length))
        users.append(tuple(paths))

    t_theta, t_phi, t_r = target_pos
    target = Path(t_theta, t_phi, path_gain("round-trip", t_r, lam, config.target_rcs, rng), t_r)
    scatterers = tuple(
        Path(st, sp, path_gain("round-trip", sr, lam, config.scatterer_rcs, rng), sr)
        for st, sp, sr in scat_pos
    )
    return Scenario(tuple(users), target, scatterers, config.power, config.noise_power, config.beta)


def em_channel_single_path(path: Path, geom: UpaGeometry, basis: HarmonicBasis) -> np.ndarray:
    """Length ``N_T * T`` EM-domain vector of one path (antenna-major)."""
    a = upa_steering(geom, path.theta, path.phi)
    b = basis.vectors(path.theta, path.phi)
    return np.outer(path.gain * a, b).ravel()


@dataclass
class EmChannels:
    """EM-domain channels of every entity, each a flat antenna-major vector."""

    users: np.ndarray          # (K, N_T*T)
    target: np.ndarray         # (N_T*T,)
    scatterers: np.ndarray     # (M, N_T*T)
    num_antennas: int
    basis_size: int

    def user_blocks(self) -> np.ndarray:
        return self.users.reshape(len(self.users), self.num_antennas, self.basis_size)

    def target_blocks(self) -> np.ndarray:
        return self.target.reshape(self.num_antennas, self.basis_size)

    def scatterer_blocks(self) -> np.ndarray:
        return self.scatterers.reshape(len(self.scatterers), self.num_antennas, self.basis_size)


def assemble_channels(scenario: Scenario, geom: UpaGeometry, basis: HarmonicBasis) -> EmChannels:
    n_t, size = geom.size, basis.size
    users = np.empty((scenario.num_users, n_t * size), dtype=complex)
    for k, paths in enumerate(scenario.users):
        total = sum(em_channel_single_path(p, geom, basis) for p in paths)
        users[k] = math.sqrt(n_t / len(paths)) * total
    target = em_channel_single_path(scenario.target, geom, basis)
    scatterers = np.empty((scenario.num_scatterers, n_t * size), dtype=complex)
    for m, p in enumerate(scenario.scatterers):
        scatterers[m] = em_channel_single_path(p, geom, basis)
    return EmChannels(users, target, scatterers, n_t, size)


def compact_channel(em: np.ndarray, h_em: np.ndarray) -> np.ndarray:
    """Realized channel ``F_EM^H h_em`` computed blockwise.

    ``em`` has shape (N_T, T) with row ``n`` holding ``c^(n)``; ``h_em`` may
    carry leading batch axes.
    """
    em = np.asarray(em)
    n_t, size = em.shape
    h_em = np.asarray(h_em)
    if h_em.shape[-1] != n_t * size:
        raise ValueError(f"EM channel length {h_em.shape[-1]} does not match {n_t}x{size} coefficients")
    blocks = h_em.reshape(h_em.shape[:-1] + (n_t, size))
    return np.einsum("nt,...nt->...n", em.conj(), blocks)


def elementwise_oracle(paths: Sequence[Path], em: np.ndarray, geom: UpaGeometry,
                       basis: HarmonicBasis, normalize: bool = True) -> np.ndarray:
    """Reference channel built element by element from per-antenna gains.

    Each antenna's gain is the harmonic series ``sum_t conj(c_t) Y_t`` and the
    inter-element phase is evaluated from the element coordinates directly.
    ``normalize`` applies the ``sqrt(N_T / L)`` multipath scaling used for users.
    """
    em = np.asarray(em)
    k = 2 * math.pi / geom.wavelength
    n_t = geom.size
    out = np.zeros(n_t, dtype=complex)
    for p in paths:
        harmonics = [sph_harmonic(*harmonic_degree_order(t), p.theta, p.phi)
                     for t in range(1, basis.size + 1)]
        for n in range(n_t):
            ix, iy = divmod(n, geom.ny)
            gain = sum(em[n, t].conjugate() * y for t, y in enumerate(harmonics))
            phase = ix * geom.dx * math.sin(p.theta) * math.cos(p.phi) \
                + iy * geom.dy * math.sin(p.theta) * math.sin(p.phi)
            out[n] += p.gain * gain * complex(math.cos(k * phase), -math.sin(k * phase))
    if normalize:
        out *= math.sqrt(n_t / len(paths))
    return out


def isotropic_em(num_antennas: int, basis_size: int) -> np.ndarray:
    """Coefficients selecting only Y_0^0 on every antenna (ordinary antennas)."""
    em = np.zeros((num_antennas, basis_size), dtype=complex)
    em[:, 0] = 1.0
    return em
