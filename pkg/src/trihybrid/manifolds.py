"""Riemannian tools for the complex unit sphere and the unit-modulus set.

Complex vectors are treated as real vectors of twice the length, so the
metric is ``Re(x^H y)``. Gradients follow the same convention: ``g`` is the
gradient of a real function ``f`` when ``df = Re(g^H dx)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

RIDGE = 1e-12


def real_inner(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.real(np.vdot(x, y)))


def sphere_tangent_project(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - real_inner(c, g) * c


def sphere_retract(c: np.ndarray, step: float, d: np.ndarray) -> np.ndarray:
    """``(c - step*d) / ||c - step*d||``."""
    x = c - step * d
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ValueError("degenerate retraction: c - step*d vanished, retry with a smaller step")
    return x / norm


def circle_tangent_project(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Entrywise projection onto the tangent space of the unit-modulus set."""
    return g - np.real(g * np.conj(x)) * x


def circle_retract(x: np.ndarray, step: float, d: np.ndarray) -> np.ndarray:
    """Entrywise phase projection of ``x - step*d``; vanished entries keep their phase."""
    y = x - step * d
    mag = np.abs(y)
    return np.where(mag > 0, y / np.where(mag > 0, mag, 1.0), x)


@dataclass
class LineSearchResult:
    step: float
    point: np.ndarray
    value: float
    stalled: bool


def armijo_search(objective: Callable[[np.ndarray], float], point: np.ndarray, direction: np.ndarray,
                  slope: float, *, value: float | None = None,
                  retract: Callable = sphere_retract, initial_step: float = 1.0,
                  shrink: float = 0.5, sufficient: float = 1e-4,
                  max_backtracks: int = 30) -> LineSearchResult:
    """Backtracking Armijo rule for *maximizing* ``objective`` along ``direction``.

    ``slope`` is the directional derivative of the objective along
    ``direction``; it must be positive. Candidates are
    ``retract(point, step, -direction)``. The first (largest) step
    ``initial_step * shrink**i`` giving
    ``f(candidate) >= f(point) + sufficient * step * slope`` is accepted.
    When none qualifies the point is returned unchanged with ``stalled`` set.
    """
    f0 = objective(point) if value is None else value
    if not slope > 0.0:
        return LineSearchResult(0.0, point, f0, True)
    step = initial_step
    for _ in range(max_backtracks + 1):
        try:
            candidate = retract(point, step, -direction)
        except ValueError:
            step *= shrink
            continue
        f1 = objective(candidate)
        if f1 >= f0 + sufficient * step * slope:
            return LineSearchResult(step, candidate, f1, False)
        step *= shrink
    return LineSearchResult(0.0, point, f0, True)


@dataclass
class Factorization:
    analog: np.ndarray
    baseband: np.ndarray
    residuals: list[float]   # relative Frobenius residual after each outer iteration

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def initial_analog(f_fd: np.ndarray, rf_chains: int) -> np.ndarray:
    """Phase-only start: column j copies the phases of target column j mod K.

    Extra columns beyond K get a linear phase ramp so they are not duplicates.
    """
    n_t, k = f_fd.shape
    cols = []
    for j in range(rf_chains):
        phase = np.angle(f_fd[:, j % k]) + 2 * np.pi * (j // k) * np.arange(n_t) / n_t
        cols.append(np.exp(1j * phase))
    return np.stack(cols, axis=1)


def paired_phase_analog(f_fd: np.ndarray, rf_chains: int) -> np.ndarray | None:
    """Exact analog part when there are at least two RF chains per stream.

    Column ``k`` of ``f_fd`` equals ``m (e^{j(a+d)} + e^{j(a-d)})`` entrywise
    with ``m = max|f|/2``, ``a`` the phase and ``d = arccos(|f| / 2m)``, so
    chains ``2k`` and ``2k+1`` carry the two phase patterns. Returns None
    when ``rf_chains < 2K``.
    """
    n_t, k = f_fd.shape
    if rf_chains < 2 * k:
        return None
    x = initial_analog(f_fd, rf_chains)
    for j in range(k):
        col = f_fd[:, j]
        peak = np.max(np.abs(col))
        if peak == 0.0:
            continue
        spread = np.arccos(np.clip(np.abs(col) / peak, 0.0, 1.0))
        x[:, 2 * j] = np.exp(1j * (np.angle(col) + spread))
        x[:, 2 * j + 1] = np.exp(1j * (np.angle(col) - spread))
    return x


def _hermitian_basis(k: int) -> list[np.ndarray]:
    mats = []
    for a in range(k):
        e = np.zeros((k, k), complex)
        e[a, a] = 1.0
        mats.append(e)
    for a in range(k):
        for b in range(a + 1, k):
            e = np.zeros((k, k), complex)
            e[a, b] = e[b, a] = 1.0
            mats.append(e)
            e = np.zeros((k, k), complex)
            e[a, b], e[b, a] = 1j, -1j
            mats.append(e)
    return mats


def spectral_analog(f_fd: np.ndarray, rf_chains: int, seed: int = 0) -> np.ndarray | None:
    """Unit-modulus vectors in the column space of ``f_fd``, found algebraically.

    Writes candidate columns as ``Q w`` and lifts ``|q_i^T w|**2 = 1`` to a
    linear system in ``W = w w^H``. When ``f_fd`` is exactly factorable the
    solution set is the affine hull of the true rank-one atoms, which a
    generalized eigenproblem on two members separates. Returns None when the
    numerical rank of ``f_fd`` differs from ``rf_chains``.
    """
    u, s, _ = np.linalg.svd(f_fd, full_matrices=False)
    if s[0] == 0.0:
        return None
    r = int(np.sum(s > s[0] * 1e-9))
    if r != rf_chains:
        return None
    q = u[:, :r] * s[:r]
    basis = _hermitian_basis(r)
    lifted = np.array([[np.real(row @ e @ row.conj()) for e in basis] for row in q])
    particular, *_ = np.linalg.lstsq(lifted, np.ones(len(q)), rcond=None)
    null = np.linalg.svd(lifted)[2][len(basis) - (r - 1):]
    rng = np.random.default_rng(seed)

    def member():
        coef = particular + null.T @ rng.normal(size=len(null))
        return sum(c * e for c, e in zip(coef, basis))

    m1, m2 = member(), member()
    try:
        _, vecs = np.linalg.eig(np.linalg.solve(m2, m1))
    except np.linalg.LinAlgError:
        return None
    x = q @ (m2 @ vecs)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) == 0):
        return None
    return np.exp(1j * np.angle(x))


def _baseband(analog, f_fd):
    gram = analog.conj().T @ analog + RIDGE * np.eye(analog.shape[1])
    return np.linalg.solve(gram, analog.conj().T @ f_fd)


def _ls_residual(analog, f_fd):
    return float(np.linalg.norm(analog @ _baseband(analog, f_fd) - f_fd))


def _alternate(f_fd, x, max_outer, max_inner, tol):
    target_norm = np.linalg.norm(f_fd)

    def cost(xa, bb):
        return float(np.linalg.norm(xa @ bb - f_fd) ** 2)

    residuals = []
    for _ in range(max_outer):
        bb = _baseband(x, f_fd)
        lipschitz = 2.0 * np.linalg.norm(bb, 2) ** 2
        current = cost(x, bb)
        for _ in range(max_inner):
            egrad = 2.0 * (x @ bb - f_fd) @ bb.conj().T
            rgrad = circle_tangent_project(x, egrad)
            slope = float(np.sum(np.abs(rgrad) ** 2))
            if slope == 0.0:
                break
            ls = armijo_search(lambda z: -cost(z, bb), x, -rgrad, slope, value=-current,
                               retract=circle_retract, initial_step=1.0 / lipschitz)
            if ls.stalled:
                break
            gain = current + ls.value
            x, current = ls.point, -ls.value
            if gain <= 1e-12 * current:
                break
        bb = _baseband(x, f_fd)
        residuals.append(float(np.sqrt(cost(x, bb)) / target_norm))
        if residuals[-1] <= 1e-12:
            break
        if len(residuals) > 1 and residuals[-2] - residuals[-1] <= tol * residuals[-2]:
            break
    return Factorization(x, bb, residuals)


def hybrid_factorize(f_fd: np.ndarray, rf_chains: int, power: float | None = None,
                     analog: np.ndarray | None = None, *, max_outer: int = 100,
                     max_inner: int = 50, tol: float = 1e-6, seed: int = 0) -> Factorization:
    """Approximate ``f_fd`` by ``F_RF @ F_BB`` with unit-modulus ``F_RF``.

    Alternates a least-squares baseband update with Armijo gradient steps on
    the unit-modulus manifold for the analog part, stopping once the
    relative residual improves by at most a fraction ``tol`` between outer
    iterations. The analog start is whichever of ``analog`` (warm start),
    the phases of ``f_fd``, :func:`spectral_analog` and
    :func:`paired_phase_analog` fits best. If
    ``power`` is given and ``||F_RF F_BB||_F**2`` exceeds it, the baseband
    is scaled onto the budget.
    """
    if rf_chains < 1:
        raise ValueError("need at least one RF chain")
    f_fd = np.asarray(f_fd, dtype=complex)
    if np.linalg.norm(f_fd) == 0.0:
        x = initial_analog(np.ones_like(f_fd), rf_chains) if analog is None else analog
        return Factorization(x, np.zeros((rf_chains, f_fd.shape[1]), complex), [0.0])
    candidates = [initial_analog(f_fd, rf_chains), spectral_analog(f_fd, rf_chains, seed),
                  paired_phase_analog(f_fd, rf_chains)]
    if analog is not None:
        candidates.insert(0, np.exp(1j * np.angle(analog)))
    x0 = min((c for c in candidates if c is not None), key=lambda c: _ls_residual(c, f_fd))
    best = _alternate(f_fd, x0, max_outer, max_inner, tol)
    if power is not None:
        total = np.linalg.norm(best.analog @ best.baseband) ** 2
        if total > power:
            best.baseband = best.baseband * np.sqrt(power / total)
    return best
