"""Tri-hybrid beamforming optimization by fractional programming and manifold steps.

The solver maximizes ``(1 - beta) * sum_k ln(1 + sinr_k) + beta * scnr`` (rates
in nats internally) over the digital, analog and EM precoders. Each outer
iteration refreshes the quadratic-transform auxiliaries and solves the fully
digital precoder in closed form with a bisected power multiplier (a few
times, since this block is cheap), fits the hybrid (analog x baseband)
factorization, then sweeps the antennas with one Riemannian ascent step on
each EM coefficient vector. Two safeguarded extrapolations (EM only after
the sweep, and precoder plus EM across iterations in the fully digital
modes) speed up the slow coupled mode of the block ascent; each is kept
only when it raises the true objective, so monotonicity is preserved.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import EmChannels, Scenario, assemble_channels, compact_channel, isotropic_em
from .geometry import UpaGeometry
from .harmonics import HarmonicBasis
from .manifolds import armijo_search, hybrid_factorize, real_inner, sphere_retract, sphere_tangent_project
from .metrics import MetricsReport, TriHybridBeamformer, compute_metrics

MODES = ("era-trihybrid", "era-digital", "oa-hybrid", "oa-digital")


@dataclass
class AuxVars:
    sinr: np.ndarray   # gamma_k
    p: np.ndarray      # communication quadratic-transform multipliers
    q: np.ndarray      # sensing quadratic-transform multipliers


@dataclass
class SolverConfig:
    mode: str = "era-trihybrid"
    rf_chains: int = 2
    max_iterations: int = 50
    tol: float = 1e-4               # absolute objective change (nats)
    bisection_tol: float = 1e-8     # relative power gap
    em_steps: int = 1               # Armijo steps per antenna per iteration
    digital_steps: int = 5          # aux + digital refreshes per iteration
    extrapolate: float = 2.0        # initial EM extrapolation weight, 0 disables
    joint_extrapolate: bool = True  # digital modes: momentum on (f, EM) between iterations
    factorize_iterations: int = 100
    beta: float | None = None       # overrides the scenario weight
    power: float | None = None      # overrides the scenario budget

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.tol <= 0 or self.bisection_tol <= 0 or self.extrapolate < 0:
            raise ValueError("tolerances must be positive")
        if min(self.rf_chains, self.max_iterations, self.em_steps, self.digital_steps) < 1:
            raise ValueError("rf_chains, max_iterations, em_steps and digital_steps must be >= 1")

    @property
    def optimize_em(self) -> bool:
        return self.mode.startswith("era")

    @property
    def hybrid(self) -> bool:
        return self.mode.endswith("hybrid")


@dataclass
class SolveReport:
    trace: list[float]              # objective (nats) after each iteration
    initial_objective: float
    metrics: MetricsReport
    beamformer: TriHybridBeamformer
    iterations: int
    converged: bool
    wall_time: float
    multipliers: list[float] = field(default_factory=list)
    em_stalls: int = 0


# -- quadratic-transform objective in terms of inner products -------------------
#
# ``g[k, j] = h_k^H f_j``, ``t[k] = h_t^H f_k``, ``z[j, m] = h_int,m^H f_j``.

def _sensing_denominator(z, noise_power):
    return float(np.sum(np.abs(z) ** 2)) + noise_power


def _aux_from_products(g, t, z, beta, noise_power) -> AuxVars:
    power = np.abs(g) ** 2
    signal = np.diag(power)
    total = power.sum(axis=1) + noise_power
    sinr = signal / (total - signal)
    p = np.sqrt((1 - beta) * (1 + sinr)) * np.diag(g) / total
    q = math.sqrt(beta) * t / _sensing_denominator(z, noise_power)
    return AuxVars(sinr, p, q)


def _fqua_from_products(g, t, z, aux: AuxVars, beta, noise_power) -> float:
    w = 1.0 - beta
    gamma, p, q = aux.sinr, aux.p, aux.q
    total = np.sum(np.abs(g) ** 2, axis=1) + noise_power
    comm = (w * np.log1p(gamma) - w * gamma
            + 2 * np.real(np.conj(p) * np.sqrt(w * (1 + gamma)) * np.diag(g))
            - np.abs(p) ** 2 * total)
    sense = 2 * np.real(np.conj(q) * math.sqrt(beta) * t) - np.abs(q) ** 2 * _sensing_denominator(z, noise_power)
    return float(np.sum(comm) + np.sum(sense))


def _true_from_products(g, t, z, beta, noise_power) -> float:
    power = np.abs(g) ** 2
    signal = np.diag(power)
    sinr = signal / (power.sum(axis=1) - signal + noise_power)
    eta = float(np.sum(np.abs(t) ** 2)) / _sensing_denominator(z, noise_power)
    return float((1 - beta) * np.sum(np.log1p(sinr)) + beta * eta)


def _products(h_users, h_target, h_scat, f):
    g = np.conj(h_users) @ f
    t = np.conj(h_target) @ f
    z = (np.conj(h_scat) @ f).T if len(h_scat) else np.zeros((f.shape[1], 0), complex)
    return g, t, z


def update_aux(h_users, h_target, h_scat, f, beta, noise_power) -> AuxVars:
    """Closed-form gamma, p and q for fixed realized channels and precoders."""
    return _aux_from_products(*_products(h_users, h_target, h_scat, f), beta, noise_power)


def surrogate_objective(h_users, h_target, h_scat, f, aux, beta, noise_power) -> float:
    """The quadratic-transform surrogate f_qua (nats)."""
    return _fqua_from_products(*_products(h_users, h_target, h_scat, f), aux, beta, noise_power)


def objective_nats(h_users, h_target, h_scat, f, beta, noise_power) -> float:
    return _true_from_products(*_products(h_users, h_target, h_scat, f), beta, noise_power)


# -- digital precoder ----------------------------------------------------------

@dataclass
class DigitalUpdate:
    precoder: np.ndarray     # N_T x K
    multiplier: float        # optimal power multiplier mu
    bisections: int


def _digital_system(h_users, h_target, h_scat, aux, beta):
    w = 1.0 - beta
    q2 = float(np.sum(np.abs(aux.q) ** 2))
    weighted = h_users.T * np.abs(aux.p)               # columns |p_j| h_j
    mat = weighted @ weighted.conj().T
    if len(h_scat):
        mat = mat + q2 * (h_scat.T @ h_scat.conj())
    rhs = (h_users.T * (aux.p * np.sqrt(w * (1 + aux.sinr)))
           + np.outer(h_target, aux.q * math.sqrt(beta)))
    return 0.5 * (mat + mat.conj().T), rhs


def digital_update(h_users, h_target, h_scat, aux: AuxVars, beta: float, power: float,
                   tol: float = 1e-8, max_bisections: int = 200) -> DigitalUpdate:
    """Maximize the surrogate over the fully digital precoder under ``sum ||f_k||^2 <= P``.

    ``f_k(mu) = (Q + mu I)^+ v_k``; ``mu = 0`` when that is already feasible,
    otherwise the multiplier is bisected on the power curve (upper end grown
    by doubling from 1) until the power gap is below ``tol * P``, and the
    feasible end point is scaled onto the budget.
    """
    mat, rhs = _digital_system(h_users, h_target, h_scat, aux, beta)
    n_t, k = rhs.shape
    if not np.any(rhs):
        return DigitalUpdate(np.zeros((n_t, k), complex), 0.0, 0)
    lam, vecs = np.linalg.eigh(mat)
    lam = np.clip(lam, 0.0, None)
    proj = np.abs(vecs.conj().T @ rhs) ** 2            # |u_i^H v_k|^2
    weight = proj.sum(axis=1)
    null = lam <= 1e-12 * max(lam[-1], np.finfo(float).tiny)

    def power_at(mu):
        return float(np.sum(weight / (lam + mu) ** 2))

    def precoder(mu):
        scale = np.where(null & (mu == 0.0), 0.0, 1.0 / np.where(null & (mu == 0.0), 1.0, lam + mu))
        return vecs @ (scale[:, None] * (vecs.conj().T @ rhs))

    if np.sum(weight[null]) <= 1e-24 * np.sum(weight) and float(np.sum(weight[~null] / lam[~null] ** 2)) <= power:
        return DigitalUpdate(precoder(0.0), 0.0, 0)

    hi = 1.0
    count = 0
    while power_at(hi) > power and count < 2000:
        hi *= 2.0
        count += 1
    lo = 0.0
    for count in range(1, max_bisections + 1):
        if power - power_at(hi) <= tol * power:
            break
        mid = 0.5 * (lo + hi)
        if power_at(mid) > power:
            lo = mid
        else:
            hi = mid
    f = precoder(hi)
    f *= math.sqrt(power / float(np.sum(np.abs(f) ** 2)))
    return DigitalUpdate(f, hi, count)


# -- per-antenna EM update -----------------------------------------------------

@dataclass
class PerAntennaContext:
    """Inner products split into antenna ``n``'s part and everything else.

    ``users[k, j]``, ``target[k]`` and ``scatterers[j, m]`` are the effective
    length-T vectors; the ``cons_*`` arrays hold the remaining antennas'
    contribution so that e.g. ``users[k, j]^H c + cons_users[k, j] == h_k^H f_j``.
    """

    n: int
    users: np.ndarray          # (K, K, T)
    target: np.ndarray         # (K, T)
    scatterers: np.ndarray     # (K, M, T)
    cons_users: np.ndarray     # (K, K)
    cons_target: np.ndarray    # (K,)
    cons_scatterers: np.ndarray  # (K, M)

    def products(self, c: np.ndarray):
        g = np.conj(self.users) @ c + self.cons_users
        t = np.conj(self.target) @ c + self.cons_target
        z = np.conj(self.scatterers) @ c + self.cons_scatterers
        return g, t, z


def per_antenna_context(n: int, channels: EmChannels, em: np.ndarray, f: np.ndarray) -> PerAntennaContext:
    users, target, scat = channels.user_blocks(), channels.target_blocks(), channels.scatterer_blocks()
    fn = f[n]                                                   # f_FD,j,(n) for all j
    users_n = users[:, n, :]                                    # (K, T)
    h_users = np.einsum("nt,knt->kn", em.conj(), users)
    h_target = np.einsum("nt,nt->n", em.conj(), target)
    h_scat = np.einsum("nt,mnt->mn", em.conj(), scat)
    others = np.ones(len(f))
    others[n] = 0.0                                             # sums run over antennas m != n
    g, t, z = _products(h_users * others, h_target * others, h_scat * others, f)
    return PerAntennaContext(
        n=n,
        users=np.conj(fn)[None, :, None] * users_n[:, None, :],
        target=np.conj(fn)[:, None] * target[n][None, :],
        scatterers=np.conj(fn)[:, None, None] * scat[:, n, :][None, :, :],
        cons_users=g,
        cons_target=t,
        cons_scatterers=z,
    )


def update_aux_antenna(ctx: PerAntennaContext, c: np.ndarray, beta: float, noise_power: float) -> AuxVars:
    return _aux_from_products(*ctx.products(c), beta, noise_power)


def antenna_surrogate(ctx: PerAntennaContext, c, aux: AuxVars, beta, noise_power) -> float:
    return _fqua_from_products(*ctx.products(c), aux, beta, noise_power)


def em_gradient(ctx: PerAntennaContext, c: np.ndarray, aux: AuxVars, beta: float) -> np.ndarray:
    """Euclidean gradient of the per-antenna surrogate w.r.t. ``c`` (``df = Re(g^H dc)``)."""
    g, t, z = ctx.products(c)
    w = 1.0 - beta
    gp = np.abs(aux.p) ** 2
    linear_u = aux.p * np.sqrt(w * (1 + aux.sinr))
    grad = 2 * np.einsum("k,kt->t", linear_u, ctx.users[np.arange(len(g)), np.arange(len(g))])
    grad -= 2 * np.einsum("k,kj,kjt->t", gp, g, ctx.users)
    grad += 2 * math.sqrt(beta) * (aux.q @ ctx.target)
    grad -= 2 * float(np.sum(np.abs(aux.q) ** 2)) * np.einsum("jm,jmt->t", z, ctx.scatterers)
    return grad


@dataclass
class EmStep:
    c: np.ndarray
    step: float
    before: float
    after: float
    stalled: bool


def em_step(ctx: PerAntennaContext, c: np.ndarray, aux: AuxVars, beta: float, noise_power: float,
            gradient: np.ndarray | None = None) -> EmStep:
    """One projected Armijo ascent step on the unit sphere for antenna ``ctx.n``.

    The search direction is the normalized Riemannian gradient, so the trial
    steps ``1, 1/2, ...`` are arc-length-like and independent of the
    objective's scale.
    """
    if gradient is None:
        gradient = em_gradient(ctx, c, aux, beta)
    value = antenna_surrogate(ctx, c, aux, beta, noise_power)
    rgrad = sphere_tangent_project(c, gradient)
    norm = float(np.linalg.norm(rgrad))
    if norm == 0.0 or not np.isfinite(norm):
        return EmStep(c, 0.0, value, value, True)
    direction = rgrad / norm
    ls = armijo_search(lambda x: antenna_surrogate(ctx, x, aux, beta, noise_power), c, direction,
                       real_inner(rgrad, direction), value=value, retract=sphere_retract)
    return EmStep(ls.point, ls.step, value, ls.value, ls.stalled)


def extrapolate_em(channels: EmChannels, previous: np.ndarray, current: np.ndarray, f: np.ndarray,
                   beta: float, noise_power: float, weight: float = 2.0, min_weight: float = 0.1) -> np.ndarray:
    """Safeguarded momentum on the EM coefficients after a full antenna sweep.

    Tries ``current + w * (current - previous)`` with rows renormalized, for
    ``w = weight, weight/2, ...`` down to ``min_weight``, and keeps the first
    point that raises the true objective at precoder ``f``. Otherwise
    ``current`` is returned unchanged, so the objective never decreases.
    """
    base = objective_nats(*_compact(channels, current), f, beta, noise_power)
    w = weight
    while w >= min_weight:
        trial = current + w * (current - previous)
        norms = np.linalg.norm(trial, axis=1, keepdims=True)
        if np.all(norms > 0):
            trial = trial / norms
            if objective_nats(*_compact(channels, trial), f, beta, noise_power) > base:
                return trial
        w /= 2
    return current


JOINT_WEIGHTS = (8.0, 4.0, 2.0, 1.0, 0.5, 0.25)


def extrapolate_joint(channels: EmChannels, previous: TriHybridBeamformer, current: TriHybridBeamformer,
                      beta: float, noise_power: float, power: float,
                      weights=JOINT_WEIGHTS) -> tuple[TriHybridBeamformer, float]:
    """Best safeguarded extrapolation of a fully digital iterate.

    For each weight ``w`` the precoder ``f + w (f - f_prev)`` is rescaled onto
    the power budget and the EM rows ``c + w (c - c_prev)`` onto the unit
    sphere. The best trial is kept only if it beats ``current``; the
    returned value is the true objective of the returned beamformer.
    """
    f, em = current.digital, current.em
    best, best_value = current, objective_nats(*_compact(channels, em), f, beta, noise_power)
    for w in weights:
        tf = f + w * (f - previous.digital)
        te = em + w * (em - previous.em)
        f_norm = np.linalg.norm(tf)
        rows = np.linalg.norm(te, axis=1, keepdims=True)
        if f_norm == 0.0 or np.any(rows == 0.0):
            continue
        tf = tf * (math.sqrt(power) / f_norm)
        te = te / rows
        value = objective_nats(*_compact(channels, te), tf, beta, noise_power)
        if value > best_value:
            best, best_value = TriHybridBeamformer(tf, None, te), value
    return best, best_value


# -- outer loop ----------------------------------------------------------------

def matched_filter(h_users: np.ndarray, power: float) -> np.ndarray:
    f = h_users.T.copy()
    norm = np.linalg.norm(f)
    if norm == 0.0:
        return f
    return f * math.sqrt(power) / norm


def _compact(channels: EmChannels, em):
    return (compact_channel(em, channels.users), compact_channel(em, channels.target),
            compact_channel(em, channels.scatterers))


def tri_hybrid_solve(scenario: Scenario, config: SolverConfig | None = None,
                     geometry: UpaGeometry | None = None, basis: HarmonicBasis | None = None,
                     seed: int = 0, callback: Callable | None = None) -> SolveReport:
    """Run the alternating optimization on one scenario.

    ``callback(iteration, stage, beamformer, multiplier)`` is invoked after
    the digital, hybrid and EM stages of every iteration; stage is one of
    ``"digital"``, ``"hybrid"``, ``"em"`` or ``"extrapolate"``. The returned
    beamformer is the best iterate seen (the last one in the fully digital
    modes, whose trace is monotone).
    """
    config = config or SolverConfig()
    geometry = geometry or UpaGeometry.half_wavelength(4, 4)
    basis = basis or HarmonicBasis(4)
    beta = scenario.beta if config.beta is None else config.beta
    power = scenario.power if config.power is None else config.power
    noise = scenario.noise_power
    start = time.perf_counter()

    channels = assemble_channels(scenario, geometry, basis)
    em = isotropic_em(geometry.size, basis.size)
    h_users, h_target, h_scat = _compact(channels, em)

    def factorize(f_fd, analog=None):
        fac = hybrid_factorize(f_fd, config.rf_chains, power, analog,
                               max_outer=config.factorize_iterations, seed=seed)
        return TriHybridBeamformer(fac.baseband, fac.analog, em)

    f_init = matched_filter(h_users, power)
    bf = factorize(f_init) if config.hybrid else TriHybridBeamformer(f_init, None, em)
    current = objective_nats(h_users, h_target, h_scat, bf.digital, beta, noise)
    initial = current
    best, best_value = bf.copy(), current
    previous = None
    trace, multipliers = [], []
    stalls = 0
    converged = False

    for it in range(1, config.max_iterations + 1):
        analog = bf.analog
        f = bf.digital
        for _ in range(config.digital_steps):
            aux = update_aux(h_users, h_target, h_scat, f, beta, noise)
            upd = digital_update(h_users, h_target, h_scat, aux, beta, power, config.bisection_tol)
            f = upd.precoder
        multipliers.append(upd.multiplier)
        bf = TriHybridBeamformer(f, None, em)
        if callback:
            callback(it, "digital", bf, upd.multiplier)
        if config.hybrid:
            bf = factorize(f, analog)
            if callback:
                callback(it, "hybrid", bf, upd.multiplier)

        if config.optimize_em:
            f = bf.digital
            swept = em.copy()
            for n in range(geometry.size):
                for _ in range(config.em_steps):
                    ctx = per_antenna_context(n, channels, swept, f)
                    aux_n = update_aux_antenna(ctx, swept[n], beta, noise)
                    step = em_step(ctx, swept[n], aux_n, beta, noise)
                    if step.stalled:
                        stalls += 1
                        break
                    swept[n] = step.c
            if config.extrapolate > 0:
                swept = extrapolate_em(channels, em, swept, f, beta, noise, config.extrapolate)
            em = swept
            bf = TriHybridBeamformer(bf.baseband, bf.analog, em)
            if callback:
                callback(it, "em", bf, upd.multiplier)

        value = objective_nats(*_compact(channels, em), bf.digital, beta, noise)
        if config.joint_extrapolate and not config.hybrid and previous is not None:
            bf, value = extrapolate_joint(channels, previous, bf, beta, noise, power)
            em = bf.em
            if callback:
                callback(it, "extrapolate", bf, upd.multiplier)
        previous = bf.copy()
        h_users, h_target, h_scat = _compact(channels, em)

        trace.append(value)
        if value >= best_value:
            best, best_value = bf.copy(), value
        if abs(value - current) <= config.tol:
            current = value
            converged = True
            break
        current = value

    hu, ht, hs = _compact(channels, best.em)
    report = compute_metrics(hu, ht, hs, best.digital, noise, beta)
    return SolveReport(trace, initial, report, best, len(trace), converged,
                       time.perf_counter() - start, multipliers, stalls)
