"""Monte-Carlo driver: paired trials over power, beta and mode grids, CSV export."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import Scenario, ScenarioConfig, sample_scenario
from .geometry import UpaGeometry, wavelength
from .harmonics import HarmonicBasis
from .metrics import TriHybridBeamformer, array_pattern, element_pattern
from .solver import MODES, SolveReport, SolverConfig, tri_hybrid_solve

RESULT_HEADER = ("trial", "seed", "mode", "beta", "power_dbm", "objective",
                 "sum_rate_bps_hz", "scnr_db", "iterations", "wall_ms")
GAIN_FLOOR = 1e-300


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass
class RunConfig:
    """Experiment parameters; defaults follow the reference system setup."""

    nx: int = 4
    ny: int = 4
    receive_antennas: int = 16        # N_R, carried for completeness (single-antenna users)
    rf_chains: int = 2
    carrier_hz: float = 3e9
    num_users: int = 2
    num_scatterers: int = 2
    degree: int = 4
    noise_dbm: float = -80.0
    trials: int = 100
    seed: int = 2024
    power_dbm: tuple[float, ...] = (-20.0,)
    beta: tuple[float, ...] = (0.5,)
    modes: tuple[str, ...] = MODES
    out: str = "results"
    workers: int = 1
    record_timing: bool = True
    max_iterations: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        self.power_dbm = tuple(float(p) for p in self.power_dbm)
        self.beta = tuple(float(b) for b in self.beta)
        self.modes = tuple(self.modes)
        if not self.power_dbm or not self.beta or not self.modes:
            raise ValueError("power, beta and mode grids must be nonempty")
        if any(not 0.0 <= b <= 1.0 for b in self.beta):
            raise ValueError("beta values must lie in [0, 1]")
        unknown = [m for m in self.modes if m not in MODES]
        if unknown:
            raise ValueError(f"unknown modes {unknown}; choose from {MODES}")
        if self.trials < 0 or self.workers < 1 or self.seed < 0:
            raise ValueError("trials must be >= 0, workers >= 1, seed >= 0")

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def geometry(self) -> UpaGeometry:
        return UpaGeometry.half_wavelength(self.nx, self.ny, self.carrier_hz)

    def basis(self) -> HarmonicBasis:
        return HarmonicBasis(self.degree)

    def solver_config(self, mode: str) -> SolverConfig:
        return SolverConfig(mode=mode, rf_chains=self.rf_chains,
                            max_iterations=self.max_iterations, tol=self.tol)

    def scenario_config(self) -> ScenarioConfig:
        return ScenarioConfig(num_users=self.num_users, num_scatterers=self.num_scatterers,
                              wavelength=wavelength(self.carrier_hz),
                              power=dbm_to_watts(self.power_dbm[0]), noise_power=self.noise_power,
                              beta=self.beta[0])

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def load_config(path: str | Path) -> RunConfig:
    """Read a JSON object whose keys are :class:`RunConfig` field names."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    return RunConfig.from_dict(data)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    mode: str
    beta: float
    power_dbm: float
    objective: float
    sum_rate: float        # bits/s/Hz
    scnr_db: float
    iterations: int
    wall_ms: float
    converged: bool = True
    error: str = ""

    def row(self) -> list[str]:
        return [str(self.trial), str(self.seed), self.mode, _fmt(self.beta), _fmt(self.power_dbm),
                _fmt(self.objective), _fmt(self.sum_rate), _fmt(self.scnr_db),
                str(self.iterations), _fmt(self.wall_ms)]


def _fmt(x: float) -> str:
    return "%.17g" % x


def trial_scenario(config: RunConfig, index: int) -> Scenario:
    """The scenario shared by every cell and mode of trial ``index``."""
    return sample_scenario(config.scenario_config(), np.random.SeedSequence([config.seed, index]))


def _scnr_db(eta: float) -> float:
    return 10.0 * math.log10(eta) if eta > 0 else -math.inf


def _result(config, index, mode, beta, power_dbm, report: SolveReport) -> TrialResult:
    m = report.metrics
    wall = report.wall_time * 1e3 if config.record_timing else 0.0
    return TrialResult(index, config.seed, mode, beta, power_dbm, m.objective, m.sum_rate,
                       _scnr_db(m.scnr), report.iterations, wall, report.converged)


def _failed(config, index, mode, beta, power_dbm, exc) -> TrialResult:
    nan = math.nan
    return TrialResult(index, config.seed, mode, beta, power_dbm, nan, nan, nan, 0, 0.0, False,
                       f"{type(exc).__name__}: {exc}")


def run_trial(config: RunConfig, index: int) -> list[TrialResult]:
    """Solve every (power, beta, mode) cell on trial ``index``'s scenario.

    A failing cell is recorded with NaN metrics and its error message.
    """
    base = trial_scenario(config, index)
    geom, basis = config.geometry(), config.basis()
    results = []
    for power_dbm in config.power_dbm:
        for beta in config.beta:
            scenario = dataclasses.replace(base, power=dbm_to_watts(power_dbm), beta=beta)
            for mode in config.modes:
                try:
                    report = tri_hybrid_solve(scenario, config.solver_config(mode), geom, basis, seed=index)
                    results.append(_result(config, index, mode, beta, power_dbm, report))
                except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    results.append(_failed(config, index, mode, beta, power_dbm, exc))
    return results


def _sort_key(config: RunConfig):
    mode_rank = {m: i for i, m in enumerate(config.modes)}
    power_rank = {p: i for i, p in enumerate(config.power_dbm)}
    beta_rank = {b: i for i, b in enumerate(config.beta)}
    return lambda r: (r.trial, mode_rank[r.mode], power_rank[r.power_dbm], beta_rank[r.beta])


def sweep(config: RunConfig, progress: Callable[[int, int], None] | None = None) -> list[TrialResult]:
    """Full factorial over trials x power x beta x modes, sorted by (trial, mode, cell)."""
    results: list[TrialResult] = []
    indices = range(config.trials)
    if config.workers == 1:
        for done, index in enumerate(indices, 1):
            results.extend(run_trial(config, index))
            if progress:
                progress(done, config.trials)
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_trial, config, index) for index in indices]
            for done, fut in enumerate(futures, 1):
                results.extend(fut.result())
                if progress:
                    progress(done, config.trials)
    return sorted(results, key=_sort_key(config))


@dataclass(frozen=True)
class CellSummary:
    mode: str
    power_dbm: float
    beta: float
    count: int
    failures: int
    objective_mean: float
    objective_median: float
    sum_rate_mean: float
    sum_rate_median: float
    scnr_db_mean: float
    scnr_db_median: float


def summarize(results: Iterable[TrialResult]) -> list[CellSummary]:
    """Mean and median per (mode, power, beta); independent of result order."""
    cells: dict[tuple, list[TrialResult]] = {}
    for r in results:
        cells.setdefault((r.mode, r.power_dbm, r.beta), []).append(r)
    out = []
    for (mode, power, beta), rows in sorted(cells.items()):
        ok = sorted((r for r in rows if not r.error), key=lambda r: r.trial)

        def stats(attr):
            vals = [getattr(r, attr) for r in ok]
            if not vals:
                return math.nan, math.nan
            return math.fsum(vals) / len(vals), statistics.median(vals)

        out.append(CellSummary(mode, power, beta, len(ok), len(rows) - len(ok),
                               *stats("objective"), *stats("sum_rate"), *stats("scnr_db")))
    return out


def tradeoff_curve(results: Iterable[TrialResult], mode: str, power_dbm: float) -> list[tuple[float, float, float]]:
    """(beta, median sum rate, median SCNR dB) points at one power level."""
    return [(s.beta, s.sum_rate_median, s.scnr_db_median) for s in summarize(results)
            if s.mode == mode and s.power_dbm == power_dbm]


def _open_for_write(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def export_results(results: Sequence[TrialResult], path: str | Path) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        writer.writerows(r.row() for r in results)
    return path


def read_results(path: str | Path) -> list[dict]:
    """Parse an exported results CSV back into typed dictionaries."""
    ints = {"trial", "seed", "iterations"}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v if k == "mode" else int(v) if k in ints else float(v)) for k, v in row.items()}
            for row in rows]


def pattern_grid(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """``n_theta`` points over [0, pi] and ``n_phi`` points over [0, 2pi)."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("pattern grid needs at least one sample per axis")
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    return theta, phi


def export_pattern(source, path: str | Path, n_theta: int = 91, n_phi: int = 180,
                   basis: HarmonicBasis | None = None, geometry: UpaGeometry | None = None) -> Path:
    """Write an element pattern (``source`` is one coefficient vector) or an
    array pattern (``source`` is a :class:`TriHybridBeamformer`) on a grid."""
    path = Path(path)
    theta, phi = pattern_grid(n_theta, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    if isinstance(source, TriHybridBeamformer):
        geometry = geometry or UpaGeometry.half_wavelength(4, 4)
        basis = basis or HarmonicBasis(int(math.isqrt(source.em.shape[1])) - 1)
        gains = array_pattern(source, geometry, basis, theta, phi)
        header = ("theta_deg", "phi_deg", "gain_db", "stream")
    else:
        c = np.asarray(source)
        basis = basis or HarmonicBasis(int(math.isqrt(c.size)) - 1)
        gains = element_pattern(c, basis, tt, pp)[..., None]
        header = ("theta_deg", "phi_deg", "gain_db")
    gain_db = 10.0 * np.log10(np.maximum(gains, GAIN_FLOOR))
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, j in np.ndindex(tt.shape):
            for s in range(gain_db.shape[-1]):
                row = [_fmt(math.degrees(tt[i, j])), _fmt(math.degrees(pp[i, j])), _fmt(gain_db[i, j, s])]
                if len(header) == 4:
                    row.append(str(s))
                writer.writerow(row)
    return path


@dataclass
class SingleRun:
    scenario: Scenario
    reports: dict[str, SolveReport] = field(default_factory=dict)


def run_single(config: RunConfig, index: int = 0) -> SingleRun:
    """Solve each configured mode on one scenario at the first grid power and beta."""
    scenario = dataclasses.replace(trial_scenario(config, index), power=dbm_to_watts(config.power_dbm[0]),
                                   beta=config.beta[0])
    run = SingleRun(scenario)
    for mode in config.modes:
        run.reports[mode] = tri_hybrid_solve(scenario, config.solver_config(mode), config.geometry(),
                                             config.basis(), seed=index)
    return run
