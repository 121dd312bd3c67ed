"""Tri-hybrid (digital, analog, electromagnetic) beamforming for ISAC."""
from .channel import Path, Scenario, ScenarioConfig, assemble_channels, compact_channel, sample_scenario
from .geometry import UpaGeometry, upa_steering, wavelength
from .harmonics import HarmonicBasis, harmonic_index, sph_harmonic
from .harness import RunConfig, export_pattern, export_results, run_trial, sweep
from .manifolds import hybrid_factorize
from .metrics import MetricsReport, TriHybridBeamformer, compute_metrics
from .solver import MODES, SolveReport, SolverConfig, tri_hybrid_solve

__all__ = [
    "MODES", "HarmonicBasis", "MetricsReport", "Path", "RunConfig", "Scenario", "ScenarioConfig",
    "SolveReport", "SolverConfig", "TriHybridBeamformer", "UpaGeometry", "assemble_channels",
    "compact_channel", "compute_metrics", "export_pattern", "export_results", "harmonic_index",
    "hybrid_factorize", "run_trial", "sample_scenario", "sph_harmonic", "sweep", "tri_hybrid_solve",
    "upa_steering", "wavelength",
]
