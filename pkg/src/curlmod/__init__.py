"""Integrable time-modulated mechanical systems.

Systems of the form ``d/dt(x_i'/w) + s_i w dU/dx_i = 0`` with their first
integrals, Floquet analysis, trajectory diagnostics and a small CLI.
"""

from .analysis import classify_trapping, eisenhart_residual, hopf_adaptation_experiment, phase_portrait
from .config import ConfigError, ExperimentConfig, parse_config, preset_figure
from .floquet import Axis, MathieuFamily, monodromy, stability_sweep
from .invariants import drift_report, invariant_set, poisson_bracket
from .models import (
    Constant,
    CosineDirect,
    CosineSquared,
    CubicQuartic,
    Harmonic,
    MonkeySaddlePair,
    PhaseState,
    SimpleSaddlePair,
    SqrtCosine,
    build_system,
)
from .ode import IntegratorConfig, State, Trajectory, integrate, integrate_span, solve
from .runner import RunArtifacts, run

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "ConfigError",
    "Constant",
    "CosineDirect",
    "CosineSquared",
    "CubicQuartic",
    "ExperimentConfig",
    "Harmonic",
    "IntegratorConfig",
    "MathieuFamily",
    "MonkeySaddlePair",
    "PhaseState",
    "RunArtifacts",
    "SimpleSaddlePair",
    "SqrtCosine",
    "State",
    "Trajectory",
    "build_system",
    "classify_trapping",
    "drift_report",
    "eisenhart_residual",
    "hopf_adaptation_experiment",
    "integrate",
    "integrate_span",
    "invariant_set",
    "monodromy",
    "parse_config",
    "phase_portrait",
    "poisson_bracket",
    "preset_figure",
    "run",
    "solve",
    "stability_sweep",
]
