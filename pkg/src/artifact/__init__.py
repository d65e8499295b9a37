"""Weighted stochastic trajectory simulation of continuously measured,
feedback-controlled systems.

The package propagates ensembles of low-dimensional trajectories that carry
evolving weights, so that weighted averages reproduce the conditional
(measurement-record-dependent) statistics a high-dimensional distribution
solver would give. Two physical models are bundled (a single trapped particle
under continuous position measurement with feedback cooling, and a bosonic
field treated with doubled phase-space amplitudes), together with a dense
phase-space grid solver used as an independent cross-check, a Gaussian moment
filter used as an analytic reference, and a command line front end.
"""

from __future__ import annotations

from .core import (
    CoefficientModel,
    DivergenceError,
    FeedbackContext,
    NoiseIncrements,
    NoiseSpec,
    generate_increments,
    step_paths,
    step_trajectory,
)
from .ensemble import (
    CollapseError,
    EnsembleSettings,
    ExperimentRecord,
    TrajectoryEnsemble,
    breed,
    compute_context,
    effective_sample_size,
    run_experiment,
    step_ensemble,
    weighted_average,
    weighted_variance,
)
from .field import FieldModel, FieldParams
from .grid import GridSpec, GridTooSmallError, PhaseSpaceGrid, StepSizeError, run_grid_experiment
from .particle import ParticleModel, ParticleParams, gaussian_filter_reference
from .records import RecordFormatError, read_noise_record, write_noise_record

__all__ = [
    "CoefficientModel",
    "CollapseError",
    "DivergenceError",
    "EnsembleSettings",
    "ExperimentRecord",
    "FeedbackContext",
    "FieldModel",
    "FieldParams",
    "GridSpec",
    "GridTooSmallError",
    "NoiseIncrements",
    "NoiseSpec",
    "ParticleModel",
    "ParticleParams",
    "PhaseSpaceGrid",
    "RecordFormatError",
    "StepSizeError",
    "TrajectoryEnsemble",
    "breed",
    "compute_context",
    "effective_sample_size",
    "gaussian_filter_reference",
    "generate_increments",
    "read_noise_record",
    "run_experiment",
    "run_grid_experiment",
    "step_ensemble",
    "step_paths",
    "step_trajectory",
    "weighted_average",
    "weighted_variance",
    "write_noise_record",
]

__version__ = "0.1.0"
