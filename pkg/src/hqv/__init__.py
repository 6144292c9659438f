"""Simulation and quadratic-variation estimation for Hermite processes."""
from __future__ import annotations

from .chaos import Grid, NoiseRealization, SeparableKernel, StepKernel, multiple_integral, wick_expectation
from .harness import ExperimentConfig, load_config, run_experiment
from .hermite import HermiteParams, SamplePath, normalizing_constant, sample_chaos, sample_dmt, sample_gaussian_exact
from .hou import solve_langevin
from .increments import DyadicScheme, extract_increments
from .quadvar import asymptotic_variance, estimator, quadratic_variation

__version__ = "0.1.0"
