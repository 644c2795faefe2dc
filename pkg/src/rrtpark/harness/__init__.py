"""Seeded, parallel Monte Carlo drivers and the command-line interface."""
from .experiments import ExperimentConfig, ExperimentResult, run_experiment

__all__ = ["ExperimentConfig", "ExperimentResult", "run_experiment"]
