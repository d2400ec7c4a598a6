"""Sparse quantum simulation of superposition attacks on a modified Yao protocol."""

from .cipher import CipherSpec
from .garbling import ABORT, FunctionSpec, GarbleInstance, evaluate, garble
from .harness import ExperimentConfig, ExperimentReport, exact_generation_probability, run_experiment
from .qsim import RegisterLayout, SparseState

__all__ = [
    "ABORT", "CipherSpec", "ExperimentConfig", "ExperimentReport", "FunctionSpec",
    "GarbleInstance", "RegisterLayout", "SparseState", "evaluate", "exact_generation_probability",
    "garble", "run_experiment",
]
__version__ = "0.1.0"
