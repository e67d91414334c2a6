"""Parallel coordinate descent for the Adaboost exponential loss."""

__version__ = "0.1.0"

from .dataset import (DatasetError, LabeledDataset, MarginMatrix, build_margin_matrix, coordinate_lipschitz,
                      load_dataset, parse_libsvm, write_libsvm)
from .eso import (ConvergenceConstants, EsoParams, compute_beta, iteration_bound_attainable,
                  iteration_bound_general, iteration_bound_weak, overlap_coefficients, overlap_pmf, speedup_factor)
from .objective import SolverState, apply_update, full_gradient, init_state, loss_F, partial_gradient, refresh
from .sampling import SamplingLaw, sample_independent, sample_nice
from .solvers import (SolverConfig, Trace, pcdm_step, run_accelerated, run_fully_parallel, run_greedy, run_pcdm,
                      solve)
from .synthgen import Instance, RegimeSpec, gen_attainable, gen_mixed, gen_weak_learnable, generate
from .validate import ValidationReport, validate_eso, validate_expected_decrease

__all__ = [
    "__version__",
    "DatasetError",
    "LabeledDataset",
    "MarginMatrix",
    "build_margin_matrix",
    "coordinate_lipschitz",
    "load_dataset",
    "parse_libsvm",
    "write_libsvm",
    "ConvergenceConstants",
    "EsoParams",
    "compute_beta",
    "iteration_bound_attainable",
    "iteration_bound_general",
    "iteration_bound_weak",
    "overlap_coefficients",
    "overlap_pmf",
    "speedup_factor",
    "SolverState",
    "apply_update",
    "full_gradient",
    "init_state",
    "loss_F",
    "partial_gradient",
    "refresh",
    "SamplingLaw",
    "sample_independent",
    "sample_nice",
    "SolverConfig",
    "Trace",
    "pcdm_step",
    "run_accelerated",
    "run_fully_parallel",
    "run_greedy",
    "run_pcdm",
    "solve",
    "Instance",
    "RegimeSpec",
    "gen_attainable",
    "gen_mixed",
    "gen_weak_learnable",
    "generate",
    "ValidationReport",
    "validate_eso",
    "validate_expected_decrease",
]
