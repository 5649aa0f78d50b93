"""Sparse recovery by multiple orthogonal least squares (MOLS), with baselines,
theory checks on small problems and a Monte-Carlo sweep engine."""

__version__ = "0.1.0"

from .errors import (
    EnumerationTooLargeError,
    ExhaustedCandidatesError,
    FileFormatError,
    InvalidParametersError,
    InvalidSparsityError,
    MissingGroundTruthError,
    MissingOrderError,
    MolsError,
    RankDeficiencyError,
    UnknownAlgorithmError,
)
from .problem import (
    NOISELESS,
    AlgorithmParams,
    ProblemInstance,
    SensingMatrix,
    SparseSignal,
    add_noise,
    child_seed,
    generate_gaussian_matrix,
    generate_sparse_signal,
    snr_and_mar,
)
from .solvers import RecoveryResult, Termination, mols, ols, omp
from .baselines import cosamp, irls, oracle_ls
