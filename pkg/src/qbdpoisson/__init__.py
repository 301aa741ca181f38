"""Poisson's equation, deviation matrices and sensitivity analysis for QBDs.

The package is organized bottom-up:

  matstoch    dense stochastic/nonnegative matrix kernel
  qbd_model   QBD blocks, validation, stability, A(z)
  rgu         G, U, R matrices and the stationary distribution
  poisson     rewards, first-passage times, Poisson solutions
  deviation   blockwise deviation matrix and the M = I + RMG auxiliary
  ergodicity  drift certificates (z0, lambda0, u, b) and v-norms
  perturb     derivatives of the stationary reward under P + delta Q
  phm1        PH/M/1 uniformization, queue length L, sensitivity vector
  oracle      finite truncations and brute-force cross-checks
  cli         command line interface (entry point: qbd)
"""

from .errors import (
    DomainError,
    InvalidPerturbation,
    InvalidUniformization,
    NoConvergence,
    NonStochastic,
    NotCentered,
    NotContractive,
    NotPositiveRecurrent,
    QbdError,
    SingularStructure,
)
from .qbd_model import QbdModel, StabilityReport, a_of_z, stability, validate
from .rgu import RguTriple, StationaryDist, pi_level, solve_g, solve_triple, stationary
from .poisson import PoissonSolution, RewardSpec, center, omega, passage_times, solve_poisson
from .deviation import DeviationBlocks, apply_deviation, deviation_block, m_matrix
from .ergodicity import DriftCertificate, certificate, find_z0, sigma, v_norm_blocks, verify_drift
from .perturb import PerturbationSpec, admissible_delta, fd_check, omega_derivative_1
from .phm1 import PhRepresentation, SensitivityResult, build_qbd, queue_length, sensitivity, sweep_rho

__version__ = "0.1.0"

__all__ = [
    "QbdError", "NonStochastic", "SingularStructure", "NoConvergence",
    "NotContractive", "DomainError", "NotPositiveRecurrent", "NotCentered",
    "InvalidPerturbation", "InvalidUniformization",
    "QbdModel", "StabilityReport", "validate", "stability", "a_of_z",
    "RguTriple", "StationaryDist", "solve_g", "solve_triple", "stationary",
    "pi_level",
    "RewardSpec", "PoissonSolution", "omega", "center", "passage_times",
    "solve_poisson",
    "DeviationBlocks", "m_matrix", "deviation_block", "apply_deviation",
    "DriftCertificate", "find_z0", "certificate", "sigma", "verify_drift",
    "v_norm_blocks",
    "PerturbationSpec", "omega_derivative_1", "admissible_delta", "fd_check",
    "PhRepresentation", "SensitivityResult", "build_qbd", "queue_length",
    "sensitivity", "sweep_rho",
    "__version__",
]
