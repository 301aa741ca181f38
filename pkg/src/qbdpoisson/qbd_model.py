"""QBD model container, validation, stability test and the function A(z).

A quasi-birth-and-death process lives on states (n, j) with level n >= 0
and phase j in {1..m}.  Its transition matrix is block tridiagonal,

    P = [[B,    A1            ],
         [A-1,  A0,  A1       ],
         [      A-1, A0, A1   ],
         [           ...      ]]

so the model is fully described by the four m x m blocks.  Inputs are
one-step probabilities (discrete time); continuous-time models must be
uniformized first, see phm1.build_qbd.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matstoch
from .errors import DomainError

ROW_SUM_TOL = 1e-10


def _block(X, m, name):
    X = np.asarray(X, dtype=float)
    if X.shape != (m, m):
        raise DomainError(f"block {name} must be {m}x{m}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError(f"block {name} has non-finite entries")
    return X


@dataclass(frozen=True)
class QbdModel:
    """The four blocks of a discrete-time QBD transition matrix.

    Parameters
    ----------
    m : int
        Number of phases.
    B, A_minus1, A0, A1 : (m, m) array_like
        Boundary block and the interior down/local/up blocks.
    assume_aperiodic : bool
        The chain on the infinite state space is assumed aperiodic;
        this is documented, not detected (the deviation-matrix series
        is Cesaro-only for periodic chains).
    """

    m: int
    B: np.ndarray
    A_minus1: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    assume_aperiodic: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"phase count must be >= 1, got {self.m}")
        for name in ("B", "A_minus1", "A0", "A1"):
            object.__setattr__(self, name, _block(getattr(self, name), self.m, name))

    @property
    def A(self) -> np.ndarray:
        """The phase process matrix A = A_minus1 + A0 + A1."""
        return self.A_minus1 + self.A0 + self.A1


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the mean-drift stability test.

    drift = mu (A_minus1 - A1) 1 with mu the invariant vector of A;
    the QBD is positive recurrent iff drift > 0.
    """

    mu: np.ndarray
    drift: float
    positive_recurrent: bool


def validate(model: QbdModel) -> list:
    """Check all model invariants, returning a list of violation strings.

    An empty list means the model is valid: entries within [0, 1],
    boundary rows (B + A1) and interior rows (A_minus1 + A0 + A1)
    stochastic within 1e-10, and A irreducible.
    """
    violations = []
    for name in ("B", "A_minus1", "A0", "A1"):
        X = getattr(model, name)
        bad = np.argwhere((X < 0.0) | (X > 1.0))
        for i, j in bad:
            violations.append(
                f"{name}[{i},{j}] = {X[i, j]:.6g} is out of [0, 1]"
            )
    for name, S in (("B + A1", model.B + model.A1),
                    ("A_minus1 + A0 + A1", model.A)):
        defect = S.sum(axis=1) - 1.0
        for i in np.flatnonzero(np.abs(defect) > ROW_SUM_TOL):
            violations.append(
                f"{name} row {i} sums to {S[i].sum():.12f} "
                f"(defect {defect[i]:.3e})"
            )
    if not violations and not matstoch.is_irreducible(model.A):
        violations.append("A = A_minus1 + A0 + A1 is reducible")
    return violations


def stability(model: QbdModel) -> StabilityReport:
    """Mean-drift test for positive recurrence.

    Computes the invariant vector mu of A and the scalar drift
    mu (A_minus1 - A1) 1.  Positive drift (net motion toward level 0)
    is equivalent to positive recurrence.
    """
    mu = matstoch.stationary_vector(model.A)
    drift = float(mu @ (model.A_minus1 - model.A1) @ np.ones(model.m))
    return StabilityReport(mu=mu, drift=drift, positive_recurrent=drift > 0.0)


def a_of_z(model: QbdModel, z: float) -> np.ndarray:
    """The matrix A(z) = (1/z) A_minus1 + A0 + z A1 for z > 0."""
    if not z > 0.0:
        raise DomainError(f"a_of_z requires z > 0, got {z}")
    return model.A_minus1 / z + model.A0 + z * model.A1
