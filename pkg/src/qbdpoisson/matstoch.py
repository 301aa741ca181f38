"""Dense kernel for nonnegative and stochastic matrices.

Everything downstream (QBD solvers, Poisson solutions, deviation blocks,
drift certificates) reduces to a handful of primitives on small dense
matrices: stationary vectors, group inverses, Perron eigenpairs, spectral
radii and Neumann inverses (I - X)^-1.  They are collected here, built on
plain numpy linear solves.  All inputs are taken as immutable; every
function is pure.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DomainError,
    NoConvergence,
    NonStochastic,
    NotContractive,
    SingularStructure,
)

DEFAULT_TOL = 1e-12

ROW_SUM_TOL = 1e-10


def _as_square(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def is_irreducible(A) -> bool:
    """Check irreducibility of the nonzero pattern of a square matrix.

    Runs a forward and a backward reachability sweep from state 0; the
    pattern is irreducible iff both sweeps reach every state.  Exact
    zeros only -- entries are not thresholded.
    """
    A = _as_square(A)
    n = A.shape[0]
    if n == 1:
        return True
    pattern = A != 0.0
    for adj in (pattern, pattern.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = np.any(adj[frontier], axis=0) & ~seen
            frontier = np.flatnonzero(nxt).tolist()
            seen |= nxt
        if not seen.all():
            return False
    return True


def _check_stochastic(P, name="P"):
    row_defect = np.abs(P.sum(axis=1) - 1.0)
    if P.min() < -ROW_SUM_TOL:
        raise NonStochastic(f"{name} has negative entries (min {P.min():.3e})")
    if row_defect.max() > ROW_SUM_TOL:
        i = int(np.argmax(row_defect))
        raise NonStochastic(
            f"{name} row {i} sums to {P[i].sum():.12f} (defect {row_defect[i]:.3e})"
        )


def stationary_vector(P, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic matrix.

    Solves pi (I - P + J/n) = 1'/n, a single nonsingular linear system
    whose unique solution is the stationary vector.

    Parameters
    ----------
    P : (n, n) array_like
        Row-stochastic, irreducible transition matrix.
    tol : float
        Acceptable residual of the balance equations pi P = pi.

    Returns
    -------
    pi : (n,) ndarray
        Nonnegative, sums to 1, with ``max |pi P - pi|`` within tol or,
        for inputs that are themselves off stochastic by more than
        that, within a small multiple of their row-sum defect (no pi
        can balance better than the data allows).

    Raises
    ------
    NonStochastic
        If a row sum deviates from 1 by more than 1e-10.
    SingularStructure
        If P is reducible (no unique solution) or the solve degrades.
    """
    P = _as_square(P, "P")
    _check_stochastic(P)
    if not is_irreducible(P):
        raise SingularStructure("P is reducible; stationary vector not unique")
    n = P.shape[0]
    M = np.eye(n) - P + np.full((n, n), 1.0 / n)
    try:
        pi = np.linalg.solve(M.T, np.full(n, 1.0 / n))
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"stationary solve failed: {exc}") from exc
    pi = np.where((pi < 0.0) & (pi > -100 * tol), 0.0, pi)
    if pi.min() < 0:
        raise SingularStructure("stationary solve produced negative mass")
    pi = pi / pi.sum()
    defect = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    residual = np.max(np.abs(pi @ P - pi))
    if residual > max(tol, 4.0 * defect):
        raise SingularStructure(f"balance residual {residual:.3e} exceeds {tol:.1e}")
    return pi


def group_inverse(P) -> np.ndarray:
    """Group inverse (I - P)^# of an irreducible stochastic matrix.

    Solves the augmented nonsingular system (I - P + 1 pi) X = I - 1 pi
    and re-projects with X <- X - 1 (pi X), so that in addition to the
    three group-inverse identities the output satisfies pi X = 0 and
    X 1 = 0.
    """
    P = _as_square(P, "P")
    pi = stationary_vector(P)
    n = P.shape[0]
    one_pi = np.outer(np.ones(n), pi)
    try:
        X = np.linalg.solve(np.eye(n) - P + one_pi, np.eye(n) - one_pi)
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"group inverse solve failed: {exc}") from exc
    X -= np.outer(np.ones(n), pi @ X)
    return X


def generator_group_inverse(Q, tol: float = 1e-8) -> np.ndarray:
    """Group inverse of a conservative generator matrix (rows sum to 0).

    Same augmented-system construction as :func:`group_inverse`, with the
    generator's own invariant row vector psi (psi Q = 0, psi 1 = 1) in
    place of the stationary distribution of a stochastic matrix.
    """
    Q = _as_square(Q, "Q")
    n = Q.shape[0]
    scale = max(1.0, np.abs(Q).max())
    if np.abs(Q.sum(axis=1)).max() > tol * scale:
        raise DomainError("generator rows must sum to 0")
    try:
        psi = np.linalg.solve((Q + np.full((n, n), 1.0 / n)).T, np.full(n, 1.0 / n))
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"invariant vector solve failed: {exc}") from exc
    if np.max(np.abs(psi @ Q)) > tol * scale:
        raise SingularStructure("generator has no unique invariant vector")
    one_psi = np.outer(np.ones(n), psi)
    try:
        X = np.linalg.solve(Q + one_psi, np.eye(n) - one_psi)
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"group inverse solve failed: {exc}") from exc
    X -= np.outer(np.ones(n), psi @ X)
    return X


def perron(A, tol: float = DEFAULT_TOL, max_iter: int = 100_000):
    """Perron-Frobenius eigenpair of an irreducible nonnegative matrix.

    Power iteration on the diagonally shifted matrix A + sI (s = largest
    row sum), which is primitive whenever A is irreducible, so the
    iteration converges even for periodic patterns.  The eigenvalue is
    read off with a Rayleigh quotient; iteration stops once the residual
    ``max |A u - sigma u|`` drops below ``tol * max(1, sigma)``.

    Parameters
    ----------
    A : (n, n) array_like
        Nonnegative irreducible matrix.
    tol : float
        Residual tolerance for the eigenpair.
    max_iter : int
        Iteration budget.

    Returns
    -------
    sigma : float
        Spectral radius of A.
    u : (n,) ndarray
        Strictly positive right eigenvector, scaled so max(u) = 1.

    Raises
    ------
    DomainError
        If A has negative entries.
    SingularStructure
        If the nonzero pattern of A is reducible.
    NoConvergence
        If the budget is exhausted.
    """
    A = _as_square(A, "A")
    if A.min() < 0:
        raise DomainError(f"A must be nonnegative (min entry {A.min():.3e})")
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0]), np.ones(1)
    if not is_irreducible(A):
        raise SingularStructure("A is reducible; Perron vector not strictly positive")
    shift = float(A.sum(axis=1).max())
    B = A + shift * np.eye(n)
    u = np.full(n, 1.0)
    for _ in range(max_iter):
        w = B @ u
        w /= w.max()
        rq = float((w @ (B @ w)) / (w @ w))
        residual = np.max(np.abs(B @ w - rq * w))
        u = w
        if residual <= tol * max(1.0, rq):
            sigma = rq - shift
            return sigma, u / u.max()
    raise NoConvergence(f"perron: no convergence in {max_iter} iterations")


def spectral_radius(A) -> float:
    """Spectral radius max |eig(A)| of a square matrix."""
    A = _as_square(A, "A")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def neumann_inverse(X) -> np.ndarray:
    """(I - X)^-1 for a matrix with spectral radius < 1.

    Equals the Neumann series sum_n X^n; computed by a direct solve.

    Raises
    ------
    NotContractive
        If sp(X) >= 1 - 1e-12.
    """
    X = _as_square(X, "X")
    sp = spectral_radius(X)
    if sp >= 1.0 - 1e-12:
        raise NotContractive(f"spectral radius {sp:.12f} is not < 1")
    n = X.shape[0]
    return np.linalg.solve(np.eye(n) - X, np.eye(n))
