"""Brute-force finite-chain oracle used by the property tests.

A QBD truncated at level N is an ordinary finite Markov chain, so every
quantity of interest (stationary vector, Poisson solution, return times,
deviation matrix) has a direct linear-algebra computation against which
the structured formulas can be checked.  Truncation is reflecting: the
last diagonal block is A0 + A1, which keeps the chain stochastic and
irreducible, and the truncation error decays geometrically for stable
models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matstoch
from .errors import NoConvergence, SingularStructure


@dataclass(frozen=True)
class FiniteChain:
    """Truncated QBD: a finite stochastic matrix plus state labeling."""

    P: np.ndarray
    m: int
    N: int

    def index(self, level: int, phase: int) -> int:
        """Flat state index of (level, phase)."""
        return level * self.m + phase

    def level_map(self):
        """List of (level, phase) pairs, one per flat state index."""
        return [(s // self.m, s % self.m) for s in range(self.P.shape[0])]

    def block(self, X, n: int, k: int) -> np.ndarray:
        """The (n, k) level block of a matrix on the truncated space."""
        m = self.m
        return X[n * m:(n + 1) * m, k * m:(k + 1) * m]

    def level_slice(self, x, n: int) -> np.ndarray:
        """The level-n segment of a vector on the truncated space."""
        return x[n * self.m:(n + 1) * self.m]


def assemble_tridiagonal(B, A_minus1, A0, A1, N: int) -> np.ndarray:
    """Block-tridiagonal matrix on levels 0..N with reflecting last row.

    Row 0 holds (B, A1), interior rows (A_minus1, A0, A1), and the last
    row (A_minus1, A0 + A1).  No stochasticity is assumed, so the same
    assembly serves perturbation blocks dQ.
    """
    B = np.asarray(B, dtype=float)
    m = B.shape[0]
    P = np.zeros(((N + 1) * m, (N + 1) * m))
    P[:m, :m] = B
    P[:m, m:2 * m] = A1
    for n in range(1, N):
        P[n * m:(n + 1) * m, (n - 1) * m:n * m] = A_minus1
        P[n * m:(n + 1) * m, n * m:(n + 1) * m] = A0
        P[n * m:(n + 1) * m, (n + 1) * m:(n + 2) * m] = A1
    P[N * m:, (N - 1) * m:N * m] = A_minus1
    P[N * m:, N * m:] = A0 + A1
    return P


def truncate(model, N: int) -> FiniteChain:
    """Reflecting truncation of a QBD at level N >= 1."""
    if N < 1:
        raise ValueError(f"truncation level must be >= 1, got {N}")
    P = assemble_tridiagonal(model.B, model.A_minus1, model.A0, model.A1, N)
    return FiniteChain(P=P, m=model.m, N=N)


def oracle_poisson(chain: FiniteChain, g) -> np.ndarray:
    """h = (I - P)^# g, the group-inverse solution of Poisson's equation.

    Satisfies (I - P) h = g - (pi g) 1 with pi h = 0; centering of g is
    therefore not required.
    """
    X = matstoch.group_inverse(chain.P)
    return X @ np.asarray(g, dtype=float)


def oracle_return_quantities(chain: FiniteChain, g, j: int):
    """Expected pre-return rewards and return times for a single state.

    With T(j) the first return time to state j, solves the taboo systems

        (I - P_-j) tau = 1      tau_i = E[T(j) | X_0 = i]
        (I - P_-j) zeta = g     zeta_i = E[sum_{t < T(j)} g(X_t) | X_0 = i]

    where P_-j is P with column j zeroed.  h = zeta - omega tau solves
    Poisson's equation and vanishes at state j.

    Returns
    -------
    zeta, tau : ndarray
    """
    P = chain.P.copy()
    P[:, j] = 0.0
    n = P.shape[0]
    try:
        sol = np.linalg.solve(
            np.eye(n) - P,
            np.column_stack([np.asarray(g, dtype=float), np.ones(n)]),
        )
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"taboo system singular: {exc}") from exc
    return sol[:, 0], sol[:, 1]


def oracle_subset_decomposition(chain: FiniteChain, A, g) -> np.ndarray:
    """Poisson solution through first return times to a subset of states.

    Partitioning the states into A and its complement and writing
    N_B = (I - P_B)^-1, the A-part solves the Poisson equation of the
    censored chain P_A + P_AB N_B P_BA with reward y_A - omega tau_A,
    and the complement follows as

        h_B = y_B - omega tau_B + N_B P_BA h_A

    where y(A), tau(A) are pre-return accumulated rewards and return
    times for the set A.
    """
    g = np.asarray(g, dtype=float)
    n = chain.P.shape[0]
    A = np.asarray(sorted(A), dtype=int)
    if A.size == 0 or A.size == n:
        raise ValueError("A must be a nonempty proper subset of the states")
    Bc = np.setdiff1d(np.arange(n), A)
    P_A = chain.P[np.ix_(A, A)]
    P_AB = chain.P[np.ix_(A, Bc)]
    P_BA = chain.P[np.ix_(Bc, A)]
    P_B = chain.P[np.ix_(Bc, Bc)]
    N_B = matstoch.neumann_inverse(P_B)
    pi = matstoch.stationary_vector(chain.P)
    omega = float(pi @ g)

    y_B = N_B @ g[Bc]
    tau_B = N_B @ np.ones(Bc.size)
    y_A = g[A] + P_AB @ y_B
    tau_A = np.ones(A.size) + P_AB @ tau_B

    censored = P_A + P_AB @ N_B @ P_BA
    h_A = matstoch.group_inverse(censored) @ (y_A - omega * tau_A)
    h_B = y_B - omega * tau_B + N_B @ P_BA @ h_A

    h = np.empty(n)
    h[A] = h_A
    h[Bc] = h_B
    return h


def oracle_hitting_times(chain: FiniteChain, targets) -> np.ndarray:
    """Expected first passage times to a set of states (0 on the set)."""
    n = chain.P.shape[0]
    targets = np.asarray(sorted(targets), dtype=int)
    C = np.setdiff1d(np.arange(n), targets)
    try:
        tau_C = np.linalg.solve(np.eye(C.size) - chain.P[np.ix_(C, C)],
                                np.ones(C.size))
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"hitting-time system singular: {exc}") from exc
    tau = np.zeros(n)
    tau[C] = tau_C
    return tau


def oracle_deviation(chain: FiniteChain, T_max: int = 10 ** 12,
                     tol: float = 1e-10) -> np.ndarray:
    """Deviation matrix D = sum_t (P^t - 1 pi) by sum doubling.

    The partial sums obey D_{2T} = D_T + (P - 1 pi)^T D_T, so doubling
    the horizon costs two matrix products and the geometric decay of the
    remaining tail, (P - 1 pi)^T sum_s (P - 1 pi)^s, gets squared at
    every stage.  Stops once ||(P - 1 pi)^T|| (||D_T|| + 1) <= tol.

    Raises
    ------
    NoConvergence
        If horizon T_max does not reach the tolerance (periodic chains).
    """
    pi = matstoch.stationary_vector(chain.P)
    n = chain.P.shape[0]
    Q = chain.P - np.outer(np.ones(n), pi)
    D = np.eye(n) - np.outer(np.ones(n), pi)
    T = 1
    while T <= T_max:
        # tail after T terms is (P - 1 pi)^T (I - P + 1 pi)^{-1}
        q_nrm = np.max(np.sum(np.abs(Q), axis=1))
        d_nrm = np.max(np.sum(np.abs(D), axis=1))
        if q_nrm * (d_nrm + 1.0) <= tol:
            return D
        D = D + Q @ D
        Q = Q @ Q
        T *= 2
    raise NoConvergence(f"deviation series not converged by horizon {T_max}")
