"""The matrices G, U, R of a QBD and its matrix-geometric stationary law.

G[i, j] is the probability that, starting from (n+1, i), the chain first
enters level n in phase j.  U is the taboo return matrix to a level
avoiding the level below, and R the expected number of visits one level
up before returning.  They satisfy

    G = A_minus1 + A0 G + A1 G^2   (minimal nonnegative solution)
    U = A0 + A1 G
    R = A1 (I - U)^-1

and the stationary distribution is pi_n = pi_0 R^n with pi_0 invariant
for the censored boundary matrix P_* = B + A1 G.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matstoch, qbd_model
from .errors import (
    NoConvergence,
    NotContractive,
    NotPositiveRecurrent,
    SingularStructure,
)

ALGORITHMS = ("log_reduction", "functional")


@dataclass(frozen=True)
class RguTriple:
    """G, U, R together with convergence metadata for the G solve."""

    G: np.ndarray
    U: np.ndarray
    R: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class StationaryDist:
    """Boundary vector pi_0 and the rate matrix R; pi_n = pi_0 R^n."""

    pi0: np.ndarray
    R: np.ndarray


def g_residual(model, G) -> float:
    """Max-norm residual of the fixed point G = A_minus1 + A0 G + A1 G^2."""
    return float(np.max(np.abs(model.A_minus1 + model.A0 @ G + model.A1 @ G @ G - G)))


def _solve_g_log_reduction(model, tol, max_iter=200):
    # Latouche-Ramaswami logarithmic reduction; error is squared at
    # every step so the budget is generous.
    m = model.m
    I = np.eye(m)
    try:
        H = np.linalg.solve(I - model.A0, model.A1)
        L = np.linalg.solve(I - model.A0, model.A_minus1)
    except np.linalg.LinAlgError as exc:
        raise SingularStructure(f"I - A0 is singular: {exc}") from exc
    G = L.copy()
    T = H.copy()
    for it in range(1, max_iter + 1):
        res = g_residual(model, G)
        if res <= tol:
            return G, it - 1, res
        K = I - (H @ L + L @ H)
        try:
            H, L = np.linalg.solve(K, H @ H), np.linalg.solve(K, L @ L)
        except np.linalg.LinAlgError as exc:
            raise SingularStructure(f"log reduction step singular: {exc}") from exc
        G = G + T @ L
        T = T @ H
    raise NoConvergence(f"log reduction: residual {g_residual(model, G):.3e} "
                        f"after {max_iter} iterations")


def _solve_g_functional(model, tol, max_iter=500_000):
    # Plain fixed-point iteration from G = 0; monotone convergence to the
    # minimal solution, linear rate.  Kept as an independent oracle.
    G = np.zeros((model.m, model.m))
    for it in range(1, max_iter + 1):
        G_next = model.A_minus1 + model.A0 @ G + model.A1 @ G @ G
        if np.max(np.abs(G_next - G)) <= 0.1 * tol:
            res = g_residual(model, G_next)
            if res <= tol:
                return G_next, it, res
        G = G_next
    raise NoConvergence(f"functional iteration: residual {g_residual(model, G):.3e} "
                        f"after {max_iter} iterations")


def solve_g(model, tol: float = 1e-12, algorithm: str = "log_reduction") -> np.ndarray:
    """Minimal nonnegative solution of G = A_minus1 + A0 G + A1 G^2.

    Parameters
    ----------
    model : QbdModel
    tol : float
        Bound on the fixed-point residual in max norm.
    algorithm : {'log_reduction', 'functional'}
        Logarithmic reduction (default, quadratic convergence) or the
        linear fixed-point iteration retained as an independent check.

    Returns
    -------
    G : (m, m) ndarray
        Stochastic when the QBD is recurrent, substochastic otherwise.
    """
    G, _, _ = _solve_g_meta(model, tol, algorithm)
    return G


def _solve_g_meta(model, tol, algorithm):
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if algorithm == "log_reduction":
        return _solve_g_log_reduction(model, tol)
    return _solve_g_functional(model, tol)


def compute_u(model, G) -> np.ndarray:
    """U = A0 + A1 G; raises NotContractive unless sp(U) < 1."""
    U = model.A0 + model.A1 @ G
    sp = matstoch.spectral_radius(U)
    if sp >= 1.0:
        raise NotContractive(f"sp(U) = {sp:.12f} is not < 1")
    return U


def compute_r(model, U) -> np.ndarray:
    """R = A1 (I - U)^-1, expected visits one level up before return."""
    return model.A1 @ matstoch.neumann_inverse(U)


def solve_triple(model, tol: float = 1e-12,
                 algorithm: str = "log_reduction") -> RguTriple:
    """Compute G, U and R in one pass, keeping the G-solve metadata."""
    G, iterations, residual = _solve_g_meta(model, tol, algorithm)
    U = compute_u(model, G)
    R = compute_r(model, U)
    return RguTriple(G=G, U=U, R=R, iterations=iterations, residual=residual)


def stationary(model, rgu: RguTriple) -> StationaryDist:
    """Stationary distribution of a positive recurrent QBD.

    pi_0 solves pi_0 P_* = pi_0 with P_* = B + A1 G, rescaled so the
    total mass pi_0 (I - R)^-1 1 equals 1.

    Raises
    ------
    NotPositiveRecurrent
        If the mean drift is <= 0 (within 1e-12 of the null boundary).
    """
    report = qbd_model.stability(model)
    if report.drift <= 1e-12:
        raise NotPositiveRecurrent(
            f"mean drift {report.drift:.3e} is not positive; "
            "no stationary distribution"
        )
    P_star = model.B + model.A1 @ rgu.G
    kappa = matstoch.stationary_vector(P_star)
    total = kappa @ matstoch.neumann_inverse(rgu.R) @ np.ones(model.m)
    return StationaryDist(pi0=kappa / total, R=rgu.R)


def pi_level(dist: StationaryDist, n: int) -> np.ndarray:
    """pi_n = pi_0 R^n."""
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    v = dist.pi0.copy()
    for _ in range(n):
        v = v @ dist.R
    return v
