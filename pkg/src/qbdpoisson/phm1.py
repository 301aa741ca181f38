"""PH/M/1 queue: uniformization, queue length and sensitivity vector.

Inter-arrival times follow a phase-type law (sigma, S) with unit-rate
exit vector s = -S 1; service is exponential with rate mu.  The
continuous-time queue is uniformized at rate gamma >= mu + max(-S_ii)
into a discrete QBD sharing its stationary distribution:

    A_minus1 = (mu/gamma) I          A0 = I + (S - mu I) / gamma
    A1 = (1/gamma) s sigma           B = A0 + A_minus1

Stationary expected queue length: L = pi_0 R (I - R)^-2 1.

The sensitivity vector m, with m_(l,j) the accumulated relative
deviation sum_n (E[queue at n | start (l, j)] / L - 1), solves
(I - P) m = g / L - 1 (g_n = n 1) with pi m = 0 and has the closed
form

    m_0 = -(sigma y_1) (S + s sigma G)^# s + c_0 1
    m_n = y_n + G^n m_0
    y_n = (1/L) sum_{i<n} (n-i) G^i tau_1 - sum_{i<n} G^i tau_1
          + (1/L) sum_{i<n} G^i (I-U)^-1 (I-R)^-1 A_1 tau_1
    tau_1 = (I-U)^-1 (I-R)^-1 1

where c_0 enforces pi m = 0 through M = sum R^n G^n (M = I + R M G)
and the series identities sum_n R^n sum_{i<n} G^i = R (I-R)^-1 M and
sum_n R^n sum_{i<n} (n-i) G^i = R (I-R)^-2 M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import deviation, matstoch, qbd_model, rgu
from .errors import DomainError, InvalidUniformization


@dataclass(frozen=True)
class PhRepresentation:
    """Phase-type inter-arrival law (sigma, S); exit vector s = -S 1."""

    sigma: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        S = np.asarray(self.S, dtype=float)
        m = sigma.shape[0]
        if S.shape != (m, m):
            raise DomainError(f"S must be {m}x{m}, got {S.shape}")
        if sigma.min() < 0 or abs(sigma.sum() - 1.0) > 1e-10:
            raise DomainError("sigma must be a probability vector")
        if np.any(np.diag(S) >= 0):
            raise DomainError("S must have a strictly negative diagonal")
        if np.any(S - np.diag(np.diag(S)) < 0):
            raise DomainError("off-diagonal entries of S must be >= 0")
        s = -S.sum(axis=1)
        if s.min() < -1e-12 or not np.any(s > 1e-12):
            raise DomainError("S 1 <= 0 must hold, strictly somewhere")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "S", S)

    @property
    def m(self) -> int:
        return self.sigma.shape[0]

    @property
    def s(self) -> np.ndarray:
        """Exit rate vector s = -S 1."""
        return -self.S.sum(axis=1)

    def mean_interarrival(self) -> float:
        """Expected inter-arrival time sigma (-S)^-1 1."""
        try:
            t = np.linalg.solve(-self.S, np.ones(self.m))
        except np.linalg.LinAlgError as exc:
            raise DomainError(f"S is singular: {exc}") from exc
        mean = float(self.sigma @ t)
        if not mean > 0:
            raise DomainError(f"mean inter-arrival {mean:g} must be > 0")
        return mean


@dataclass(frozen=True)
class SensitivityResult:
    """Queue length L, sensitivity blocks m_0..m_N and the constant c0."""

    L: float
    m_blocks: list
    c0: float


def build_qbd(ph: PhRepresentation, mu: float, gamma: float = None):
    """Uniformize the PH/M/1 queue into a discrete-time QBD.

    Parameters
    ----------
    ph : PhRepresentation
    mu : float
        Service rate, > 0.
    gamma : float, optional
        Uniformization rate; must be >= mu + max_i(-S_ii) so that the
        diagonal of A0 stays nonnegative.  Defaults to 1.05 times that
        bound, which keeps the diagonal strictly positive.

    Raises
    ------
    InvalidUniformization
        If an explicit gamma is below the bound.
    """
    if not mu > 0:
        raise DomainError(f"service rate must be > 0, got {mu}")
    gamma_min = mu + float(np.max(-np.diag(ph.S)))
    if gamma is None:
        gamma = 1.05 * gamma_min
    elif gamma < gamma_min * (1.0 - 1e-12):
        raise InvalidUniformization(
            f"gamma = {gamma:g} is below mu + max(-S_ii) = {gamma_min:g}; "
            "A0 would have a negative diagonal")
    m = ph.m
    I = np.eye(m)
    A_minus1 = (mu / gamma) * I
    A0 = I + (ph.S - mu * I) / gamma
    A1 = np.outer(ph.s, ph.sigma) / gamma
    return qbd_model.QbdModel(m=m, B=A0 + A_minus1, A_minus1=A_minus1,
                              A0=A0, A1=A1)


def queue_length(dist: rgu.StationaryDist) -> float:
    """L = pi_0 R (I - R)^-2 1, the stationary expected queue length."""
    m = dist.pi0.shape[0]
    NR = matstoch.neumann_inverse(dist.R)
    return float(dist.pi0 @ dist.R @ NR @ NR @ np.ones(m))


def sensitivity(ph: PhRepresentation, mu: float, N: int = None,
                gamma: float = None) -> SensitivityResult:
    """Sensitivity vector m of the expected queue length, levels 0..N.

    N defaults to ceil(4 L), covering the zero crossing of every phase
    trace (which occurs at some n > L).
    """
    model = build_qbd(ph, mu, gamma)
    triple = rgu.solve_triple(model)
    dist = rgu.stationary(model, triple)
    L = queue_length(dist)
    if N is None:
        N = int(np.ceil(4.0 * L))
    m = ph.m
    G, U, R = triple.G, triple.U, triple.R
    NU = matstoch.neumann_inverse(U)
    NR = matstoch.neumann_inverse(R)
    ones = np.ones(m)

    tau1 = NU @ NR @ ones
    w = NU @ NR @ model.A1 @ tau1
    # y_n via the running sums S_n = sum_{i<n} G^i, T_n = sum_{i<n} (n-i) G^i
    Sg = np.eye(m)
    Tg = np.eye(m)
    ys = [None, (Tg @ tau1) / L - Sg @ tau1 + (Sg @ w) / L]
    Gi = np.eye(m)
    for n in range(2, N + 1):
        Gi = Gi @ G
        Sg = Sg + Gi
        Tg = Tg + Sg
        ys.append((Tg @ tau1) / L - Sg @ tau1 + (Sg @ w) / L)

    gen = ph.S + np.outer(ph.s, ph.sigma @ G)
    Xs = matstoch.generator_group_inverse(gen)
    sy1 = float(ph.sigma @ ys[1])
    M = deviation.m_matrix(R, G)
    pi0 = dist.pi0
    c0 = (sy1 * float(pi0 @ M @ Xs @ ph.s)
          - float(pi0 @ R @ NR @ NR @ M @ tau1) / L
          + float(pi0 @ R @ NR @ M @ tau1)
          - float(pi0 @ R @ NR @ M @ NU @ NR @ model.A1 @ tau1) / L)

    m0 = -sy1 * (Xs @ ph.s) + c0 * ones
    blocks = [m0]
    Gn_m0 = m0
    for n in range(1, N + 1):
        Gn_m0 = G @ Gn_m0
        blocks.append(ys[n] + Gn_m0)
    return SensitivityResult(L=L, m_blocks=blocks, c0=c0)


@dataclass(frozen=True)
class SweepRow:
    rho: float
    L: float
    error: str = None


def sweep_rho(ph: PhRepresentation, mu_list) -> list:
    """Queue length L per service rate; rho = arrival rate / mu.

    Rows that fail (unstable queue) carry the error message instead of
    aborting the sweep.
    """
    lam = 1.0 / ph.mean_interarrival()
    rows = []
    for mu in mu_list:
        rho = lam / mu
        try:
            model = build_qbd(ph, mu)
            triple = rgu.solve_triple(model)
            dist = rgu.stationary(model, triple)
            rows.append(SweepRow(rho=rho, L=queue_length(dist)))
        except Exception as exc:  # flagged per row, sweep continues
            rows.append(SweepRow(rho=rho, L=float("nan"), error=str(exc)))
    return rows
