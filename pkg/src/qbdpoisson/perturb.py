"""Derivatives of the stationary reward under P(delta) = P + delta Q.

Q is a QBD-shaped signed perturbation with Q 1 = 0, given by the four
blocks dB, dA_minus1, dA0, dA1.  For a v-geometrically ergodic chain

    d^n pi / d delta^n |_0 = n! pi (Q D)^n
    d omega / d delta |_0  = pi Q h,  h = D g with pi h = 0,

valid for delta < (1 - lambda0) / ||Q||_v.  The first-order derivative
is computed exactly from the structured Poisson solution; higher orders
go through the finite truncation with a window-doubling consistency
check, since (Q D)^n has no closed geometric form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ergodicity, matstoch, oracle, poisson, qbd_model, rgu
from .errors import InvalidPerturbation, NoConvergence


@dataclass(frozen=True)
class PerturbationSpec:
    """Signed block perturbation dQ of a QBD with zero row sums.

    (dB + dA1) 1 = 0 and (dA_minus1 + dA0 + dA1) 1 = 0 within 1e-12,
    so that P + delta Q keeps unit row sums for every delta.
    """

    dB: np.ndarray
    dA_minus1: np.ndarray
    dA0: np.ndarray
    dA1: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.dB).shape[0]
        for name in ("dB", "dA_minus1", "dA0", "dA1"):
            X = np.asarray(getattr(self, name), dtype=float)
            if X.shape != (m, m):
                raise InvalidPerturbation(
                    f"block {name} must be {m}x{m}, got {X.shape}")
            object.__setattr__(self, name, X)
        for label, S in (("dB + dA1", self.dB + self.dA1),
                         ("dA_minus1 + dA0 + dA1",
                          self.dA_minus1 + self.dA0 + self.dA1)):
            defect = np.max(np.abs(S.sum(axis=1)))
            if defect > 1e-12:
                raise InvalidPerturbation(
                    f"rows of {label} must sum to 0, defect {defect:.3e}")

    @property
    def m(self) -> int:
        return self.dB.shape[0]

    def is_zero(self) -> bool:
        return not (np.any(self.dB) or np.any(self.dA_minus1)
                    or np.any(self.dA0) or np.any(self.dA1))


def _pi_q_level(dist, Q: PerturbationSpec, k: int) -> np.ndarray:
    # column block k of pi Q
    if k == 0:
        return (rgu.pi_level(dist, 0) @ Q.dB
                + rgu.pi_level(dist, 1) @ Q.dA_minus1)
    return (rgu.pi_level(dist, k - 1) @ Q.dA1
            + rgu.pi_level(dist, k) @ Q.dA0
            + rgu.pi_level(dist, k + 1) @ Q.dA_minus1)


def omega_derivative_1(model, rgu_triple, dist, Q: PerturbationSpec,
                       g: poisson.RewardSpec, tol: float = 1e-12,
                       max_levels: int = 100_000) -> float:
    """d omega / d delta at 0, as pi Q h with the pi h = 0 solution.

    The inner product sum_k (pi Q)_k h_k is truncated adaptively:
    (pi Q)_k decays geometrically while h_k grows at most linearly, so
    five consecutive increments below tol * (1 - sp(R)) close the tail.
    """
    if Q.is_zero():
        return 0.0
    sol = poisson.solve_poisson(model, rgu_triple, dist, g, N=1,
                                normalization="pi")
    threshold = tol * (1.0 - matstoch.spectral_radius(rgu_triple.R))
    total = 0.0
    small = 0
    for k in range(max_levels):
        inc = float(_pi_q_level(dist, Q, k) @ sol.h_level(k))
        total += inc
        if abs(inc) < threshold:
            small += 1
            if small >= 5:
                return total
        else:
            small = 0
    raise NoConvergence("pi Q h tail summation did not stabilize")


def derivative_series(model, rgu_triple, dist, Q: PerturbationSpec,
                      g: poisson.RewardSpec, order: int,
                      window_N: int = 200, tol: float = 1e-6) -> float:
    """n-th derivative of omega at 0 via n! pi (Q D)^n g on a truncation.

    Both the chain and Q are truncated at window_N levels (reflecting
    lump, dA0 + dA1 on the last diagonal); the value must agree with
    the 2 * window_N computation to relative tol or NoConvergence is
    raised.  On the finite chain D is the group inverse of I - P.
    """
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    if Q.is_zero():
        return 0.0

    def value(N):
        chain = oracle.truncate(model, N)
        Qhat = oracle.assemble_tridiagonal(Q.dB, Q.dA_minus1, Q.dA0,
                                           Q.dA1, N)
        pi = matstoch.stationary_vector(chain.P)
        D = matstoch.group_inverse(chain.P)
        ghat = np.concatenate([g.level(n) for n in range(N + 1)])
        v = pi
        for _ in range(order):
            v = (v @ Qhat) @ D
        return math.factorial(order) * float(v @ ghat)

    coarse = value(window_N)
    fine = value(2 * window_N)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise NoConvergence(
            f"window check failed: {coarse:.12g} at N={window_N} vs "
            f"{fine:.12g} at N={2 * window_N}")
    return fine


def admissible_delta(model, cert: ergodicity.DriftCertificate,
                     Q: PerturbationSpec) -> float:
    """The radius (1 - lambda0) / ||Q||_v from the drift certificate.

    Q = 0 has infinite radius (reported as math.inf).
    """
    q = ergodicity.v_norm_blocks(Q, cert)
    if q == 0.0:
        return math.inf
    return (1.0 - cert.lambda0) / q


def perturbed_model(model, Q: PerturbationSpec, delta: float):
    """The QBD with blocks of P + delta Q; entries must stay in [0, 1]."""
    blocks = {}
    for name, dname in (("B", "dB"), ("A_minus1", "dA_minus1"),
                        ("A0", "dA0"), ("A1", "dA1")):
        X = getattr(model, name) + delta * getattr(Q, dname)
        if X.min() < -1e-14 or X.max() > 1.0 + 1e-14:
            raise InvalidPerturbation(
                f"delta = {delta:g} drives {name} out of [0, 1] "
                f"(range [{X.min():.3e}, {X.max():.3e}])")
        blocks[name] = np.clip(X, 0.0, 1.0)
    return qbd_model.QbdModel(m=model.m, **blocks)


@dataclass(frozen=True)
class FdCheckResult:
    fd_estimate: float
    analytic: float
    rel_err: float


def _omega_of(model, g):
    triple = rgu.solve_triple(model)
    dist = rgu.stationary(model, triple)
    return poisson.omega(dist, g)


def fd_check(model, Q: PerturbationSpec, g: poisson.RewardSpec,
             delta: float = 1e-5, order: int = 1) -> FdCheckResult:
    """Central finite difference of omega(delta) vs the analytic value.

    order 1 compares (omega(d) - omega(-d)) / 2d with pi Q h; order 2
    compares (omega(d) - 2 omega(0) + omega(-d)) / d^2 with the series
    derivative.  Both perturbed models are re-solved from scratch.
    """
    omega_plus = _omega_of(perturbed_model(model, Q, delta), g)
    omega_minus = _omega_of(perturbed_model(model, Q, -delta), g)
    triple = rgu.solve_triple(model)
    dist = rgu.stationary(model, triple)
    if order == 1:
        fd = (omega_plus - omega_minus) / (2.0 * delta)
        analytic = omega_derivative_1(model, triple, dist, Q, g)
    elif order == 2:
        omega_0 = poisson.omega(dist, g)
        fd = (omega_plus - 2.0 * omega_0 + omega_minus) / (delta * delta)
        analytic = derivative_series(model, triple, dist, Q, g, order=2)
    else:
        raise ValueError(f"fd_check supports order 1 or 2, got {order}")
    rel_err = abs(fd - analytic) / max(abs(analytic), 1e-300)
    return FdCheckResult(fd_estimate=fd, analytic=analytic, rel_err=rel_err)
