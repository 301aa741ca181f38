"""Blockwise deviation matrix D = sum_t (P^t - 1 pi) of a stable QBD.

D is an infinite matrix; it is exposed through block accessors built
from three ingredients:

  * W, the expected taboo visit counts among levels >= 1 avoiding
    level 0, with W_kk = sum_{v<k} G^v (I-U)^-1 R^v and the off
    diagonals W_nk = G^{n-k} W_kk (n >= k), W_nn R^{k-n} (n <= k);
  * K, with K_0k = (I-P_*)^# (I - tau_0 pi_0) R^k on the boundary row
    and K_nk = W_nk - tau_n pi_k + G^n K_0k below it (the W term is
    absent for k = 0);
  * the correction row alpha = -pi K, so that D_nk = K_nk + 1 alpha_k.

The auxiliary matrix M = sum_n R^n G^n (unique solution of
M = I + R M G) turns the G-geometric part of pi K into the exact
identity sum_n pi_n G^n = pi_0 M; the remaining series are truncated
adaptively under their geometric tail bounds.
"""

from __future__ import annotations

import numpy as np

from . import matstoch, poisson, rgu
from .errors import DomainError, NoConvergence, NotContractive


def m_matrix(R, G, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """M = sum_n R^n G^n, the unique solution of M = I + R M G."""
    R = np.asarray(R, dtype=float)
    G = np.asarray(G, dtype=float)
    contraction = matstoch.spectral_radius(R) * matstoch.spectral_radius(G)
    if contraction >= 1.0 - 1e-12:
        raise NotContractive(
            f"sp(R) sp(G) = {contraction:.12f} is not < 1; M series diverges")
    m = R.shape[0]
    M = np.eye(m)
    for _ in range(max_iter):
        M_next = np.eye(m) + R @ M @ G
        if np.max(np.abs(M_next - M)) <= tol * (1.0 - contraction):
            return M_next
        M = M_next
    raise NoConvergence(f"M = I + RMG not converged in {max_iter} iterations")


def w_block(rgu_triple: rgu.RguTriple, n: int, k: int) -> np.ndarray:
    """Taboo visit-count block W_nk for levels n, k >= 1."""
    if n < 1 or k < 1:
        raise DomainError(f"W blocks need n, k >= 1, got ({n}, {k})")
    G, U, R = rgu_triple.G, rgu_triple.U, rgu_triple.R
    m = G.shape[0]
    NU = matstoch.neumann_inverse(U)
    d = min(n, k)
    Gi = np.eye(m)
    Ri = np.eye(m)
    W = np.zeros((m, m))
    for _ in range(d):
        W += Gi @ NU @ Ri
        Gi = Gi @ G
        Ri = Ri @ R
    if n > k:
        W = np.linalg.matrix_power(G, n - k) @ W
    elif k > n:
        W = W @ np.linalg.matrix_power(R, k - n)
    return W


class DeviationBlocks:
    """Cached block accessor for K, alpha and D of one stable QBD.

    The shared prefix (M matrix, group inverse of I - P_*, passage
    times, stationary blocks) is computed once; K blocks, alpha rows
    and D blocks are then memoized per index.
    """

    def __init__(self, model, rgu_triple: rgu.RguTriple,
                 dist: rgu.StationaryDist, tol: float = 1e-12):
        self.model = model
        self.rgu = rgu_triple
        self.dist = dist
        self.tol = tol
        m = model.m
        self.M = m_matrix(rgu_triple.R, rgu_triple.G)
        P_star = model.B + model.A1 @ rgu_triple.G
        self.P_star_sharp = matstoch.group_inverse(P_star)
        self.NU = matstoch.neumann_inverse(rgu_triple.U)
        self.tau0 = matstoch.neumann_inverse(rgu_triple.R) @ np.ones(m)
        self._K0 = {}
        self._alpha = {}
        self._tau = {}
        self._pin = {}

    def tau(self, n: int) -> np.ndarray:
        if n not in self._tau:
            self._tau[n] = poisson.passage_times(self.rgu, n)
        return self._tau[n]

    def pi_n(self, n: int) -> np.ndarray:
        if n not in self._pin:
            self._pin[n] = rgu.pi_level(self.dist, n)
        return self._pin[n]

    def k0_block(self, k: int) -> np.ndarray:
        """K_0k = (I - P_*)^# (I - tau_0 pi_0) R^k."""
        if k not in self._K0:
            Rk = np.linalg.matrix_power(self.rgu.R, k)
            self._K0[k] = self.P_star_sharp @ (
                Rk - np.outer(self.tau0, self.pi_n(k)))
        return self._K0[k]

    def k_block(self, n: int, k: int) -> np.ndarray:
        if n < 0 or k < 0:
            raise DomainError(f"K blocks need n, k >= 0, got ({n}, {k})")
        if n == 0:
            return self.k0_block(k)
        Gn = np.linalg.matrix_power(self.rgu.G, n)
        K = Gn @ self.k0_block(k) - np.outer(self.tau(n), self.pi_n(k))
        if k >= 1:
            K = K + w_block(self.rgu, n, k)
        return K

    def alpha(self, k: int, max_levels: int = 100_000) -> np.ndarray:
        """alpha_k = -(pi K)_k.

        The G^n part of the series sums exactly through pi_0 M; the
        W and tau parts are truncated once their geometrically
        decaying increments stay below tol * (1 - sp(R)) for five
        consecutive levels.
        """
        if k in self._alpha:
            return self._alpha[k]
        G, R = self.rgu.G, self.rgu.R
        m = self.model.m
        total = (self.dist.pi0 @ self.M) @ self.k0_block(k)
        threshold = self.tol * (1.0 - matstoch.spectral_radius(R))
        w_diag = np.zeros((m, m))  # W_nn, grown incrementally
        Gn = np.eye(m)
        Rn = np.eye(m)
        Gnk = np.eye(m)  # G^(n-k) once n passes k
        w_kk = None
        small = 0
        for n in range(1, max_levels):
            w_diag += Gn @ self.NU @ Rn
            Gn = Gn @ G
            Rn = Rn @ R
            if n == k:
                w_kk = w_diag.copy()
            pin = self.pi_n(n)
            inc = -float(pin @ self.tau(n)) * self.pi_n(k)
            if 1 <= n <= k:
                inc = inc + pin @ w_diag @ np.linalg.matrix_power(R, k - n)
            elif k >= 1:
                Gnk = Gnk @ G
                inc = inc + pin @ Gnk @ w_kk
            total = total + inc
            # increments peak around n = k; never stop inside the ramp
            if n > k and np.max(np.abs(inc)) < threshold:
                small += 1
                if small >= 5:
                    self._alpha[k] = -total
                    return self._alpha[k]
            else:
                small = 0
        raise NoConvergence("alpha row series did not stabilize")

    def d_block(self, n: int, k: int) -> np.ndarray:
        """D_nk = K_nk + 1 alpha_k."""
        return self.k_block(n, k) + np.outer(np.ones(self.model.m),
                                             self.alpha(k))


def k_block(model, rgu_triple, dist, n: int, k: int) -> np.ndarray:
    """K block (n, k): taboo visits minus tau_n pi_k plus the G^n pullback."""
    return DeviationBlocks(model, rgu_triple, dist).k_block(n, k)


def alpha_row(model, rgu_triple, dist, k: int, tol: float = 1e-12) -> np.ndarray:
    """alpha_k = -(pi K)_k, the normalizing row of the deviation matrix."""
    return DeviationBlocks(model, rgu_triple, dist, tol=tol).alpha(k)


def deviation_block(model, rgu_triple, dist, n: int, k: int) -> np.ndarray:
    """D_nk = K_nk + 1 alpha_k."""
    return DeviationBlocks(model, rgu_triple, dist).d_block(n, k)


def apply_deviation(model, rgu_triple, dist, g: poisson.RewardSpec,
                    N: int) -> list:
    """(D gbar)_0 .. (D gbar)_N, with gbar the centered reward.

    Routed through the pi h = 0 Poisson solution: h = D gbar + c 1 with
    pi h = 0 and pi D = 0 force c = 0, so h is exactly D gbar.
    """
    sol = poisson.solve_poisson(model, rgu_triple, dist, g, max(N, 1),
                                normalization="pi")
    return [sol.h_level(n) for n in range(N + 1)]
