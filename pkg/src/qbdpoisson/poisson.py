"""Poisson's equation (I - P) h = g - omega 1 for positive recurrent QBDs.

Rewards are level-indexed vectors g_0, g_1, ... restricted to an
explicit prefix plus an affine tail g_n = c0 + n c1, which keeps every
tail sum closed-form and guarantees summability sum_n pi_n |g_n| < inf
whenever sp(R) < 1.

The solution is assembled from first-passage building blocks:

    y_n = sum_{i=0}^{n-1} G^i (I - U)^-1 s(n - i)      n >= 1
    s(k) = sum_{l>=0} R^l gbar_{k+l}
    y_0 = gbar_0 + A1 y_1
    h_0 = (I - P_*)^# y_0 + c 1,   h_n = y_n + G^n h_0

with P_* = B + A1 G and c fixed by the chosen normalization (pi h = 0,
or h = 0 at state (0, 0)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matstoch, qbd_model, rgu
from .errors import NoConvergence, NotCentered, NotPositiveRecurrent


@dataclass(frozen=True)
class RewardSpec:
    """Per-level rewards: explicit prefix g_0..g_K, then g_n = c0 + n c1.

    Parameters
    ----------
    explicit : (K+1, m) array_like
        Reward vectors for levels 0..K, one row per level.
    tail_c0, tail_c1 : (m,) array_like
        Affine tail coefficients used for every level n > K.
    """

    explicit: np.ndarray
    tail_c0: np.ndarray
    tail_c1: np.ndarray

    def __post_init__(self):
        explicit = np.atleast_2d(np.asarray(self.explicit, dtype=float))
        c0 = np.asarray(self.tail_c0, dtype=float)
        c1 = np.asarray(self.tail_c1, dtype=float)
        if explicit.shape[0] < 1:
            raise ValueError("explicit prefix must cover at least level 0")
        if c0.shape != (explicit.shape[1],) or c1.shape != (explicit.shape[1],):
            raise ValueError("tail coefficient length must match phase count")
        object.__setattr__(self, "explicit", explicit)
        object.__setattr__(self, "tail_c0", c0)
        object.__setattr__(self, "tail_c1", c1)

    @property
    def m(self) -> int:
        return self.explicit.shape[1]

    @property
    def K(self) -> int:
        return self.explicit.shape[0] - 1

    def level(self, n: int) -> np.ndarray:
        """The reward vector g_n."""
        if n <= self.K:
            return self.explicit[n]
        return self.tail_c0 + n * self.tail_c1

    @staticmethod
    def queue_length(m: int) -> "RewardSpec":
        """g_n = n 1, the level itself (expected value is L)."""
        return RewardSpec(np.zeros((1, m)), np.zeros(m), np.ones(m))

    @staticmethod
    def constant(m: int, value: float = 1.0) -> "RewardSpec":
        """g_n = value 1 for every level."""
        return RewardSpec(np.full((1, m), value), np.full(m, value), np.zeros(m))


def omega(dist: rgu.StationaryDist, g: RewardSpec) -> float:
    """Stationary mean reward omega = sum_n pi_n g_n, in closed form.

    The explicit prefix is summed directly; the affine tail uses
    sum_{n>K} R^n = R^{K+1} (I - R)^-1 and
    sum_{n>K} n R^n = R^{K+1} ((K+1)(I - R)^-1 + R (I - R)^-2).
    """
    R = dist.R
    total = 0.0
    pin = dist.pi0.copy()
    for n in range(g.K + 1):
        total += pin @ g.level(n)
        pin = pin @ R
    # here pin = pi_0 R^{K+1}
    NR = matstoch.neumann_inverse(R)
    total += pin @ NR @ g.tail_c0
    total += pin @ ((g.K + 1) * NR + R @ NR @ NR) @ g.tail_c1
    return float(total)


def center(g: RewardSpec, omega_value: float) -> RewardSpec:
    """gbar = g - omega 1, preserving the explicit-plus-affine-tail form."""
    return RewardSpec(
        g.explicit - omega_value,
        g.tail_c0 - omega_value,
        g.tail_c1,
    )


def tail_weighted_sum(R, g: RewardSpec, n: int) -> np.ndarray:
    """s_n = sum_{l>=0} R^l g_{n+l} for n >= 1.

    Indices up to K contribute a finite prefix; the affine tail starting
    at l = t (the first index with n + l > K) closes as

        R^t [ (I-R)^-1 c0 + (n+t)(I-R)^-1 c1 + R (I-R)^-2 c1 ].
    """
    if n < 1:
        raise ValueError(f"tail_weighted_sum needs n >= 1, got {n}")
    R = np.asarray(R, dtype=float)
    m = g.m
    s = np.zeros(m)
    Rl = np.eye(m)
    t = max(0, g.K + 1 - n)
    for l in range(t):
        s += Rl @ g.level(n + l)
        Rl = Rl @ R
    NR = matstoch.neumann_inverse(R)
    s += Rl @ (NR @ (g.tail_c0 + (n + t) * g.tail_c1) + R @ NR @ NR @ g.tail_c1)
    return s


def passage_times(rgu_triple: rgu.RguTriple, n: int) -> np.ndarray:
    """Expected first passage times to level 0 (return time when n = 0).

    tau_0 = (I - R)^-1 1, and for n >= 1

        tau_n = ((I - G^n)(I - G)^# + n 1 gamma) (I - U)^-1 (I - R)^-1 1

    with gamma the invariant probability vector of G.
    """
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    m = rgu_triple.G.shape[0]
    tau0 = matstoch.neumann_inverse(rgu_triple.R) @ np.ones(m)
    if n == 0:
        return tau0
    G = rgu_triple.G
    gamma = matstoch.stationary_vector(G)
    Gsharp = matstoch.group_inverse(G)
    Gn = np.linalg.matrix_power(G, n)
    lead = (np.eye(m) - Gn) @ Gsharp + n * np.outer(np.ones(m), gamma)
    return lead @ matstoch.neumann_inverse(rgu_triple.U) @ tau0


def y_vectors(model, rgu_triple: rgu.RguTriple, gbar: RewardSpec, N: int,
              require_centered: bool = True) -> list:
    """The vectors y_0..y_N of the structured Poisson solution.

    y_n accumulates expected rewards on the way from level n down to
    level n-1 and obeys the forward recurrence
    y_n = (I - U)^-1 s(n) + G y_{n-1}; the boundary closes with
    y_0 = gbar_0 + A1 y_1.

    Parameters
    ----------
    require_centered : bool
        When True (default) the reward must satisfy omega(gbar) = 0
        within 1e-10.  Disabling the check lets the same sums act on
        uncentered rewards; with g = 1 they reproduce passage_times.
    """
    if N < 1:
        raise ValueError(f"need N >= 1 for the boundary closure, got {N}")
    if require_centered:
        dist = rgu.stationary(model, rgu_triple)
        w = omega(dist, gbar)
        if abs(w) > 1e-10:
            raise NotCentered(f"omega(gbar) = {w:.3e}, expected 0")
    NU = matstoch.neumann_inverse(rgu_triple.U)
    G = rgu_triple.G
    ys = [np.zeros(gbar.m)]
    y = NU @ tail_weighted_sum(rgu_triple.R, gbar, 1)
    ys.append(y)
    for n in range(2, N + 1):
        y = NU @ tail_weighted_sum(rgu_triple.R, gbar, n) + G @ y
        ys.append(y)
    ys[0] = gbar.level(0) + model.A1 @ ys[1]
    return ys


class PoissonSolution:
    """Solution pair (omega, h) with lazy access to any level of h.

    Attributes
    ----------
    omega : float
        Stationary mean reward per step.
    h0 : ndarray
        Level-0 block of h, normalization constant included.
    h_blocks : list of ndarray
        Levels 1..N of h.
    normalization : str
        'pi' (pi h = 0) or 'anchor' (h = 0 at state (0, 0)).
    residual : float
        Max blockwise residual of (I - P) h = gbar over levels 0..N-1.
    """

    def __init__(self, model, rgu_triple, gbar, omega_value, h0_free, c,
                 ys, normalization):
        self._model = model
        self._rgu = rgu_triple
        self._gbar = gbar
        self._h0_free = h0_free
        self._ys = list(ys)
        self._NU = matstoch.neumann_inverse(rgu_triple.U)
        self.omega = float(omega_value)
        self.c = float(c)
        self.normalization = normalization
        self.h0 = h0_free + c
        self.h_blocks = [self.h_level(n) for n in range(1, len(ys))]
        self.residual = self._max_residual()

    def y_level(self, n: int) -> np.ndarray:
        """y_n, extending the forward recurrence on demand."""
        while n >= len(self._ys):
            k = len(self._ys)
            y = (self._NU @ tail_weighted_sum(self._rgu.R, self._gbar, k)
                 + self._rgu.G @ self._ys[k - 1])
            self._ys.append(y)
        return self._ys[n]

    def h_level(self, n: int) -> np.ndarray:
        """h_n = y_n + G^n h_0 for any n >= 0."""
        if n == 0:
            return self.h0
        Gn_h0 = self.h0.copy()
        for _ in range(n):
            Gn_h0 = self._rgu.G @ Gn_h0
        return self.y_level(n) + Gn_h0

    def _max_residual(self):
        model = self._model
        levels = len(self._ys)
        h = [self.h_level(n) for n in range(levels + 1)]
        res = np.max(np.abs(h[0] - model.B @ h[0] - model.A1 @ h[1]
                            - self._gbar.level(0)))
        for n in range(1, levels):
            r = (h[n] - model.A_minus1 @ h[n - 1] - model.A0 @ h[n]
                 - model.A1 @ h[n + 1] - self._gbar.level(n))
            res = max(res, np.max(np.abs(r)))
        return float(res)


def _pi_h_constant(model, rgu_triple, dist, h0_free, sol_ys, gbar,
                   tol=1e-12, max_levels=100_000):
    # c = -pi h for the c = 0 solution.  The G^n h_0 part sums exactly,
    # sum_n pi_n G^n = pi_0 M; the y part is truncated adaptively: the
    # increment pi_n y_n decays geometrically while y_n grows at most
    # linearly, so five consecutive small increments certify the tail.
    from .deviation import m_matrix

    M = m_matrix(rgu_triple.R, rgu_triple.G)
    total = float(dist.pi0 @ M @ h0_free)
    NU = matstoch.neumann_inverse(rgu_triple.U)
    threshold = tol * (1.0 - matstoch.spectral_radius(rgu_triple.R))
    pin = dist.pi0.copy()
    ys = list(sol_ys)
    small = 0
    for n in range(1, max_levels):
        pin = pin @ dist.R
        while n >= len(ys):
            k = len(ys)
            ys.append(NU @ tail_weighted_sum(rgu_triple.R, gbar, k)
                      + rgu_triple.G @ ys[k - 1])
        inc = float(pin @ ys[n])
        total += inc
        if abs(inc) < threshold:
            small += 1
            if small >= 5:
                return -total
        else:
            small = 0
    raise NoConvergence("pi h = 0 tail summation did not stabilize")


def solve_poisson(model, rgu_triple, dist, g: RewardSpec, N: int,
                  normalization: str = "pi") -> PoissonSolution:
    """Solve (I - P) h = g - omega 1 on a positive recurrent QBD.

    Parameters
    ----------
    model : QbdModel
    rgu_triple : RguTriple
    dist : StationaryDist
    g : RewardSpec
        Raw rewards; centering is applied internally.
    N : int
        Number of h blocks to materialize (levels 1..N).
    normalization : {'pi', 'anchor'}
        'pi' fixes pi h = 0; 'anchor' fixes h = 0 at state (0, 0).

    Returns
    -------
    PoissonSolution
    """
    if normalization not in ("pi", "anchor"):
        raise ValueError(f"unknown normalization {normalization!r}")
    report = qbd_model.stability(model)
    if not report.positive_recurrent:
        raise NotPositiveRecurrent(
            f"mean drift {report.drift:.3e} is not positive")
    w = omega(dist, g)
    gbar = center(g, w)
    ys = y_vectors(model, rgu_triple, gbar, max(N, 1),
                   require_centered=False)
    P_star = model.B + model.A1 @ rgu_triple.G
    h0_free = matstoch.group_inverse(P_star) @ ys[0]
    if normalization == "anchor":
        c = -h0_free[0]
    else:
        c = _pi_h_constant(model, rgu_triple, dist, h0_free, ys, gbar)
    return PoissonSolution(model, rgu_triple, gbar, w, h0_free, c, ys,
                           normalization)
