"""Shared fixtures: reference queues and a randomized stable-QBD source."""

import numpy as np

from qbdpoisson import (
    PhRepresentation,
    QbdModel,
    build_qbd,
    solve_triple,
    stability,
    stationary,
)
from qbdpoisson.matstoch import spectral_radius

# the three inter-arrival laws used throughout: exponential, Erlang-2,
# and a balanced hyperexponential, all with unit mean
MM1 = PhRepresentation(sigma=[1.0], S=[[-1.0]])
E2 = PhRepresentation(sigma=[1.0, 0.0], S=[[-2.0, 2.0], [0.0, -2.0]])
H2 = PhRepresentation(sigma=[0.11270167, 0.88729833],
                      S=[[-0.225403332, 0.0], [0.0, -1.77459667]])


def mm1_model(gamma=2.2):
    """M/M/1 at mu = 1.2 with an explicit uniformization rate.

    gamma = 2.2 gives the hand-checkable blocks B = [6/11], A_minus1 =
    [6/11], A0 = [0], A1 = [5/11].
    """
    return build_qbd(MM1, 1.2, gamma=gamma)


def random_stable_qbd(rng, m, boundary="canonical"):
    """A strictly positive stable QBD with drift >= 0.05 and sp(R) <= 0.9.

    Blocks are drawn uniform on [0.2, 1], the down block inflated so the
    mean drift is comfortably positive, and rows jointly normalized.
    boundary="free" replaces B = A_minus1 + A0 by an independent random
    stochastic completion of A1.
    """
    for _ in range(200):
        A_minus1 = 1.6 * rng.uniform(0.2, 1.0, (m, m))
        A0 = rng.uniform(0.2, 1.0, (m, m))
        A1 = rng.uniform(0.2, 1.0, (m, m))
        total = (A_minus1 + A0 + A1).sum(axis=1, keepdims=True)
        A_minus1, A0, A1 = A_minus1 / total, A0 / total, A1 / total
        if boundary == "canonical":
            B = A_minus1 + A0
        else:
            W = rng.uniform(0.2, 1.0, (m, m))
            W /= W.sum(axis=1, keepdims=True)
            B = (1.0 - A1.sum(axis=1, keepdims=True)) * W
        model = QbdModel(m=m, B=B, A_minus1=A_minus1, A0=A0, A1=A1)
        if stability(model).drift < 0.05:
            continue
        if spectral_radius(solve_triple(model).R) > 0.9:
            continue
        return model
    raise RuntimeError("rejection sampling failed to find a stable QBD")


def random_unstable_qbd(rng, m):
    """Same construction with the up block inflated: drift <= 0."""
    for _ in range(200):
        A_minus1 = rng.uniform(0.2, 1.0, (m, m))
        A0 = rng.uniform(0.2, 1.0, (m, m))
        A1 = 1.8 * rng.uniform(0.2, 1.0, (m, m))
        total = (A_minus1 + A0 + A1).sum(axis=1, keepdims=True)
        A_minus1, A0, A1 = A_minus1 / total, A0 / total, A1 / total
        model = QbdModel(m=m, B=A_minus1 + A0, A_minus1=A_minus1,
                         A0=A0, A1=A1)
        if stability(model).drift < -0.05:
            return model
    raise RuntimeError("rejection sampling failed to find an unstable QBD")


def solved(model, **kw):
    """(triple, dist) in one call."""
    triple = solve_triple(model, **kw)
    return triple, stationary(model, triple)


def zero_row_sum_perturbation(rng, model, scale=0.25):
    """Random admissible direction Q: zero level-row sums, small entries.

    The QBD layout requires rows of dB + dA1 and of dA_minus1 + dA0 +
    dA1 to vanish; the excess is folded into dA0 and dB.  A single
    scaling caps every entry at scale times the smallest block entry of
    the model, so moderate deltas keep the perturbed chain stochastic.
    """
    from qbdpoisson import PerturbationSpec

    m = model.m
    dA_minus1 = rng.standard_normal((m, m))
    dA1 = rng.standard_normal((m, m))
    dA0 = rng.standard_normal((m, m))
    dA0 -= ((dA_minus1 + dA0 + dA1).sum(axis=1, keepdims=True)) / m
    dB = rng.standard_normal((m, m))
    dB -= ((dB + dA1).sum(axis=1, keepdims=True)) / m

    cap = scale * min(model.B.min(), model.A_minus1.min(),
                      model.A0.min(), model.A1.min())
    peak = max(np.max(np.abs(X)) for X in (dB, dA_minus1, dA0, dA1))
    s = cap / peak
    return PerturbationSpec(dB=s * dB, dA_minus1=s * dA_minus1,
                            dA0=s * dA0, dA1=s * dA1)
