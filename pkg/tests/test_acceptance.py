"""Acceptance gate: nine end-to-end criteria, one PASS/FAIL line each.

Run with -s (or read the captured output) to see the per-criterion
lines.  Each criterion states its own tolerance; a FAIL line is printed
before the assert fires so partial runs stay readable.
"""

import time

import numpy as np

from qbdpoisson import (
    DeviationBlocks,
    build_qbd,
    ergodicity,
    m_matrix,
    perturb,
    queue_length,
    sensitivity,
    solve_triple,
    sweep_rho,
)
from qbdpoisson.matstoch import group_inverse, stationary_vector
from qbdpoisson.oracle import (
    FiniteChain,
    oracle_hitting_times,
    oracle_return_quantities,
    truncate,
)
from qbdpoisson.poisson import RewardSpec, passage_times, solve_poisson
from qbdpoisson.rgu import pi_level, stationary
from helpers import (
    E2,
    H2,
    MM1,
    mm1_model,
    random_stable_qbd,
    zero_row_sum_perturbation,
)


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def _solved(model, **kw):
    triple = solve_triple(model, **kw)
    return triple, stationary(model, triple)


def test_criterion_1_mm1_queue_length():
    try:
        t0 = time.perf_counter()
        model = build_qbd(MM1, mu=1.2)
        _, dist = _solved(model)
        L = queue_length(dist)
        elapsed = time.perf_counter() - t0
    except Exception as exc:
        print(f"criterion 1: FAIL - {type(exc).__name__}: {exc}")
        raise
    err = abs(L - 5.0)
    _report(1, err <= 1e-8 and elapsed < 1.0,
            f"M/M/1 L = {L:.12g}, |err| = {err:.2e}, {elapsed:.3f} s")


def test_criterion_2_e2_h2_queue_lengths():
    try:
        results = {}
        for name, ph, lo, hi in (("E2/M/1", E2, 3.75, 3.85),
                                 ("H2/M/1", H2, 11.05, 11.15)):
            t0 = time.perf_counter()
            _, dist = _solved(build_qbd(ph, mu=1.2))
            L = queue_length(dist)
            elapsed = time.perf_counter() - t0
            results[name] = (L, lo < L < hi and elapsed < 1.0, elapsed)
    except Exception as exc:
        print(f"criterion 2: FAIL - {type(exc).__name__}: {exc}")
        raise
    ok = all(r[1] for r in results.values())
    detail = ", ".join(f"{k} L = {v[0]:.6f} ({v[2]:.3f} s)"
                       for k, v in results.items())
    _report(2, ok, detail)


def test_criterion_3_mm1_closed_forms():
    try:
        model = mm1_model(gamma=2.2)
        triple, dist = _solved(model)
        dev = DeviationBlocks(model, triple, dist)
        cert = ergodicity.certificate(model)
        checks = [
            ("R", triple.R[0, 0], 5.0 / 6.0),
            ("G", triple.G[0, 0], 1.0),
            ("U", triple.U[0, 0], 5.0 / 11.0),
            ("pi0", dist.pi0[0], 1.0 / 6.0),
            ("tau0", passage_times(triple, 0)[0], 6.0),
            ("D00", dev.d_block(0, 0)[0, 0], 55.0 / 6.0),
            ("M", m_matrix(triple.R, triple.G)[0, 0], 6.0),
            ("z0", cert.z0, np.sqrt(1.2)),
            ("lambda0", cert.lambda0, 2.0 * np.sqrt(30.0) / 11.0),
            ("b", cert.b, (6.0 - np.sqrt(30.0)) / 11.0),
        ]
        for n in range(1, 7):
            checks.append((f"tau{n}", passage_times(triple, n)[0], 11.0 * n))
        worst = max(abs(got - want) for _, got, want in checks)
    except Exception as exc:
        print(f"criterion 3: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(3, worst <= 1e-9,
            f"{len(checks)} closed-form scalars, worst |err| = {worst:.2e}")


def test_criterion_4_truncation_oracle_equivalence(rng):
    try:
        t0 = time.perf_counter()
        worst = 0.0
        for i in range(20):
            m = (1, 2, 3)[i % 3]
            boundary = "canonical" if i % 2 == 0 else "free"
            model = random_stable_qbd(rng, m, boundary=boundary)
            triple, dist = _solved(model)
            chain = truncate(model, 300)
            pi_chain = stationary_vector(chain.P)
            X = group_inverse(chain.P)
            g = np.repeat(np.arange(301, dtype=float), m)
            h_or = X @ g
            sol = solve_poisson(model, triple, dist,
                                RewardSpec.queue_length(m), N=12,
                                normalization="pi")
            tau_or = oracle_hitting_times(chain, range(m))
            dev = DeviationBlocks(model, triple, dist)

            d_pi = max(np.max(np.abs(pi_level(dist, n)
                                     - chain.level_slice(pi_chain, n)))
                       for n in range(11))
            h_diff = np.concatenate(
                [sol.h_level(n) - chain.level_slice(h_or, n)
                 for n in range(11)])
            d_h = float(np.ptp(h_diff))
            d_tau = max(np.max(np.abs(passage_times(triple, n)
                                      - chain.level_slice(tau_or, n)))
                        for n in range(1, 11))
            d_dev = max(np.max(np.abs(dev.d_block(n, k)
                                      - chain.block(X, n, k)))
                        for n in range(11) for k in range(11))
            worst = max(worst, d_pi, d_h, d_tau, d_dev)
        elapsed = time.perf_counter() - t0
    except Exception as exc:
        print(f"criterion 4: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(4, worst <= 1e-5 and elapsed < 60.0,
            f"20 random QBDs vs N=300 truncation, worst window error "
            f"{worst:.2e}, {elapsed:.1f} s")


def test_criterion_5_poisson_residual(rng):
    try:
        models = [mm1_model(gamma=2.2), build_qbd(E2, mu=1.2),
                  build_qbd(H2, mu=1.2)]
        models += [random_stable_qbd(rng, m) for m in (1, 2, 3, 2, 3)]
        worst = 0.0
        for model in models:
            triple, dist = _solved(model)
            for normalization in ("pi", "anchor"):
                sol = solve_poisson(model, triple, dist,
                                    RewardSpec.queue_length(model.m),
                                    N=30, normalization=normalization)
                worst = max(worst, sol.residual)
    except Exception as exc:
        print(f"criterion 5: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(5, worst <= 1e-8,
            f"max blockwise residual {worst:.2e} over "
            f"{2 * len(models)} solved instances")


def test_criterion_6_deviation_identities(rng):
    try:
        worst_eq = 0.0
        worst_proj = 0.0
        for m in (1, 2, 3):
            model = random_stable_qbd(rng, m)
            triple, dist = _solved(model)
            dev = DeviationBlocks(model, triple, dist)
            W = 5
            D = {(n, k): dev.d_block(n, k)
                 for n in range(W + 2) for k in range(W + 1)}
            I = np.eye(m)
            for k in range(W + 1):
                onepi = np.outer(np.ones(m), pi_level(dist, k))
                for n in range(W + 1):
                    rhs = (I if n == k else 0.0) - onepi
                    if n == 0:
                        lhs = (D[0, k] - model.B @ D[0, k]
                               - model.A1 @ D[1, k])
                    else:
                        lhs = (D[n, k] - model.A_minus1 @ D[n - 1, k]
                               - model.A0 @ D[n, k]
                               - model.A1 @ D[n + 1, k])
                    worst_eq = max(worst_eq, np.max(np.abs(lhs - rhs)))
            # pi D = 0 and D 1 = 0, partial sums with a doubling check
            for k in range(3):
                s300 = sum(pi_level(dist, n) @ dev.d_block(n, k)
                           for n in range(300))
                s360 = s300 + sum(pi_level(dist, n) @ dev.d_block(n, k)
                                  for n in range(300, 360))
                worst_proj = max(worst_proj, np.max(np.abs(s360)),
                                 10.0 * np.max(np.abs(s360 - s300)))
            for n in range(3):
                r300 = sum(dev.d_block(n, k) @ np.ones(m)
                           for k in range(300))
                r360 = r300 + sum(dev.d_block(n, k) @ np.ones(m)
                                  for k in range(300, 360))
                worst_proj = max(worst_proj, np.max(np.abs(r360)),
                                 10.0 * np.max(np.abs(r360 - r300)))
        # single-entry identities: D_jj and D_ij against return times
        worst_entry = 0.0
        for size in (5, 7):
            P = rng.uniform(0.1, 1.0, (size, size))
            P /= P.sum(axis=1, keepdims=True)
            chain = FiniteChain(P=P, m=size, N=0)
            pi = stationary_vector(P)
            D = group_inverse(P)
            for j in range(size):
                _, tau = oracle_return_quantities(chain, np.zeros(size), j)
                ref = pi[j] * (float(pi @ tau) - 1.0)
                worst_entry = max(worst_entry, abs(D[j, j] - ref))
                for i in range(size):
                    if i != j:
                        worst_entry = max(
                            worst_entry,
                            abs(D[i, j] - (D[j, j] - pi[j] * tau[i])))
    except Exception as exc:
        print(f"criterion 6: FAIL - {type(exc).__name__}: {exc}")
        raise
    ok = worst_eq <= 1e-6 and worst_proj <= 1e-6 and worst_entry <= 1e-6
    _report(6, ok,
            f"defining eq {worst_eq:.2e}, pi D / D 1 {worst_proj:.2e}, "
            f"return-time entries {worst_entry:.2e}")


def test_criterion_7_drift_certificates(rng):
    try:
        models = [mm1_model(gamma=2.2), build_qbd(E2, mu=1.2),
                  build_qbd(H2, mu=1.2)]
        models += [random_stable_qbd(rng, m, boundary=b)
                   for m, b in ((1, "free"), (2, "canonical"), (2, "free"),
                                (3, "canonical"), (3, "free"))]
        worst_interior = 0.0
        all_passed = True
        for model in models:
            cert = ergodicity.certificate(model)
            report = ergodicity.verify_drift(model, cert, 50)
            all_passed = all_passed and report.passed
            worst_interior = max(worst_interior, report.interior_residual)
    except Exception as exc:
        print(f"criterion 7: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(7, all_passed and worst_interior <= 1e-9,
            f"{len(models)} models verified on levels 0..50, worst "
            f"interior residual {worst_interior:.2e}")


def test_criterion_8_perturbation_derivatives(rng):
    try:
        worst1 = 0.0
        worst2 = 0.0
        for i in range(10):
            m = (1, 2, 3)[i % 3]
            model = random_stable_qbd(rng, m)
            Q = zero_row_sum_perturbation(rng, model)
            g = RewardSpec.queue_length(m)
            chk1 = perturb.fd_check(model, Q, g, delta=1e-5, order=1)
            chk2 = perturb.fd_check(model, Q, g, delta=2e-4, order=2)
            worst1 = max(worst1, chk1.rel_err)
            worst2 = max(worst2, chk2.rel_err)
    except Exception as exc:
        print(f"criterion 8: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(8, worst1 <= 1e-4 and worst2 <= 1e-3,
            f"10 random perturbations, order-1 rel err {worst1:.2e}, "
            f"order-2 rel err {worst2:.2e}")


def test_criterion_9_sensitivity_traces_and_sweep():
    try:
        trace_ok = True
        pim_worst = 0.0
        for ph in (MM1, E2, H2):
            L_guess = queue_length(_solved(build_qbd(ph, mu=1.2))[1])
            N = max(22, int(np.ceil(4.0 * L_guess)) + 1)
            res = sensitivity(ph, mu=1.2, N=N)
            blocks = res.m_blocks
            increasing = all(np.all(blocks[n + 1] > blocks[n])
                             for n in range(20))
            negative_start = bool(np.all(blocks[0] < 0))
            crossing_ok = True
            for j in range(ph.m):
                trace = np.array([b[j] for b in blocks])
                assert trace[-1] > 0, "window does not reach the crossing"
                first_pos = int(np.argmax(trace >= 0))
                crossing_ok = crossing_ok and first_pos > res.L
            trace_ok = (trace_ok and increasing and negative_start
                        and crossing_ok)
            # pi m = 0, summed far past the crossing
            long_res = sensitivity(ph, mu=1.2, N=600)
            _, dist = _solved(build_qbd(ph, mu=1.2))
            pim = abs(sum(float(pi_level(dist, n) @ long_res.m_blocks[n])
                          for n in range(601)))
            pim_worst = max(pim_worst, pim)
        rhos = np.linspace(0.1, 0.9, 10)
        curves = {}
        for name, ph in (("mm1", MM1), ("e2", E2), ("h2", H2)):
            lam = 1.0 / ph.mean_interarrival()
            rows = sweep_rho(ph, [lam / r for r in rhos])
            assert all(r.error is None for r in rows)
            curves[name] = [r.L for r in rows]
        ordering = all(curves["h2"][i] > curves["mm1"][i] > curves["e2"][i]
                       for i in range(10))
    except Exception as exc:
        print(f"criterion 9: FAIL - {type(exc).__name__}: {exc}")
        raise
    _report(9, trace_ok and pim_worst <= 1e-8 and ordering,
            f"m traces increasing/negative-start/crossing past L on all "
            f"queues, |pi m| = {pim_worst:.2e}, L ordering H2 > M > E2 "
            f"at 10 common rho points")
