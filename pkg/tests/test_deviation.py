import numpy as np
import pytest

from qbdpoisson import DeviationBlocks, DomainError, NotContractive, m_matrix
from qbdpoisson.deviation import alpha_row, apply_deviation, deviation_block, w_block
from qbdpoisson.matstoch import group_inverse, stationary_vector
from qbdpoisson.oracle import truncate
from qbdpoisson.poisson import RewardSpec, center, omega, solve_poisson
from helpers import mm1_model, random_stable_qbd, solved


class TestMMatrix:
    def test_mm1_value(self):
        triple, _ = solved(mm1_model(gamma=2.2))
        M = m_matrix(triple.R, triple.G)
        assert M[0, 0] == pytest.approx(6.0, abs=1e-10)

    def test_fixed_point_and_series(self, rng):
        model = random_stable_qbd(rng, 3)
        triple, _ = solved(model)
        M = m_matrix(triple.R, triple.G)
        assert np.allclose(M, np.eye(3) + triple.R @ M @ triple.G,
                           atol=1e-12)
        brute = np.zeros((3, 3))
        Rn = np.eye(3)
        Gn = np.eye(3)
        for _ in range(400):
            brute += Rn @ Gn
            Rn = Rn @ triple.R
            Gn = Gn @ triple.G
        assert np.allclose(M, brute, atol=1e-10)

    def test_rejects_non_contractive_pair(self):
        with pytest.raises(NotContractive):
            m_matrix(np.eye(2), np.eye(2))


class TestWBlocks:
    def test_diagonal_series(self, rng):
        model = random_stable_qbd(rng, 2)
        triple, _ = solved(model)
        NU = np.linalg.inv(np.eye(2) - triple.U)
        expected = NU + triple.G @ NU @ triple.R
        assert np.allclose(w_block(triple, 2, 2), expected, atol=1e-12)

    def test_off_diagonal_factorization(self, rng):
        model = random_stable_qbd(rng, 2)
        triple, _ = solved(model)
        W22 = w_block(triple, 2, 2)
        assert np.allclose(w_block(triple, 4, 2), np.linalg.matrix_power(
            triple.G, 2) @ W22, atol=1e-12)
        assert np.allclose(w_block(triple, 2, 5), W22 @ np.linalg.matrix_power(
            triple.R, 3), atol=1e-12)

    def test_rejects_boundary_indices(self, rng):
        triple, _ = solved(mm1_model())
        with pytest.raises(DomainError):
            w_block(triple, 0, 1)
        with pytest.raises(DomainError):
            w_block(triple, 1, 0)


class TestDeviationBlocks:
    def test_mm1_corner(self):
        model = mm1_model(gamma=2.2)
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        assert blocks.d_block(0, 0)[0, 0] == pytest.approx(55 / 6, abs=1e-9)
        assert blocks.alpha(0)[0] == pytest.approx(55 / 6, abs=1e-9)

    def test_matches_truncation_oracle(self, rng):
        model = random_stable_qbd(rng, 2, boundary="free")
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        chain = truncate(model, 250)
        D_hat = group_inverse(chain.P)
        for n in range(4):
            for k in range(4):
                assert np.allclose(blocks.d_block(n, k),
                                   chain.block(D_hat, n, k), atol=1e-7)

    def test_k_blocks_reject_negative_indices(self, rng):
        model = random_stable_qbd(rng, 1)
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        with pytest.raises(DomainError):
            blocks.k_block(-1, 0)

    def test_module_level_wrappers(self, rng):
        model = random_stable_qbd(rng, 1)
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        assert deviation_block(model, triple, dist, 1, 2) == pytest.approx(
            blocks.d_block(1, 2))
        assert alpha_row(model, triple, dist, 1) == pytest.approx(
            blocks.alpha(1))


class TestDeviationIdentities:
    def test_defining_equation_windowed(self, rng):
        # ((I - P) D)_nk = I[n = k] - 1 pi_k on interior and boundary rows
        model = random_stable_qbd(rng, 2)
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        W = 5
        D = {(n, k): blocks.d_block(n, k)
             for n in range(W + 2) for k in range(W)}
        for k in range(W):
            target = lambda n: (np.eye(2) if n == k else np.zeros((2, 2))) \
                - np.outer(np.ones(2), blocks.pi_n(k))
            row0 = D[0, k] - model.B @ D[0, k] - model.A1 @ D[1, k]
            assert np.allclose(row0, target(0), atol=1e-8)
            for n in range(1, W):
                row = (D[n, k] - model.A_minus1 @ D[n - 1, k]
                       - model.A0 @ D[n, k] - model.A1 @ D[n + 1, k])
                assert np.allclose(row, target(n), atol=1e-8)

    def test_pi_projection_and_row_sums(self, rng):
        model = random_stable_qbd(rng, 2)
        triple, dist = solved(model)
        blocks = DeviationBlocks(model, triple, dist)
        # pi D = 0, summed adaptively until the geometric tail is spent
        for k in range(3):
            col = sum(blocks.pi_n(n) @ blocks.d_block(n, k)
                      for n in range(220))
            assert np.max(np.abs(col)) <= 1e-8
        # D 1 = 0 likewise, in k
        for n in range(3):
            row = sum(blocks.d_block(n, k) @ np.ones(2) for k in range(220))
            assert np.max(np.abs(row)) <= 1e-6


class TestApplyDeviation:
    def test_matches_poisson_solution(self, rng):
        model = random_stable_qbd(rng, 2)
        triple, dist = solved(model)
        g = RewardSpec(explicit=rng.uniform(-1, 1, (2, 2)),
                       tail_c0=rng.uniform(-1, 1, 2),
                       tail_c1=rng.uniform(0.2, 1.0, 2))
        hs = apply_deviation(model, triple, dist, g, 4)
        sol = solve_poisson(model, triple, dist, g, 4, normalization="pi")
        for n, h in enumerate(hs):
            assert np.allclose(h, sol.h_level(n), atol=1e-12)

    def test_equals_windowed_matrix_action(self, rng):
        # h_n = sum_k D_nk gbar_k, the matrix acting on the centered reward
        model = random_stable_qbd(rng, 1)
        triple, dist = solved(model)
        g = RewardSpec.queue_length(1)
        gbar = center(g, omega(dist, g))
        blocks = DeviationBlocks(model, triple, dist)
        hs = apply_deviation(model, triple, dist, g, 2)
        for n in range(3):
            acc = sum(blocks.d_block(n, k) @ gbar.level(k)
                      for k in range(400))
            assert acc[0] == pytest.approx(hs[n][0], abs=1e-6)
