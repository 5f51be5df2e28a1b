"""State types, Haar sampling, and the spectrum thresholding loop."""

import numpy as np
import pytest
from oracles import simplex_projection_oracle, spectrum_grid

from tomobench._linalg import matrix_from_json, matrix_to_json
from tomobench.errors import (
    ContractViolationError,
    DomainError,
    InvalidDimensionError,
    InvalidRankError,
    NormalizationError,
)
from tomobench.qstate import (
    BlockDecomposition,
    DensityMatrix,
    HermitianEstimate,
    Spectrum,
    block_decompose,
    equal_eigenvalue_spectrum,
    haar_unitaries,
    haar_unitary,
    project_spectrum,
    project_to_states,
    random_rank_r_state,
)


class TestHaar:
    def test_d1_is_phase(self):
        u = haar_unitary(1, np.random.default_rng(0))
        assert abs(abs(u[0, 0]) - 1.0) < 1e-12

    def test_unitarity_d4(self):
        u = haar_unitary(4, np.random.default_rng(3))
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10

    def test_invalid_dimension(self):
        with pytest.raises(InvalidDimensionError):
            haar_unitary(0, np.random.default_rng(0))

    def test_first_entry_moment_d2(self):
        us = haar_unitaries(2, 100_000, np.random.default_rng(7))
        mean = np.mean(np.abs(us[:, 0, 0]) ** 2)
        assert abs(mean - 0.5) < 0.01

    @pytest.mark.parametrize("d", [2, 3])
    def test_entry_moments_five_sigma(self, d):
        n = 100_000
        us = haar_unitaries(d, n, np.random.default_rng(11))
        means = np.mean(np.abs(us) ** 2, axis=0)
        # |U_ij|^2 ~ Beta(1, d-1)
        sigma = np.sqrt((d - 1) / (d**2 * (d + 1)) / n)
        assert np.max(np.abs(means - 1.0 / d)) < 5 * sigma


class TestRandomState:
    def test_full_rank_d2_is_mixed(self):
        rho = random_rank_r_state(2, 2, np.random.default_rng(0))
        assert np.max(np.abs(rho.matrix - np.eye(2) / 2)) < 1e-12

    def test_rank1_purity(self):
        rho = random_rank_r_state(4, 1, np.random.default_rng(1))
        purity = np.trace(rho.matrix @ rho.matrix).real
        assert abs(purity - 1.0) < 1e-10

    def test_equal_eigenvalues_d8_r3(self):
        rho = random_rank_r_state(8, 3, np.random.default_rng(2))
        w = np.sort(np.linalg.eigvalsh(rho.matrix))[::-1]
        expect = equal_eigenvalue_spectrum(8, 3)
        assert np.max(np.abs(w - expect)) < 1e-10

    @pytest.mark.parametrize("r", [0, 5])
    def test_invalid_rank(self, r):
        with pytest.raises(InvalidRankError):
            random_rank_r_state(4, r, np.random.default_rng(0))


class TestProjectSpectrum:
    def test_hand_trace_one_round(self):
        out = project_spectrum(np.array([0.6, 0.5, -0.1]), 0.0)
        assert np.allclose(out, [0.55, 0.45, 0.0], atol=1e-12)

    def test_already_valid_unchanged(self):
        out = project_spectrum(np.array([0.7, 0.3]), 0.0)
        assert np.allclose(out, [0.7, 0.3], atol=1e-15)

    def test_hand_trace_two_rounds(self):
        out = project_spectrum(np.array([1.2, -0.1, -0.1]), 0.0)
        assert np.allclose(out, [1.0, 0.0, 0.0], atol=1e-12)

    def test_unsorted_rejected(self):
        with pytest.raises(ContractViolationError):
            project_spectrum(np.array([0.3, 0.7]), 0.0)

    def test_bad_sum_rejected(self):
        with pytest.raises(NormalizationError):
            project_spectrum(np.array([0.7, 0.2]), 0.0)

    def test_nu_out_of_range(self):
        with pytest.raises(DomainError):
            project_spectrum(np.array([0.7, 0.3]), 1.5)

    def test_matches_simplex_oracle_on_grid(self):
        for v in spectrum_grid():
            got = project_spectrum(v, 0.0)
            want = simplex_projection_oracle(v)
            assert np.max(np.abs(got - want)) < 1e-9, v

    def test_sum_one_many_random_inputs(self):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            n = int(rng.integers(2, 9))
            w = np.sort(rng.normal(size=n))[::-1]
            w += (1.0 - w.sum()) / n
            nu = float(rng.random() * 0.3)
            out = project_spectrum(w, nu)
            assert abs(out.sum() - 1.0) < 1e-10
            assert np.all(np.diff(out) <= 1e-12)

    def test_positive_threshold_zeroes_small_values(self):
        out = project_spectrum(np.array([0.8, 0.15, 0.05]), 0.1)
        assert out[2] == 0.0
        assert abs(out.sum() - 1.0) < 1e-12
        nonzero = out[out > 0]
        assert nonzero.min() >= 0.1


class TestProjectToStates:
    def test_psd_input_unchanged(self):
        rho = random_rank_r_state(4, 4, np.random.default_rng(0))
        est = HermitianEstimate.from_matrix(rho.matrix)
        out = project_to_states(est, 0.0)
        assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-12

    def test_diagonal_case(self):
        est = HermitianEstimate.from_matrix(np.diag([0.6, 0.5, -0.1]).astype(complex))
        out = project_to_states(est, 0.0)
        assert np.allclose(np.diag(out.matrix).real, [0.55, 0.45, 0.0], atol=1e-12)

    def test_nearest_point_against_random_candidates(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        herm = (z + z.conj().T) / 2
        herm += (1.0 - herm.trace().real) * np.eye(4) / 4
        est = HermitianEstimate.from_matrix(herm)
        proj = project_to_states(est, 0.0)
        base = np.sum(np.abs(proj.matrix - est.matrix) ** 2)
        for _ in range(100):
            sigma = random_rank_r_state(4, int(rng.integers(1, 5)), rng)
            alt = np.sum(np.abs(sigma.matrix - est.matrix) ** 2)
            assert base <= alt + 1e-12


class TestBlockDecompose:
    def test_zero_error(self):
        rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        est = HermitianEstimate.from_matrix(rho)
        blocks = block_decompose(est, rho, 100.0)
        assert np.max(np.abs(blocks.a)) == 0.0
        assert np.max(np.abs(blocks.b)) == 0.0
        assert np.max(np.abs(blocks.c)) == 0.0

    def test_d2_definition(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        n = 400.0
        delta = np.array([[0.01, 0.02 - 0.01j], [0.02 + 0.01j, -0.01]])
        est = HermitianEstimate.from_matrix(rho + delta / np.sqrt(n))
        blocks = block_decompose(est, rho, n)
        assert blocks.a.shape == (1, 1)
        assert abs(blocks.a[0, 0] - 0.01) < 1e-12
        assert abs(blocks.b[0, 0] - (0.02 - 0.01j)) < 1e-12
        assert abs(blocks.c[0, 0] - (-0.01)) < 1e-12

    def test_reassembly(self):
        rng = np.random.default_rng(4)
        rho = np.diag(equal_eigenvalue_spectrum(6, 2)).astype(complex)
        z = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        herm = (z + z.conj().T) / 200
        herm -= herm.trace() * np.eye(6) / 6
        est = HermitianEstimate.from_matrix(rho + herm)
        blocks = block_decompose(est, rho, 1e4)
        back = blocks.reassemble(rho, 1e4)
        assert np.max(np.abs(back - est.matrix)) < 1e-12

    def test_non_diagonal_reference_rejected(self):
        rho = np.array([[0.5, 0.1], [0.1, 0.5]], dtype=complex)
        est = HermitianEstimate.from_matrix(np.eye(2, dtype=complex) / 2)
        with pytest.raises(ContractViolationError):
            block_decompose(est, rho, 10.0)


class TestTypes:
    def test_density_matrix_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.2], [0.1, 0.5]], dtype=complex)
        with pytest.raises(ContractViolationError):
            DensityMatrix.from_matrix(m)

    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(NormalizationError):
            DensityMatrix.from_matrix(np.diag([0.6, 0.6]).astype(complex))

    def test_density_matrix_rejects_negative_eigenvalue(self):
        with pytest.raises(ContractViolationError):
            DensityMatrix.from_matrix(np.diag([1.1, -0.1]).astype(complex))

    def test_density_matrix_clamps_roundoff(self):
        m = np.diag([1.0 + 5e-11, -5e-11]).astype(complex)
        rho = DensityMatrix.from_matrix(m)
        w = np.linalg.eigvalsh(rho.matrix)
        assert w.min() >= 0.0
        assert abs(np.trace(rho.matrix).real - 1.0) < 1e-10

    def test_hermitian_estimate_allows_negative_eigs(self):
        est = HermitianEstimate.from_matrix(np.diag([1.3, -0.3]).astype(complex))
        assert est.dim == 2

    def test_spectrum_reconstruction(self):
        rng = np.random.default_rng(12)
        z = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        herm = (z + z.conj().T) / 2
        spec = Spectrum.from_matrix(herm)
        assert np.all(np.diff(spec.values) <= 1e-12)
        assert np.max(np.abs(spec.basis.conj().T @ spec.basis - np.eye(5))) < 1e-10
        assert np.max(np.abs(spec.reconstruct() - herm)) < 1e-9

    def test_matrix_json_roundtrip(self):
        rng = np.random.default_rng(13)
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        back = matrix_from_json(matrix_to_json(m))
        assert np.max(np.abs(back - m)) == 0.0
