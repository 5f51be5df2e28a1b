"""Dataset simulation, frequencies, covariant sampling, file round-trips."""

import numpy as np
import pytest

from tomobench.design import pauli_design, random_bases_design
from tomobench.errors import ContractViolationError
from tomobench.estimators import multinomial_covariance
from tomobench.qstate import DensityMatrix, random_rank_r_state
from tomobench.sampling import (
    CountsDataset,
    covariant_projector_mean,
    covariant_samples,
    frequencies,
    load_dataset,
    save_dataset,
    simulate_counts,
)


class TestSimulateCounts:
    def test_deterministic_outcome(self):
        rho = DensityMatrix.from_matrix(np.diag([1.0, 0.0]).astype(complex))
        ds = simulate_counts(rho, pauli_design(1), 100, np.random.default_rng(0))
        assert tuple(ds.counts[:, 2]) == (100, 0)  # setting z

    def test_mixed_state_x_frequencies(self):
        rho = DensityMatrix.from_matrix(np.eye(2, dtype=complex) / 2)
        ds = simulate_counts(rho, pauli_design(1), 100_000, np.random.default_rng(1))
        f = frequencies(ds).table()
        assert abs(f[0, 0] - 0.5) < 0.01  # setting x

    def test_column_sums(self):
        rng = np.random.default_rng(2)
        rho = random_rank_r_state(4, 2, rng)
        ds = simulate_counts(rho, pauli_design(2), 37, rng)
        assert np.all(ds.counts.sum(axis=0) == 37)

    def test_column_sum_validation(self):
        with pytest.raises(ContractViolationError):
            CountsDataset(
                counts=np.array([[1, 2], [1, 1]]), m=2, design=pauli_design(1)
            )

    def test_frequencies_are_counts_over_m(self):
        rng = np.random.default_rng(3)
        rho = random_rank_r_state(2, 1, rng)
        ds = simulate_counts(rho, pauli_design(1), 50, rng)
        f = frequencies(ds)
        assert np.allclose(f.table(), ds.counts / 50)
        assert np.allclose(f.f.reshape(3, 2).sum(axis=1), 1.0)

    def test_unbiasedness(self):
        rng = np.random.default_rng(4)
        des = pauli_design(2)
        rho = random_rank_r_state(4, 4, rng)
        p = des.probabilities(rho.matrix)
        m, reps = 200, 200
        acc = np.zeros_like(p)
        for _ in range(reps):
            acc += frequencies(simulate_counts(rho, des, m, rng)).table()
        mean = acc / reps
        stderr = np.sqrt(np.clip(p * (1 - p), 1e-12, None) / (m * reps))
        assert np.all(np.abs(mean - p) < 4 * stderr + 1e-9)

    def test_multinomial_covariance_matches_formula(self):
        # empirical covariance of f(.|s) vs p_i delta_ij - p_i p_j at m=100, d=4
        rng = np.random.default_rng(2024)
        des = pauli_design(2)
        rho = random_rank_r_state(4, 4, rng)
        s = 3
        p = des.probabilities(rho.matrix)[:, s]
        m, trials = 100, 10_000
        fs = rng.multinomial(m, p, size=trials) / m
        emp = np.cov(fs.T, ddof=1) * m
        expect = multinomial_covariance(p[:, None])[0]
        assert np.max(np.abs(emp - expect) / np.abs(expect)) < 0.10


class TestCovariantSamples:
    def test_columns_sum_to_one(self):
        rho = random_rank_r_state(3, 2, np.random.default_rng(5))
        ds = covariant_samples(rho, 64, np.random.default_rng(6))
        assert ds.m == 1
        assert np.all(ds.counts.sum(axis=0) == 1)
        assert ds.design.kind == "covariant"
        assert ds.design.k == 64

    def test_deterministic(self):
        rho = random_rank_r_state(2, 1, np.random.default_rng(7))
        a = covariant_samples(rho, 100, np.random.default_rng(8))
        b = covariant_samples(rho, 100, np.random.default_rng(8))
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.design.settings, b.design.settings)

    def test_pure_state_outcome_probability_moment(self):
        # E Tr(P rho) over realized outcomes is 2/(d+1) for a pure state
        rng = np.random.default_rng(9)
        rho = random_rank_r_state(2, 1, rng)
        n = 100_000
        ds = covariant_samples(rho, n, rng)
        outcome = ds.counts.argmax(axis=0)
        cols = ds.design.settings[np.arange(n), :, outcome]
        vals = np.einsum("si,ij,sj->s", cols.conj(), rho.matrix, cols).real
        assert abs(vals.mean() - 2.0 / 3.0) < 0.01

    def test_projector_mean_agrees_with_reference(self):
        # fused kernel path and materialized-basis path target the same mean
        rng = np.random.default_rng(10)
        rho = random_rank_r_state(4, 2, rng)
        n = 40_000
        pm = covariant_projector_mean(rho, n, np.random.default_rng(11))
        ds = covariant_samples(rho, n, np.random.default_rng(12))
        outcome = ds.counts.argmax(axis=0)
        cols = ds.design.settings[np.arange(n), :, outcome]
        pref = np.einsum("si,sj->ij", cols, cols.conj()) / n
        expect = (rho.matrix + np.eye(4)) / 5.0
        tol = 5.0 / np.sqrt(n)
        assert np.max(np.abs(pm - expect)) < tol
        assert np.max(np.abs(pref - expect)) < tol


class TestDatasetFiles:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(13)
        rho = random_rank_r_state(2, 2, rng)
        des = random_bases_design(2, 3, rng)
        ds = simulate_counts(rho, des, 25, rng)
        path = tmp_path / "counts.csv"
        save_dataset(ds, path, seed=13)
        back = load_dataset(path)
        assert np.array_equal(back.counts, ds.counts)
        assert back.m == 25
        assert np.max(np.abs(back.design.settings - des.settings)) < 1e-15
        assert path.with_suffix(".json").exists()
