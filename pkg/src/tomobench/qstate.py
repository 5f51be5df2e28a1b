"""Density-matrix types, Haar-random states, and the spectrum thresholding loop.

The thresholding loop (``project_spectrum``) zeroes the smallest eigenvalue
below the noise level and redistributes the deficit equally over the
survivors, repeating until the smallest survivor clears the level.  With a
zero level this is exactly the Euclidean projection onto the probability
simplex, which is verified against a brute-force oracle in the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._linalg import eigh_desc, herm_defect, hermitize
from .errors import (
    ContractViolationError,
    DomainError,
    InvalidDimensionError,
    InvalidRankError,
    NormalizationError,
)

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL_STATE = 1e-10
TRACE_TOL_ESTIMATE = 1e-8
EIGENVALUE_FLOOR = -1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """A d x d Hermitian, positive semidefinite, trace-one matrix.

    Eigenvalues within ``EIGENVALUE_FLOOR`` of zero are clamped to zero on
    construction (round-off from projections); anything more negative is
    rejected.
    """

    dim: int
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "DensityMatrix":
        a = np.asarray(a, dtype=complex)
        d = _check_square(a)
        if herm_defect(a) > HERMITIAN_TOL:
            raise ContractViolationError("matrix is not Hermitian to 1e-12")
        tr = a.trace().real
        if abs(tr - 1.0) > TRACE_TOL_STATE:
            raise NormalizationError(f"trace {tr} is not 1 within 1e-10")
        a = hermitize(a)
        w = np.linalg.eigvalsh(a)
        if w[0] < EIGENVALUE_FLOOR:
            raise ContractViolationError(
                f"smallest eigenvalue {w[0]:.3e} below -1e-10; not a state"
            )
        if w[0] < 0.0:
            # clamp round-off negatives and renormalize the trace
            w, v = eigh_desc(a)
            w = np.clip(w, 0.0, None)
            w /= w.sum()
            a = (v * w) @ v.conj().T
            a = hermitize(a)
        return cls(dim=d, matrix=a)

    def spectrum(self) -> "Spectrum":
        return Spectrum.from_matrix(self.matrix)

    def to_json(self) -> dict:
        from ._linalg import matrix_to_json

        return matrix_to_json(self.matrix)


@dataclass(frozen=True)
class HermitianEstimate:
    """A trace-one selfadjoint matrix; may have negative eigenvalues."""

    dim: int
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "HermitianEstimate":
        a = np.asarray(a, dtype=complex)
        d = _check_square(a)
        if herm_defect(a) > HERMITIAN_TOL:
            raise ContractViolationError("matrix is not Hermitian to 1e-12")
        tr = a.trace().real
        if abs(tr - 1.0) > TRACE_TOL_ESTIMATE:
            raise NormalizationError(f"trace {tr} is not 1 within 1e-8")
        return cls(dim=d, matrix=hermitize(a))

    def spectrum(self) -> "Spectrum":
        return Spectrum.from_matrix(self.matrix)

    def to_json(self) -> dict:
        from ._linalg import matrix_to_json

        return matrix_to_json(self.matrix)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending with the matching eigenvector basis."""

    values: np.ndarray
    basis: np.ndarray

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "Spectrum":
        a = np.asarray(a, dtype=complex)
        w, v = eigh_desc(a)
        return cls(values=w, basis=v)

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        w = self.values if values is None else np.asarray(values, dtype=float)
        return hermitize((self.basis * w) @ self.basis.conj().T)


@dataclass(frozen=True)
class BlockDecomposition:
    """Scaled error blocks of an estimate around a diagonal rank-r state."""

    r: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def reassemble(self, rho_r: np.ndarray, n_samples: float) -> np.ndarray:
        d = rho_r.shape[0]
        err = np.zeros((d, d), dtype=complex)
        r = self.r
        err[:r, :r] = self.a
        err[:r, r:] = self.b
        err[r:, :r] = self.b.conj().T
        err[r:, r:] = self.c
        return rho_r + err / np.sqrt(n_samples)


def _check_square(a: np.ndarray) -> int:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {a.shape}")
    return int(a.shape[0])


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d unitary from the Haar measure (QR of a complex Ginibre).

    The R-factor phases are absorbed into Q so the distribution is exactly
    Haar rather than QR-convention dependent.
    """
    return haar_unitaries(d, 1, rng)[0]


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Batched Haar unitaries, shape (count, d, d)."""
    if d < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")
    z = rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    q *= (diag / np.abs(diag))[:, None, :]
    return q


def random_rank_r_state(d: int, r: int, rng: np.random.Generator) -> DensityMatrix:
    """Rank-r state with equal eigenvalues 1/r and a Haar-random eigenbasis."""
    if d < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")
    if r < 1 or r > d:
        raise InvalidRankError(f"rank must satisfy 1 <= r <= {d}, got {r}")
    u = haar_unitary(d, rng)
    cols = u[:, :r]
    rho = cols @ cols.conj().T / r
    return DensityMatrix.from_matrix(hermitize(rho))


def equal_eigenvalue_spectrum(d: int, r: int) -> np.ndarray:
    """The vector (1/r, ..., 1/r, 0, ..., 0) of length d."""
    if r < 1 or r > d:
        raise InvalidRankError(f"rank must satisfy 1 <= r <= {d}, got {r}")
    w = np.zeros(d)
    w[:r] = 1.0 / r
    return w


def project_spectrum(values: np.ndarray, nu: float) -> np.ndarray:
    """Threshold a descending trace-one eigenvalue vector at noise level nu.

    Implements the zero-and-shift loop literally: while the smallest
    surviving entry is below nu, set it to zero and shift the survivors
    equally so they sum to one again.
    """
    lam = np.asarray(values, dtype=float).copy()
    d = lam.size
    if d == 0:
        raise InvalidDimensionError("empty spectrum")
    if np.any(np.diff(lam) > 1e-12):
        raise ContractViolationError("eigenvalues must be sorted descending")
    if abs(lam.sum() - 1.0) > 1e-6:
        raise NormalizationError(f"eigenvalues sum to {lam.sum()}, expected 1")
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"threshold must be in [0, 1], got {nu}")
    for p in range(1, d + 1):
        keep = d - p  # survivors after this round
        if lam[keep] >= nu:
            break
        lam[keep] = 0.0
        if keep > 0:
            lam[:keep] += (1.0 - lam[:keep].sum()) / keep
    out = lam
    nonzero = out[out > 0.0]
    if nu > 0.0 and nonzero.size and nonzero.min() < nu - 1e-12:
        # the printed loop stopped with a survivor below nu; record it
        log.warning(
            "thresholding fixed point left a survivor %.3e below nu=%.3e",
            nonzero.min(),
            nu,
        )
    return out


def project_to_states(est: HermitianEstimate | np.ndarray, nu: float) -> DensityMatrix:
    """Project a trace-one Hermitian matrix onto states by spectrum thresholding.

    For nu = 0 this is the Frobenius-nearest density matrix.
    """
    a = est.matrix if isinstance(est, HermitianEstimate) else np.asarray(est)
    spec = Spectrum.from_matrix(a)
    lam = project_spectrum(spec.values, nu)
    return DensityMatrix.from_matrix(spec.reconstruct(lam))


def block_decompose(
    est: HermitianEstimate | np.ndarray,
    rho_r: DensityMatrix | np.ndarray,
    n_samples: float,
) -> BlockDecomposition:
    """Split sqrt(N) * (estimate - rho_r) into the A, B, C blocks.

    The reference state must be diagonal with spectrum (1/r, ..., 1/r, 0, ...);
    the block boundary is its rank.
    """
    e = est.matrix if isinstance(est, HermitianEstimate) else np.asarray(est)
    rho = rho_r.matrix if isinstance(rho_r, DensityMatrix) else np.asarray(rho_r)
    off = rho - np.diag(np.diagonal(rho))
    if np.max(np.abs(off)) > 1e-12:
        raise ContractViolationError("reference state must be diagonal")
    diag = np.diagonal(rho).real
    r = int(np.count_nonzero(diag > 1e-12))
    if r == 0:
        raise InvalidRankError("reference state has zero rank")
    err = np.sqrt(n_samples) * (e - rho)
    return BlockDecomposition(r=r, a=err[:r, :r], b=err[:r, r:], c=err[r:, r:])
