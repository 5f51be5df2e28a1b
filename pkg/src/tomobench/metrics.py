"""Error functions, local parametrisations, Fisher information, weights."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._linalg import eigh_desc, hermitize
from .design import MeasurementDesign
from .errors import ContractViolationError, DomainError
from .qstate import DensityMatrix, HermitianEstimate

log = logging.getLogger(__name__)

PSD_TOL = -1e-10
FISHER_PROB_CUTOFF = 1e-12


def _mat(x) -> np.ndarray:
    if isinstance(x, (DensityMatrix, HermitianEstimate)):
        return x.matrix
    return np.asarray(x, dtype=complex)


def frobenius_sq(a, b) -> float:
    """Squared Frobenius distance Tr[(a - b)^2]."""
    diff = _mat(a) - _mat(b)
    return float(np.sum(np.abs(diff) ** 2))


def trace_norm(a, b) -> float:
    """Trace norm of the Hermitian difference."""
    w = np.linalg.eigvalsh(hermitize(_mat(a) - _mat(b)))
    return float(np.sum(np.abs(w)))


def operator_norm(a, b) -> float:
    """Largest absolute eigenvalue of the Hermitian difference."""
    w = np.linalg.eigvalsh(hermitize(_mat(a) - _mat(b)))
    return float(np.max(np.abs(w)))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = eigh_desc(a)
    if w[-1] < PSD_TOL:
        raise DomainError(f"matrix has eigenvalue {w[-1]:.3e} below -1e-10")
    # zero out round-off residue of exact zeros so null directions stay null
    cutoff = a.shape[0] * np.finfo(float).eps * max(float(w[0]), 1.0)
    w = np.where(w < cutoff, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def bures_sq(rho_hat, rho) -> float:
    """Squared Bures distance 2 (1 - Tr sqrt(sqrt(rho) rho_hat sqrt(rho))).

    Evaluated as 2 (1 - || sqrt(rho_hat) sqrt(rho) ||_1), which is the same
    quantity in a manifestly symmetric form.
    """
    sa = _psd_sqrt(_mat(rho_hat))
    sb = _psd_sqrt(_mat(rho))
    fid_root = np.linalg.svd(sa @ sb, compute_uv=False).sum()
    return float(max(0.0, 2.0 * (1.0 - fid_root)))


def hellinger_sq(lam_hat: np.ndarray, lam: np.ndarray) -> float:
    """Squared Hellinger distance between two descending spectra."""
    a = np.asarray(lam_hat, dtype=float)
    b = np.asarray(lam, dtype=float)
    for v in (a, b):
        if np.any(np.diff(v) > 1e-12):
            raise ContractViolationError("spectra must be sorted descending")
        if v.min() < PSD_TOL:
            raise DomainError("spectra must be nonnegative")
    return float(max(0.0, 2.0 * (1.0 - np.sqrt(np.clip(a, 0, None) * np.clip(b, 0, None)).sum())))


@dataclass(frozen=True)
class LocalParametrisation:
    """Coordinates for states near a reference state, in its eigenbasis.

    kind "full_rank" uses all matrix elements (off-diagonal real parts, then
    imaginary parts, then the trace-adjusted diagonal).  kind "rank_r" keeps
    only the top-left block and its coupling to the kernel (blocks A and B).
    kind "operator_basis" uses the traceless part of the orthonormal
    Hermitian operator basis, matching the regression vectorization.
    """

    kind: str
    state: DensityMatrix
    r: int | None = None

    @cached_property
    def _eigenbasis(self) -> np.ndarray:
        m = self.state.matrix
        if np.max(np.abs(m - np.diag(np.diagonal(m)))) < 1e-12:
            return np.eye(self.state.dim, dtype=complex)
        return self.state.spectrum().basis

    @cached_property
    def basis_matrices(self) -> np.ndarray:
        """Stack of derivative directions d rho / d theta_a, shape (p, d, d)."""
        d = self.state.dim
        if self.kind == "operator_basis":
            from .design import operator_basis

            return operator_basis(d)[:-1]
        if self.kind == "full_rank":
            mats = _full_rank_directions(d)
        elif self.kind == "rank_r":
            if not self.r or not 1 <= self.r <= d:
                raise DomainError("rank_r parametrisation needs a valid rank")
            mats = _rank_r_directions(d, self.r)
        else:
            raise DomainError(f"unknown parametrisation kind {self.kind!r}")
        v = self._eigenbasis
        out = np.stack(mats)
        return np.einsum("ij,ajk,lk->ail", v, out, v.conj())

    @property
    def n_params(self) -> int:
        return self.basis_matrices.shape[0]

    def perturb(self, theta: np.ndarray) -> np.ndarray:
        """The matrix of the state displaced by coordinates theta."""
        delta = np.tensordot(np.asarray(theta, dtype=float), self.basis_matrices, axes=1)
        return self.state.matrix + delta


def _full_rank_directions(d: int) -> list[np.ndarray]:
    re, im, diag = [], [], []
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1.0
            re.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1j
            m[j, i] = -1j
            im.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[l, l] = 1.0
        m[0, 0] = -1.0
        diag.append(m)
    return re + im + diag


def _rank_r_directions(d: int, r: int) -> list[np.ndarray]:
    re, im, diag = [], [], []
    for i in range(r):
        for j in range(i + 1, r):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1.0
            re.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1j
            m[j, i] = -1j
            im.append(m)
    for l in range(1, r):
        m = np.zeros((d, d), dtype=complex)
        m[l, l] = 1.0
        m[0, 0] = -1.0
        diag.append(m)
    coupling = []
    for i in range(r):
        for j in range(r, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1.0
            coupling.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1j
            m[j, i] = -1j
            coupling.append(m)
    return re + im + diag + coupling


def fisher_information(
    rho: DensityMatrix,
    design: MeasurementDesign,
    parametrisation: LocalParametrisation,
) -> np.ndarray:
    """Average classical Fisher information per sample over the settings.

    Outcomes with probability at most 1e-12 are dropped from the sum; a
    singular result is flagged in the log but returned as-is.
    """
    p = design.probabilities(_mat(rho)).T.ravel()  # setting-major, matches rows
    dirs = parametrisation.basis_matrices
    grads = np.empty((p.size, dirs.shape[0]))
    pos = 0
    for start, block in design.iter_setting_chunks():
        g = np.einsum("sio,aij,sjo->soa", block.conj(), dirs, block).real
        cnt = block.shape[0] * design.d
        grads[pos : pos + cnt] = g.reshape(cnt, -1)
        pos += cnt
    keep = p > FISHER_PROB_CUTOFF
    gk = grads[keep]
    info = (gk.T / p[keep]) @ gk / design.k
    info = (info + info.T) / 2
    if np.linalg.matrix_rank(info) < info.shape[0]:
        log.warning("Fisher information is singular (under-complete design)")
    return info


def weight_matrix(metric: str, parametrisation: LocalParametrisation) -> np.ndarray:
    """Weight matrix of a locally quadratic loss in the given coordinates."""
    if metric == "frobenius":
        dirs = parametrisation.basis_matrices
        g = np.einsum("aij,bji->ab", dirs, dirs).real
        return (g + g.T) / 2
    if metric == "bures_mixed":
        state = parametrisation.state
        d = state.dim
        if np.max(np.abs(state.matrix - np.eye(d) / d)) > 1e-9:
            raise DomainError("bures_mixed weight is defined only at the maximally mixed state")
        if parametrisation.kind != "full_rank":
            raise DomainError("bures_mixed weight needs the full_rank parametrisation")
        p = d * d - 1
        n_off = d * d - d
        f = np.zeros((p, p))
        f[:n_off, :n_off] = 2.0 * d * np.eye(n_off)
        f[n_off:, n_off:] = d * (np.eye(d - 1) + np.ones((d - 1, d - 1)))
        return f / 4.0
    raise DomainError(f"unsupported metric {metric!r} for weight_matrix")


def predicted_risk(info: np.ndarray, weight: np.ndarray, n_samples: float) -> float:
    """Asymptotic risk Tr(I^-1 G) / N of an efficient estimator."""
    try:
        solved = np.linalg.solve(info, weight)
    except np.linalg.LinAlgError:
        warnings.warn("singular Fisher information; using pseudo-inverse", stacklevel=2)
        solved = np.linalg.pinv(info) @ weight
    return float(np.trace(solved).real / n_samples)
