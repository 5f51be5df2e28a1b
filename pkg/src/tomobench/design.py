"""Measurement designs: Pauli bases, random bases, and the covariant stream.

A design is an ordered list of orthonormal bases (settings).  Setting s is a
d x d unitary whose columns are the basis vectors; outcome o of setting s has
projector |b_o^s><b_o^s|.  Settings and outcomes are enumerated in a fixed
lexicographic order so datasets and design matrices are bit-compatible across
runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._linalg import hermitize, matrix_from_json, matrix_to_json
from .errors import InvalidDimensionError

PAULI_LETTERS = "xyz"

# Columns are the +1 and -1 eigenvectors, phase fixed so the first nonzero
# component is real positive.
_EIGENBASES = {
    "x": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "z": np.eye(2, dtype=complex),
}

_SETTING_CHUNK = 256


class MeasurementDesign:
    """An ordered collection of measurement bases for a d-dimensional system."""

    def __init__(
        self,
        d: int,
        kind: str,
        settings: np.ndarray | None = None,
        n: int | None = None,
        seed: int | None = None,
        words: list[str] | None = None,
        validate: bool = True,
    ):
        self.d = int(d)
        self.kind = kind
        self.n = n
        self.seed = seed
        self._words = words
        self._settings = settings
        self._design_matrix = None
        self._projector_stack = None
        if validate and settings is not None:
            _check_unitary_stack(settings)

    @property
    def k(self) -> int:
        if self._words is not None:
            return len(self._words)
        if self._settings is not None:
            return self._settings.shape[0]
        raise InvalidDimensionError("abstract covariant stream has no setting count")

    @property
    def is_abstract_stream(self) -> bool:
        return self._settings is None and self._words is None

    def setting_unitary(self, s: int) -> np.ndarray:
        if self._settings is not None:
            return self._settings[s]
        return _pauli_setting(self._words[s])

    @property
    def settings(self) -> np.ndarray:
        """All setting unitaries, shape (k, d, d).  Materialized lazily."""
        if self._settings is None:
            if self._words is None:
                raise InvalidDimensionError("covariant stream has no settings")
            self._settings = np.stack([_pauli_setting(w) for w in self._words])
        return self._settings

    def iter_setting_chunks(self):
        """Yield (start, unitaries) chunks without materializing everything."""
        k = self.k
        for start in range(0, k, _SETTING_CHUNK):
            stop = min(start + _SETTING_CHUNK, k)
            if self._settings is not None:
                yield start, self._settings[start:stop]
            else:
                yield start, np.stack(
                    [_pauli_setting(self._words[s]) for s in range(start, stop)]
                )

    def projectors(self, s: int) -> np.ndarray:
        """The d rank-1 outcome projectors for setting s, shape (d, d, d)."""
        u = self.setting_unitary(s)
        return np.einsum("io,jo->oij", u, u.conj())

    def projector_stack(self) -> np.ndarray:
        """All projectors grouped by setting, shape (k*d, d, d).  Cached."""
        if self._projector_stack is None:
            out = np.empty((self.k * self.d, self.d, self.d), dtype=complex)
            for start, block in self.iter_setting_chunks():
                p = np.einsum("sio,sjo->soij", block, block.conj())
                out[start * self.d : (start + block.shape[0]) * self.d] = p.reshape(
                    -1, self.d, self.d
                )
            self._projector_stack = out
        return self._projector_stack

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Outcome probabilities Tr(rho P_o^s) as a (d, k) table."""
        rho = np.asarray(rho, dtype=complex)
        out = np.empty((self.d, self.k))
        for start, block in self.iter_setting_chunks():
            p = np.einsum("sio,ij,sjo->so", block.conj(), rho, block).real
            out[:, start : start + block.shape[0]] = p.T
        return out

    def projector_average(self, weights: np.ndarray) -> np.ndarray:
        """Weighted projector sum (1/k) sum_{o,s} w[o,s] P_o^s.

        With w = empirical frequencies this is the measure-and-prepare average
        whose channel inversion gives the least squares estimate.
        """
        w = np.asarray(weights, dtype=float)
        acc = np.zeros((self.d, self.d), dtype=complex)
        for start, block in self.iter_setting_chunks():
            ws = w[:, start : start + block.shape[0]].T
            acc += np.einsum("sio,so,sjo->ij", block, ws, block.conj())
        return hermitize(acc / self.k)

    def to_json(self) -> dict:
        obj = {"d": self.d, "kind": self.kind}
        if self.seed is not None:
            obj["seed"] = self.seed
        if self.n is not None:
            obj["n"] = self.n
        if self.kind == "pauli":
            obj["settings"] = [matrix_to_json(self.setting_unitary(s)) for s in range(self.k)]
        elif self._settings is not None:
            obj["settings"] = [matrix_to_json(u) for u in self._settings]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "MeasurementDesign":
        kind = obj["kind"]
        if kind == "pauli" and "settings" not in obj:
            return pauli_design(int(obj["n"]))
        settings = (
            np.stack([matrix_from_json(m) for m in obj["settings"]])
            if "settings" in obj
            else None
        )
        return cls(
            d=int(obj["d"]),
            kind=kind,
            settings=settings,
            n=obj.get("n"),
            seed=obj.get("seed"),
        )


@dataclass(frozen=True)
class DesignMatrix:
    """Vectorized design: x[(o|s), i] = Tr(tau_i P_o^s) over a Hermitian basis."""

    x: np.ndarray
    basis: np.ndarray

    @property
    def n_params(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ReductionMaps:
    """Isometries removing the per-setting normalization and the trace.

    v_block is the d x (d-1) Helmert-style orthonormal complement of the
    all-ones vector, identical for every setting; the coordinate embedding J
    drops the last (identity) component of the operator basis.
    """

    d: int
    k: int
    v_block: np.ndarray

    def reduce_frequencies(self, f: np.ndarray) -> np.ndarray:
        blocks = np.asarray(f, dtype=float).reshape(self.k, self.d)
        return (blocks @ self.v_block).ravel()

    def reduce_design_rows(self, x: np.ndarray) -> np.ndarray:
        """V* X: per-setting row reduction keeping all columns."""
        kd, p = x.shape
        blocks = x.reshape(self.k, self.d, p)
        reduced = np.einsum("de,sdp->sep", self.v_block.conj(), blocks)
        return reduced.reshape(self.k * (self.d - 1), p)

    def reduce_design(self, x: np.ndarray) -> np.ndarray:
        """V* X J for a full (k d, d^2) design matrix."""
        return self.reduce_design_rows(x)[:, : x.shape[1] - 1]

    def reduce_covariance(self, blocks: np.ndarray) -> np.ndarray:
        """Per-setting V_s* Omega_s V_s, shape (k, d-1, d-1)."""
        return np.einsum(
            "de,sdf,fg->seg", self.v_block.conj(), np.asarray(blocks), self.v_block
        )

    def dense_v(self) -> np.ndarray:
        """Explicit block-diagonal (k d, k (d-1)) isometry, for tests."""
        v = np.zeros((self.k * self.d, self.k * (self.d - 1)))
        for s in range(self.k):
            v[s * self.d : (s + 1) * self.d, s * (self.d - 1) : (s + 1) * (self.d - 1)] = (
                self.v_block
            )
        return v


def pauli_design(n: int) -> MeasurementDesign:
    """All 3^n Pauli-word bases for n qubits, words in lexicographic order.

    Outcomes follow the lexicographic order of o in {+1, -1}^n, so outcome
    index 0 is the all +1 record and the last qubit varies fastest.
    """
    if not 1 <= n <= 8:
        raise InvalidDimensionError(f"qubit count must be in [1, 8], got {n}")
    words = ["".join(w) for w in _product_words(n)]
    d = 2**n
    settings = None
    if d * d * len(words) <= 3 * 10**7:
        settings = np.stack([_pauli_setting(w) for w in words])
    return MeasurementDesign(
        d=d, kind="pauli", settings=settings, n=n, words=words, validate=False
    )


def _product_words(n: int) -> list[tuple[str, ...]]:
    words = [()]
    for _ in range(n):
        words = [w + (c,) for w in words for c in PAULI_LETTERS]
    return words


@lru_cache(maxsize=64)
def _pauli_setting(word: str) -> np.ndarray:
    u = np.array([[1.0 + 0j]])
    for c in word:
        u = np.kron(u, _EIGENBASES[c])
    return u


def random_bases_design(d: int, k: int, rng: np.random.Generator) -> MeasurementDesign:
    """k independent Haar-random orthonormal bases."""
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    if k < 1:
        raise InvalidDimensionError(f"setting count must be >= 1, got {k}")
    from .qstate import haar_unitaries

    settings = haar_unitaries(d, k, rng)
    return MeasurementDesign(d=d, kind="random", settings=settings, validate=False)


def covariant_stream(d: int) -> MeasurementDesign:
    """The abstract covariant measurement: a fresh Haar basis per shot."""
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    return MeasurementDesign(d=d, kind="covariant", settings=None, validate=False)


def operator_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of M(C^d) with the identity component last.

    For d = 2^n this is the normalized Pauli tensor basis sigma_w / sqrt(d);
    otherwise a generalized Gell-Mann basis.  In both cases tau_{d^2} = I/sqrt(d)
    and all other elements are traceless.
    """
    n = d.bit_length() - 1
    if d == 2**n:
        return _pauli_operator_basis(n)
    return _gell_mann_basis(d)


@lru_cache(maxsize=16)
def _pauli_operator_basis(n: int) -> np.ndarray:
    d = 2**n
    sigma = {
        "i": np.eye(2, dtype=complex),
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    words = [()]
    for _ in range(n):
        words = [w + (c,) for w in words for c in "ixyz"]
    # identity word comes first lexicographically; move it to the end
    words = words[1:] + words[:1]
    basis = np.empty((d * d, d, d), dtype=complex)
    for a, w in enumerate(words):
        m = np.array([[1.0 + 0j]])
        for c in w:
            m = np.kron(m, sigma[c])
        basis[a] = m / np.sqrt(d)
    return basis


def _gell_mann_basis(d: int) -> np.ndarray:
    mats = []
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1 / np.sqrt(2)
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = -1j / np.sqrt(2)
            m[j, i] = 1j / np.sqrt(2)
            mats.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1.0
        m[l, l] = -l
        mats.append(m / np.sqrt(l * (l + 1)))
    mats.append(np.eye(d, dtype=complex) / np.sqrt(d))
    return np.stack(mats)


def design_matrix(design: MeasurementDesign) -> DesignMatrix:
    """The (k d) x d^2 regression matrix of the design, cached per design."""
    if design._design_matrix is None:
        basis = operator_basis(design.d)
        rows = np.empty((design.k * design.d, design.d * design.d))
        for start, block in design.iter_setting_chunks():
            # Tr(tau_a P_o^s) with P = |b_o><b_o|: conj(b)^T tau b
            vals = np.einsum("sio,aij,sjo->soa", block.conj(), basis, block).real
            rows[start * design.d : (start + block.shape[0]) * design.d] = vals.reshape(
                -1, design.d * design.d
            )
        design._design_matrix = DesignMatrix(x=rows, basis=basis)
    return design._design_matrix


def vectorize(mat: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Coefficients of a Hermitian matrix in an orthonormal Hermitian basis."""
    return np.einsum("aij,ji->a", basis, np.asarray(mat, dtype=complex)).real


def unvectorize(beta: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return hermitize(np.tensordot(np.asarray(beta, dtype=float), basis, axes=1))


def channel_apply(kind: str, mat: np.ndarray) -> np.ndarray:
    """Apply the measure-and-prepare channel of a 2-design or Pauli design."""
    z = np.asarray(mat, dtype=complex)
    d = z.shape[0]
    if kind == "two_design":
        return (z + z.trace() * np.eye(d)) / (d + 1)
    if kind == "pauli":
        return _pauli_channel(z, invert=False)
    raise InvalidDimensionError(f"unknown channel kind {kind!r}")


def channel_invert(kind: str, mat: np.ndarray) -> np.ndarray:
    """Invert the measure-and-prepare channel (exact linear inverse)."""
    z = np.asarray(mat, dtype=complex)
    d = z.shape[0]
    if kind == "two_design":
        return (d + 1) * z - z.trace() * np.eye(d)
    if kind == "pauli":
        return _pauli_channel(z, invert=True)
    raise InvalidDimensionError(f"unknown channel kind {kind!r}")


def _pauli_channel(z: np.ndarray, invert: bool) -> np.ndarray:
    d = z.shape[0]
    n = d.bit_length() - 1
    if 2**n != d:
        raise InvalidDimensionError(f"Pauli channel needs d = 2^n, got {d}")
    out = z
    for ell in range(n):
        out = _qubit_depolarize(out, n, ell, invert)
    return out


def _qubit_depolarize(z: np.ndarray, n: int, ell: int, invert: bool) -> np.ndarray:
    d = 2**n
    t = z.reshape((2,) * (2 * n))
    tr = np.trace(t, axis1=ell, axis2=n + ell)
    emb = np.tensordot(tr, np.eye(2), axes=0)
    emb = np.moveaxis(emb, (2 * n - 2, 2 * n - 1), (ell, n + ell))
    if invert:
        out = 3.0 * t - emb
    else:
        out = t / 3.0 + emb / 3.0
    return out.reshape(d, d)


def reduction_maps(design: MeasurementDesign) -> ReductionMaps:
    """Helmert-style per-setting isometry and the trace-dropping embedding."""
    return ReductionMaps(d=design.d, k=design.k, v_block=helmert_complement(design.d))


def helmert_complement(d: int) -> np.ndarray:
    """Deterministic d x (d-1) orthonormal complement of the all-ones vector.

    Column j is (1, ..., 1, -j, 0, ..., 0)/sqrt(j (j+1)) with j leading ones,
    so the first entry of every column is positive.
    """
    v = np.zeros((d, d - 1))
    for j in range(1, d):
        v[:j, j - 1] = 1.0
        v[j, j - 1] = -float(j)
        v[:, j - 1] /= np.sqrt(j * (j + 1))
    return v


def _check_unitary_stack(settings: np.ndarray) -> None:
    u = np.asarray(settings)
    gram = np.einsum("sij,sik->sjk", u.conj(), u)
    eye = np.eye(u.shape[1])
    defect = np.max(np.abs(gram - eye))
    if defect > 1e-10:
        raise InvalidDimensionError(f"settings are not unitary (defect {defect:.2e})")
