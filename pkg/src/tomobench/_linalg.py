"""Small dense linear-algebra helpers used throughout the package."""

from __future__ import annotations

import numpy as np


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (a + a^*) / 2."""
    return (a + a.conj().T) / 2


def herm_defect(a: np.ndarray) -> float:
    """Largest absolute deviation of a from its Hermitian part."""
    return float(np.max(np.abs(a - a.conj().T))) / 2


def eigh_desc(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Inputs are symmetrized before the solve to absorb round-off; eigenvector
    order inside a degenerate cluster is whatever the solver returns.
    """
    w, v = np.linalg.eigh(hermitize(a))
    return w[::-1].copy(), v[:, ::-1].copy()


def matrix_to_json(a: np.ndarray) -> dict:
    """Serialize a square complex matrix as {dim, re, im} with row-major data."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    return {
        "dim": int(d),
        "re": [float(x) for x in a.real.ravel()],
        "im": [float(x) for x in a.imag.ravel()],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    d = int(obj["dim"])
    re = np.asarray(obj["re"], dtype=float).reshape(d, d)
    im = np.asarray(obj["im"], dtype=float).reshape(d, d)
    return re + 1j * im
