"""Numpy reference backend for covariant-measurement sampling.

Each sample is a covariant POVM outcome vector psi for the state
diag(eigenvalues).  The accumulator receives raw Gaussian blocks plus the
size-bias draws and adds sum_i psi_i psi_i^dagger to its running total.
"""

from __future__ import annotations

import numpy as np


class CovariantAccumulator:
    def __init__(self, d: int):
        self.d = d
        self._sum = np.zeros((d, d), dtype=complex)

    def add(self, z: np.ndarray, e: np.ndarray, idx: np.ndarray) -> None:
        """Consume one chunk of raw draws.

        z has shape (c, 2, d) holding real and imaginary normal components,
        e is the extra exponential weight for the size-biased coordinate and
        idx the eigenvector index it applies to.
        """
        re = z[:, 0, :]
        im = z[:, 1, :]
        rows = np.arange(re.shape[0])
        base = np.einsum("cd,cd->c", re, re) + np.einsum("cd,cd->c", im, im)
        nj = re[rows, idx] ** 2 + im[rows, idx] ** 2
        scale = np.sqrt((nj + e) / np.maximum(nj, 1e-300))
        re[rows, idx] *= scale
        im[rows, idx] *= scale
        # scaling coordinate idx changes its weight from nj to nj + e
        w = 1.0 / (base + e)
        b = (re + 1j * im) * np.sqrt(w)[:, None]
        self._sum += b.T @ b.conj()

    def finish(self) -> np.ndarray:
        return (self._sum + self._sum.conj().T) / 2
