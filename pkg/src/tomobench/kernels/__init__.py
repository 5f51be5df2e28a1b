"""Backend selection and the shared driver for covariant-measurement sampling.

A covariant-POVM outcome for a state with spectral weights lambda is drawn
exactly, without materializing a Haar basis per shot: pick an eigenvector
index j with probability lambda_j, then draw a uniform sphere vector whose
squared amplitude on coordinate j is size-biased (an extra exponential
weight).  Both steps follow from writing the POVM density d <psi|rho|psi> as
a lambda-mixture of |<v_j|psi>|^2-tilted uniform distributions.

The compiled backend is used when the extension built; otherwise the numpy
implementation.  Both consume the identical random stream, so results agree
up to floating-point summation order.
"""

from __future__ import annotations

import numpy as np

from ._covariant_np import CovariantAccumulator as _NumpyAccumulator

try:  # pragma: no cover - depends on the build environment
    from ._covariant_cy import CovariantAccumulator as _CythonAccumulator

    BACKEND = "cython"
except ImportError:  # pragma: no cover
    _CythonAccumulator = None
    BACKEND = "numpy"

DEFAULT_CHUNK = 65536


def available_backends() -> list[str]:
    out = ["numpy"]
    if _CythonAccumulator is not None:
        out.append("cython")
    return out


def get_accumulator(d: int, backend: str | None = None):
    name = backend or BACKEND
    if name == "numpy":
        return _NumpyAccumulator(d)
    if name == "cython":
        if _CythonAccumulator is None:
            raise RuntimeError("compiled kernel is not available")
        return _CythonAccumulator(d)
    raise ValueError(f"unknown backend {name!r}")


def covariant_outcome_sum(
    eigenvalues: np.ndarray,
    n_shots: int,
    rng: np.random.Generator,
    backend: str | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Sum of n outcome projectors of the covariant POVM, in the eigenbasis.

    The state is diag(eigenvalues); the returned (d, d) Hermitian matrix is
    sum_i |psi_i><psi_i| over the realized outcomes.  Deterministic given the
    generator state and independent of the backend up to round-off.
    """
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise ValueError("eigenvalues must have positive sum")
    lam = lam / total
    cum = np.cumsum(lam)
    cum[-1] = 1.0
    d = lam.size
    acc = get_accumulator(d, backend)
    remaining = int(n_shots)
    while remaining > 0:
        c = min(chunk, remaining)
        u = rng.random(c)
        z = rng.standard_normal((c, 2, d))
        # |z_j|^2 of a standard complex Gaussian entry is Exp with mean 2, so
        # the extra size-bias weight must carry the same scale
        e = 2.0 * rng.standard_exponential(c)
        idx = np.searchsorted(cum, u, side="right")
        acc.add(z, e, idx)
        remaining -= c
    return acc.finish()
