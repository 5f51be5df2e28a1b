"""Count datasets: multinomial simulation, frequencies, covariant sampling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from ._linalg import hermitize
from .design import MeasurementDesign
from .errors import ContractViolationError, StateValidityError
from .qstate import DensityMatrix, Spectrum

PROB_CLAMP = -1e-12
PROB_HARD_LIMIT = -1e-9


@dataclass(frozen=True)
class CountsDataset:
    """A d x k table of outcome counts with m repetitions per setting."""

    counts: np.ndarray
    m: int
    design: MeasurementDesign

    def __post_init__(self):
        sums = self.counts.sum(axis=0)
        if np.any(sums != self.m):
            raise ContractViolationError("each setting column must sum to m")

    @property
    def d(self) -> int:
        return self.counts.shape[0]

    @property
    def k(self) -> int:
        return self.counts.shape[1]

    @property
    def n_total(self) -> int:
        return self.m * self.k


@dataclass(frozen=True)
class FrequencyVector:
    """Empirical frequencies, flattened setting-major: f[s*d + o]."""

    f: np.ndarray
    d: int
    k: int

    def table(self) -> np.ndarray:
        """The (d, k) layout matching CountsDataset."""
        return self.f.reshape(self.k, self.d).T


def outcome_probabilities(rho: np.ndarray, design: MeasurementDesign) -> np.ndarray:
    """Validated (d, k) probability table, round-off negatives clamped."""
    p = design.probabilities(rho)
    if p.min() < PROB_HARD_LIMIT:
        raise StateValidityError(f"probability {p.min():.3e} below -1e-9")
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=0, keepdims=True)
    return p


def simulate_counts(
    rho: DensityMatrix,
    design: MeasurementDesign,
    m: int,
    rng: np.random.Generator,
) -> CountsDataset:
    """Independent Multinomial(m, p(.|s)) draws per setting."""
    p = outcome_probabilities(_mat(rho), design)
    counts = rng.multinomial(m, p.T).T
    return CountsDataset(counts=counts, m=m, design=design)


def frequencies(dataset: CountsDataset) -> FrequencyVector:
    f = (dataset.counts.astype(float) / dataset.m).T.ravel()
    return FrequencyVector(f=f, d=dataset.d, k=dataset.k)


def covariant_samples(
    rho: DensityMatrix, n_shots: int, rng: np.random.Generator
) -> CountsDataset:
    """n single-shot measurements, each in a fresh Haar-random basis.

    Returns the counts with the realized bases attached as a covariant-kind
    design (k = n settings, m = 1).  This is the reference implementation;
    use covariant_projector_mean for large n where only the least squares
    estimate is needed.
    """
    from .qstate import haar_unitaries

    if n_shots < 1:
        raise ContractViolationError("need at least one shot")
    d = _mat(rho).shape[0]
    settings = haar_unitaries(d, n_shots, rng)
    p = np.einsum("sio,ij,sjo->so", settings.conj(), _mat(rho), settings).real
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random(n_shots)
    outcomes = (p.cumsum(axis=1) < u[:, None]).sum(axis=1)
    np.clip(outcomes, 0, d - 1, out=outcomes)
    counts = np.zeros((d, n_shots), dtype=np.int64)
    counts[outcomes, np.arange(n_shots)] = 1
    design = MeasurementDesign(d=d, kind="covariant", settings=settings, validate=False)
    return CountsDataset(counts=counts, m=1, design=design)


def covariant_projector_mean(
    rho: DensityMatrix | np.ndarray,
    n_shots: int,
    rng: np.random.Generator,
    backend: str | None = None,
) -> np.ndarray:
    """Average outcome projector (1/n) sum_i P_i of the covariant stream.

    Statistically equivalent to covariant_samples followed by averaging the
    realized outcome projectors, but runs in O(n d^2) without materializing
    bases.  Sampling happens in the eigenbasis of the state and is rotated
    back at the end.
    """
    spec = Spectrum.from_matrix(_mat(rho))
    s = kernels.covariant_outcome_sum(spec.values, n_shots, rng, backend=backend)
    v = spec.basis
    return hermitize(v @ s @ v.conj().T) / n_shots


def save_dataset(dataset: CountsDataset, path: str | Path, seed: int | None = None) -> None:
    """Write counts as CSV (setting,outcome,count) plus a JSON sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "outcome", "count"])
        for s in range(dataset.k):
            for o in range(dataset.d):
                writer.writerow([s, o, int(dataset.counts[o, s])])
    sidecar = {
        "m": dataset.m,
        "d": dataset.d,
        "k": dataset.k,
        "design": dataset.design.to_json(),
    }
    if seed is not None:
        sidecar["seed"] = seed
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def load_dataset(path: str | Path) -> CountsDataset:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    design = MeasurementDesign.from_json(sidecar["design"])
    counts = np.zeros((sidecar["d"], sidecar["k"]), dtype=np.int64)
    with path.open() as fh:
        for row in csv.DictReader(fh):
            counts[int(row["outcome"]), int(row["setting"])] = int(row["count"])
    return CountsDataset(counts=counts, m=int(sidecar["m"]), design=design)


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else np.asarray(x)
