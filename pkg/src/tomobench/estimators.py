"""The eight tomography estimators and their shared machinery.

LS and GLS solve (weighted) linear regressions and can leave the state space;
PLS/TLS/TGLS re-project their spectra; posLS/posGLS minimize the (weighted)
prediction error over states by accelerated projected gradient descent; ML
maximizes the multinomial likelihood with a diluted fixed-point iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._linalg import hermitize
from .design import (
    MeasurementDesign,
    design_matrix,
    channel_invert,
    reduction_maps,
    unvectorize,
    vectorize,
)
from .errors import (
    ContractViolationError,
    DomainError,
    NotInformationallyCompleteError,
)
from .metrics import bures_sq, frobenius_sq, operator_norm, trace_norm
from .qstate import (
    DensityMatrix,
    HermitianEstimate,
    Spectrum,
    project_spectrum,
    project_to_states,
)
from .sampling import CountsDataset, FrequencyVector, frequencies

log = logging.getLogger(__name__)

ML_PROB_FLOOR = 1e-14


@dataclass(frozen=True)
class EstimatorConfig:
    """Shared optimizer and cross-validation settings."""

    tol: float = 1e-10
    max_iter: int = 20000
    cv_grid: tuple[float, ...] = tuple(np.linspace(0.0, 1.0, 21))
    cv_folds: int = 5
    floor_factor: float = 10.0
    power_tol: float = 1e-6

    def probability_floor(self, m: int, d: int) -> float:
        return 1.0 / (self.floor_factor * m * d)


DEFAULT_CONFIG = EstimatorConfig()


@dataclass(frozen=True)
class CovarianceModel:
    """Per-setting multinomial covariance blocks and their reduced form."""

    blocks: np.ndarray
    reduced: np.ndarray
    floor: float | None = None


@dataclass(frozen=True)
class EstimateResult:
    """Outcome of an iterative estimator."""

    state: DensityMatrix
    iterations: int
    converged: bool
    objective: float | None = None
    history: list[float] | None = None


@dataclass(frozen=True)
class ThresholdedResult:
    """Outcome of a data-driven thresholding estimator."""

    state: DensityMatrix
    threshold_constant: float
    threshold: float


# ---------------------------------------------------------------------------
# linear estimators


def estimate_ls(
    freqs: FrequencyVector, design: MeasurementDesign, method: str = "auto"
) -> HermitianEstimate:
    """Least squares estimate: invert the regression f = X beta + noise.

    Pauli designs use the exact depolarizing-channel inverse (algebraically
    identical to the normal equations); realized covariant streams invert the
    2-design channel of the average outcome projector; random-basis designs
    solve the normal equations explicitly.
    """
    if method == "auto":
        method = "normal" if design.kind == "random" else "channel"
    if method == "channel":
        pmean = design.projector_average(freqs.table())
        kind = "pauli" if design.kind == "pauli" else "two_design"
        est = channel_invert(kind, pmean)
    elif method == "normal":
        dm = design_matrix(design)
        gram = dm.x.T @ dm.x
        w = np.linalg.eigvalsh(gram)
        if w[0] <= w[-1] * 1e-12:
            raise NotInformationallyCompleteError(
                "X^T X is singular; the design does not identify the state"
            )
        beta = np.linalg.solve(gram, dm.x.T @ freqs.f)
        est = unvectorize(beta, dm.basis)
    else:
        raise DomainError(f"unknown method {method!r}")
    return HermitianEstimate.from_matrix(est)


def ls_from_projector_mean(pmean: np.ndarray, kind: str = "two_design") -> HermitianEstimate:
    """Channel-inverted least squares from a precomputed projector average."""
    return HermitianEstimate.from_matrix(channel_invert(kind, pmean))


def estimate_pls(freqs: FrequencyVector, design: MeasurementDesign) -> DensityMatrix:
    """Projected least squares: Frobenius-nearest state to the LS estimate."""
    return project_to_states(estimate_ls(freqs, design), 0.0)


def multinomial_covariance(p: np.ndarray) -> np.ndarray:
    """Blocks p_i delta_ij - p_i p_j from a (d, k) probability table."""
    d, k = p.shape
    blocks = np.zeros((k, d, d))
    blocks[:, np.arange(d), np.arange(d)] = p.T
    blocks -= p.T[:, :, None] * p.T[:, None, :]
    return blocks


def covariance_estimate(
    freqs: FrequencyVector,
    design: MeasurementDesign,
    m: int,
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> CovarianceModel:
    """Plug-in noise covariance from the projected least squares estimate.

    Estimated probabilities are floored at 1/(floor_factor m d) and
    renormalized per setting, which keeps the reduced covariance invertible
    even when the estimate has exact zeros.
    """
    pls = estimate_pls(freqs, design)
    p = design.probabilities(pls.matrix)
    floor = cfg.probability_floor(m, design.d)
    p = np.maximum(p, floor)
    p /= p.sum(axis=0, keepdims=True)
    blocks = multinomial_covariance(p)
    reduced = reduction_maps(design).reduce_covariance(blocks)
    return CovarianceModel(blocks=blocks, reduced=reduced, floor=floor)


def exact_covariance(rho: DensityMatrix, design: MeasurementDesign) -> CovarianceModel:
    """Noise covariance from the true outcome probabilities (no flooring)."""
    p = design.probabilities(rho.matrix)
    blocks = multinomial_covariance(p)
    reduced = reduction_maps(design).reduce_covariance(blocks)
    return CovarianceModel(blocks=blocks, reduced=reduced, floor=None)


def estimate_gls(
    freqs: FrequencyVector, design: MeasurementDesign, cov: CovarianceModel
) -> HermitianEstimate:
    """Generalised least squares in the reduced (singularity-free) coordinates."""
    red = reduction_maps(design)
    dm = design_matrix(design)
    d, k = design.d, design.k
    p = d * d - 1
    xt = red.reduce_design(dm.x).reshape(k, d - 1, p)
    ft = red.reduce_frequencies(freqs.f).reshape(k, d - 1)
    stack = np.concatenate([xt, ft[:, :, None]], axis=2)
    try:
        solved = np.linalg.solve(cov.reduced, stack)
    except np.linalg.LinAlgError as exc:
        raise NotInformationallyCompleteError(f"singular reduced covariance: {exc}")
    a = np.einsum("sdp,sdq->pq", xt, solved[:, :, :p])
    rhs = np.einsum("sdp,sd->p", xt, solved[:, :, p])
    try:
        beta_t = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NotInformationallyCompleteError(f"singular reduced design: {exc}")
    beta = np.append(beta_t, 1.0 / math.sqrt(d))
    return HermitianEstimate.from_matrix(unvectorize(beta, dm.basis))


def gls_information(design: MeasurementDesign, cov: CovarianceModel) -> np.ndarray:
    """Per-sample information X~* Omega~^-1 X~ / k of the GLS estimator."""
    red = reduction_maps(design)
    dm = design_matrix(design)
    d, k = design.d, design.k
    p = d * d - 1
    xt = red.reduce_design(dm.x).reshape(k, d - 1, p)
    solved = np.linalg.solve(cov.reduced, xt)
    return np.einsum("sdp,sdq->pq", xt, solved) / k


# ---------------------------------------------------------------------------
# thresholding


def threshold_value(c: float, m: int, d: int) -> float:
    """Noise threshold nu = C sqrt((4/m) log(2 d))."""
    return c * math.sqrt(4.0 * math.log(2.0 * d) / m)


def pool_batches(batches: list[CountsDataset]) -> CountsDataset:
    design = batches[0].design
    counts = sum(b.counts for b in batches)
    m = sum(b.m for b in batches)
    return CountsDataset(counts=counts, m=m, design=design)


def _base_estimate(
    freqs: FrequencyVector,
    design: MeasurementDesign,
    base: str,
    m: int,
    cfg: EstimatorConfig,
) -> HermitianEstimate:
    if base == "ls":
        return estimate_ls(freqs, design)
    if base == "gls":
        cov = covariance_estimate(freqs, design, m, cfg)
        return estimate_gls(freqs, design, cov)
    raise DomainError(f"unknown base estimator {base!r}")


_CV_METRICS = {
    "frobenius": frobenius_sq,
    "trace": trace_norm,
    "operator": operator_norm,
}


def cross_validate_threshold(
    batches: list[CountsDataset],
    design: MeasurementDesign,
    grid,
    metric: str,
    base: str = "ls",
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> float:
    """Data-driven threshold constant.

    For Frobenius/trace/operator metrics: hold out each batch, threshold the
    estimate built from the rest, and compare against the held-out LS
    estimate; the grid point with the smallest mean discrepancy wins (ties go
    to the smallest constant).  For the Bures metric the thresholded pooled
    estimate is compared against the pooled ML estimate instead, since Bures
    is undefined on non-positive LS estimates.
    """
    grid = np.asarray(grid, dtype=float)
    m_total = sum(b.m for b in batches)
    d = design.d
    if metric == "bures":
        pooled = pool_batches(batches)
        f_pool = frequencies(pooled)
        base_est = _base_estimate(f_pool, design, base, m_total, cfg)
        spec = Spectrum.from_matrix(base_est.matrix)
        ml_state = estimate_ml(pooled, design, cfg).state
        disc = np.array(
            [
                bures_sq(_threshold_spectrum(spec, threshold_value(c, m_total, d)), ml_state)
                for c in grid
            ]
        )
        return float(grid[int(np.argmin(disc))])
    if metric not in _CV_METRICS:
        raise DomainError(f"unsupported CV metric {metric!r}")
    dist = _CV_METRICS[metric]
    disc = np.zeros(grid.size)
    for j, held_out in enumerate(batches):
        rest = [b for i, b in enumerate(batches) if i != j]
        pooled_rest = pool_batches(rest)
        f_rest = frequencies(pooled_rest)
        base_est = _base_estimate(f_rest, design, base, pooled_rest.m, cfg)
        spec = Spectrum.from_matrix(base_est.matrix)
        ls_held = estimate_ls(frequencies(held_out), design)
        for gi, c in enumerate(grid):
            state = _threshold_spectrum(spec, threshold_value(c, m_total, d))
            disc[gi] += dist(state, ls_held)
    return float(grid[int(np.argmin(disc))])


def _threshold_spectrum(spec: Spectrum, nu: float) -> DensityMatrix:
    lam = project_spectrum(spec.values, nu)
    return DensityMatrix.from_matrix(spec.reconstruct(lam))


def estimate_tls(
    batches: list[CountsDataset],
    design: MeasurementDesign,
    metric: str = "frobenius",
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> ThresholdedResult:
    """Thresholded least squares with the cross-validated constant."""
    return _thresholded(batches, design, metric, "ls", cfg)


def estimate_tgls(
    batches: list[CountsDataset],
    design: MeasurementDesign,
    metric: str = "frobenius",
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> ThresholdedResult:
    """Thresholded generalised least squares with the cross-validated constant."""
    return _thresholded(batches, design, metric, "gls", cfg)


def _thresholded(batches, design, metric, base, cfg) -> ThresholdedResult:
    if len(batches) != cfg.cv_folds:
        raise ContractViolationError(
            f"need exactly {cfg.cv_folds} batches, got {len(batches)}"
        )
    c = cross_validate_threshold(batches, design, cfg.cv_grid, metric, base, cfg)
    pooled = pool_batches(batches)
    f_pool = frequencies(pooled)
    base_est = _base_estimate(f_pool, design, base, pooled.m, cfg)
    nu = threshold_value(c, pooled.m, design.d)
    state = project_to_states(base_est, nu)
    return ThresholdedResult(state=state, threshold_constant=c, threshold=nu)


# ---------------------------------------------------------------------------
# positive least squares (projected gradient descent on the state set)


def estimate_posls(
    freqs: FrequencyVector,
    design: MeasurementDesign,
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> EstimateResult:
    """Minimize the prediction error || M(tau) - f ||^2 over density matrices."""
    dm = design_matrix(design)
    a = dm.x[:, :-1]
    b = freqs.f - dm.x[:, -1] / math.sqrt(design.d)
    return _projected_quadratic(a, b, dm.basis, design.d, cfg)


def estimate_posgls(
    freqs: FrequencyVector,
    design: MeasurementDesign,
    cov: CovarianceModel,
    cfg: EstimatorConfig = DEFAULT_CONFIG,
) -> EstimateResult:
    """Minimize the covariance-whitened prediction error over density matrices."""
    red = reduction_maps(design)
    dm = design_matrix(design)
    d, k = design.d, design.k
    rows = red.reduce_design_rows(dm.x).reshape(k, d - 1, d * d)
    ft = red.reduce_frequencies(freqs.f).reshape(k, d - 1)
    chol = np.linalg.cholesky(cov.reduced)
    rows_w = np.linalg.solve(chol, rows)
    ft_w = np.linalg.solve(chol, ft[:, :, None])[:, :, 0]
    a_full = rows_w.reshape(k * (d - 1), d * d)
    a = a_full[:, :-1]
    b = ft_w.ravel() - a_full[:, -1] / math.sqrt(d)
    return _projected_quadratic(a, b, dm.basis, design.d, cfg)


def _projected_quadratic(
    a: np.ndarray, b: np.ndarray, basis: np.ndarray, d: int, cfg: EstimatorConfig
) -> EstimateResult:
    """Accelerated projected gradient descent for min ||a x - b||^2 over states.

    Step size 1/L with L from power iteration on the Hessian 2 a^T a; the
    objective is kept non-increasing by falling back to a plain projected
    step (with L doubling on rare line-search failures) whenever the
    accelerated candidate overshoots.
    """
    p = a.shape[1]
    tail = 1.0 / math.sqrt(d)

    def project(x: np.ndarray) -> np.ndarray:
        mat = unvectorize(np.append(x, tail), basis)
        state = project_to_states(HermitianEstimate.from_matrix(mat), 0.0)
        return vectorize(state.matrix, basis)[:-1]

    def objective(x: np.ndarray) -> float:
        r = a @ x - b
        return float(r @ r)

    def gradient(x: np.ndarray) -> np.ndarray:
        return 2.0 * (a.T @ (a @ x - b))

    lips = _power_iteration_l(a, cfg.power_tol)
    x = project(np.zeros(p))
    f_x = objective(x)
    y = x
    t = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        cand = project(y - gradient(y) / lips)
        f_cand = objective(cand)
        if f_cand > f_x:
            # monotone restart: plain projected step from the last iterate
            cand = project(x - gradient(x) / lips)
            f_cand = objective(cand)
            t = 1.0
            y = cand
            if f_cand > f_x:
                lips *= 2.0
                continue
        else:
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = cand + ((t - 1.0) / t_next) * (cand - x)
            t = t_next
        decrease = f_x - f_cand
        x = cand
        f_x = f_cand
        if decrease < cfg.tol:
            # a small decrease alone can be a momentum ripple; accept the
            # stop only once the gradient mapping is small as well
            gm = lips * np.linalg.norm(x - project(x - gradient(x) / lips))
            if gm < 1e-6:
                converged = True
                break
    if not converged:
        log.warning("projected descent hit the iteration cap (%d)", cfg.max_iter)
    state = DensityMatrix.from_matrix(unvectorize(np.append(x, tail), basis))
    return EstimateResult(
        state=state, iterations=iterations, converged=converged, objective=f_x
    )


def _power_iteration_l(a: np.ndarray, rel_tol: float) -> float:
    """Largest eigenvalue of 2 a^T a by power iteration."""
    p = a.shape[1]
    v = np.full(p, 1.0 / math.sqrt(p))
    lam = 0.0
    for _ in range(1000):
        w = 2.0 * (a.T @ (a @ v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 1.0
        lam_new = float(v @ w)
        v = w / norm
        if lam > 0 and abs(lam_new - lam) <= rel_tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # small safety margin so 1/L remains a descent step
    return lam * (1.0 + 10.0 * rel_tol)


# ---------------------------------------------------------------------------
# maximum likelihood


def log_likelihood(tau, dataset: CountsDataset) -> float:
    """Multinomial log-likelihood sum N(o|s) log p_tau(o|s), constants dropped.

    Terms with zero counts are omitted; a zero probability with a positive
    count gives -inf.
    """
    mat = tau.matrix if isinstance(tau, (DensityMatrix, HermitianEstimate)) else tau
    p = dataset.design.probabilities(np.asarray(mat))
    mask = dataset.counts > 0
    pm = p[mask]
    if np.any(pm <= 0.0):
        return float("-inf")
    return float(np.sum(dataset.counts[mask] * np.log(pm)))


def estimate_ml(
    dataset: CountsDataset,
    design: MeasurementDesign | None = None,
    cfg: EstimatorConfig = DEFAULT_CONFIG,
    record_history: bool = False,
) -> EstimateResult:
    """Maximum likelihood by the diluted R rho R fixed-point iteration.

    Starting from the maximally mixed state, each step forms
    R = (1/N) sum N(o|s)/p(o|s) P_o^s and proposes
    (I + eps (R - I)) tau (I + eps (R - I)) / trace, halving eps from 1 until
    the log-likelihood does not decrease.  Stops when the gain drops below
    the configured tolerance.
    """
    design = design or dataset.design
    d = design.d
    projs = design.projector_stack()
    counts = dataset.counts.T.ravel().astype(float)
    n_total = counts.sum()
    if n_total <= 0:
        raise ContractViolationError("dataset is empty")
    observed = counts > 0
    eye = np.eye(d)

    def probs(mat: np.ndarray) -> np.ndarray:
        return np.einsum("pij,ji->p", projs, mat).real

    def loglik(p: np.ndarray) -> float:
        pm = p[observed]
        if np.any(pm <= 0.0):
            return float("-inf")
        return float(np.sum(counts[observed] * np.log(pm)))

    tau = eye.astype(complex) / d
    p = probs(tau)
    ll = loglik(p)
    history = [ll] if record_history else None
    floored = 0
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        p_used = p.copy()
        tiny = observed & (p_used < ML_PROB_FLOOR)
        if np.any(tiny):
            floored += int(tiny.sum())
            p_used[tiny] = ML_PROB_FLOOR
        weights = np.where(observed, counts / p_used, 0.0)
        r = np.einsum("p,pij->ij", weights, projs) / n_total
        r_bar = r - eye
        eps = 1.0
        accepted = False
        for _ in range(60):
            t_mat = eye + eps * r_bar
            cand = t_mat @ tau @ t_mat
            cand /= cand.trace().real
            p_cand = probs(cand)
            ll_cand = loglik(p_cand)
            if ll_cand >= ll:
                accepted = True
                break
            eps /= 2.0
        if not accepted:
            converged = True
            iterations -= 1
            break
        gain = ll_cand - ll
        tau, p, ll = cand, p_cand, ll_cand
        if history is not None:
            history.append(ll)
        if gain < cfg.tol:
            converged = True
            break
    if floored:
        log.info("ML iteration floored %d vanishing probabilities", floored)
    if not converged:
        log.warning("ML iteration hit the cap (%d)", cfg.max_iter)
    state = DensityMatrix.from_matrix(hermitize(tau))
    return EstimateResult(
        state=state,
        iterations=iterations,
        converged=converged,
        objective=ll,
        history=history,
    )
