"""Monte-Carlo risk estimation harness and figure-style reproductions.

Experiments are fully determined by (config, master seed): every trial
derives its own random substream, so results are identical whether trials
run serially or across a worker pool.
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import asymptotics, kernels
from ._linalg import hermitize
from .design import MeasurementDesign, covariant_stream, pauli_design, random_bases_design
from .errors import ContractViolationError, DomainError
from .estimators import (
    DEFAULT_CONFIG,
    EstimatorConfig,
    covariance_estimate,
    estimate_gls,
    estimate_ls,
    estimate_ml,
    estimate_posgls,
    estimate_posls,
    estimate_tgls,
    estimate_tls,
    ls_from_projector_mean,
)
from .metrics import bures_sq, frobenius_sq, hellinger_sq, operator_norm, trace_norm
from .qstate import (
    DensityMatrix,
    HermitianEstimate,
    Spectrum,
    block_decompose,
    equal_eigenvalue_spectrum,
    haar_unitary,
    project_to_states,
)
from .sampling import frequencies, simulate_counts

log = logging.getLogger(__name__)

ALL_ESTIMATORS = ("ls", "gls", "pls", "tls", "tgls", "posls", "posgls", "ml")
CONSTRAINED_ESTIMATORS = frozenset({"pls", "tls", "tgls", "posls", "posgls", "ml"})
ALL_METRICS = ("frobenius", "trace", "operator", "bures", "hellinger")
COVARIANT_ESTIMATORS = frozenset({"ls", "pls"})

CSV_HEADER = "estimator,metric,d,r,k,m,N,trials,mean,stderr"


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    ranks: tuple[int, ...]
    design_kind: str
    m: int = 1
    k: int | None = None
    trials: int = 100
    estimators: tuple[str, ...] = ("ls", "pls")
    metrics: tuple[str, ...] = ("frobenius",)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.trials < 2:
            raise ContractViolationError("need at least 2 trials for a standard error")
        if self.design_kind not in ("pauli", "random", "covariant"):
            raise DomainError(f"unknown design kind {self.design_kind!r}")
        if self.design_kind == "covariant":
            if self.m != 1:
                raise ContractViolationError("covariant stream is single-shot (m = 1)")
            if not self.k:
                raise ContractViolationError("covariant stream needs k = total shots")
            bad = set(self.estimators) - COVARIANT_ESTIMATORS
            if bad:
                raise ContractViolationError(
                    f"covariant stream supports only ls/pls, got {sorted(bad)}"
                )
        if self.design_kind == "random" and not self.k:
            raise ContractViolationError("random design needs a setting count k")
        unknown = set(self.estimators) - set(ALL_ESTIMATORS)
        if unknown:
            raise DomainError(f"unknown estimators {sorted(unknown)}")
        unknown = set(self.metrics) - set(ALL_METRICS)
        if unknown:
            raise DomainError(f"unknown metrics {sorted(unknown)}")

    @property
    def n_qubits(self) -> int | None:
        n = self.d.bit_length() - 1
        return n if 2**n == self.d else None

    @property
    def k_settings(self) -> int:
        if self.design_kind == "pauli":
            return 3 ** self.n_qubits
        return int(self.k)

    @property
    def n_total(self) -> int:
        return self.m * self.k_settings

    @classmethod
    def from_json(cls, obj: dict, apply_env: bool = False) -> "ExperimentConfig":
        """Parse the config schema; apply_env lets TOMO_SEED override the seed."""
        design = obj.get("design", {})
        d = int(obj["d"]) if "d" in obj else 2 ** int(obj["n"])
        seed = int(obj.get("seed", 0))
        if apply_env and "TOMO_SEED" in os.environ:
            seed = int(os.environ["TOMO_SEED"])
        return cls(
            d=d,
            ranks=tuple(int(r) for r in obj["ranks"]),
            design_kind=design.get("kind", "pauli"),
            m=int(obj.get("m", 1)),
            k=design.get("k"),
            trials=int(obj.get("trials", 100)),
            estimators=tuple(obj.get("estimators", ["ls", "pls"])),
            metrics=tuple(obj.get("metrics", ["frobenius"])),
            seed=seed,
            workers=int(obj.get("workers", 1)),
        )

    def to_json(self) -> dict:
        design: dict = {"kind": self.design_kind}
        if self.k is not None:
            design["k"] = self.k
        return {
            "d": self.d,
            "ranks": list(self.ranks),
            "design": design,
            "m": self.m,
            "trials": self.trials,
            "estimators": list(self.estimators),
            "metrics": list(self.metrics),
            "seed": self.seed,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class RiskRow:
    estimator: str
    metric: str
    d: int
    r: int
    k: int
    m: int
    n_total: int
    trials: int
    mean: float
    stderr: float
    predicted: float | None = None


@dataclass
class RiskReport:
    rows: list[RiskRow] = field(default_factory=list)
    skipped: list[tuple[str, str, str]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        with_pred = any(row.predicted is not None for row in self.rows)
        header = CSV_HEADER + (",predicted" if with_pred else "")
        buf.write(header + "\n")
        for row in self.rows:
            cells = [
                row.estimator,
                row.metric,
                str(row.d),
                str(row.r),
                str(row.k),
                str(row.m),
                str(row.n_total),
                str(row.trials),
                repr(row.mean),
                repr(row.stderr),
            ]
            if with_pred:
                cells.append("" if row.predicted is None else repr(row.predicted))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def lookup(self, estimator: str, metric: str, r: int) -> RiskRow:
        for row in self.rows:
            if row.estimator == estimator and row.metric == metric and row.r == r:
                return row
        raise KeyError((estimator, metric, r))


def derive_substream(master_seed: int, trial: int, tag: str) -> np.random.Generator:
    """Independent generator keyed by (seed, trial, tag); collision-free."""
    digest = hashlib.sha256(tag.encode()).digest()
    tag_int = int.from_bytes(digest[:8], "little")
    seq = np.random.SeedSequence([int(master_seed), int(trial), tag_int])
    return np.random.default_rng(seq)


def _build_design(config: ExperimentConfig) -> MeasurementDesign:
    if config.design_kind == "pauli":
        n = config.n_qubits
        if n is None:
            raise DomainError("Pauli designs need d = 2^n")
        return pauli_design(n)
    if config.design_kind == "random":
        return random_bases_design(
            config.d, config.k, derive_substream(config.seed, 0, "design")
        )
    return covariant_stream(config.d)


_METRIC_FUNCS = {
    "frobenius": frobenius_sq,
    "trace": trace_norm,
    "operator": operator_norm,
    "bures": bures_sq,
}


def _evaluate_metrics(values, config, estimator, est_obj, rho):
    constrained = estimator in CONSTRAINED_ESTIMATORS
    for metric in config.metrics:
        if metric in ("bures", "hellinger") and not constrained:
            continue
        if metric == "hellinger":
            lam_hat = np.clip(Spectrum.from_matrix(_as_matrix(est_obj)).values, 0.0, None)
            lam = np.clip(Spectrum.from_matrix(rho.matrix).values, 0.0, None)
            values[(estimator, metric)] = hellinger_sq(lam_hat, lam)
        else:
            values[(estimator, metric)] = _METRIC_FUNCS[metric](est_obj, rho)


def _as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, (DensityMatrix, HermitianEstimate)) else np.asarray(x)


def _covariant_trial(config: ExperimentConfig, r: int, trial: int) -> dict:
    d, n_total = config.d, config.n_total
    basis = haar_unitary(d, derive_substream(config.seed, trial, f"state:r{r}"))
    lam = equal_eigenvalue_spectrum(d, r)
    rho = DensityMatrix.from_matrix(hermitize((basis * lam) @ basis.conj().T))
    rng = derive_substream(config.seed, trial, f"data:r{r}")
    s_eig = kernels.covariant_outcome_sum(lam, n_total, rng)
    pmean = hermitize(basis @ s_eig @ basis.conj().T) / n_total
    ls = ls_from_projector_mean(pmean, "two_design")
    values: dict = {}
    pls = None
    if "pls" in config.estimators:
        pls = project_to_states(ls, 0.0)
        # projection onto a convex set containing rho can only reduce the error
        if frobenius_sq(pls, rho) > frobenius_sq(ls, rho) * (1 + 1e-9):
            raise AssertionError("projection contractivity violated")
    for estimator in config.estimators:
        est_obj = ls if estimator == "ls" else pls
        _evaluate_metrics(values, config, estimator, est_obj, rho)
    return values


def _design_trial(
    config: ExperimentConfig, design: MeasurementDesign, r: int, trial: int
) -> dict:
    from .qstate import random_rank_r_state

    cfg = DEFAULT_CONFIG
    rho = random_rank_r_state(
        config.d, r, derive_substream(config.seed, trial, f"state:r{r}")
    )
    rng = derive_substream(config.seed, trial, f"data:r{r}")
    need_batches = bool({"tls", "tgls"} & set(config.estimators))
    if need_batches:
        if config.m % cfg.cv_folds:
            raise ContractViolationError("m must be divisible by the fold count")
        batches = [
            simulate_counts(rho, design, config.m // cfg.cv_folds, rng)
            for _ in range(cfg.cv_folds)
        ]
        from .estimators import pool_batches

        dataset = pool_batches(batches)
    else:
        batches = None
        dataset = simulate_counts(rho, design, config.m, rng)
    f = frequencies(dataset)

    cache: dict = {}

    def ls():
        if "ls" not in cache:
            cache["ls"] = estimate_ls(f, design)
        return cache["ls"]

    def cov():
        if "cov" not in cache:
            cache["cov"] = covariance_estimate(f, design, dataset.m, cfg)
        return cache["cov"]

    values: dict = {}
    for estimator in config.estimators:
        if estimator == "ls":
            est_obj = ls()
        elif estimator == "gls":
            est_obj = estimate_gls(f, design, cov())
        elif estimator == "pls":
            est_obj = project_to_states(ls(), 0.0)
        elif estimator == "tls":
            est_obj = estimate_tls(batches, design, "frobenius", cfg).state
        elif estimator == "tgls":
            est_obj = estimate_tgls(batches, design, "frobenius", cfg).state
        elif estimator == "posls":
            est_obj = estimate_posls(f, design, cfg).state
        elif estimator == "posgls":
            est_obj = estimate_posgls(f, design, cov(), cfg).state
        elif estimator == "ml":
            est_obj = estimate_ml(dataset, design, cfg).state
        _evaluate_metrics(values, config, estimator, est_obj, rho)
    return values


def _trial_worker(args) -> tuple[int, int, dict]:
    config_json, r, trial = args
    config = ExperimentConfig.from_json(config_json)
    if config.design_kind == "covariant":
        return r, trial, _covariant_trial(config, r, trial)
    design = _worker_design(config)
    return r, trial, _design_trial(config, design, r, trial)


_WORKER_DESIGN_CACHE: dict = {}


def _worker_design(config: ExperimentConfig) -> MeasurementDesign:
    key = (config.design_kind, config.d, config.k, config.seed)
    if key not in _WORKER_DESIGN_CACHE:
        _WORKER_DESIGN_CACHE[key] = _build_design(config)
    return _WORKER_DESIGN_CACHE[key]


def run_experiment(config: ExperimentConfig) -> RiskReport:
    """Estimate risks by Monte Carlo over trials, one row per estimator/metric/rank.

    Bures and Hellinger rows are emitted only for constrained estimators;
    incompatible combinations are recorded in the report's skipped list.
    """
    report = RiskReport()
    for estimator in config.estimators:
        for metric in config.metrics:
            if metric in ("bures", "hellinger") and estimator not in CONSTRAINED_ESTIMATORS:
                reason = "metric defined only for constrained estimators"
                report.skipped.append((estimator, metric, reason))
                log.info("skipping %s/%s: %s", estimator, metric, reason)
    jobs = [(config.to_json(), r, t) for r in config.ranks for t in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_trial_worker, jobs, chunksize=1))
    else:
        outcomes = [_trial_worker(job) for job in jobs]
    collected: dict = {}
    for r, trial, values in outcomes:
        for key, val in values.items():
            collected.setdefault((r,) + key, np.empty(config.trials))[trial] = val
    for r in config.ranks:
        for estimator in config.estimators:
            for metric in config.metrics:
                key = (r, estimator, metric)
                if key not in collected:
                    continue
                vals = collected[key]
                report.rows.append(
                    RiskRow(
                        estimator=estimator,
                        metric=metric,
                        d=config.d,
                        r=r,
                        k=config.k_settings,
                        m=config.m,
                        n_total=config.n_total,
                        trials=config.trials,
                        mean=float(vals.mean()),
                        stderr=float(vals.std(ddof=1) / math.sqrt(config.trials)),
                    )
                )
    return report


def covariant_error_blocks(
    d: int, r: int, n_shots: int, rng: np.random.Generator, backend: str | None = None
):
    """One covariant-stream trial in the state's own eigenframe.

    Returns the error blocks of sqrt(N) (rho_LS - rho_r) around the diagonal
    rank-r state; by covariance this loses no generality and keeps the block
    structure aligned with the spectrum.
    """
    lam = equal_eigenvalue_spectrum(d, r)
    s = kernels.covariant_outcome_sum(lam, n_shots, rng, backend=backend)
    ls = ls_from_projector_mean(hermitize(s) / n_shots, "two_design")
    return block_decompose(ls, np.diag(lam), n_shots)


# ---------------------------------------------------------------------------
# figure-style reproductions

FIGURES = ("fig3a", "fig3c", "fig6like", "fig8like")


def reproduce_figure(
    name: str,
    trials: int | None = None,
    d: int | None = None,
    n_samples: int | None = None,
    m: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> RiskReport:
    """Emit simulated risks next to the matching theoretical predictions."""
    if name == "fig3a":
        return _fig3(metric="frobenius", trials=trials, d=d, n_samples=n_samples,
                     seed=seed, workers=workers)
    if name == "fig3c":
        return _fig3(metric="bures", trials=trials, d=d, n_samples=n_samples,
                     seed=seed, workers=workers)
    if name == "fig6like":
        return _pauli_comparison(
            metric="frobenius",
            estimators=("ls", "gls", "pls", "tls", "tgls", "posls", "posgls", "ml"),
            trials=trials, m=m, seed=seed, workers=workers,
        )
    if name == "fig8like":
        return _pauli_comparison(
            metric="bures",
            estimators=("pls", "tls", "tgls", "posls", "posgls", "ml"),
            extra_metrics=("hellinger",),
            trials=trials, m=m, seed=seed, workers=workers,
        )
    raise DomainError(f"unknown figure {name!r}; choose from {FIGURES}")


def _fig3(metric, trials, d, n_samples, seed, workers) -> RiskReport:
    d = d or 32
    n_samples = n_samples or 500_000
    trials = trials or 100
    ranks = tuple(2**i for i in range(int(math.log2(d)) + 1))
    estimators = ("ls", "pls") if metric == "frobenius" else ("pls",)
    config = ExperimentConfig(
        d=d, ranks=ranks, design_kind="covariant", m=1, k=n_samples,
        trials=trials, estimators=estimators, metrics=(metric,),
        seed=seed, workers=workers,
    )
    report = run_experiment(config)
    rows = []
    for row in report.rows:
        predicted = None
        if row.metric == "frobenius":
            if row.estimator == "ls":
                predicted = asymptotics.ls_risk_frobenius(d, row.r) / n_samples
            elif row.r < d:
                predicted = asymptotics.pls_risk_frobenius(d, row.r, n_samples)
        elif row.metric == "bures" and row.r < d:
            predicted = asymptotics.pls_risk_bures(d, row.r, n_samples)
        rows.append(replace(row, predicted=predicted))
    report.rows = rows
    return report


def _pauli_comparison(
    metric, estimators, trials, m, seed, workers, extra_metrics=()
) -> RiskReport:
    d = 8
    m = m or 1000
    trials = trials or 20
    config = ExperimentConfig(
        d=d, ranks=tuple(range(1, d + 1)), design_kind="pauli", m=m,
        trials=trials, estimators=estimators, metrics=(metric,) + tuple(extra_metrics),
        seed=seed, workers=workers,
    )
    report = run_experiment(config)
    if metric == "frobenius" and "ml" in estimators:
        predictions = _fisher_predictions(config)
        report.rows = [
            replace(row, predicted=predictions.get(row.r))
            if row.estimator == "ml" and row.metric == "frobenius"
            else row
            for row in report.rows
        ]
    return report


def _fisher_predictions(config: ExperimentConfig, n_states: int = 5) -> dict[int, float]:
    """Fisher-predicted Frobenius risk per rank, averaged over a few trial states."""
    from .metrics import LocalParametrisation, fisher_information, predicted_risk, weight_matrix
    from .qstate import random_rank_r_state

    design = _build_design(config)
    out = {}
    for r in config.ranks:
        vals = []
        for t in range(min(n_states, config.trials)):
            rho = random_rank_r_state(
                config.d, r, derive_substream(config.seed, t, f"state:r{r}")
            )
            param = LocalParametrisation(
                kind="rank_r" if r < config.d else "full_rank", state=rho, r=r
            )
            info = fisher_information(rho, design, param)
            gf = weight_matrix("frobenius", param)
            vals.append(predicted_risk(info, gf, config.n_total))
        out[r] = float(np.mean(vals))
    return out
