"""Quantum state tomography estimators, simulation, and risk benchmarking.

The package implements eight estimators (LS, GLS, TLS, TGLS, posLS, posGLS,
ML, PLS) for multi-qubit projective measurement data, simulates count
datasets for Pauli, random-basis, and covariant measurement designs, and
checks the Monte-Carlo risks against closed-form asymptotic predictions.

All randomness flows through explicit numpy generators; a generator must not
be shared across threads (derive one substream per parallel task, see
``bench.derive_substream``).
"""

from .bench import ExperimentConfig, RiskReport, derive_substream, reproduce_figure, run_experiment
from .design import (
    DesignMatrix,
    MeasurementDesign,
    ReductionMaps,
    channel_apply,
    channel_invert,
    covariant_stream,
    design_matrix,
    operator_basis,
    pauli_design,
    random_bases_design,
    reduction_maps,
)
from .estimators import (
    CovarianceModel,
    EstimateResult,
    EstimatorConfig,
    ThresholdedResult,
    covariance_estimate,
    cross_validate_threshold,
    estimate_gls,
    estimate_ls,
    estimate_ml,
    estimate_pls,
    estimate_posgls,
    estimate_posls,
    estimate_tgls,
    estimate_tls,
    log_likelihood,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import (
    LocalParametrisation,
    bures_sq,
    fisher_information,
    frobenius_sq,
    hellinger_sq,
    operator_norm,
    predicted_risk,
    trace_norm,
    weight_matrix,
)
from .qstate import (
    BlockDecomposition,
    DensityMatrix,
    HermitianEstimate,
    Spectrum,
    block_decompose,
    haar_unitary,
    project_spectrum,
    project_to_states,
    random_rank_r_state,
)
from .sampling import (
    CountsDataset,
    FrequencyVector,
    covariant_projector_mean,
    covariant_samples,
    frequencies,
    simulate_counts,
)

__version__ = "0.1.0"
