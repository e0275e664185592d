"""Canonical correlation analysis as subspace estimation.

Population and sample CCA, principal-angle losses tied to excess prediction
loss, closed-form rate references and a seeded Monte-Carlo harness.
"""

from .errors import CCAError
from .estimator import (
    DataPair,
    SampleCovariances,
    cca,
    sample_cca,
    sample_covariances,
    sample_gaussian,
    standard_form_reduce,
)
from .harness import (
    CellResult,
    ExperimentConfig,
    factor_ratio_test,
    fit_rate_slope,
    invariance_experiment,
    p2_independence_experiment,
    run_cell,
    run_sweep,
)
from .linalg import cholesky, norms, projector, sqrt_and_inv_sqrt, svd, sym_eig
from .losses import (
    PredictionSetup,
    SubspaceDistance,
    bayes_excess,
    excess_prediction_loss,
    multiview_sufficiency_demo,
    principal_angles,
    worst_case_excess,
)
from .population import (
    CanonicalDecomposition,
    CanonicalSpec,
    JointCovariance,
    apply_transform,
    build_joint,
    population_cca,
    random_orthonormal_frame,
    random_spec,
)
from .theory import (
    RateParams,
    b_matrix_diagnostics,
    gaussian_kl,
    hadamard_bound_check,
    kl_closed_form,
    lower_bound_model,
    lower_rate,
    sample_size_condition,
    upper_rate,
    wedin_check,
)

__version__ = "0.1.0"
