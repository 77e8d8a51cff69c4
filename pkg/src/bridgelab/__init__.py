"""Markov bridge laws, eigenfunction transforms, and their verification.

The library answers one question numerically: when do two Markov
processes share all of their bridge laws?  It provides a catalog of
closed-form transition kernels, the positive-eigenfunction transform
that provably preserves bridges, exact finite-chain verification of
that equivalence, and the simulation plus two-sample machinery used to
check it statistically for one-dimensional diffusions.
"""

from .measure import Quadrature, QuadratureError, ReferenceMeasure, DEFAULT_QUADRATURE
from .kernels import (
    DomainError,
    Eigenpair,
    TransitionKernel,
    bessel3_kernel,
    constant_drift_kernel,
    flipped_bessel_kernel,
    gaussian_kernel,
    h_transform,
    kernel_from_id,
    radon_nikodym_weight,
    tanh_drift_kernel,
)
from .checks import (
    chapman_kolmogorov_residual,
    duality_residual,
    eigen_residual,
    generator_drift_residual,
    local_eigen_residual,
    normalization_residual,
    psi_from_drift,
)
from .bridges import (
    BridgeSpec,
    DisintegrationCheck,
    MeasureMismatchError,
    MissingGridPointError,
    PathSample,
    RejectionBudgetError,
    bridge_likelihood_ratio,
    bridge_marginal_density,
    bridge_transition_density,
    disintegration_residual,
    extract_eigen_ratio,
    extract_eigenvalue,
    reverse,
    sample_bridge,
    sample_bridge_values,
    sample_unpinned_values,
    write_paths_csv,
)
from .chains import (
    ChainModel,
    EigenPreconditionError,
    LinearityViolationError,
    RecoveryResult,
    bridges_equal,
    chain_bridge_distribution,
    chain_h_transform,
    dual_chain,
    perron_eigen,
    random_chain,
    read_chain,
    recover_from_single_bridge,
    seeded_transform_pair,
    transition_matrix,
    write_chain,
)
from .simulate import RngPolicy, euler_maruyama, poisson_flip_endpoints
from .stats import (
    TestReport,
    energy_distance_test,
    histogram_tv,
    ks_two_sample,
    mc_mean_with_se,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
