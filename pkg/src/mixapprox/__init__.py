"""Convolution smoothing, finite location-scale mixtures, and desk-scale
verification of the associated approximation and estimation bounds."""

from .grids import (
    GridCompatibilityError,
    GridFunction,
    SupportBox,
    TensorGrid,
    YoungReport,
    convolve,
    cube,
    grid_convolve,
    make_grid,
    quadrature_integrate,
    restrict,
    sample_on_grid,
    young_inequality_check,
    zero_extend,
)
from .kernels import (
    Dilation,
    IdentityCertification,
    MARGINAL_NAMES,
    ProductKernel,
    UnivariateKernel,
    certify_approximate_identity,
    check_moment_condition,
    dilate,
    l1_outside_mass,
    make_product_kernel,
)
from .densities import (
    F5MembershipReport,
    TargetDensity,
    ZOO_NAMES,
    default_points_per_axis,
    estimate_lipschitz,
    make_target,
    truncated_normal_density,
    verify_f5_membership,
)
from .divergences import (
    AbsoluteContinuityError,
    DivergenceReport,
    Lemma13Report,
    divergence_report,
    empirical_distance,
    kl_divergence,
    kl_l2_bound_check,
    lq_norm,
    tv_distance,
)
from .mixtures import (
    EMFit,
    FiniteMixture,
    GreedyFit,
    MLEFit,
    MeanBox,
    MixingApproximant,
    MixtureDictionary,
    build_dictionary,
    build_mixing_approximant,
    em_fit,
    greedy_fit,
    log_likelihood,
    mixture_eval,
    mixture_sample,
    mle_fit,
)
from .bounds import (
    BoundConstants,
    BoundReport,
    GAMMA_AT_ZERO,
    compute_A_logratio,
    compute_gamma,
    covering_number,
    dudley_entropy_integral,
    estimate_B_lipschitz,
    hull_kl_constant,
    kl_bound_two_stage,
    mle_risk_bound,
    mle_risk_bound_split,
    mle_risk_concentration,
    target_kl_constant,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config_text
from .harness import (
    RateReport,
    Row,
    SlopeFit,
    StudyResult,
    emit_report,
    fit_loglog_slope,
    run_study,
)

__version__ = "0.1.0"
