"""Non-reversible stochastic gradient Langevin samplers with online skew
adaptation, benchmark cost models, evaluation metrics, and a regime-switching
tracking harness."""

from .metrics import (
    MarginalCDF,
    TrialSummary,
    aggregate_trials,
    histogram_density,
    running_posterior_mean,
    running_w1,
    wasserstein1_marginal,
    wasserstein1_samples,
)
from .models import (
    CostModel,
    DataSet,
    DoubleWellModel,
    Mixture2Model,
    Mixture10Model,
    QuadraticModel,
    generate_dataset_mixture2,
    generate_dataset_mixture10,
    hessian_vector_default,
    quadratic_stochastic_gradient,
)
from .samplers import (
    ALGORITHMS,
    SamplerConfig,
    SamplerDivergedError,
    SamplerState,
    Trajectory,
    accelerated_step,
    alg1_step,
    alg2_step,
    alg3_step,
    init_state,
    mh_step,
    run_sampler,
    sgld_step,
)
from .skew import (
    PerturbationMatrix,
    SkewMatrix,
    skew_apply,
    skew_init_tridiagonal,
    skew_perturbation_sample,
    skew_project,
)
from .tracking import (
    MarkovRegime,
    SwitchingCost,
    TrackingTrace,
    quadratic_switching_bank,
    regime_step,
    run_tracking,
)

__version__ = "0.1.0"
