"""gaplab: a numerical laboratory for generalization-gap identities on toy models.

Exact data-set-averaging identities for the train/test gap, Boltzmann
steady-state densities of noisy gradient descent, diffusion approximations,
log-normal and delta-method gap approximations, and a temperature-sweep
experiment pipeline.
"""

from .approximations import (CurvatureComponent, CurvatureSpec, PotentialStats,
                             compute_potential_stats, curvature_expansion,
                             delta_method_cov, delta_method_gap, lognormal_gap,
                             lognormal_gap_upper_bounds, lognormal_rho_bar,
                             mean_dataset_density, optimal_temperature,
                             sampling_shift_curvature, train_loss_T_derivative)
from .averaging import (AveragingEnsemble, EnsembleConfig, Estimate, Observable,
                        build_ensemble, conditional_average, cov_over_data,
                        decomposition_check, double_bracket,
                        effective_potential_gap_check, gap_direct,
                        gap_identity_residual, gap_upper_bound, gap_via_covariance,
                        quartic_ensemble, test_loss_observable, total_average,
                        train_loss_observable)
from .diffusion import (DiffusionSpec, MomentumDiffusionSpec, em_stationary_1d,
                        euler_maruyama_step, loss_ode_rhs, matrix_sqrt_psd,
                        momentum_langevin_step, observable_drift,
                        plain_sgd_diffusion_spec)
from .functions import SmoothFunction
from .harness import (GapFit, SweepConfig, detect_spike, epoch_budget, fit_gap_model,
                      per_example_loss_stats, run_single, run_sweep,
                      steady_state_metrics, summarize_sweep)
from .models import (FAMILIES, GaussianMean, LogisticRegression2D, LossModel,
                     NonlinearRegression1D, Quadratic2D, model_from_config,
                     population_loss_and_variance)
from .optimizers import (OptimizerState, SGDConfig, TrajectoryRecord, cosine_lr,
                         init_state, run, sample_stationary, step_momentum,
                         step_plain, temperature)
from .sampling import (DataSetPair, SamplingMode, resample_datasets, rng_from_seed,
                       sample_dataset)
from .steady_state import (BoundaryMassError, DensityGrid, EffectivePotential,
                           PathDependenceError, axis_for_train_sets,
                           axes_from_samples, boltzmann_density, density_tv_distance,
                           effective_potential_a, effective_potential_v,
                           empirical_density, grid_boltzmann_density, ks_statistic,
                           make_effective_potential, probability_current,
                           train_minimizer, uniform_axis)
from .verify import run_suite

__version__ = "0.1.0"
