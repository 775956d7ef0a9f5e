"""Generalization-error toolkit for measure-valued training maps.

The package studies trainers that map an empirical data measure to a
probability measure over parameters (entropy-regularized objectives
solved on dense grids, interacting particle simulations, and
closed-form maps), exposes the functional-derivative calculus of the
trained measure in the data, and benchmarks several Monte Carlo routes
to the mean weak and strong generalization errors together with
computable upper bounds.

Modules
-------
measures
    Empirical data measures, grid measures, particle clouds, and
    convex combinations between them.
losses
    Mean-field network losses (activation x outer loss) and expected
    parametric losses, with value / first / second measure derivatives
    and growth envelopes.
gibbs
    Entropy-regularized objective, exponential-tilt fixed point solver,
    prior pair with moment bounds, and the particle sampler.
funcderiv
    Linear-functional derivative checks and the trained-measure
    derivative ``dm/dnu`` via a Fredholm system.
genbench
    Population models, trainers, generalization-error estimation
    routes, bound constants, and exact enumeration oracles.
cli
    JSON-config experiment runner (``gibbslab run / verify``).
"""

from .measures import (DataMeasure, DataPoint, GridMeasure, ParticleMeasure,
                       convex_combination, empirical_from_arrays,
                       empirical_from_samples, resample, uniform_grid,
                       uniform_grid_1d)
from .losses import (ExpectedParamLoss, NNLoss, activation,
                     linear_regression_param_loss, loss_d2m, loss_dm,
                     loss_value, mean_squared_param_loss, outer_loss,
                     predict, risk, zero_param_loss)
from .gibbs import (GibbsConfig, GibbsConvergenceError, GibbsSolution,
                    PriorPair, Regularizer, default_regularizer, gibbs_map,
                    kl_divergence, mfld_sample, objective,
                    objective_gap_bound, prior_kl, prior_moment_bound,
                    solve_gibbs)
from .funcderiv import (S_value, TrainedDerivatives, check_linear_derivative,
                        dm_dnu, finite_diff_dm_dnu, gauss_legendre_01,
                        solve_dS_dnu)
from .genbench import (BoundConstants, ConstantTrainer, DiscretePopulation,
                       ExplicitGaussianMeanTrainer, GaussianScalarPopulation,
                       GenEstimate, GridGibbsTrainer, LgeUpperReport,
                       MFLDTrainer, NoiselessLinePopulation, PopulationModel,
                       RateFit, RiskBoundReport, convex_lower_bound_check,
                       enumerate_exact_gen, gaussian_bump_on_grid,
                       gaussian_mean_oracle, gaussian_mean_setup,
                       gibbs_bound_constants, lge, lge_upper_terms,
                       markov_tail, noiseless_line_setup,
                       population_risk_bound, rate_fit, wge_direct,
                       wge_representation, wge_resampled)

__version__ = "0.1.0"

__all__ = [
    "DataMeasure", "DataPoint", "GridMeasure", "ParticleMeasure",
    "convex_combination", "empirical_from_arrays", "empirical_from_samples",
    "resample", "uniform_grid", "uniform_grid_1d",
    "ExpectedParamLoss", "NNLoss", "activation",
    "linear_regression_param_loss", "loss_d2m", "loss_dm", "loss_value",
    "mean_squared_param_loss", "outer_loss", "predict", "risk",
    "zero_param_loss",
    "GibbsConfig", "GibbsConvergenceError", "GibbsSolution", "PriorPair",
    "Regularizer", "default_regularizer", "gibbs_map", "kl_divergence",
    "mfld_sample", "objective", "objective_gap_bound", "prior_kl",
    "prior_moment_bound", "solve_gibbs",
    "S_value", "TrainedDerivatives", "check_linear_derivative", "dm_dnu",
    "finite_diff_dm_dnu", "gauss_legendre_01", "solve_dS_dnu",
    "BoundConstants", "ConstantTrainer", "DiscretePopulation",
    "ExplicitGaussianMeanTrainer", "GaussianScalarPopulation", "GenEstimate",
    "GridGibbsTrainer", "LgeUpperReport", "MFLDTrainer",
    "NoiselessLinePopulation", "PopulationModel", "RateFit",
    "RiskBoundReport", "convex_lower_bound_check", "enumerate_exact_gen",
    "gaussian_bump_on_grid", "gaussian_mean_oracle", "gaussian_mean_setup",
    "gibbs_bound_constants", "lge", "lge_upper_terms", "markov_tail",
    "noiseless_line_setup", "population_risk_bound", "rate_fit",
    "wge_direct", "wge_representation", "wge_resampled",
    "__version__",
]
