"""Estimate the weak generalization error four different ways.

On the Gaussian location problem the posterior-mean trainer has a
closed-form weak generalization error of 2 sigma^2 / n, which makes it
the reference point for every estimation route in the package:

  * direct     -- fresh out-of-sample draws against the training risk,
  * resampled  -- swap one training point for an independent copy,
  * representation -- integrate the trained-measure derivative along
                      the swap segment (no second training run),
  * lge        -- the squared-gap (strong) variant; not comparable to
                  the oracle but reported for scale.
"""

import numpy as np

from gibbslab import (ExplicitGaussianMeanTrainer, gaussian_mean_oracle,
                      gaussian_mean_setup, lge, wge_direct,
                      wge_representation, wge_resampled)
from gibbslab import GibbsConfig, GridGibbsTrainer, Regularizer


def main():
    model, pop = gaussian_mean_setup(0.0, 1.0)
    trainer = ExplicitGaussianMeanTrainer(1.0)
    n = 10
    oracle = gaussian_mean_oracle(1.0, n)
    print(f"closed-form weak generalization error at n={n}: {oracle:.4f}")
    for route in (wge_direct, wge_resampled):
        est = route(trainer, pop, model, n, 5000, seed=3)
        print(f"  {est.route:<12s} {est.value:+.4f} "
              f"(stderr {est.stderr:.4f})")

    cfg = GibbsConfig(beta=0.5, sigma=1.0, p=4,
                      regularizer=Regularizer(kappa=0.05, q=3),
                      nodes_per_axis=257)
    grid_trainer = GridGibbsTrainer(model, cfg)
    print("grid-trained measure (no closed form; routes cross-check "
          "each other):")
    for route, reps in ((wge_direct, 600), (wge_resampled, 600),
                        (wge_representation, 150)):
        est = route(grid_trainer, pop, model, n, reps, seed=3)
        print(f"  {est.route:<14s} {est.value:+.4f} "
              f"(stderr {est.stderr:.4f}, {reps} replicates)")
    sq = lge(grid_trainer, pop, model, n, 600, seed=3)
    print(f"  {sq.route:<14s} {sq.value:+.4f} "
          f"(stderr {sq.stderr:.4f}) [squared scale]")


if __name__ == "__main__":
    main()
