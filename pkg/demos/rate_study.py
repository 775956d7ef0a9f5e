"""Fit convergence rates of the generalization error in n.

Log-log regression of |estimate| against the sample size recovers the
1/n decay of the weak generalization error.  The closed-form trainer
sits exactly on the line; the grid-trained tilt measure at fixed
temperature tracks the same slope within Monte Carlo noise.
"""

from gibbslab import (ExplicitGaussianMeanTrainer, GibbsConfig,
                      GridGibbsTrainer, Regularizer, gaussian_mean_setup,
                      rate_fit, wge_direct, wge_resampled)


def main():
    ns = [5, 10, 20, 40, 80]
    model, pop = gaussian_mean_setup(0.0, 1.0)

    trainer = ExplicitGaussianMeanTrainer(1.0)
    ests = [wge_direct(trainer, pop, model, n, 8000, seed=101) for n in ns]
    fit = rate_fit(ns, ests)
    print("closed-form trainer, direct route:")
    for n, e in zip(ns, ests):
        print(f"  n={n:<3d} wge = {e.value:.5f} (stderr {e.stderr:.5f})")
    print(f"  fitted slope {fit.slope:+.3f}  (r^2 = {fit.r2:.6f})")

    cfg = GibbsConfig(beta=0.5, sigma=1.0, p=4,
                      regularizer=Regularizer(kappa=0.05, q=3),
                      nodes_per_axis=257)
    grid = GridGibbsTrainer(model, cfg)
    ests_g = [wge_resampled(grid, pop, model, n, 1500, seed=202) for n in ns]
    fit_g = rate_fit(ns, ests_g)
    print("grid tilt trainer at fixed temperature, resampled route:")
    print(f"  fitted slope {fit_g.slope:+.3f}  (r^2 = {fit_g.r2:.4f})")


if __name__ == "__main__":
    main()
