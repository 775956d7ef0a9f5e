"""Computable generalization bounds and temperature schedules.

Part one evaluates the explicit bound constants for the tilt-trained
measure on the Gaussian location problem and checks they dominate the
sampled weak and squared gaps.  The constants are conservative by
design -- what matters is their scaling, shown in part two: scheduling
the inverse temperature as beta0 * n^{1/4} makes sqrt(n) times the
population-risk bound flat in n, and beta0 * n^{1/6} does the same for
n^{2/3} times the squared-risk bound.
"""

from gibbslab import (GibbsConfig, GridGibbsTrainer, Regularizer,
                      gaussian_bump_on_grid, gaussian_mean_setup,
                      gibbs_bound_constants, lge, noiseless_line_setup,
                      population_risk_bound, wge_resampled)


def main():
    model, pop = gaussian_mean_setup(0.0, 1.0)
    cfg = GibbsConfig(beta=0.5, sigma=1.0, p=4,
                      regularizer=Regularizer(kappa=0.05, q=3),
                      nodes_per_axis=257)
    trainer = GridGibbsTrainer(model, cfg)
    print("bound dominance (Gaussian location, grid tilt trainer):")
    for n in (5, 20):
        consts = gibbs_bound_constants(model, cfg, pop, n)
        w = wge_resampled(trainer, pop, model, n, 60, seed=9)
        s = lge(trainer, pop, model, n, 60, seed=9)
        print(f"  n={n:<3d} |wge| {abs(w.value):.3f} <= {consts.wge_bound:.3e}"
              f"   lge {s.value:.3f} <= {consts.lge_bound:.3e}")

    model_l, pop_l = noiseless_line_setup(0.5, 1.0)
    for mode, beta0, power, label in (
            ("wge_n14", 0.05, 0.5, "sqrt(n) x bound"),
            ("lge_n16", 4e-4, 2.0 / 3.0, "n^(2/3) x squared bound")):
        cfg_s = GibbsConfig(beta=beta0, sigma=1.0, p=4,
                            regularizer=Regularizer(kappa=0.05, q=3),
                            nodes_per_axis=257)
        m_bar = gaussian_bump_on_grid(cfg_s, 0.5, 0.2)
        sched = GridGibbsTrainer(model_l, cfg_s)
        scaled = []
        for n in (16, 64, 256):
            rep = population_risk_bound(sched, pop_l, model_l, m_bar, n,
                                        mode, 50, seed=5)
            scaled.append(n ** power * rep.risk_bound)
        spread = (max(scaled) - min(scaled)) / min(scaled)
        print(f"schedule {mode}: {label} over n in (16, 64, 256) = "
              + ", ".join(f"{s:.3e}" for s in scaled)
              + f"  (spread {spread:.1%})")


if __name__ == "__main__":
    main()
