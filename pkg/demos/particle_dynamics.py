"""Sample the trained measure with noisy particle dynamics.

The grid fixed point is the exact answer in one dimension; mean-field
Langevin dynamics reaches the same measure by evolving a particle
cloud, and is what survives in higher dimension.  The script trains
both on the same dataset and compares moments and a coarse histogram.
"""

import numpy as np

from gibbslab import (GibbsConfig, Regularizer, empirical_from_arrays,
                      mean_squared_param_loss, mfld_sample, solve_gibbs)


def main():
    rng = np.random.default_rng(60)
    model = mean_squared_param_loss()
    cfg = GibbsConfig(beta=0.8, sigma=1.0, p=4,
                      regularizer=Regularizer(kappa=0.05, q=3),
                      nodes_per_axis=257)
    nu = empirical_from_arrays(np.zeros((12, 0)),
                               0.3 + rng.standard_normal(12))

    sol = solve_gibbs(model, nu, cfg, damping=1.0, tol=1e-12)
    part = mfld_sample(model, nu, cfg, 8192, 1e-3, 4000, seed=61)
    samp = part.points[:, 0]

    print(f"grid solve: mean {sol.measure.mean()[0]:+.4f}, "
          f"second moment {sol.measure.moment(2):.4f}")
    print(f"particles:  mean {samp.mean():+.4f}, "
          f"second moment {(samp ** 2).mean():.4f} "
          f"({samp.size} particles, {4000} steps)")

    edges = np.linspace(-1.5, 2.0, 15)
    hist, _ = np.histogram(samp, bins=edges, density=True)
    dens = sol.measure.density
    xs = sol.measure.nodes[:, 0]
    print("density comparison (grid | particle histogram):")
    for lo, hi, h in zip(edges[:-1], edges[1:], hist):
        sel = (xs >= lo) & (xs < hi)
        g = float(dens[sel].mean()) if sel.any() else 0.0
        bar = "#" * int(round(40 * h))
        print(f"  [{lo:+.2f},{hi:+.2f})  {g:6.3f} | {h:6.3f} {bar}")


if __name__ == "__main__":
    main()
