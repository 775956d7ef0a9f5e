"""Check the first-order expansion of a loss in its measure argument.

Every loss in the package exposes `loss_dm`, its linear functional
derivative.  `check_linear_derivative` integrates the derivative along
the segment between two measures with Gauss-Legendre quadrature and
compares against the actual increment of the loss; the residual is
quadrature error only, so it collapses with the node count for smooth
outers and is exact for the quadratic one.
"""

import numpy as np

from gibbslab import (DataPoint, GridMeasure, NNLoss,
                      check_linear_derivative, loss_dm, loss_value,
                      uniform_grid)


def bump(nodes, vol, center, scale):
    dens = np.exp(-np.sum((nodes - center) ** 2, axis=1) / (2 * scale ** 2))
    return GridMeasure(nodes, vol, dens, normalize=True)


def main():
    nodes, vol = uniform_grid(2.0, 33, 2)
    m0 = bump(nodes, vol, (-0.4, 0.2), 0.5)
    m1 = bump(nodes, vol, (0.6, -0.3), 0.4)
    z = DataPoint(np.array([0.7]), 0.3)

    for outer in ("quadratic", "logcosh", "product_margin"):
        model = NNLoss("tanh", outer)
        print(f"outer loss {outer!r}:")
        for n_lam in (2, 4, 8, 16):
            res = check_linear_derivative(
                lambda m: loss_value(model, m, z),
                lambda m: loss_dm(model, m, z, nodes),
                m0, m1, lambda_nodes=n_lam)
            print(f"  {n_lam:>2d} quadrature nodes -> residual {res:.2e}")


if __name__ == "__main__":
    main()
