"""Loss models on parameter measures and their measure derivatives.

Two loss families are implemented:

* :class:`NNLoss`: a mean-field single-hidden-layer network.  The
  prediction is the measure average of the feature map
  ``phi(theta, x) = a * act(w . x)`` over ``theta = (a, w)``, composed
  with a convex outer loss in the prediction.
* :class:`ExpectedParamLoss`: the measure average of a per-parameter
  loss ``lp(theta, z)``.

For both, the first and second measure derivatives (normalized so their
measure average vanishes) are available in closed form, alongside
growth envelopes ``g`` and ``g1`` controlling the loss and its first
derivative in terms of ``1 + ||z||^2``.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np

from .measures import DataMeasure, DataPoint, GridMeasure, ParticleMeasure


# ---------------------------------------------------------------------------
# activations


@dataclasses.dataclass(frozen=True)
class Activation:
    """Scalar activation with an optional derivative.

    ``value`` is vectorized; ``deriv`` is ``None`` for activations that
    have no usable derivative (heaviside), which restricts them to
    grid-based solvers.
    """

    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[np.ndarray], np.ndarray]]


def _relu(u):
    return np.maximum(u, 0.0)


def _relu_deriv(u):
    return (u > 0).astype(float)


def _sigmoid(u):
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _sigmoid_deriv(u):
    s = _sigmoid(u)
    return s * (1.0 - s)


def _heaviside(u):
    return (u >= 0).astype(float)


_ACTIVATIONS = {
    "relu": Activation("relu", _relu, _relu_deriv),
    "tanh": Activation("tanh", np.tanh, lambda u: 1.0 - np.tanh(u) ** 2),
    "sigmoid": Activation("sigmoid", _sigmoid, _sigmoid_deriv),
    "heaviside": Activation("heaviside", _heaviside, None),
}


def activation(kind: str) -> Activation:
    """Look up one of the supported activations by name."""
    try:
        return _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


# ---------------------------------------------------------------------------
# outer losses


def _softplus(u):
    return np.logaddexp(0.0, u)


def _logcosh(u):
    # log cosh u = |u| + log((1+exp(-2|u|))/2), stable for large |u|
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


@dataclasses.dataclass(frozen=True)
class OuterLoss:
    """Convex outer loss ``l_o(yhat, y)`` with stored growth constants.

    ``L_l``, ``L_l1`` and ``L_l2`` bound the loss by
    ``L_l * (1 + yhat^2 + y^2)``, the first derivative in ``yhat`` by
    ``L_l1 * (1 + |yhat| + |y|)`` and the second derivative by ``L_l2``.
    For ``product_margin`` the second-derivative constant assumes
    classification targets ``|y| <= 1``.
    """

    kind: str
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray, np.ndarray], np.ndarray]
    L_l: float
    L_l1: float
    L_l2: float


def _quadratic():
    return OuterLoss(
        "quadratic",
        value=lambda yh, y: (yh - y) ** 2,
        d1=lambda yh, y: 2.0 * (yh - y),
        d2=lambda yh, y: 2.0 * np.ones_like(np.asarray(yh, dtype=float)),
        L_l=2.0, L_l1=2.0, L_l2=2.0)


def _logcosh_outer():
    return OuterLoss(
        "logcosh",
        value=lambda yh, y: _logcosh(yh - y),
        d1=lambda yh, y: np.tanh(yh - y),
        d2=lambda yh, y: 1.0 / np.cosh(yh - y) ** 2,
        L_l=1.0, L_l1=1.0, L_l2=1.0)


def _product_margin():
    # logistic margin loss c(y * yhat) with c(u) = log(1 + exp(-u));
    # strictly positive, so no additive offset is needed.
    def value(yh, y):
        return _softplus(-(np.asarray(y) * np.asarray(yh)))

    def d1(yh, y):
        y = np.asarray(y, dtype=float)
        return -y * _sigmoid(-(y * np.asarray(yh)))

    def d2(yh, y):
        y = np.asarray(y, dtype=float)
        s = _sigmoid(-(y * np.asarray(yh)))
        return y * y * s * (1.0 - s)

    return OuterLoss("product_margin", value, d1, d2,
                     L_l=1.0, L_l1=1.0, L_l2=0.25)


_OUTER = {
    "quadratic": _quadratic(),
    "logcosh": _logcosh_outer(),
    "product_margin": _product_margin(),
}


def outer_loss(kind: str) -> OuterLoss:
    """Look up one of the supported outer losses by name."""
    try:
        return _OUTER[kind]
    except KeyError:
        raise ValueError(f"unknown outer loss {kind!r}") from None


# ---------------------------------------------------------------------------
# loss models


class NNLoss:
    """Mean-field network loss ``l(m, z) = l_o(E_m[phi(theta, x)], y)``.

    ``theta = (a, w)`` splits into an output weight and feature weights;
    the feature map is ``phi(theta, x) = a * act(w . x)``.  The feature
    map grows at most like ``L_phi (1 + ||x||)(1 + ||theta||^2)`` with
    ``L_phi = 1`` for every supported activation.
    """

    variant = "nn"
    L_phi = 1.0

    def __init__(self, act: Activation | str, outer: OuterLoss | str):
        self.activation = activation(act) if isinstance(act, str) else act
        self.outer = outer_loss(outer) if isinstance(outer, str) else outer

    def phi(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        u = theta[:, 1:] @ np.asarray(x, dtype=float)
        return theta[:, 0] * self.activation.value(u)

    def phi_batch(self, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Feature map for all parameter rows and all inputs, shape (N, n)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        u = theta[:, 1:] @ np.asarray(xs, dtype=float).T
        return theta[:, 0][:, None] * self.activation.value(u)

    def phi_grad(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Gradient of the feature map in ``theta``, shape (N, d)."""
        if self.activation.deriv is None:
            raise ValueError(
                f"activation {self.activation.kind!r} has no derivative")
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        x = np.asarray(x, dtype=float)
        u = theta[:, 1:] @ x
        g = np.empty_like(theta)
        g[:, 0] = self.activation.value(u)
        g[:, 1:] = (theta[:, 0] * self.activation.deriv(u))[:, None] * x[None, :]
        return g

    def predict(self, m, x) -> float:
        return m.integrate(lambda nodes: self.phi(nodes, x))

    def predict_batch(self, m, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if isinstance(m, GridMeasure):
            return self.phi_batch(m.nodes, xs).T @ m.node_weights
        if isinstance(m, ParticleMeasure):
            return self.phi_batch(m.points, xs).mean(axis=0)
        raise TypeError("unsupported parameter measure")

    def loss_value(self, m, z: DataPoint) -> float:
        return float(self.outer.value(self.predict(m, z.x), z.y))

    def loss_dm(self, m, z: DataPoint, theta) -> np.ndarray:
        phi_hat = self.predict(m, z.x)
        slope = self.outer.d1(phi_hat, z.y)
        return slope * (self.phi(theta, z.x) - phi_hat)

    def loss_d2m(self, m, z: DataPoint, theta, theta2) -> np.ndarray:
        phi_hat = self.predict(m, z.x)
        curv = self.outer.d2(phi_hat, z.y)
        a = self.phi(theta, z.x) - phi_hat
        b = self.phi(theta2, z.x) - phi_hat
        return curv * np.multiply.outer(a, b).squeeze()

    def has_zero_d2m(self) -> bool:
        return False

    def growth(self, m) -> float:
        e = 1.0 + m.moment(2.0)
        return 2.0 * self.outer.L_l * self.L_phi ** 2 * e * e

    def growth_d1(self, m, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        r4 = np.einsum("ij,ij->i", theta, theta) ** 2
        c = 6.0 * self.outer.L_l1 * self.L_phi * (1.0 + self.L_phi)
        return c * (4.0 + r4 + m.moment(4.0))


class ExpectedParamLoss:
    """Expected parametric loss ``l(m, z) = E_m[lp(theta, z)]``.

    Parameters
    ----------
    lp : callable
        ``lp(theta, z)`` with ``theta`` of shape (N, d) and ``z`` a
        :class:`~gibbslab.measures.DataPoint`; returns (N,) values.
    M_p : float
        Growth constant with ``0 <= lp(theta, z) <= M_p (1 + ||theta||^2)(1 + ||z||^2)``.
    lp_grad : callable, optional
        ``lp_grad(theta, z) -> (N, d)`` parameter gradient, used by the
        particle sampler.  A centered finite difference is substituted
        when missing.
    lp_batch : callable, optional
        ``lp_batch(theta, xs, ys) -> (n, N)`` vectorized evaluation over
        a whole dataset; purely a fast path, must agree with ``lp``.
    """

    variant = "expected_param"

    def __init__(self, lp, M_p: float, lp_grad=None, lp_batch=None,
                 name: str = "custom"):
        if M_p <= 0:
            raise ValueError("growth constant must be positive")
        self.lp = lp
        self.M_p = float(M_p)
        self.lp_grad = lp_grad
        self.lp_batch = lp_batch
        self.name = name

    def loss_value(self, m, z: DataPoint) -> float:
        return m.integrate(lambda nodes: self.lp(nodes, z))

    def loss_dm(self, m, z: DataPoint, theta) -> np.ndarray:
        mean = self.loss_value(m, z)
        return self.lp(np.atleast_2d(np.asarray(theta, dtype=float)), z) - mean

    def loss_d2m(self, m, z: DataPoint, theta, theta2) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        theta2 = np.atleast_2d(np.asarray(theta2, dtype=float))
        return np.zeros((theta.shape[0], theta2.shape[0])).squeeze()

    def has_zero_d2m(self) -> bool:
        return True

    def growth(self, m) -> float:
        return self.M_p * (1.0 + m.moment(2.0))

    def growth_d1(self, m, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        r2 = np.einsum("ij,ij->i", theta, theta)
        return self.M_p * (2.0 + m.moment(2.0) + r2)


def mean_squared_param_loss() -> ExpectedParamLoss:
    """Location loss ``lp(theta, z) = (theta - y)^2`` for scalar parameters."""
    def lp(theta, z):
        return (theta[:, 0] - z.y) ** 2

    def lp_grad(theta, z):
        return 2.0 * (theta[:, 0] - z.y)[:, None]

    def lp_batch(theta, xs, ys):
        return (theta[:, 0][None, :] - np.asarray(ys)[:, None]) ** 2

    return ExpectedParamLoss(lp, M_p=2.0, lp_grad=lp_grad, lp_batch=lp_batch,
                             name="mean_squared")


def linear_regression_param_loss() -> ExpectedParamLoss:
    """Scalar-slope regression loss ``lp(theta, z) = (y - theta * x)^2``."""
    def lp(theta, z):
        return (z.y - theta[:, 0] * z.x[0]) ** 2

    def lp_grad(theta, z):
        return (-2.0 * z.x[0] * (z.y - theta[:, 0] * z.x[0]))[:, None]

    def lp_batch(theta, xs, ys):
        return (np.asarray(ys)[:, None]
                - np.asarray(xs)[:, 0][:, None] * theta[:, 0][None, :]) ** 2

    return ExpectedParamLoss(lp, M_p=2.0, lp_grad=lp_grad, lp_batch=lp_batch,
                             name="linear_regression")


def zero_param_loss() -> ExpectedParamLoss:
    """Identically-zero loss (prior-only problems)."""
    return ExpectedParamLoss(lambda theta, z: np.zeros(theta.shape[0]),
                             M_p=1e-300, lp_grad=lambda theta, z: np.zeros_like(theta),
                             name="zero")


# ---------------------------------------------------------------------------
# module-level operations


def predict(model, m, x) -> float:
    """Mean-field prediction at input ``x`` (network models only)."""
    if not isinstance(model, NNLoss):
        raise TypeError("predict requires a network loss model")
    return model.predict(m, x)


def loss_value(model, m, z: DataPoint) -> float:
    """Loss of parameter measure ``m`` on the single sample ``z``."""
    return model.loss_value(m, z)


def loss_dm(model, m, z: DataPoint, theta) -> np.ndarray:
    """First measure derivative of the loss at ``(m, z)``.

    Normalized so its ``m``-average vanishes; vectorized over rows of
    ``theta``.
    """
    return model.loss_dm(m, z, theta)


def loss_d2m(model, m, z: DataPoint, theta, theta2) -> np.ndarray:
    """Second measure derivative at ``(m, z)`` (outer product over rows)."""
    return model.loss_d2m(m, z, theta, theta2)


def risk(model, m, nu: DataMeasure) -> float:
    """Average loss of ``m`` over the data measure ``nu``.

    Signed data measures are rejected: risk is only defined against a
    probability measure.
    """
    if nu.signed:
        raise ValueError("risk of a signed data measure is undefined")
    if isinstance(model, NNLoss):
        preds = model.predict_batch(m, nu.xs)
        return float(nu.weights @ model.outer.value(preds, nu.ys))
    if getattr(model, "lp_batch", None) is not None:
        lpm = model.lp_batch(m.nodes if isinstance(m, GridMeasure) else m.points,
                             nu.xs, nu.ys)
        if isinstance(m, GridMeasure):
            return float(nu.weights @ (lpm @ m.node_weights))
        return float(nu.weights @ lpm.mean(axis=1))
    vals = np.array([model.loss_value(m, nu.point(i))
                     for i in range(nu.n_atoms)])
    return float(nu.weights @ vals)


def growth_envelopes(model, m, theta=None):
    """Growth envelopes ``(g(m), g1(m, theta))``.

    ``g`` bounds the loss through ``|l(m, z)| <= g(m) (1 + ||z||^2)``
    and ``g1`` bounds the first derivative through
    ``|dl/dm(m, z, theta)| <= g1(m, theta) (1 + ||z||^2)``.  The second
    element is ``None`` when ``theta`` is omitted.
    """
    g = model.growth(m)
    g1 = model.growth_d1(m, theta) if theta is not None else None
    return g, g1
