"""Derivatives of trained measures with respect to the data measure.

The trained measure (the fixed point of the exponential tilt map)
depends smoothly on the data measure.  Its density derivative in the
direction of a sample ``z`` is obtained in three steps:

1. evaluate the risk derivative at the solution,
2. solve a well-posed linear system ``(Id + temperature * C_m) v = L``
   where ``C_m`` is the positive semidefinite curvature kernel of the
   risk at the solution (dense LU, grid sizes capped so cubic cost is
   acceptable),
3. assemble the signed density ``-temperature * m(theta) (v - E_m v)``.

A finite-difference oracle over re-solved problems cross-checks the
whole chain, and :func:`check_linear_derivative` verifies first-order
expansions of measure functionals along convex segments.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import losses as _losses
from .gibbs import GibbsConfig, GibbsSolution, risk_dm_nodes, solve_gibbs
from .measures import (DataMeasure, DataPoint, GridMeasure,
                       convex_combination)

_DENSE_NODE_CAP = 4096


def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes and weights on the unit interval."""
    if n < 1:
        raise ValueError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def check_linear_derivative(value_fn: Callable, deriv_fn: Callable,
                            m0: GridMeasure, m1: GridMeasure,
                            lambda_nodes: int = 8) -> float:
    """Residual of the first-order expansion along the segment ``m0 -> m1``.

    Checks ``value(m1) - value(m0) = int_0^1 <deriv(m_lam), m1 - m0> dlam``
    with ``m_lam = m0 + lam (m1 - m0)`` and Gauss-Legendre quadrature in
    ``lam``; ``deriv_fn(m)`` must return node values of the derivative
    on the shared grid.  Returns the absolute residual.
    """
    if not m0.same_grid(m1):
        raise ValueError("measures live on different grids")
    delta_w = (m1.density - m0.density) * m0.cell_volumes
    lams, wts = gauss_legendre_01(lambda_nodes)
    inner = 0.0
    for lam, wt in zip(lams, wts):
        m_lam = convex_combination(m0, m1, float(lam))
        vals = np.asarray(deriv_fn(m_lam), dtype=float)
        inner += wt * float(vals @ delta_w)
    return abs(float(value_fn(m1)) - float(value_fn(m0)) - inner)


@dataclasses.dataclass(frozen=True)
class KernelMatrix:
    """Curvature kernel of the risk at a measure, with quadrature weights.

    ``entries[i, j]`` holds the second measure derivative summed over
    the data atoms; the induced operator is
    ``(C f)(theta_i) = sum_j entries[i, j] weights[j] f(theta_j)`` with
    ``weights = density * cell_volumes``.  Symmetric, and positive
    semidefinite in the weighted inner product whenever the outer loss
    is convex.
    """

    entries: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("kernel entries must form a square matrix")
        if self.weights.shape != (self.entries.shape[0],):
            raise ValueError("weights do not match the kernel size")
        asym = float(np.max(np.abs(self.entries - self.entries.T))) \
            if self.entries.size else 0.0
        if asym > 1e-12:
            raise ValueError(f"kernel asymmetry {asym:.3e} exceeds 1e-12")

    @property
    def n_nodes(self) -> int:
        return self.entries.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.entries @ (self.weights * f)


@dataclasses.dataclass(frozen=True)
class SDerivative:
    """Node values of the data-direction derivative of the risk derivative.

    Solves the linearized fixed-point equation for the direction
    ``delta_z - nu``; its mean under the trained measure vanishes.
    """

    values: np.ndarray
    z: DataPoint


def build_Cm(model, m: GridMeasure, nu: DataMeasure) -> KernelMatrix:
    """Assemble the curvature kernel of the risk at ``(m, nu)``.

    For expected parametric losses the second measure derivative is
    identically zero and a zero kernel is returned.
    """
    if not isinstance(m, GridMeasure):
        raise TypeError("the curvature kernel is assembled on a grid measure")
    n = m.n_nodes
    w = m.node_weights
    if model.has_zero_d2m():
        return KernelMatrix(np.zeros((n, n)), w)
    entries = np.zeros((n, n))
    preds = model.predict_batch(m, nu.xs)
    curvs = nu.weights * model.outer.d2(preds, nu.ys)
    feats = model.phi_batch(m.nodes, nu.xs)
    for i in range(nu.n_atoms):
        v = feats[:, i] - preds[i]
        entries += curvs[i] * np.outer(v, v)
    entries = 0.5 * (entries + entries.T)
    return KernelMatrix(entries, w)


class TrainedDerivatives:
    """Derivative machinery around one trained measure.

    Caches the solved measure, the curvature kernel and its LU
    factorization so several sample directions ``z`` can be processed
    against the same data measure cheaply.
    """

    def __init__(self, model, nu: DataMeasure, cfg: GibbsConfig,
                 solution: Optional[GibbsSolution] = None,
                 solve_kwargs: Optional[dict] = None):
        self.model = model
        self.nu = nu
        self.cfg = cfg
        self._solution = solution
        self._solve_kwargs = dict(solve_kwargs or {})
        self._kernel = None
        self._lu = None
        self._nu_avg = None

    @property
    def solution(self) -> GibbsSolution:
        if self._solution is None:
            self._solution = solve_gibbs(self.model, self.nu, self.cfg,
                                         **self._solve_kwargs)
        return self._solution

    @property
    def measure(self) -> GridMeasure:
        return self.solution.measure

    @property
    def kernel(self) -> KernelMatrix:
        if self._kernel is None:
            self._kernel = build_Cm(self.model, self.measure, self.nu)
        return self._kernel

    def _ensure_lu(self):
        if self._lu is None:
            m = self.measure
            if m.n_nodes > _DENSE_NODE_CAP:
                raise ValueError(
                    f"grid has {m.n_nodes} nodes; the dense solve is capped "
                    f"at {_DENSE_NODE_CAP}")
            a = np.eye(m.n_nodes) + self.cfg.temperature * (
                self.kernel.entries * self.kernel.weights[None, :])
            try:
                self._lu = scipy.linalg.lu_factor(a)
            except scipy.linalg.LinAlgError as exc:
                raise RuntimeError(
                    f"singular derivative system (cond ~ "
                    f"{np.linalg.cond(a):.3e})") from exc
        return self._lu

    def _risk_dm_at(self, z: DataPoint) -> np.ndarray:
        return np.asarray(
            _losses.loss_dm(self.model, self.measure, z, self.measure.nodes),
            dtype=float)

    def _nu_average(self) -> np.ndarray:
        if self._nu_avg is None:
            self._nu_avg = risk_dm_nodes(self.model, self.measure, self.nu,
                                         self.measure.nodes, centered=True)
        return self._nu_avg

    def s_values(self, theta) -> np.ndarray:
        """Risk derivative at the trained measure, evaluated at ``theta``."""
        vals = np.zeros(np.atleast_2d(np.asarray(theta, dtype=float)).shape[0])
        for i in range(self.nu.n_atoms):
            vals = vals + self.nu.weights[i] * np.asarray(
                _losses.loss_dm(self.model, self.measure, self.nu.point(i),
                                theta), dtype=float)
        return vals

    def s_derivative(self, z: DataPoint) -> SDerivative:
        rhs = self._risk_dm_at(z) - self._nu_average()
        if self.model.has_zero_d2m():
            return SDerivative(rhs, z)
        lu = self._ensure_lu()
        return SDerivative(scipy.linalg.lu_solve(lu, rhs), z)

    def dm_dnu(self, z: DataPoint) -> GridMeasure:
        """Signed density derivative of the trained measure toward ``z``."""
        m = self.measure
        v = self.s_derivative(z).values
        centered = v - float(v @ m.node_weights)
        dens = -self.cfg.temperature * m.density * centered
        return GridMeasure(m.nodes, m.cell_volumes, dens, signed=True)


def S_value(model, nu: DataMeasure, cfg: GibbsConfig, theta,
            solution: Optional[GibbsSolution] = None,
            solve_kwargs: Optional[dict] = None) -> np.ndarray:
    """Risk derivative at the trained measure for data measure ``nu``."""
    td = TrainedDerivatives(model, nu, cfg, solution, solve_kwargs)
    return td.s_values(theta)


def solve_dS_dnu(model, nu: DataMeasure, cfg: GibbsConfig, z: DataPoint,
                 solution: Optional[GibbsSolution] = None,
                 solve_kwargs: Optional[dict] = None) -> SDerivative:
    """Data-direction derivative of the risk derivative, toward ``delta_z``.

    Solves ``(Id + temperature * C_m) v = L`` with
    ``L = dl/dm(m*, z, .) - int dl/dm(m*, z', .) nu(dz')`` by dense LU;
    the solution has zero mean under the trained measure and
    ``||v||_(L2(m*)) <= ||L||_(L2(m*))``.
    """
    td = TrainedDerivatives(model, nu, cfg, solution, solve_kwargs)
    return td.s_derivative(z)


def dm_dnu(model, nu: DataMeasure, cfg: GibbsConfig, z: DataPoint,
           solution: Optional[GibbsSolution] = None,
           solve_kwargs: Optional[dict] = None) -> GridMeasure:
    """Signed density derivative of the trained measure in direction ``z``."""
    td = TrainedDerivatives(model, nu, cfg, solution, solve_kwargs)
    return td.dm_dnu(z)


def finite_diff_dm_dnu(model, nu: DataMeasure, cfg: GibbsConfig, z: DataPoint,
                       eps: float = 1e-4,
                       solve_kwargs: Optional[dict] = None) -> GridMeasure:
    """Finite-difference oracle for :func:`dm_dnu`.

    Re-solves the problem at ``nu + eps (delta_z - nu)`` and returns the
    density difference quotient.  Both solves are run at tolerance
    ``eps^2 * 1e-2`` (or tighter if the caller asks) so solver error
    stays below the differencing error.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must be a small positive number")
    kwargs = dict(solve_kwargs or {})
    kwargs["tol"] = min(kwargs.get("tol", np.inf), eps ** 2 * 1e-2)
    xs = np.concatenate([nu.xs, [z.x]])
    ys = np.concatenate([nu.ys, [z.y]])
    w = np.concatenate([(1.0 - eps) * nu.weights, [eps]])
    nu_eps = DataMeasure(xs, ys, w)
    base = solve_gibbs(model, nu, cfg, **kwargs).measure
    bumped = solve_gibbs(model, nu_eps, cfg, **kwargs).measure
    dens = (bumped.density - base.density) / eps
    return GridMeasure(base.nodes, base.cell_volumes, dens, signed=True)
