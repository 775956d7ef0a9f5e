"""KL-regularized risk minimization over parameter measures.

The objective is

    V(m, nu) = R(m, nu) + (sigma^2 / (2 beta^2)) KL(m || gamma_sigma)

where ``R`` is the average loss of ``m`` over the data measure ``nu``
and ``gamma_sigma`` is the prior with density proportional to
``exp(-U(theta)/sigma^2)`` for a polynomial confinement ``U``.

Minimizers are fixed points of the tilt map implemented by
:func:`gibbs_map`; :func:`solve_gibbs` finds them by damped fixed-point
iteration on a tensor grid and :func:`mfld_sample` approximates them
with an Euler-Maruyama particle system.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from . import losses as _losses
from .measures import DataMeasure, GridMeasure, ParticleMeasure, uniform_grid


class GibbsConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclasses.dataclass(frozen=True)
class Regularizer:
    """Polynomial confinement ``U(theta) = kappa * ||theta||^(2q)``.

    ``q`` must be a positive integer so ``U`` is smooth; growth
    admissibility against a loss model is checked by
    :meth:`validate_growth`.
    """

    kappa: float = 1.0
    q: int = 1

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("confinement strength must be positive")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("confinement exponent q must be an integer >= 1")
        object.__setattr__(self, "q", int(self.q))

    def value(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        r2 = np.einsum("ij,ij->i", theta, theta)
        return self.kappa * r2 ** self.q

    def value_radial(self, r) -> np.ndarray:
        return self.kappa * np.asarray(r, dtype=float) ** (2 * self.q)

    def grad(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        r2 = np.einsum("ij,ij->i", theta, theta)
        return (2.0 * self.q * self.kappa * r2 ** (self.q - 1))[:, None] * theta

    def validate_growth(self, model, p: float) -> None:
        """Check ``2q`` strictly dominates the loss and moment growth.

        The first-derivative envelope grows like ``||theta||^4`` for
        network losses and ``||theta||^2`` for expected parametric
        losses; the moment bound machinery additionally needs
        ``2q > p``.
        """
        need = max(p, 4.0 if model.variant == "nn" else 2.0)
        if not 2 * self.q > need:
            raise ValueError(
                f"confinement degree 2q={2 * self.q} must exceed {need} "
                f"for this model and moment order")


def default_regularizer(p: float, kappa: float = 1.0) -> Regularizer:
    """Default confinement for moment order ``p``: ``q = max(1, ceil((p+1)/2))``."""
    return Regularizer(kappa=kappa, q=max(1, math.ceil((p + 1.0) / 2.0)))


@dataclasses.dataclass
class GibbsConfig:
    """Problem configuration for the regularized objective.

    Parameters
    ----------
    beta, sigma : float
        Inverse-temperature-like and prior-width parameters; the
        KL weight is ``sigma^2 / (2 beta^2)`` and the tilt temperature
        ``2 beta^2 / sigma^2``.
    p : float
        Moment order (>= 2) tracked by the bound machinery.
    regularizer : Regularizer, optional
        Confinement defining the prior; defaults to the moment-matched
        ``default_regularizer(p)``.
    theta_dim : int
        Dimension of the parameter space.
    nodes_per_axis : int
        Grid resolution per axis (cell-centered uniform grid).
    radius : float, optional
        Half-width of the grid box.  When omitted it is chosen so both
        the prior and its ``||theta||^p``-tilted companion carry tail
        mass below ``tail_mass`` outside the box.
    """

    beta: float
    sigma: float
    p: float
    regularizer: Optional[Regularizer] = None
    theta_dim: int = 1
    nodes_per_axis: int = 129
    radius: Optional[float] = None
    tail_mass: float = 1e-10

    def __post_init__(self):
        if self.beta <= 0 or self.sigma <= 0:
            raise ValueError("beta and sigma must be positive")
        if self.p < 2:
            raise ValueError("moment order p must be at least 2")
        if self.regularizer is None:
            self.regularizer = default_regularizer(self.p)
        if self.theta_dim < 1:
            raise ValueError("parameter dimension must be at least 1")
        if self.nodes_per_axis < 8:
            raise ValueError("grid needs at least 8 nodes per axis")
        if not 0 < self.tail_mass < 1e-4:
            raise ValueError("tail mass must be a small positive number")
        self._cache = {}

    @property
    def temperature(self) -> float:
        """Tilt temperature ``2 beta^2 / sigma^2``."""
        return 2.0 * self.beta ** 2 / self.sigma ** 2

    @property
    def kl_weight(self) -> float:
        """KL coefficient ``sigma^2 / (2 beta^2)``."""
        return self.sigma ** 2 / (2.0 * self.beta ** 2)

    def with_beta(self, beta: float) -> "GibbsConfig":
        """Copy of the configuration with a different ``beta``.

        The grid box is pinned to this configuration's radius so that
        measures remain comparable across a beta schedule.
        """
        return GibbsConfig(beta=beta, sigma=self.sigma, p=self.p,
                           regularizer=self.regularizer,
                           theta_dim=self.theta_dim,
                           nodes_per_axis=self.nodes_per_axis,
                           radius=self.box_radius(),
                           tail_mass=self.tail_mass)

    # -- grid and priors ----------------------------------------------------

    def box_radius(self) -> float:
        if "radius" not in self._cache:
            if self.radius is not None:
                if self.radius <= 0:
                    raise ValueError("grid radius must be positive")
                self._cache["radius"] = float(self.radius)
            else:
                reg, s2 = self.regularizer, self.sigma ** 2
                r_prior = _radial_tail_radius(
                    lambda r: -reg.value_radial(r) / s2,
                    self.theta_dim, self.tail_mass)
                r_tilt = _radial_tail_radius(
                    lambda r: -reg.value_radial(r) / s2 + r ** self.p,
                    self.theta_dim, self.tail_mass)
                self._cache["radius"] = max(r_prior, r_tilt)
        return self._cache["radius"]

    def grid(self):
        """Grid nodes and scalar cell volume for this configuration."""
        if "grid" not in self._cache:
            self._cache["grid"] = uniform_grid(
                self.box_radius(), self.nodes_per_axis, self.theta_dim)
        return self._cache["grid"]

    def priors(self) -> "PriorPair":
        if "priors" not in self._cache:
            nodes, vol = self.grid()
            u = self.regularizer.value(nodes)
            expo = -u / self.sigma ** 2
            gamma, f_sigma = _normalized_exp(nodes, vol, expo)
            r = np.sqrt(np.einsum("ij,ij->i", nodes, nodes))
            tilt, f_tilt = _normalized_exp(nodes, vol, expo + r ** self.p)
            self._cache["priors"] = PriorPair(gamma, tilt, f_sigma, f_tilt)
        return self._cache["priors"]


@dataclasses.dataclass(frozen=True)
class PriorPair:
    """Prior, its ``||theta||^p``-tilted companion, and their grid normalizers."""

    gamma_sigma: GridMeasure
    gamma_tilt_p: GridMeasure
    normalizer_sigma: float
    normalizer_tilt_p: float


def _normalized_exp(nodes, vol, exponent):
    """Grid-normalized density ``exp(exponent)`` and its quadrature normalizer."""
    shift = float(np.max(exponent))
    if not np.isfinite(shift):
        raise ValueError("degenerate exponent on the grid")
    raw = np.exp(exponent - shift)
    mass = float(raw.sum()) * vol
    if mass <= 0 or not np.isfinite(mass):
        raise ValueError("density underflows everywhere on the grid")
    measure = GridMeasure(nodes, vol, raw / (mass))
    normalizer = math.exp(shift) * mass if shift < 700 else math.inf
    return measure, normalizer


def _radial_tail_radius(exponent, dim, tail_mass):
    """Smallest radius whose radial tail mass ratio is below ``tail_mass``.

    ``exponent`` is the radial log-density ``f(r)``; the mass element is
    ``r^(dim-1) exp(f(r)) dr``.  A box of this half-width contains the
    ball, so the box tail is no larger.
    """
    # find a cutoff where the log mass element has dropped far below its peak
    r_hi, peak = 1.0, -np.inf
    for _ in range(200):
        probes = np.linspace(1e-9, r_hi, 4097)
        logs = (dim - 1) * np.log(probes) + exponent(probes)
        peak = max(peak, float(np.max(logs)))
        if logs[-1] < peak - 240.0:
            break
        r_hi *= 1.5
    else:
        raise ValueError("radial density does not decay; check the confinement")
    r = np.linspace(0.0, r_hi, 200001)
    with np.errstate(divide="ignore"):
        logs = np.where(r > 0, (dim - 1) * np.log(np.maximum(r, 1e-300))
                        + exponent(np.maximum(r, 1e-300)), -np.inf)
    w = np.exp(logs - np.max(logs))
    cum = np.concatenate([[0.0], np.cumsum((w[1:] + w[:-1]) * 0.5)])
    total = cum[-1]
    tail_ratio = 1.0 - cum / total
    idx = int(np.searchsorted(-tail_ratio, -tail_mass))
    idx = min(max(idx, 1), len(r) - 1)
    return float(r[idx])


# ---------------------------------------------------------------------------
# objective and fixed point


def kl_divergence(m: GridMeasure, ref: GridMeasure) -> float:
    """KL divergence between grid measures on the same grid.

    Uses the conventions ``0 log(0/q) = 0`` and ``+inf`` when ``m``
    puts mass where ``ref`` has none.
    """
    if not isinstance(m, GridMeasure) or not isinstance(ref, GridMeasure):
        raise TypeError("KL divergence needs two grid measures")
    if m.signed or ref.signed:
        raise ValueError("KL divergence of a signed measure is undefined")
    if not m.same_grid(ref):
        raise ValueError("grid measures live on different grids")
    pos = m.density > 0.0
    if np.any(ref.density[pos] <= 0.0):
        return math.inf
    ratio = m.density[pos] / ref.density[pos]
    return float((m.density[pos] * np.log(ratio)) @ m.cell_volumes[pos])


def prior_kl(m: GridMeasure, cfg: GibbsConfig) -> float:
    """KL divergence of a grid measure from the reference prior.

    Equivalent to ``kl_divergence(m, gamma_sigma)`` but evaluated in log
    space from the analytic prior exponent, so it stays finite on wide
    boxes where the prior density itself underflows to zero at the edge
    nodes.
    """
    if not isinstance(m, GridMeasure):
        raise TypeError("prior KL needs a grid measure")
    if m.signed:
        raise ValueError("KL divergence of a signed measure is undefined")
    pair = cfg.priors()
    if not m.same_grid(pair.gamma_sigma):
        raise ValueError("measure does not live on the configuration grid")
    if not math.isfinite(pair.normalizer_sigma):
        raise ValueError("prior normalizer overflows")
    w = m.node_weights
    pos = w > 0.0
    u_over = cfg.regularizer.value(m.nodes[pos]) / cfg.sigma ** 2
    return float(w[pos] @ (np.log(m.density[pos]) + u_over)
                 + math.log(pair.normalizer_sigma))


def objective(model, m: GridMeasure, nu: DataMeasure, cfg: GibbsConfig) -> float:
    """Regularized objective ``R(m, nu) + kl_weight * KL(m || gamma_sigma)``."""
    if not isinstance(m, GridMeasure):
        raise TypeError("objective needs a grid measure; KL of particles "
                        "is undefined here")
    return _losses.risk(model, m, nu) + cfg.kl_weight * kl_divergence(
        m, cfg.priors().gamma_sigma)


def risk_dm_nodes(model, m, nu: DataMeasure, nodes: np.ndarray,
                  centered: bool = True) -> np.ndarray:
    """Measure derivative of the empirical risk evaluated at all nodes.

    ``centered=False`` drops the m-average normalization constant,
    which the exponential tilt map is invariant to.
    """
    if isinstance(model, _losses.NNLoss):
        preds = model.predict_batch(m, nu.xs)
        coef = nu.weights * model.outer.d1(preds, nu.ys)
        out = model.phi_batch(nodes, nu.xs) @ coef - float(preds @ coef)
        return out
    lpm = lp_matrix(model, nu, nodes)
    out = nu.weights @ lpm
    if centered:
        w = _node_weights(m)
        out = out - float(out @ w) if w is not None else out - _particle_mean(
            model, m, nu)
    return out


def lp_matrix(model, nu: DataMeasure, nodes: np.ndarray) -> np.ndarray:
    """Per-atom parametric losses on the nodes, shape (n_atoms, N)."""
    if getattr(model, "lp_batch", None) is not None:
        return model.lp_batch(nodes, nu.xs, nu.ys)
    return np.stack([model.lp(nodes, nu.point(i)) for i in range(nu.n_atoms)])


def _node_weights(m):
    if isinstance(m, GridMeasure):
        return m.node_weights
    return None


def _particle_mean(model, m, nu):
    vals = np.array([model.loss_value(m, nu.point(i)) for i in range(nu.n_atoms)])
    return float(nu.weights @ vals)


def gibbs_map(model, m, nu: DataMeasure, cfg: GibbsConfig) -> GridMeasure:
    """One application of the exponential tilt map.

    Returns the grid measure with density proportional to
    ``exp(-(2 beta^2/sigma^2) [dR/dm(m, nu, theta) + U(theta)/(2 beta^2)])``,
    normalized by grid quadrature.  The map is invariant under constant
    shifts of the loss; exponentiation is stabilized by subtracting the
    maximal exponent.
    """
    nodes, vol = cfg.grid()
    drdm = risk_dm_nodes(model, m, nu, nodes, centered=False)
    expo = -cfg.temperature * drdm - cfg.regularizer.value(nodes) / cfg.sigma ** 2
    try:
        out, _ = _normalized_exp(nodes, vol, expo)
    except ValueError as exc:
        raise ValueError(f"tilt map produced a degenerate density: {exc}") from exc
    return out


@dataclasses.dataclass(frozen=True)
class GibbsSolution:
    """Solver output: the fixed-point measure plus iteration diagnostics."""

    measure: GridMeasure
    iterations: int
    residual: float


def solve_gibbs(model, nu: DataMeasure, cfg: GibbsConfig,
                damping: float = 0.5, tol: float = 1e-8,
                max_iter: int = 500, init: Optional[GridMeasure] = None
                ) -> GibbsSolution:
    """Damped fixed-point iteration for the regularized minimizer.

    Starting from the prior (or ``init``), repeatedly applies
    :func:`gibbs_map` with relaxation ``damping`` until the sup-norm
    density residual ``||map(m) - m||_inf`` falls below ``tol``.
    ``iterations`` counts damped updates actually applied, so a model
    whose tilt map does not depend on ``m`` converges after exactly one
    update at ``damping=1``.

    Raises
    ------
    GibbsConvergenceError
        If ``max_iter`` updates do not reach ``tol``; the error carries
        the last residual.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    nodes, vol = cfg.grid()
    m = cfg.priors().gamma_sigma if init is None else init
    if init is not None and (not isinstance(init, GridMeasure)
                             or init.nodes.shape != nodes.shape
                             or not np.array_equal(init.nodes, nodes)):
        raise ValueError("initial measure lives on a different grid")
    residual = math.inf
    for it in range(max_iter + 1):
        target = gibbs_map(model, m, nu, cfg)
        residual = float(np.max(np.abs(target.density - m.density)))
        if residual <= tol:
            return GibbsSolution(m, it, residual)
        if it == max_iter:
            break
        dens = (1.0 - damping) * m.density + damping * target.density
        m = GridMeasure(nodes, vol, dens, normalize=True)
    raise GibbsConvergenceError(
        f"no fixed point after {max_iter} updates; last residual {residual:.3e}",
        residual)


def objective_gap_bound(model, nu: DataMeasure, cfg: GibbsConfig,
                        m_bar: GridMeasure) -> float:
    """Value bound ``kl_weight * KL(m_bar || gamma_sigma)``.

    Bounds the optimal objective whenever ``m_bar`` has zero empirical
    risk; callers with a non-interpolating reference measure must add
    its risk themselves.  ``model`` and ``nu`` identify the problem
    instance but do not enter the number.
    """
    del model, nu
    return cfg.kl_weight * kl_divergence(m_bar, cfg.priors().gamma_sigma)


def prior_moment_bound(model, nu: DataMeasure, cfg: GibbsConfig) -> float:
    """Upper bound ``R(gamma_tilt_p, nu) + E_gamma_tilt ||theta||^p``.

    The p-th moment of any objective minimizer is bounded by this
    quantity, which depends only on the tilted prior.
    """
    tilt = cfg.priors().gamma_tilt_p
    return _losses.risk(model, tilt, nu) + tilt.moment(cfg.p)


# ---------------------------------------------------------------------------
# particle sampler


def _lp_grad(model, pts, z):
    if model.lp_grad is not None:
        return model.lp_grad(pts, z)
    # centered finite difference fallback, coordinate by coordinate
    g = np.empty_like(pts)
    for j in range(pts.shape[1]):
        h = 1e-6 * (1.0 + np.abs(pts[:, j]))
        up, down = pts.copy(), pts.copy()
        up[:, j] += h
        down[:, j] -= h
        g[:, j] = (model.lp(up, z) - model.lp(down, z)) / (2.0 * h)
    return g


def _drift(model, nu, cfg, pts):
    """Gradient of ``dR/dm(m_hat, nu, .) + U(.)/(2 beta^2)`` at the particles."""
    out = cfg.regularizer.grad(pts) / (2.0 * cfg.beta ** 2)
    if isinstance(model, _losses.NNLoss):
        preds = model.phi_batch(pts, nu.xs).mean(axis=0)
        coef = nu.weights * model.outer.d1(preds, nu.ys)
        for i in range(nu.n_atoms):
            out += coef[i] * model.phi_grad(pts, nu.xs[i])
    else:
        for i in range(nu.n_atoms):
            out += nu.weights[i] * _lp_grad(model, pts, nu.point(i))
    return out


def _init_scale(cfg: GibbsConfig) -> float:
    """Per-coordinate standard deviation of the prior (radial quadrature)."""
    reg, s2, d = cfg.regularizer, cfg.sigma ** 2, cfg.theta_dim
    r = np.linspace(0.0, cfg.box_radius(), 20001)[1:]
    logs = (d - 1) * np.log(r) - reg.value_radial(r) / s2
    w = np.exp(logs - logs.max())
    second = float((w * r ** 2).sum() / w.sum())
    return math.sqrt(second / d)


def mfld_sample(model, nu: DataMeasure, cfg: GibbsConfig, n_particles: int,
                step_size: float, n_steps: int, seed: int,
                init: Optional[np.ndarray] = None) -> ParticleMeasure:
    """Euler-Maruyama simulation of the interacting particle dynamics.

    Each particle follows
    ``theta <- theta - h * grad[dR/dm(m_hat, nu, theta) + U(theta)/(2 beta^2)]
    + sqrt(h sigma^2 / beta^2) * xi``
    with ``m_hat`` the empirical particle measure, so the stationary law
    matches the exponential tilt fixed point.  Deterministic for a fixed
    ``seed``.

    Raises
    ------
    ValueError
        For activations without a derivative, or when the heuristic
        stability check ``h * temperature * L <= 0.25`` fails (``L`` a
        probed Lipschitz scale of the drift).
    RuntimeError
        If any particle escapes ten box radii (divergence detector).
    """
    if isinstance(model, _losses.NNLoss) and model.activation.deriv is None:
        raise ValueError(
            f"activation {model.activation.kind!r} is not differentiable; "
            "the particle sampler requires a smooth activation")
    if n_particles < 1 or n_steps < 1 or step_size <= 0:
        raise ValueError("need positive particle count, steps and step size")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    radius = cfg.box_radius()
    if init is None:
        pts = _init_scale(cfg) * rng.standard_normal((n_particles, cfg.theta_dim))
    else:
        pts = np.array(init, dtype=float)
        if pts.shape != (n_particles, cfg.theta_dim):
            raise ValueError("initial particle array has the wrong shape")

    # heuristic stability probe: drift Lipschitz scale on the initial cloud
    k = min(n_particles, 33)
    probe = pts[:k]
    d0 = _drift(model, nu, cfg, probe)
    num = np.linalg.norm(d0[1:] - d0[:-1], axis=1)
    den = np.linalg.norm(probe[1:] - probe[:-1], axis=1)
    ok = den > 1e-12
    lip = float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0
    if step_size * cfg.temperature * lip > 0.25:
        raise ValueError(
            f"step size {step_size} too large: h * temperature * L = "
            f"{step_size * cfg.temperature * lip:.3g} exceeds 0.25")

    noise_scale = math.sqrt(step_size * cfg.sigma ** 2 / cfg.beta ** 2)
    for _ in range(n_steps):
        pts = pts - step_size * _drift(model, nu, cfg, pts) \
            + noise_scale * rng.standard_normal(pts.shape)
        if np.max(np.abs(pts)) > 10.0 * radius:
            raise RuntimeError(
                "particle system diverged (left ten box radii); "
                "reduce the step size")
    return ParticleMeasure(pts)
