"""Acceptance gate: one test (and one printed pass/fail line) per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see both the
per-criterion verdict lines and pytest's own status column.  Every
tolerance below is part of the package contract; seeds are fixed so
the whole file is deterministic.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from gibbslab import cli, funcderiv, gibbs, losses
from gibbslab.funcderiv import check_linear_derivative, dm_dnu, \
    finite_diff_dm_dnu, TrainedDerivatives
from gibbslab.genbench import (ExplicitGaussianMeanTrainer, GridGibbsTrainer,
                               convex_lower_bound_check, enumerate_exact_gen,
                               gaussian_bump_on_grid, gaussian_mean_oracle,
                               gaussian_mean_setup, gibbs_bound_constants,
                               lge, lge_upper_terms, noiseless_line_setup,
                               population_risk_bound, rate_fit, wge_direct,
                               wge_representation, wge_resampled)
from gibbslab.gibbs import (GibbsConfig, Regularizer, mfld_sample, prior_kl,
                            prior_moment_bound, solve_gibbs)
from gibbslab.measures import (DataPoint, GridMeasure, empirical_from_arrays,
                               uniform_grid, uniform_grid_1d)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

WEAK_REG = Regularizer(kappa=0.05, q=3)
EP_CFG = GibbsConfig(beta=0.5, sigma=1.0, p=4, regularizer=WEAK_REG,
                     nodes_per_axis=257)
EP_SOLVE = {"damping": 1.0, "tol": 1e-12}


def _report(num: int, ok: bool, text: str) -> None:
    print(f"\ncriterion {num:02d} {'PASS' if ok else 'FAIL'}: {text}")
    assert ok, f"criterion {num}: {text}"


# ---------------------------------------------------------------------------
# 1. closed-form oracle reproduction


def test_criterion_01_gaussian_oracle():
    model, pop = gaussian_mean_setup(0.0, 1.0)
    trainer = ExplicitGaussianMeanTrainer(1.0)
    ok = True
    worst = 0.0
    for n in (5, 10, 20, 50):
        oracle = gaussian_mean_oracle(1.0, n)
        for route in (wge_direct, wge_resampled):
            est = route(trainer, pop, model, n, 20000, seed=42)
            pull = abs(est.value - oracle) / est.stderr
            worst = max(worst, pull)
            ok = ok and pull <= 3.0
    _report(1, ok, f"direct and resampled match 2/n at 20000 replicates "
                   f"(worst |z| = {worst:.2f} <= 3)")


# ---------------------------------------------------------------------------
# 2. exact resampling identity


def test_criterion_02_resampling_identity():
    model = losses.mean_squared_param_loss()
    cfg = GibbsConfig(beta=1.0, sigma=1.0, p=4)
    trainer = GridGibbsTrainer(model, cfg, damping=1.0, tol=1e-12)
    two = [(DataPoint(np.zeros(0), 0.0), 0.5),
           (DataPoint(np.zeros(0), 1.0), 0.5)]
    three = [(DataPoint(np.zeros(0), -1.0), 0.25),
             (DataPoint(np.zeros(0), 0.3), 0.5),
             (DataPoint(np.zeros(0), 1.1), 0.25)]
    gaps = []
    for space in (two, three):
        w_def, w_swap = enumerate_exact_gen(trainer, space, model, 2)
        gaps.append(abs(w_def - w_swap))
    ok = max(gaps) <= 1e-12
    _report(2, ok, f"enumerated definition vs swap form agree "
                   f"(max gap {max(gaps):.2e} <= 1e-12)")


# ---------------------------------------------------------------------------
# 3. first-order expansion of the losses in the measure


def _random_bump_2d(rng, nodes, vol):
    c = rng.uniform(-0.8, 0.8, size=2)
    s = rng.uniform(0.3, 0.8)
    dens = np.exp(-np.sum((nodes - c) ** 2, axis=1) / (2 * s * s))
    return GridMeasure(nodes, vol, dens, normalize=True)


def _random_bump_1d(rng, nodes, vol):
    c = rng.uniform(-1.0, 1.0)
    s = rng.uniform(0.2, 0.6)
    dens = np.exp(-((nodes[:, 0] - c) ** 2) / (2 * s * s))
    return GridMeasure(nodes, vol, dens, normalize=True)


def test_criterion_03_derivative_identity():
    rng = np.random.default_rng(1234)
    nodes2, vol2 = uniform_grid(2.0, 33, 2)
    nodes1, vol1 = uniform_grid_1d(0.0, 2.0, 129)
    ep = losses.mean_squared_param_loss()
    results = {}
    for label, model, n_lam in (
            ("nn_quadratic", losses.NNLoss("tanh", "quadratic"), 64),
            ("nn_logcosh", losses.NNLoss("tanh", "logcosh"), 64),
            ("expected_param", ep, 64),
            ("nn_quadratic_4node", losses.NNLoss("tanh", "quadratic"), 4)):
        worst = 0.0
        for _ in range(100):
            if model.variant == "nn":
                m0 = _random_bump_2d(rng, nodes2, vol2)
                m1 = _random_bump_2d(rng, nodes2, vol2)
                nodes = nodes2
                z = DataPoint(rng.standard_normal(1),
                              float(rng.standard_normal()))
            else:
                m0 = _random_bump_1d(rng, nodes1, vol1)
                m1 = _random_bump_1d(rng, nodes1, vol1)
                nodes = nodes1
                z = DataPoint(np.zeros(0), float(rng.standard_normal()))
            res = check_linear_derivative(
                lambda m: losses.loss_value(model, m, z),
                lambda m: losses.loss_dm(model, m, z, nodes),
                m0, m1, lambda_nodes=n_lam)
            worst = max(worst, res)
        results[label] = worst
    ok = (results["nn_quadratic"] <= 1e-6 and results["nn_logcosh"] <= 1e-6
          and results["expected_param"] <= 1e-6
          and results["nn_quadratic_4node"] <= 1e-10)
    _report(3, ok, "100-triple expansion residuals "
            f"nn_quad {results['nn_quadratic']:.1e}, "
            f"nn_logcosh {results['nn_logcosh']:.1e}, "
            f"param {results['expected_param']:.1e} (<= 1e-6); "
            f"4-node quad {results['nn_quadratic_4node']:.1e} (<= 1e-10)")


# ---------------------------------------------------------------------------
# 4. fixed point of the tilt map


def test_criterion_04_gibbs_fixed_point():
    nn = losses.NNLoss("tanh", "quadratic")
    cfg_nn = GibbsConfig(beta=0.7, sigma=1.0, p=8, theta_dim=2,
                         nodes_per_axis=65)
    rng = np.random.default_rng(40)
    xs = rng.standard_normal((8, 1))
    ys = np.tanh(1.3 * xs[:, 0]) + 0.1 * rng.standard_normal(8)
    nu_nn = empirical_from_arrays(xs, ys)
    sol_a = solve_gibbs(nn, nu_nn, cfg_nn, damping=0.5, tol=1e-9)
    sol_b = solve_gibbs(nn, nu_nn, cfg_nn, damping=0.5, tol=1e-9,
                        init=cfg_nn.priors().gamma_tilt_p)
    sup_gap = float(np.max(np.abs(sol_a.measure.density
                                  - sol_b.measure.density)))

    ep = losses.mean_squared_param_loss()
    nu_ep = empirical_from_arrays(np.zeros((8, 0)), rng.standard_normal(8))
    sol_ep = solve_gibbs(ep, nu_ep, EP_CFG, damping=1.0, tol=1e-12)

    slack = 1e-6
    ok_resid = sol_a.residual <= 1e-8 and sol_ep.residual <= 1e-8
    ok_one = sol_ep.iterations == 1
    ok_inits = sup_gap <= 1e-6
    checks = []
    for model, nu, cfg, sol in ((nn, nu_nn, cfg_nn, sol_a),
                                (ep, nu_ep, EP_CFG, sol_ep)):
        pair = cfg.priors()
        mom_ok = sol.measure.moment(cfg.p) \
            <= prior_moment_bound(model, nu, cfg) + slack
        kl_ok = cfg.kl_weight * prior_kl(sol.measure, cfg) \
            <= losses.risk(model, pair.gamma_sigma, nu) + slack
        checks.append(mom_ok and kl_ok)
    ok = ok_resid and ok_one and ok_inits and all(checks)
    _report(4, ok, f"residuals <= 1e-8, parametric solve in 1 step, "
                   f"two-init sup gap {sup_gap:.1e} <= 1e-6, "
                   f"moment and value bounds hold with slack {slack:g}")


# ---------------------------------------------------------------------------
# 5. trained-measure derivative in the data


def test_criterion_05_dm_dnu():
    ep = losses.mean_squared_param_loss()
    rng = np.random.default_rng(50)
    nu_ep = empirical_from_arrays(np.zeros((6, 0)), rng.standard_normal(6))
    z = nu_ep.point(0)
    an = dm_dnu(ep, nu_ep, EP_CFG, z, solve_kwargs=EP_SOLVE)
    fd = finite_diff_dm_dnu(ep, nu_ep, EP_CFG, z, eps=1e-4,
                            solve_kwargs=EP_SOLVE)
    rel_ep = (np.abs(an.node_weights - fd.node_weights).sum()
              / np.abs(fd.node_weights).sum())

    nn = losses.NNLoss("tanh", "quadratic")
    cfg_nn = GibbsConfig(beta=0.7, sigma=1.0, p=4, theta_dim=2,
                         nodes_per_axis=49)
    xs = rng.standard_normal((5, 1))
    ys = np.tanh(1.1 * xs[:, 0]) + 0.05 * rng.standard_normal(5)
    nu_nn = empirical_from_arrays(xs, ys)
    z_nn = nu_nn.point(1)
    kw = {"damping": 0.5, "tol": 1e-10}
    an_nn = dm_dnu(nn, nu_nn, cfg_nn, z_nn, solve_kwargs=kw)
    fd_nn = finite_diff_dm_dnu(nn, nu_nn, cfg_nn, z_nn, eps=1e-4,
                               solve_kwargs=kw)
    rel_nn = (np.abs(an_nn.node_weights - fd_nn.node_weights).sum()
              / np.abs(fd_nn.node_weights).sum())

    td = TrainedDerivatives(ep, nu_ep, EP_CFG, solve_kwargs=EP_SOLVE)
    m = td.measure
    deriv = td.dm_dnu(z)
    v = td.s_derivative(z).values
    w = m.node_weights
    tau = EP_CFG.temperature
    worst_cov = 0.0
    for _ in range(20):
        f = np.cos(rng.uniform(0.2, 3.0) * m.nodes[:, 0]
                   + rng.uniform(0.0, 6.0))
        lhs = float(f @ deriv.node_weights)
        cov = float((f * v) @ w) - float(f @ w) * float(v @ w)
        worst_cov = max(worst_cov, abs(lhs + tau * cov))

    ok = rel_ep <= 1e-3 and rel_nn <= 1e-2 and worst_cov <= 1e-8
    _report(5, ok, f"finite-difference rel L1: param {rel_ep:.1e} <= 1e-3, "
                   f"network {rel_nn:.1e} <= 1e-2; covariance form "
                   f"{worst_cov:.1e} <= 1e-8 over 20 test functions")


# ---------------------------------------------------------------------------
# 6. representation route consistency


def test_criterion_06_representation_consistency():
    model, pop = noiseless_line_setup(0.5, 1.0)
    trainer = GridGibbsTrainer(model, EP_CFG)
    hits = 0
    for seed in range(300, 310):
        rep = wge_representation(trainer, pop, model, 6, 120, seed=seed)
        direct = wge_direct(trainer, pop, model, 6, 600, seed=seed)
        lo_r, hi_r = rep.value - 2 * rep.stderr, rep.value + 2 * rep.stderr
        lo_d, hi_d = (direct.value - 2 * direct.stderr,
                      direct.value + 2 * direct.stderr)
        if max(lo_r, lo_d) <= min(hi_r, hi_d):
            hits += 1
    ok = hits >= 9
    _report(6, ok, f"2-stderr intervals of the representation and direct "
                   f"routes overlap on {hits}/10 seeded runs (>= 9)")


# ---------------------------------------------------------------------------
# 7. computable bounds dominate the estimates


def test_criterion_07_bound_dominance():
    model, pop = gaussian_mean_setup(0.0, 1.0)
    trainer = GridGibbsTrainer(model, EP_CFG)
    ok = True
    notes = []
    for n in (5, 10, 20, 50):
        consts = gibbs_bound_constants(model, EP_CFG, pop, n)
        w = wge_resampled(trainer, pop, model, n, 60, seed=9)
        l = lge(trainer, pop, model, n, 60, seed=9)
        rep = lge_upper_terms(trainer, pop, model, n, 60, seed=9)
        _, low, conv_ok = convex_lower_bound_check(trainer, pop, model, n,
                                                   40, seed=9)
        ok = (ok and abs(w.value) <= consts.wge_bound
              and l.value <= consts.lge_bound and rep.holds and conv_ok)
        if n == 5:
            notes.append(f"|wge| {abs(w.value):.3f} <= {consts.wge_bound:.2e}")
            notes.append(f"lge {l.value:.3f} <= mc bound "
                         f"{rep.bound_with_margin:.2f}")
    _report(7, ok, "constants and sampled terms dominate both error "
                   "routes at n in {5,10,20,50}; convexity minorant holds "
                   f"({'; '.join(notes)})")


# ---------------------------------------------------------------------------
# 8. convergence rates


def test_criterion_08_rates():
    ns = [5, 10, 20, 40, 80]
    model, pop = gaussian_mean_setup(0.0, 1.0)
    trainer = ExplicitGaussianMeanTrainer(1.0)
    ests = [wge_direct(trainer, pop, model, n, 20000, seed=101) for n in ns]
    fit_explicit = rate_fit(ns, ests)

    grid_trainer = GridGibbsTrainer(model, EP_CFG)
    ests_g = [wge_resampled(grid_trainer, pop, model, n, 3000, seed=202)
              for n in ns]
    fit_grid = rate_fit(ns, ests_g)

    ok = -1.15 <= fit_explicit.slope <= -0.85 and fit_grid.slope <= -0.7
    _report(8, ok, f"explicit trainer slope {fit_explicit.slope:.3f} in "
                   f"[-1.15, -0.85]; fixed-temperature grid trainer slope "
                   f"{fit_grid.slope:.3f} <= -0.7")


# ---------------------------------------------------------------------------
# 9. temperature scheduling flattens the scaled bound


def test_criterion_09_beta_scheduling():
    model, pop = noiseless_line_setup(0.5, 1.0)
    m_bar = gaussian_bump_on_grid(EP_CFG, 0.5, 0.2)
    ns = (16, 64, 256)
    variations = {}
    for mode, beta0, power in (("wge_n14", 0.05, 0.5),
                               ("lge_n16", 4e-4, 2.0 / 3.0)):
        cfg = GibbsConfig(beta=beta0, sigma=1.0, p=4, regularizer=WEAK_REG,
                          nodes_per_axis=257, radius=EP_CFG.box_radius())
        trainer = GridGibbsTrainer(model, cfg)
        scaled = []
        holds = True
        for n in ns:
            rep = population_risk_bound(trainer, pop, model, m_bar, n,
                                        mode, 100, seed=5)
            scaled.append(n ** power * rep.risk_bound)
            holds = holds and rep.holds
        variations[mode] = (max(scaled) - min(scaled)) / min(scaled)
        variations[mode + "_holds"] = holds
    ok = (variations["wge_n14"] < 0.10 and variations["lge_n16"] < 0.10
          and variations["wge_n14_holds"] and variations["lge_n16_holds"])
    _report(9, ok, f"scaled bounds flat across n in {{16,64,256}}: "
                   f"sqrt(n) x weak bound varies {variations['wge_n14']:.1%}"
                   f", n^(2/3) x squared bound varies "
                   f"{variations['lge_n16']:.1%} (< 10%)")


# ---------------------------------------------------------------------------
# 10. particle dynamics against the grid solution


def test_criterion_10_langevin_vs_grid():
    model = losses.mean_squared_param_loss()
    cfg = GibbsConfig(beta=0.8, sigma=1.0, p=4, regularizer=WEAK_REG,
                      nodes_per_axis=257)
    rng = np.random.default_rng(60)
    nu = empirical_from_arrays(np.zeros((12, 0)),
                               0.3 + rng.standard_normal(12))
    sol = solve_gibbs(model, nu, cfg, damping=1.0, tol=1e-12)
    part = mfld_sample(model, nu, cfg, 4096, 1e-3, 4000, seed=61)
    samp = part.points[:, 0]
    n_p = samp.size

    diffs = []
    ok = True
    for value, oracle, se in (
            (samp.mean(), sol.measure.mean()[0],
             samp.std(ddof=1) / math.sqrt(n_p)),
            ((samp ** 2).mean(), sol.measure.moment(2),
             (samp ** 2).std(ddof=1) / math.sqrt(n_p))):
        diffs.append(abs(value - oracle) / se)
        ok = ok and abs(value - oracle) <= 3 * se
    _report(10, ok, f"particle mean and second moment match the grid "
                    f"solution (|z| = {diffs[0]:.2f}, {diffs[1]:.2f} <= 3 "
                    f"at 4096 particles)")


# ---------------------------------------------------------------------------
# 11. byte-level determinism of the runner


@pytest.mark.parametrize("config_name", ["mfld_vs_grid.json",
                                         "bounds_gaussian.json"])
def test_criterion_11_determinism(tmp_path, config_name):
    cfg_path = CONFIG_DIR / config_name
    assert cfg_path.exists(), f"missing experiment config {config_name}"
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        code = cli.run(str(cfg_path), out=str(out))
        assert code == 0
        files = sorted(p.name for p in out.iterdir())
        assert files
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    ok = outs[0] == outs[1]
    _report(11, ok, f"re-running {config_name} reproduces "
                    f"{len(outs[0])} output file(s) byte for byte")


def test_criterion_11_verify_report_determinism(tmp_path):
    cli.verify(seed=0, out=str(tmp_path / "a"))
    cli.verify(seed=0, out=str(tmp_path / "b"))
    ok = (tmp_path / "a" / "verify_report.json").read_bytes() \
        == (tmp_path / "b" / "verify_report.json").read_bytes()
    _report(11, ok, "the built-in verification report is byte-stable")
