"""Tests for data measures, grid measures, and convex combinations."""

import numpy as np
import pytest

from gibbslab import measures
from gibbslab.measures import (DataMeasure, DataPoint, GridMeasure,
                               ParticleMeasure, convex_combination,
                               empirical_from_arrays, empirical_from_samples,
                               resample, uniform_grid, uniform_grid_1d)


def test_data_point_validation():
    z = DataPoint(np.array([1.0, 2.0]), 3.0)
    assert z.x.shape == (2,)
    assert z.y == 3.0
    with pytest.raises(ValueError):
        DataPoint(np.array([[1.0]]), 0.0)
    with pytest.raises(ValueError):
        DataPoint(np.array([1.0]), np.nan)


def test_empirical_from_arrays_uniform_weights():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((7, 3))
    ys = rng.standard_normal(7)
    nu = empirical_from_arrays(xs, ys)
    assert nu.n_atoms == 7
    assert nu.feature_dim == 3
    np.testing.assert_allclose(nu.weights, np.full(7, 1.0 / 7.0))
    z = nu.point(2)
    np.testing.assert_array_equal(z.x, xs[2])
    assert z.y == ys[2]


def test_empirical_from_samples_matches_arrays():
    pts = [DataPoint(np.array([0.5]), 1.0), DataPoint(np.array([-1.0]), 2.0)]
    nu = empirical_from_samples(pts)
    nu2 = empirical_from_arrays(np.array([[0.5], [-1.0]]),
                                np.array([1.0, 2.0]))
    np.testing.assert_array_equal(nu.xs, nu2.xs)
    np.testing.assert_array_equal(nu.ys, nu2.ys)


def test_resample_replaces_atoms_and_preserves_original():
    xs = np.arange(8.0)[:, None]
    ys = np.arange(8.0)
    nu = empirical_from_arrays(xs, ys)
    z_new = DataPoint(np.array([99.0]), -1.0)
    nu2 = resample(nu, [0, 3], [z_new, z_new])
    assert nu2.ys[0] == -1.0 and nu2.ys[3] == -1.0
    assert nu2.xs[0, 0] == 99.0
    # untouched atoms and the original measure are unchanged
    assert nu2.ys[1] == 1.0
    assert nu.ys[0] == 0.0
    with pytest.raises(ValueError):
        resample(nu, [0, 0], [z_new, z_new])
    with pytest.raises(ValueError):
        resample(nu, [11], [z_new])


def test_grid_measure_mass_validation():
    nodes, vol = uniform_grid_1d(0.0, 1.0, 11)
    dens = np.ones(11)
    with pytest.raises(ValueError):
        GridMeasure(nodes, vol, dens)  # mass 2, not 1
    m = GridMeasure(nodes, vol, dens, normalize=True)
    np.testing.assert_allclose(m.node_weights.sum(), 1.0, atol=1e-14)
    with pytest.raises(ValueError):
        GridMeasure(nodes, vol, -dens / 2.0)
    # signed measures must have zero total mass
    signed = dens - dens.mean()
    ms = GridMeasure(nodes, vol, signed, signed=True)
    assert abs(ms.node_weights.sum()) < 1e-12
    with pytest.raises(ValueError):
        GridMeasure(nodes, vol, dens, signed=True)


def test_grid_measure_moments_against_gaussian():
    nodes, vol = uniform_grid_1d(0.0, 8.0, 2001)
    dens = np.exp(-nodes[:, 0] ** 2 / 2.0)
    m = GridMeasure(nodes, vol, dens, normalize=True)
    np.testing.assert_allclose(m.mean(), [0.0], atol=1e-12)
    np.testing.assert_allclose(m.moment(2), 1.0, atol=1e-8)
    np.testing.assert_allclose(m.moment(4), 3.0, atol=1e-7)
    np.testing.assert_allclose(m.integrate(lambda t: np.cos(t[:, 0])),
                               np.exp(-0.5), atol=1e-8)


def test_grid_measure_rejects_bad_shapes():
    nodes, vol = uniform_grid_1d(0.0, 1.0, 9)
    with pytest.raises(ValueError):
        GridMeasure(nodes, vol, np.ones(8), normalize=True)
    with pytest.raises(ValueError):
        GridMeasure(nodes, -vol, np.ones(9), normalize=True)
    with pytest.raises(ValueError):
        GridMeasure(nodes, vol, np.full(9, np.inf))


def test_uniform_grid_covers_box():
    nodes, vol = uniform_grid(2.0, 9, 2)
    assert nodes.shape == (81, 2)
    # cell-centered: total volume equals the box volume
    np.testing.assert_allclose(vol * 81, 16.0)
    assert np.max(np.abs(nodes)) < 2.0
    # symmetric around the origin
    np.testing.assert_allclose(nodes.sum(axis=0), [0.0, 0.0], atol=1e-12)


def test_uniform_grid_1d_center_and_width():
    nodes, vol = uniform_grid_1d(3.0, 0.5, 21)
    assert nodes.shape == (21, 1)
    np.testing.assert_allclose(nodes[:, 0].mean(), 3.0, atol=1e-14)
    np.testing.assert_allclose(vol * 21, 1.0)


@pytest.mark.parametrize("lam", [0.0, 0.25, 1.0])
def test_convex_combination_grid(lam):
    nodes, vol = uniform_grid_1d(0.0, 2.0, 101)
    d0 = np.exp(-nodes[:, 0] ** 2)
    d1 = np.exp(-((nodes[:, 0] - 0.5) ** 2))
    m0 = GridMeasure(nodes, vol, d0, normalize=True)
    m1 = GridMeasure(nodes, vol, d1, normalize=True)
    mix = convex_combination(m0, m1, lam)
    np.testing.assert_allclose(
        mix.density, (1 - lam) * m0.density + lam * m1.density, rtol=1e-14)
    if lam == 0.0:
        assert mix is m0
    if lam == 1.0:
        assert mix is m1


def test_convex_combination_data_measures():
    nu0 = empirical_from_arrays(np.zeros((2, 0)), np.array([0.0, 1.0]))
    nu1 = empirical_from_arrays(np.zeros((1, 0)), np.array([5.0]))
    mix = convex_combination(nu0, nu1, 0.25)
    np.testing.assert_allclose(mix.weights.sum(), 1.0)
    # expectation of y interpolates linearly
    np.testing.assert_allclose(mix.weights @ mix.ys,
                               0.75 * 0.5 + 0.25 * 5.0)
    with pytest.raises(ValueError):
        convex_combination(nu0, nu1, 1.5)


def test_convex_combination_grid_mismatch():
    n0, v0 = uniform_grid_1d(0.0, 1.0, 11)
    n1, v1 = uniform_grid_1d(0.0, 2.0, 11)
    m0 = GridMeasure(n0, v0, np.ones(11), normalize=True)
    m1 = GridMeasure(n1, v1, np.ones(11), normalize=True)
    with pytest.raises(ValueError):
        convex_combination(m0, m1, 0.5)


def test_particle_measure_moments():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((50000, 2))
    pm = ParticleMeasure(pts)
    assert pm.n_particles == 50000 and pm.dim == 2
    np.testing.assert_allclose(pm.moment(2), 2.0, atol=0.05)
    np.testing.assert_allclose(pm.mean(), [0.0, 0.0], atol=0.02)
    with pytest.raises(ValueError):
        ParticleMeasure(np.empty((0, 2)))


def test_module_level_moment_and_integrate():
    nodes, vol = uniform_grid_1d(0.0, 6.0, 1001)
    m = GridMeasure(nodes, vol, np.exp(-nodes[:, 0] ** 2 / 2.0),
                    normalize=True)
    assert measures.moment(m, 2) == m.moment(2)
    val = measures.integrate(m, lambda t: t[:, 0] ** 2)
    np.testing.assert_allclose(val, 1.0, atol=1e-8)


def test_data_measure_weight_validation():
    xs = np.zeros((3, 1))
    ys = np.array([0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        DataMeasure(xs, ys, np.array([0.5, 0.5, 0.5]))
    nu = DataMeasure(xs, ys, np.array([0.2, 0.3, 0.5]))
    np.testing.assert_allclose(nu.weights.sum(), 1.0)
