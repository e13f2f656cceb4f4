import math

import numpy as np
import pytest
from scipy import integrate

from acmh_sampler.errors import DegeneratePointError
from acmh_sampler.mixture_t import (
    Partition, StudentT, TMixture, conditional_t, default_envelope, khat, marginal_t,
    mixture_logpdf, responsibilities, single_component, t_logpdf, t_sample,
)


def _spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + d * np.eye(d)


def test_cauchy_mode_value():
    p = StudentT([0.0], [[1.0]], 1.0)
    assert abs(t_logpdf(np.array([0.0]), p) - (-math.log(math.pi))) < 1e-12
    assert abs(t_logpdf(np.array([0.0]), p) - (-1.144729)) < 1e-6


def test_logpdf_symmetric_about_zero_location():
    rng = np.random.default_rng(1)
    p = StudentT(np.zeros(3), _spd(rng, 3), 4.0)
    for x in rng.standard_normal((20, 3)) * 3:
        assert abs(p.logpdf(x) - p.logpdf(-x)) < 1e-12


def test_batch_matches_single_points():
    rng = np.random.default_rng(2)
    p = StudentT(rng.standard_normal(2), _spd(rng, 2), 3.0)
    X = rng.standard_normal((5, 2))
    batch = p.logpdf(X)
    assert batch.shape == (5,)
    assert np.allclose(batch, [p.logpdf(x) for x in X], rtol=0, atol=1e-13)


def test_density_integrates_to_one_in_two_dimensions():
    p = StudentT([0.3, -0.2], [[1.0, 0.3], [0.3, 0.5]], 5.0)
    h = 0.1
    grid = np.arange(-60.0, 60.0 + h, h)
    total = 0.0
    for x1 in np.array_split(grid, 10):
        X = np.stack(np.meshgrid(x1, grid, indexing='ij'), axis=-1).reshape(-1, 2)
        total += np.exp(p.logpdf(X)).sum() * h * h
    assert abs(total - 1.0) < 1e-3


def test_sample_variance_matches_t_variance():
    rng = np.random.default_rng(3)
    p = StudentT([0.0], [[1.0]], 5.0)
    x = p.sample(rng, 200_000)[:, 0]
    assert abs(x.var() / (5.0 / 3.0) - 1.0) < 0.05


def test_large_nu_sample_is_standard_normal():
    rng = np.random.default_rng(4)
    p = StudentT(np.zeros(2), np.eye(2), 1e6)
    x = p.sample(rng, 50_000)
    assert np.all(np.abs(x.mean(axis=0)) < 4 / math.sqrt(50_000))
    assert np.allclose(np.cov(x, rowvar=False), np.eye(2), atol=0.03)


def test_fixed_seed_gives_identical_draws():
    p = StudentT([1.0, 2.0], [[2.0, 0.5], [0.5, 1.0]], 3.0)
    rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(7)
    a = [t_sample(p, rng_a) for _ in range(5)]
    b = [t_sample(p, rng_b) for _ in range(5)]
    assert np.array_equal(np.array(a), np.array(b))


@pytest.mark.parametrize('sigma,nu', [
    ([[1.0, 2.0], [2.0, 1.0]], 3.0),
    ([[1.0, 0.0], [0.1, 1.0]], 3.0),
    ([[1.0, 0.0], [0.0, 1.0]], 0.0),
    ([[1.0, 0.0], [0.0, 1.0]], float('inf')),
])
def test_invalid_parameters_raise(sigma, nu):
    with pytest.raises(ValueError):
        StudentT([0.0, 0.0], sigma, nu)


def test_dimension_mismatch_raises():
    p = StudentT(np.zeros(2), np.eye(2), 3.0)
    with pytest.raises(ValueError):
        p.logpdf(np.zeros(3))


def test_single_component_mixture_equals_component():
    rng = np.random.default_rng(5)
    p = StudentT(rng.standard_normal(3), _spd(rng, 3), 2.5)
    m = single_component(p)
    X = rng.standard_normal((10, 3))
    assert np.allclose(mixture_logpdf(X, m), t_logpdf(X, p), atol=1e-13)


def test_identical_components_collapse():
    rng = np.random.default_rng(6)
    p = StudentT(rng.standard_normal(2), _spd(rng, 2), 4.0)
    m = TMixture([0.3, 0.7], [p, p])
    X = rng.standard_normal((10, 2))
    assert np.allclose(m.logpdf(X), p.logpdf(X), atol=1e-12)


def test_separated_components_stay_finite():
    a = StudentT([-1e3], [[1e-4]], 50.0)
    b = StudentT([1e3], [[1e-4]], 50.0)
    m = TMixture([0.5, 0.5], [a, b])
    assert math.isfinite(m.logpdf(np.array([0.0])))
    r = responsibilities(np.array([-1e3]), m)
    assert r[0] > 0.999999 and abs(r.sum() - 1.0) < 1e-12


def test_responsibilities_raise_when_everything_underflows():
    p = StudentT([0.0], [[1e-300]], 1.0)
    m = TMixture([0.5, 0.5], [p, p])
    with np.errstate(over='ignore'), pytest.raises(DegeneratePointError):
        m.responsibilities(np.array([1e10]))


def test_khat_ties_pick_lowest_index():
    p = StudentT([0.0, 0.0], np.eye(2), 3.0)
    m = TMixture([0.5, 0.5], [p, p])
    assert khat(np.array([0.3, 0.1]), m) == 0


def test_mixture_weights_validated():
    p = StudentT([0.0], [[1.0]], 3.0)
    with pytest.raises(ValueError):
        TMixture([0.5, 0.6], [p, p])
    with pytest.raises(ValueError):
        TMixture([1.2, -0.2], [p, p])
    with pytest.raises(ValueError):
        TMixture([0.5, 0.5], [p, StudentT([0.0, 0.0], np.eye(2), 3.0)])


def test_mixture_weight_sum_tolerance_is_rounding_only():
    p = StudentT([0.0], [[1.0]], 3.0)
    with pytest.raises(ValueError):
        TMixture([0.5, 0.5 + 1e-9], [p, p])
    m = TMixture([0.1] * 10, [p] * 10)
    assert abs(m.weights.sum() - 1.0) < 1e-14
    m = TMixture([1.0 / 3.0] * 3, [p] * 3)
    assert m.G == 3


def test_mixture_json_file(tmp_path):
    rng = np.random.default_rng(8)
    m = TMixture([0.4, 0.6], [StudentT(rng.standard_normal(2), _spd(rng, 2), nu) for nu in (2.0, 8.0)])
    path = tmp_path / 'mixture.json'
    m.to_json(path)
    back = TMixture.from_json(path)
    X = rng.standard_normal((4, 2))
    assert np.allclose(back.logpdf(X), m.logpdf(X), atol=1e-12)


def test_default_envelope_sets_nu_to_one():
    m = TMixture([1.0], [StudentT([0.0], [[2.0]], 9.0)])
    g0 = default_envelope(m)
    assert g0.components[0].nu == 1.0
    assert np.array_equal(g0.components[0].sigma, m.components[0].sigma)


@pytest.mark.parametrize('a,b', [((), (0, 1)), ((0, 0), (1,)), ((0,), (2,))])
def test_bad_partitions_raise(a, b):
    with pytest.raises(ValueError):
        Partition(a, b)


def test_partition_from_mask():
    part = Partition.from_mask([True, False, True])
    assert part.indexA == (1,) and part.indexB == (0, 2)


def test_conditional_matches_joint_over_quadrature_marginal():
    p = StudentT([0.5, -1.0], [[2.0, 0.8], [0.8, 1.0]], 3.0)
    part = Partition((0,), (1,))
    rng = np.random.default_rng(9)
    for xa, xb in rng.standard_normal((100, 2)) * 2.0:
        cond = conditional_t(p, part, [xb])
        marg, _ = integrate.quad(lambda a: math.exp(p.logpdf(np.array([a, xb]))), -np.inf, np.inf,
                                 epsabs=1e-13, epsrel=1e-11)
        expected = math.exp(p.logpdf(np.array([xa, xb]))) / marg
        got = math.exp(cond.logpdf(np.array([xa])))
        assert abs(got - expected) < 1e-6


def test_conditional_consistent_with_marginal():
    rng = np.random.default_rng(10)
    p = StudentT(rng.standard_normal(4), _spd(rng, 4), 4.0)
    part = Partition((0, 2), (1, 3))
    x = rng.standard_normal(4)
    joint = p.logpdf(x)
    split = marginal_t(p, [1, 3]).logpdf(x[[1, 3]]) + conditional_t(p, part, x[[1, 3]]).logpdf(x[[0, 2]])
    assert abs(joint - split) < 1e-10


def test_unscaled_conditional_is_not_the_conditional():
    p = StudentT([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]], 3.0)
    part = Partition((0,), (1,))
    exact = conditional_t(p, part, [3.0])
    unscaled = conditional_t(p, part, [3.0], unscaled=True)
    assert exact.nu == 4.0 and unscaled.nu == 4.0
    assert not np.allclose(exact.sigma, unscaled.sigma)


def test_conditional_needs_nonempty_b():
    p = StudentT([0.0, 0.0], np.eye(2), 3.0)
    with pytest.raises(ValueError):
        conditional_t(p, Partition((0, 1), ()), [])
