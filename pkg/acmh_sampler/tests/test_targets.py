import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import multivariate_normal

from acmh_sampler.targets import (
    TARGET_BY_NAME, BananaTarget, CovarianceTarget, LogisticTarget, SkewNormalParams, banana_target,
    covariance_target, logistic_target, make_target, msn_target,
)
from acmh_sampler.targets.covariance import log_exp_jacobian, sym_exp, sym_log, toy_data, unvech, vech
from acmh_sampler.targets.logistic import load_csv, train_test_split


# mixture of skew normals

def test_msn_exact_sampler_mode_mass():
    x = msn_target(1).sample(np.random.default_rng(1), 1_000_000)
    assert abs(np.mean(x[:, 0] < 0) - 0.6) < 0.01


def test_zero_shape_is_gaussian():
    rng = np.random.default_rng(2)
    sigma = np.array([[2.0, 0.4], [0.4, 1.0]])
    p = SkewNormalParams([1.0, -1.0], sigma, [0.0, 0.0])
    X = rng.standard_normal((20, 2))
    assert np.allclose(p.logpdf(X), multivariate_normal([1.0, -1.0], sigma).logpdf(X), atol=1e-12)


def test_component_density_bounded_by_twice_gaussian():
    target = msn_target(3)
    rng = np.random.default_rng(3)
    X = np.vstack([target.envelope().sample(rng, 50_000), target.sample(rng, 50_000)])
    for comp in target.components:
        assert np.all(comp.logpdf(X) <= comp.gaussian.logpdf(X) + math.log(2.0) + 1e-12)


def test_msn_sampler_moments_match_quadrature():
    target = msn_target(1)
    n = 200_000
    x = target.sample(np.random.default_rng(4), n)[:, 0]

    def moment(k):
        return integrate.quad(lambda t: t ** k * math.exp(target.log_density(np.array([t]))),
                              -40, 40, points=[-5.0, 0.0, 5.0], limit=200)[0]

    mean, second = moment(1), moment(2)
    var = second - mean ** 2
    assert abs(x.mean() - mean) < 3 * math.sqrt(var / n)
    # variance of the sample variance from the fourth central moment
    m4 = integrate.quad(lambda t: (t - mean) ** 4 * math.exp(target.log_density(np.array([t]))),
                        -40, 40, points=[-5.0, 0.0, 5.0], limit=200)[0]
    assert abs(x.var() - var) < 3 * math.sqrt((m4 - var ** 2) / n)


def test_msn_rejects_bad_weights():
    comps = msn_target(2).components
    with pytest.raises(ValueError):
        make_target('msn', dim=2, params={'weights': [0.5, 0.6], 'components': comps})


# banana

def test_banana_value_on_the_ridge():
    for d in (2, 5):
        target = banana_target(d)
        expected = -0.5 * (d * math.log(2 * math.pi) + math.log(100.0))
        assert target.log_density(target.ridge_point()) == pytest.approx(expected, abs=1e-12)
        assert target.ridge_point()[1] == pytest.approx(100 * 0.03)


def test_banana_even_in_first_coordinate():
    rng = np.random.default_rng(5)
    target = banana_target(4)
    X = rng.standard_normal((50, 4)) * 5
    flipped = X.copy()
    flipped[:, 0] *= -1
    assert np.allclose(target.log_density(X), target.log_density(flipped), atol=1e-12)


def test_banana_normalized_in_two_dimensions():
    target = banana_target(2)
    h1, h2 = 0.1, 0.1
    x1 = np.arange(-60.0, 60.0 + h1, h1)
    x2 = np.arange(-115.0, 12.0 + h2, h2)
    total = 0.0
    for block in np.array_split(x1, 20):
        X = np.stack(np.meshgrid(block, x2, indexing='ij'), axis=-1).reshape(-1, 2)
        total += np.exp(target.log_density(X)).sum() * h1 * h2
    assert abs(total - 1.0) < 1e-3


def test_banana_needs_two_dimensions():
    with pytest.raises(ValueError):
        BananaTarget(1)
    assert banana_target(3).envelope().components[0].nu == 5.0


# logistic regression

def _logistic_data(rng, n=200, p=3):
    X = rng.standard_normal((n, p)) * np.array([1.0, 3.0, 10.0])[:p] + 2.0
    beta = np.array([0.5, -1.0, 0.3])[:p]
    y = (rng.random(n) < 1 / (1 + np.exp(-(X - X.mean(axis=0)) @ beta / 5))).astype(float)
    return X, y


def test_standardization_and_zero_point_likelihood():
    rng = np.random.default_rng(6)
    X, y = _logistic_data(rng)
    target = logistic_target(X, y)
    assert target.dim == 4
    assert np.allclose(target.Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(target.Z.std(axis=0), 0.5)
    assert target.log_likelihood(np.zeros(4)) == pytest.approx(200 * math.log(0.5))


def test_empty_data_posterior_is_prior():
    target = LogisticTarget(np.zeros((0, 2)), np.zeros(0))
    rng = np.random.default_rng(7)
    theta = target.envelope().sample(rng, 20)
    diff = target.log_density(theta) - target.envelope().logpdf(theta)
    assert np.allclose(diff, 0.0)


def test_prior_scales():
    target = LogisticTarget(np.zeros((0, 2)), np.zeros(0))
    expected = -math.log(math.pi * 10.0) - 2 * math.log(math.pi * 2.5)
    assert target.envelope().logpdf(np.zeros(3)) == pytest.approx(expected)


@pytest.mark.parametrize('X,y', [
    (np.arange(5.0)[:, None], np.array([0, 1, 2, 0, 1])),
    (np.column_stack([np.arange(5.0), np.ones(5)]), np.array([0, 1, 1, 0, 1])),
    (np.arange(6.0)[:, None], np.array([0, 1, 0])),
])
def test_logistic_rejects_bad_inputs(X, y):
    with pytest.raises(ValueError):
        LogisticTarget(X, y)


def test_predictive_mean_uses_training_scaling():
    rng = np.random.default_rng(8)
    X, y = _logistic_data(rng)
    target = logistic_target(X, y)
    assert np.allclose(target.predictive_mean(np.zeros((10, 4)), X[:5]), 0.5)
    draws = rng.standard_normal((50, 4))
    mu = target.predictive_mean(draws, X[:7])
    assert mu.shape == (7,) and np.all((mu > 0) & (mu < 1))


def test_logistic_csv_and_split(tmp_path):
    path = tmp_path / 'data.csv'
    path.write_text('a,y,b\n1.0,0,2.0\n2.0,1,0.5\n3.5,1,1.0\n0.5,0,4.0\n', encoding='utf-8')
    X, y, names = load_csv(path)
    assert names == ['a', 'b'] and X.shape == (4, 2) and list(y) == [0, 1, 1, 0]
    (X_tr, y_tr), (X_te, y_te) = train_test_split(X, y, 0.5, np.random.default_rng(9))
    assert X_tr.shape[0] == 2 and X_te.shape[0] == 2
    bad = tmp_path / 'bad.csv'
    bad.write_text('a,b\n1,2\n', encoding='utf-8')
    with pytest.raises(ValueError):
        load_csv(bad)


# covariance posterior

def _spd(rng, p):
    A = rng.standard_normal((p, p))
    return A @ A.T + p * np.eye(p)


def test_log_exp_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(20):
        S = _spd(rng, 4)
        assert np.linalg.norm(sym_exp(sym_log(S)) - S) < 1e-10
        assert np.allclose(unvech(vech(S)), S)


def test_repeated_eigenvalues_are_truncated():
    data, _ = toy_data(2, 50, np.random.default_rng(11))
    target = covariance_target(data)
    assert target.dim == 3
    assert target.log_density(vech(np.zeros((2, 2)))) == -math.inf
    assert math.isfinite(target.log_density(target.initial_point()))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(12)
    p = 3
    S_star = sym_log(_spd(rng, p) / 5)
    v0 = vech(S_star)
    d = v0.shape[0]
    J = np.empty((d, d))
    h = 1e-6
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (vech(sym_exp(unvech(v0 + e))) - vech(sym_exp(unvech(v0 - e)))) / (2 * h)
    _, logdet = np.linalg.slogdet(J)
    expected = log_exp_jacobian(np.linalg.eigvalsh(S_star))[0]
    assert logdet == pytest.approx(expected, abs=1e-5)


def test_jacobian_flag():
    data, _ = toy_data(3, 80, np.random.default_rng(13))
    with_j = CovarianceTarget(data)
    without = CovarianceTarget(data, jacobian=False)
    x = with_j.initial_point()
    gap = with_j.log_density(x) - without.log_density(x)
    assert gap == pytest.approx(log_exp_jacobian(np.linalg.eigvalsh(unvech(x)))[0])


def test_covariance_envelope_is_usable():
    data, _ = toy_data(2, 60, np.random.default_rng(14))
    target = covariance_target(data)
    g0 = target.envelope()
    draws = g0.sample(np.random.default_rng(15), 200)
    assert draws.shape == (200, 3)
    assert np.all(np.isfinite(g0.logpdf(draws)))
    assert np.allclose(target.sigma(target.initial_point()), data.T @ data / 60)


def test_covariance_rejects_bad_data():
    with pytest.raises(ValueError):
        CovarianceTarget(np.ones((3, 3)))
    with pytest.raises(ValueError):
        CovarianceTarget(np.column_stack([np.arange(10.0), 2 * np.arange(10.0)]))


# registry

def test_registry():
    assert set(TARGET_BY_NAME) == {'msn', 'banana', 'logistic', 'covariance'}
    assert make_target('banana', dim=3).dim == 3
    with pytest.raises(ValueError):
        make_target('gaussian', dim=2)
    with pytest.raises(ValueError):
        make_target('logistic')
    with pytest.raises(ValueError):
        make_target('msn')
