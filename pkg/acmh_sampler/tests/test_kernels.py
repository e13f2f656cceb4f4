import math

import numpy as np
import pytest
from scipy import stats

from acmh_sampler.kernels import (
    BRANCH_BLOCK, BRANCH_CMH, BRANCH_G0, BRANCH_GM, ProposalConfig, RhoLaw, acmh_log_accept, acmh_log_ratio,
    branch_probabilities, draw_acmh, draw_block, draw_cmh, draw_reversible_t, draw_rw,
    log_q_star, log_ratio_from_values, reversible_t_logpdf, rw_log_accept, rw_scale_factor,
    select_partition,
)
from acmh_sampler.mixture_t import Partition, StudentT, TMixture, conditional_t, default_envelope


def _spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T / d + 0.5 * np.eye(d)


def _fixture_mixture(nu=8.0):
    return TMixture([0.4, 0.6], [
        StudentT([-2.0, 1.0], [[1.0, 0.3], [0.3, 0.6]], nu),
        StudentT([2.0, -1.0], [[0.7, -0.2], [-0.2, 1.2]], nu),
    ])


def _mixture_moments(m):
    mean = sum(w * c.mu for w, c in zip(m.weights, m.components))
    second = sum(w * (c.covariance() + np.outer(c.mu, c.mu)) for w, c in zip(m.weights, m.components))
    return mean, second - np.outer(mean, mean)


@pytest.mark.parametrize('d', [1, 2, 5])
def test_reversible_t_detailed_balance(d):
    rng = np.random.default_rng(100 + d)
    worst = 0.0
    for _ in range(334):
        p = StudentT(rng.standard_normal(d), _spd(rng, d), float(rng.uniform(0.5, 20.0)))
        rho = float(rng.uniform(0.0, 0.99))
        x, z = p.sample(rng), p.sample(rng)
        lhs = p.logpdf(x) + reversible_t_logpdf(z, x, p, rho)
        rhs = p.logpdf(z) + reversible_t_logpdf(x, z, p, rho)
        worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-9


def test_rho_out_of_range_raises():
    p = StudentT([0.0], [[1.0]], 3.0)
    with pytest.raises(ValueError):
        draw_reversible_t(np.zeros(1), p, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        reversible_t_logpdf(np.zeros(1), np.zeros(1), p, -0.1)


def _block_balance_gap(unscaled):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        d = 3
        p = StudentT(rng.standard_normal(d), _spd(rng, d), float(rng.uniform(1.0, 10.0)))
        part = Partition((0,), (1, 2))
        x = p.sample(rng)
        z = x.copy()
        z[0] = x[0] + rng.standard_normal()
        xb = x[[1, 2]]
        cond = conditional_t(p, part, xb, unscaled=unscaled)
        lhs = p.logpdf(x) + cond.logpdf(z[[0]])
        rhs = p.logpdf(z) + cond.logpdf(x[[0]])
        worst = max(worst, abs(lhs - rhs))
    return worst


def test_block_step_detailed_balance_with_exact_conditional():
    assert _block_balance_gap(unscaled=False) <= 1e-9


def test_block_step_unscaled_conditional_breaks_detailed_balance():
    assert _block_balance_gap(unscaled=True) > 1e-3


def test_cmh_step_preserves_mixture():
    rng = np.random.default_rng(12)
    m = _fixture_mixture()
    n = 20_000
    starts = m.sample(rng, n)
    law = RhoLaw()
    out = np.array([draw_cmh(x, m, law, rng) for x in starts])
    mean, cov = _mixture_moments(m)
    se = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(out.mean(axis=0) - mean) < 3 * se)
    assert np.all(np.abs(out.var(axis=0) / np.diag(cov) - 1.0) < 0.05)


def test_block_step_preserves_mixture():
    rng = np.random.default_rng(13)
    m = _fixture_mixture()
    n = 20_000
    starts = m.sample(rng, n)
    out = np.array([draw_block(x, m, select_partition(2, 0.5, rng), rng) for x in starts])
    mean, cov = _mixture_moments(m)
    se = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(out.mean(axis=0) - mean) < 3 * se)
    assert np.all(np.abs(out.var(axis=0) / np.diag(cov) - 1.0) < 0.05)


def test_block_step_keeps_block_b():
    rng = np.random.default_rng(14)
    m = _fixture_mixture()
    x = np.array([0.3, -0.7])
    z = draw_block(x, m, Partition((0,), (1,)), rng)
    assert z[1] == x[1] and z[0] != x[0]


def test_acceptance_is_one_when_target_is_q_star():
    rng = np.random.default_rng(15)
    m = _fixture_mixture(nu=4.0)
    g0 = default_envelope(m)
    beta0 = 0.1

    def log_pi(x):
        return log_q_star(x, m, g0, beta0)[0] + 3.0

    worst = 0.0
    for _ in range(2000):
        x = m.sample(rng) * 2.0
        z = g0.sample(rng)
        worst = max(worst, abs(acmh_log_accept(x, z, log_pi, m, g0, beta0)))
    assert worst <= 1e-9


def test_log_ratio_edge_cases():
    assert log_ratio_from_values(0.0, -math.inf, 0.0, 0.0) == -math.inf
    assert log_ratio_from_values(0.0, 1.0, 0.0, -math.inf) == math.inf
    assert log_ratio_from_values(-1.0, -2.0, -3.0, -1.0) == pytest.approx(-3.0)
    with pytest.raises(ValueError):
        log_ratio_from_values(-math.inf, 0.0, 0.0, 0.0)


def test_branch_frequencies_match_branch_probabilities():
    rng = np.random.default_rng(16)
    m = _fixture_mixture()
    g0 = default_envelope(m)
    cfg = ProposalConfig(beta0=0.05, gamma=0.3, delta=0.2, pB=0.5)
    x = np.array([3.0, -3.0])
    probs = branch_probabilities(x, m, g0, cfg)
    assert abs(sum(probs.values()) - 1.0) < 1e-12
    n = 100_000
    branches = (BRANCH_G0, BRANCH_GM, BRANCH_CMH, BRANCH_BLOCK)
    counts = dict.fromkeys(branches, 0)
    for _ in range(n):
        counts[draw_acmh(x, m, g0, cfg, rng).branch] += 1
    observed = np.array([counts[b] for b in branches], dtype=float)
    expected = n * np.array([probs[b] for b in branches])
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_delta_one_only_draws_independently():
    rng = np.random.default_rng(17)
    m = _fixture_mixture()
    cfg = ProposalConfig(beta0=0.5, delta=1.0)
    branches = {draw_acmh(np.zeros(2), m, default_envelope(m), cfg, rng).branch for _ in range(200)}
    assert branches == {BRANCH_G0, BRANCH_GM}


def test_beta0_zero_never_evaluates_envelope():
    class Exploding:
        def logpdf(self, x):
            raise AssertionError('g0 evaluated')

        def sample(self, rng, size=None):
            raise AssertionError('g0 sampled')

    m = _fixture_mixture()
    lq, lg0, lgm = log_q_star(np.zeros(2), m, Exploding(), 0.0)
    assert lg0 == -math.inf and lq == pytest.approx(lgm)
    draw_acmh(np.zeros(2), m, Exploding(), ProposalConfig(beta0=0.0), np.random.default_rng(0))


def test_select_partition_rules():
    rng = np.random.default_rng(18)
    assert select_partition(1, 0.9, rng) == Partition((0,), ())
    full = select_partition(6, 0.0, rng)
    assert full.indexA == tuple(range(6)) and full.indexB == ()
    for _ in range(200):
        part = select_partition(4, 0.9, rng)
        assert part.indexA and sorted(part.indexA + part.indexB) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        select_partition(3, 1.0, rng)


def test_empty_b_block_step_draws_whole_component():
    rng = np.random.default_rng(19)
    m = TMixture([1.0], [StudentT([5.0, 5.0], np.eye(2), 30.0)])
    z = draw_block(np.zeros(2), m, Partition((0, 1), ()), rng)
    assert np.all(np.abs(z - 5.0) < 6.0)


def test_rw_step_covariance():
    rng = np.random.default_rng(20)
    comp = StudentT([0.0, 0.0], [[2.0, 0.5], [0.5, 1.0]], 5.0)
    m = TMixture([1.0], [comp])
    cfg = ProposalConfig()
    x = np.array([0.1, 0.2])
    steps = np.array([draw_rw(x, m, cfg, rng) - x for _ in range(20_000)])
    expected = (2.38 ** 2 / 2) * (5.0 / 3.0) * comp.sigma
    assert np.allclose(np.cov(steps, rowvar=False), expected, rtol=0.05, atol=0.05)


def test_rw_helpers():
    assert rw_scale_factor(StudentT([0.0], [[1.0]], 1.0)) == 1.0
    assert rw_scale_factor(StudentT([0.0], [[1.0]], 4.0)) == 2.0
    assert rw_log_accept(-1.0, -math.inf) == -math.inf
    assert rw_log_accept(-1.0, 0.0) == 0.0
    assert rw_log_accept(0.0, -2.0) == -2.0


def test_proposal_config_resolution_and_validation():
    cfg = ProposalConfig()
    assert cfg.pB_for(20) == 0.5
    assert cfg.pB_for(5) == 0.0
    assert cfg.kappa_for(4) == pytest.approx(2.38 ** 2 / 4)
    assert ProposalConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ProposalConfig(beta0=1.5)
    with pytest.raises(ValueError):
        ProposalConfig(pB=1.0)
    with pytest.raises(ValueError):
        ProposalConfig(iota_rw=0)


def test_rho_law():
    rng = np.random.default_rng(21)
    assert RhoLaw(fixed=0.3).sample(rng) == 0.3
    draws = [RhoLaw().sample(rng) for _ in range(1000)]
    assert all(0.0 <= r < 1.0 for r in draws)
    with pytest.raises(ValueError):
        RhoLaw(fixed=1.0)
    with pytest.raises(ValueError):
        RhoLaw(a=0.0)


def test_acmh_log_ratio_is_antisymmetric():
    rng = np.random.default_rng(22)
    m = _fixture_mixture(nu=4.0)
    g0 = default_envelope(m)
    target = StudentT([0.5, -0.5], [[3.0, 1.0], [1.0, 2.0]], 6.0)
    for _ in range(500):
        x, z = rng.standard_normal((2, 2)) * 3.0
        forward = acmh_log_ratio(x, z, target.logpdf, m, g0, 0.01)
        backward = acmh_log_ratio(z, x, target.logpdf, m, g0, 0.01)
        assert abs(forward + backward) <= 1e-10 * max(1.0, abs(forward))
        assert acmh_log_accept(x, z, target.logpdf, m, g0, 0.01) == min(0.0, forward)


def test_select_partition_mean_block_size():
    rng = np.random.default_rng(23)
    sizes = np.array([len(select_partition(100, 0.9, rng).indexA) for _ in range(10_000)])
    se = math.sqrt(100 * 0.1 * 0.9 / sizes.size)
    assert abs(sizes.mean() - 10.0) < 3 * se


def test_rw_step_is_centred_with_doubled_scale_at_nu_four():
    rng = np.random.default_rng(24)
    sigma = np.array([[1.5, -0.4], [-0.4, 0.8]])
    m = TMixture([1.0], [StudentT([1.0, -1.0], sigma, 4.0)])
    cfg = ProposalConfig()
    x = np.array([0.5, 0.5])
    n = 100_000
    steps = np.array([draw_rw(x, m, cfg, rng) - x for _ in range(n)])
    expected = cfg.kappa_for(2) * 2.0 * sigma
    se = np.sqrt(np.diag(expected) / n)
    assert np.all(np.abs(steps.mean(axis=0)) < 3 * se)
    assert np.allclose(np.cov(steps, rowvar=False), expected, rtol=0.03, atol=0.02)


def test_rw_step_scale_follows_nearest_component():
    rng = np.random.default_rng(25)
    m = TMixture([0.5, 0.5], [
        StudentT([-10.0, 0.0], 0.1 * np.eye(2), 30.0),
        StudentT([10.0, 0.0], 4.0 * np.eye(2), 30.0),
    ])
    cfg = ProposalConfig()
    near_a = np.array([draw_rw(np.array([-10.0, 0.0]), m, cfg, rng) for _ in range(5000)])
    near_b = np.array([draw_rw(np.array([10.0, 0.0]), m, cfg, rng) for _ in range(5000)])
    assert near_b.var(axis=0).mean() > 20 * near_a.var(axis=0).mean()


def test_cmh_chain_with_fixed_rho_keeps_component_moments():
    rng = np.random.default_rng(26)
    comp = StudentT([1.0, -2.0], [[1.0, 0.4], [0.4, 0.5]], 8.0)
    m = TMixture([1.0], [comp])
    law = RhoLaw(fixed=0.6)
    n_chains, n_steps = 5000, 10
    states = comp.sample(rng, n_chains)
    for _ in range(n_steps):
        states = np.array([draw_cmh(x, m, law, rng) for x in states])
    cov = comp.covariance()
    se = np.sqrt(np.diag(cov) / n_chains)
    assert np.all(np.abs(states.mean(axis=0) - comp.mu) < 3 * se)
    assert np.all(np.abs(states.var(axis=0) / np.diag(cov) - 1.0) < 0.1)
