"""Annealed SMC exploration that produces the initial history.

Particles drawn from a heavy-tailed t start distribution pi0 are moved
through the bridge eta_t = pi0**(1 - t/T) * pi**(t/T), t = 1..T, by
reweighting, stratified resampling and random-walk MH moves targeting
each eta_t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional
import logging

import numpy as np
from scipy.special import logsumexp

from .baselines import prepass_moments
from .errors import TemperingError
from .mixture_t import StudentT
from .settings import section

_logger = logging.getLogger(__name__)

_SMC = section('smc')

_MOVE_SCALE = 2.38 ** 2
_MOVE_RIDGE = 1e-6


@dataclass(frozen=True)
class SMCConfig:
    """``pi0`` None means t_d(0, I, pi0_nu), or t_d(mean, cov, pi0_nu) from the ARWMH pre-pass.

    ``arw_prepass`` None turns the pre-pass on for data targets only.
    """
    T: int = int(_SMC['T'])
    n_particles: int = int(_SMC['n_particles'])
    n_moves: int = int(_SMC['n_moves'])
    pi0: Optional[StudentT] = None
    pi0_nu: float = float(_SMC['pi0_nu'])
    arw_prepass: Optional[bool] = None
    prepass_steps: int = int(_SMC['prepass_steps'])

    def __post_init__(self):
        if self.T < 1:
            raise ValueError('T must be at least 1')
        if self.n_particles < 2:
            raise ValueError('n_particles must be at least 2')
        if self.n_moves < 0:
            raise ValueError('n_moves must be nonnegative')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'T': self.T, 'n_particles': self.n_particles, 'n_moves': self.n_moves,
            'pi0': self.pi0.to_dict() if self.pi0 is not None else None,
            'pi0_nu': self.pi0_nu, 'arw_prepass': self.arw_prepass, 'prepass_steps': self.prepass_steps,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SMCConfig':
        data = dict(data)
        if isinstance(data.get('pi0'), dict):
            data['pi0'] = StudentT.from_dict(data['pi0'])
        return cls(**data)


@dataclass
class ParticleSet:
    particles: np.ndarray
    stage: int = 0
    log_density: Optional[np.ndarray] = None
    accept_rates: List[float] = field(default_factory=list)
    weight_history: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.particles)):
            raise ValueError('particles must be finite')

    @property
    def n(self) -> int:
        return self.particles.shape[0]


def stratified_resample(weights: Any, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices from one uniform per stratum, u_i = (i + U_i)/N."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError('resampling weights must be finite and nonnegative')
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f'resampling weights sum to {w.sum()}, expected 1')
    n = w.shape[0]
    u = (np.arange(n) + rng.random(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.minimum(np.searchsorted(cum, u, side='right'), n - 1)


def _safe(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[np.isnan(out)] = -np.inf
    return out


def move_kernel(
    particles: ParticleSet,
    eta_t: Callable[[np.ndarray], np.ndarray],
    M: int,
    rng: np.random.Generator,
) -> ParticleSet:
    """M random-walk MH sweeps targeting eta_t, all particles at once.

    Proposal covariance is (2.38**2/d) (empirical particle covariance + 1e-6 I).
    """
    if M < 0:
        raise ValueError('M must be nonnegative')
    x = np.array(particles.particles, dtype=float)
    if M == 0:
        return ParticleSet(x, particles.stage, particles.log_density,
                           list(particles.accept_rates), list(particles.weight_history))
    n, d = x.shape
    cov = np.cov(x, rowvar=False).reshape(d, d) + _MOVE_RIDGE * np.eye(d)
    chol = np.linalg.cholesky(_MOVE_SCALE / d * 0.5 * (cov + cov.T))
    le_x = _safe(eta_t(x))
    accepted = 0
    for _ in range(M):
        z = x + rng.standard_normal((n, d)) @ chol.T
        le_z = _safe(eta_t(z))
        with np.errstate(invalid='ignore'):
            ok = np.log(rng.random(n)) < le_z - le_x
        ok &= np.isfinite(le_z)
        x[ok] = z[ok]
        le_x[ok] = le_z[ok]
        accepted += int(ok.sum())
    rate = accepted / (n * M)
    return ParticleSet(x, particles.stage, None,
                       list(particles.accept_rates) + [rate], list(particles.weight_history))


def start_distribution(target: Any, cfg: SMCConfig, rng: np.random.Generator) -> StudentT:
    """pi0 from the config, the ARWMH pre-pass, or the default t_d(0, I, pi0_nu)."""
    if cfg.pi0 is not None:
        if cfg.pi0.d != target.dim:
            raise ValueError('pi0 dimension does not match the target')
        return cfg.pi0
    use_prepass = cfg.arw_prepass if cfg.arw_prepass is not None else bool(getattr(target, 'is_data_target', False))
    if use_prepass:
        mean, cov = prepass_moments(target, cfg.prepass_steps, rng)
        _logger.debug('SMC start located by %d pre-pass steps', cfg.prepass_steps)
        return StudentT(mean, cov, cfg.pi0_nu)
    return StudentT(np.zeros(target.dim), np.eye(target.dim), cfg.pi0_nu)


def anneal(target: Any, cfg: Optional[SMCConfig] = None, rng: Optional[np.random.Generator] = None) -> ParticleSet:
    """Run the tempered SMC sampler with psi_t = t/T and return the final particles."""
    cfg = cfg or SMCConfig()
    rng = rng if rng is not None else np.random.default_rng()
    pi0 = start_distribution(target, cfg, rng)
    x = pi0.sample(rng, cfg.n_particles)
    lp = _safe(target.log_density(x))
    lp0 = np.asarray(pi0.logpdf(x), dtype=float)
    weight_history: List[np.ndarray] = []
    accept_rates: List[float] = []

    for t in range(1, cfg.T + 1):
        psi_prev, psi = (t - 1) / cfg.T, t / cfg.T
        with np.errstate(invalid='ignore'):
            logw = (psi - psi_prev) * (lp - lp0)
        logw = _safe(logw)
        if not np.any(np.isfinite(logw)):
            raise TemperingError(t)
        w = np.exp(logw - logsumexp(logw))
        w = w / w.sum()
        weight_history.append(w)
        idx = stratified_resample(w, rng)
        x = x[idx]

        def eta(points: np.ndarray, psi: float = psi) -> np.ndarray:
            with np.errstate(invalid='ignore'):
                return (1.0 - psi) * np.asarray(pi0.logpdf(points)) + psi * _safe(target.log_density(points))

        moved = move_kernel(ParticleSet(x, t), eta, cfg.n_moves, rng)
        x = moved.particles
        if moved.accept_rates:
            accept_rates.append(moved.accept_rates[-1])
            _logger.debug('SMC stage %d/%d: move acceptance %.3f', t, cfg.T, moved.accept_rates[-1])
        lp = _safe(target.log_density(x))
        lp0 = np.asarray(pi0.logpdf(x), dtype=float)

    return ParticleSet(x, cfg.T, lp, accept_rates, weight_history)


__all__ = ['SMCConfig', 'ParticleSet', 'anneal', 'stratified_resample', 'move_kernel', 'start_distribution']
