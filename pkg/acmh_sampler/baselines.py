"""Adaptive random-walk Metropolis (ARWMH) baseline.

Gaussian random-walk proposals whose covariance is the running empirical
covariance of the chain so far, scaled by 2.38**2/d. Used both as the
comparison sampler in benchmark runs and as the short pre-pass that locates
the target before SMC initialization.
"""
from __future__ import annotations

from typing import Any, Optional, Tuple
import logging
import math
import time

import numpy as np

from .records import ChainOutput

_logger = logging.getLogger(__name__)

_EPS = 1e-10


class RunningMoments:
    """Welford mean/covariance accumulator."""

    def __init__(self, d: int):
        self.d = d
        self.n = 0
        self.mean = np.zeros(d)
        self._m2 = np.zeros((d, d))

    def update(self, x: Any) -> None:
        x = np.asarray(x, dtype=float)
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self._m2 = self._m2 + np.outer(delta, x - self.mean)

    def covariance(self) -> np.ndarray:
        if self.n < 2:
            return np.eye(self.d)
        cov = self._m2 / (self.n - 1)
        return 0.5 * (cov + cov.T)


def proposal_covariance(moments: RunningMoments) -> np.ndarray:
    """Identity until d + 2 iterates are seen, then (2.38**2/d) C + 1e-10 I from the running covariance C."""
    d = moments.d
    if moments.n < d + 2:
        return np.eye(d)
    return (2.38 ** 2 / d) * moments.covariance() + _EPS * np.eye(d)


def arwmh_step(
    x: np.ndarray,
    log_pi_x: float,
    log_pi: Any,
    cov: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, float, bool]:
    """One Gaussian RW-MH step; returns (state, log density, accepted)."""
    chol = np.linalg.cholesky(cov)
    z = x + chol @ rng.standard_normal(x.shape[0])
    log_pi_z = float(log_pi(z))
    if log_pi_z > -math.inf and math.log(rng.random()) < log_pi_z - log_pi_x:
        return z, log_pi_z, True
    return x, log_pi_x, False


def run_arwmh(
    target: Any,
    n_burnin: int,
    n_sample: int,
    rng: np.random.Generator,
    start: Optional[np.ndarray] = None,
) -> ChainOutput:
    """Run ARWMH for n_burnin + n_sample iterations, recording the sampling phase."""
    x = np.array(start if start is not None else target.initial_point(), dtype=float)
    log_pi_x = float(target.log_density(x))
    if not math.isfinite(log_pi_x):
        raise ValueError('log density is not finite at the ARWMH start point')
    d = x.shape[0]
    moments = RunningMoments(d)
    moments.update(x)
    total = n_burnin + n_sample
    iterates = np.empty((n_sample, d))
    flags = np.zeros(n_sample, dtype=bool)
    burn_acc = 0
    t0 = time.perf_counter()
    for n in range(1, total + 1):
        x, log_pi_x, accepted = arwmh_step(x, log_pi_x, target.log_density, proposal_covariance(moments), rng)
        moments.update(x)
        if n > n_burnin:
            iterates[n - n_burnin - 1] = x
            flags[n - n_burnin - 1] = accepted
        else:
            burn_acc += accepted
    elapsed = time.perf_counter() - t0
    _logger.debug('ARWMH finished %d iterations in %.2fs', total, elapsed)
    return ChainOutput(
        iterates=iterates,
        accept_flags=flags,
        branch_tags=['rw'] * n_sample,
        burnin_accept_rate=burn_acc / n_burnin if n_burnin else float('nan'),
        cpu_seconds=elapsed,
    )


def prepass_moments(target: Any, n_steps: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Short ARWMH run from the target's initial point; returns (mean, covariance) of its states."""
    out = run_arwmh(target, 0, n_steps, rng)
    cov = np.cov(out.iterates, rowvar=False).reshape(target.dim, target.dim)
    cov = 0.5 * (cov + cov.T) + 1e-6 * np.eye(target.dim)
    return out.iterates.mean(axis=0), cov


__all__ = ['RunningMoments', 'proposal_covariance', 'arwmh_step', 'run_arwmh', 'prepass_moments']
