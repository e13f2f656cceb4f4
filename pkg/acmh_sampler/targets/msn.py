"""Two-component mixture of multivariate skew-normal densities.

Component density SN_d(x; mu, Sigma, lambda) = 2 phi_d(x; mu, Sigma) Phi(lambda' omega^{-1} (x - mu)),
omega = diag(sqrt(Sigma_ii)). Exact draws use the hidden-truncation
construction x = mu + |w| beta + N(0, Sigma - beta beta').
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.special import log_ndtr, logsumexp
from scipy.stats import multivariate_normal

from ..mixture_t import TMixture
from .base import Target


@dataclass(frozen=True)
class SkewNormalParams:
    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        d = mu.shape[0]
        if sigma.shape != (d, d) or lam.shape != (d,):
            raise ValueError('skew-normal parameters have inconsistent dimensions')
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError('skew-normal sigma must be SPD') from exc
        for name, arr in (('mu', mu), ('sigma', sigma), ('lam', lam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(np.diag(self.sigma))

    @cached_property
    def gaussian(self):
        return multivariate_normal(self.mu, self.sigma)

    def logpdf(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        z = (pts - self.mu) / self.omega @ self.lam
        out = np.log(2.0) + self.gaussian.logpdf(pts) + log_ndtr(z)
        out = np.atleast_1d(out)
        return float(out[0]) if np.ndim(x) == 1 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        omega = self.omega
        corr = self.sigma / np.outer(omega, omega)
        r_lam = corr @ self.lam
        delta = r_lam / np.sqrt(1.0 + self.lam @ r_lam)
        beta = omega * delta
        resid = self.sigma - np.outer(beta, beta)
        w = np.abs(rng.standard_normal(size))
        noise = rng.multivariate_normal(np.zeros(self.d), resid, size=size, method='eigh')
        return self.mu + w[:, None] * beta + noise


class GaussianMixtureEnvelope:
    """sum_k phi_k N(mu_k, Sigma_k), the Gaussian parts of the skew-normal components."""

    def __init__(self, weights: Sequence[float], components: Sequence[SkewNormalParams]):
        self.weights = np.asarray(weights, dtype=float)
        self.components = list(components)
        self.d = self.components[0].d

    def logpdf(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        cols = [np.atleast_1d(c.gaussian.logpdf(pts)) for c in self.components]
        out = logsumexp(np.stack(cols, axis=1) + np.log(self.weights), axis=1)
        return float(out[0]) if np.ndim(x) == 1 else out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        labels = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, self.d))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = rng.multivariate_normal(comp.mu, comp.sigma, size=idx.size)
        return out[0] if size is None else out


def default_components(d: int):
    """mu = -/+5, Sigma = 5 (-0.5)^|i-j|, lambda = -/+10, weights (0.6, 0.4)."""
    idx = np.arange(d)
    sigma = 5.0 * (-0.5) ** np.abs(idx[:, None] - idx[None, :])
    comps = [
        SkewNormalParams(np.full(d, -5.0), sigma, np.full(d, -10.0)),
        SkewNormalParams(np.full(d, 5.0), sigma, np.full(d, 10.0)),
    ]
    return (0.6, 0.4), comps


class SkewNormalMixtureTarget(Target):
    name = 'msn'
    has_exact_sampler = True

    def __init__(self, dim: int, weights: Optional[Sequence[float]] = None,
                 components: Optional[Sequence[SkewNormalParams]] = None):
        super().__init__(dim)
        if components is None:
            weights, components = default_components(dim)
        self.weights = np.asarray(weights, dtype=float)
        self.components = list(components)
        if abs(self.weights.sum() - 1.0) > 1e-12 or len(self.components) != self.weights.shape[0]:
            raise ValueError('mixture weights must match the components and sum to 1')
        if any(c.d != dim for c in self.components):
            raise ValueError('component dimension does not match the target')
        self._g0 = GaussianMixtureEnvelope(self.weights, self.components)

    def log_density(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        cols = [np.atleast_1d(c.logpdf(pts)) for c in self.components]
        out = logsumexp(np.stack(cols, axis=1) + np.log(self.weights), axis=1)
        return float(out[0]) if np.ndim(x) == 1 else out

    def envelope(self, initial: Optional[TMixture] = None) -> GaussianMixtureEnvelope:
        return self._g0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        labels = rng.choice(len(self.components), size=size, p=self.weights)
        out = np.empty((size, self.dim))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp.sample(rng, idx.size)
        return out

    def to_config(self) -> Dict[str, Any]:
        return {'name': self.name, 'dim': self.dim, 'weights': self.weights.tolist()}


def msn_target(d: int) -> SkewNormalMixtureTarget:
    return SkewNormalMixtureTarget(d)
