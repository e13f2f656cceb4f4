"""Multivariate Student-t densities and finite t mixtures.

All objects here are immutable after construction. Densities are evaluated
in log space; the Cholesky factor of every scale matrix is computed once at
construction. Functions accept a single point of shape ``(d,)`` or a batch of
shape ``(n, d)`` and return a scalar or an array of length ``n`` accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple
import json
import logging
import math
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp

from .errors import DegeneratePointError

_logger = logging.getLogger(__name__)

_JITTER = 1e-10
# weights are renormalized after this check, so only rounding slack is tolerated
WEIGHT_SUM_TOL = 1e-12


def _as_points(x: Any, d: int) -> Tuple[np.ndarray, bool]:
    """Return ``(points[n, d], was_single)``; raises on dimension mismatch."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f'point dimension {arr.shape[-1]} does not match distribution dimension {d}')
    return arr, single


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; one retry with jitter 1e-10 * trace / d."""
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError:
        d = sigma.shape[0]
        jitter = _JITTER * max(float(np.trace(sigma)) / d, 0.0)
        _logger.warning('Scale matrix not positive definite; retrying Cholesky with jitter %.3g', jitter)
        try:
            return linalg.cholesky(sigma + jitter * np.eye(d), lower=True)
        except linalg.LinAlgError as exc:
            raise ValueError('sigma must be symmetric positive definite') from exc


def t_logpdf_from_mahalanobis(delta: Any, d: int, nu: float, log_det: float) -> np.ndarray:
    """t log density given the squared Mahalanobis distances and log|sigma|."""
    const = (gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
             - 0.5 * d * math.log(nu * math.pi) - 0.5 * log_det)
    return const - 0.5 * (nu + d) * np.log1p(np.asarray(delta) / nu)


class StudentT:
    """One d-variate t density t_d(mu, sigma, nu)."""

    def __init__(self, mu: Sequence[float], sigma: Any, nu: float):
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=float)).copy()
        sigma_arr = np.atleast_2d(np.asarray(sigma, dtype=float)).copy()
        d = mu_arr.shape[0]
        if mu_arr.ndim != 1 or d < 1:
            raise ValueError('mu must be a nonempty vector')
        if sigma_arr.shape != (d, d):
            raise ValueError(f'sigma has shape {sigma_arr.shape}, expected {(d, d)}')
        if not np.allclose(sigma_arr, sigma_arr.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(sigma_arr).max())):
            raise ValueError('sigma must be symmetric')
        if not (math.isfinite(nu) and nu > 0):
            raise ValueError('nu must be finite and positive')
        sigma_arr = 0.5 * (sigma_arr + sigma_arr.T)
        chol = _cholesky(sigma_arr)
        for arr in (mu_arr, sigma_arr, chol):
            arr.setflags(write=False)
        self.mu = mu_arr
        self.sigma = sigma_arr
        self.nu = float(nu)
        self.chol = chol
        self.log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def mahalanobis(self, x: Any) -> np.ndarray | float:
        """(x - mu)' sigma^{-1} (x - mu)."""
        pts, single = _as_points(x, self.d)
        w = linalg.solve_triangular(self.chol, (pts - self.mu).T, lower=True)
        out = np.sum(w * w, axis=0)
        return float(out[0]) if single else out

    def logpdf(self, x: Any) -> np.ndarray | float:
        delta = np.asarray(self.mahalanobis(x))
        out = t_logpdf_from_mahalanobis(delta, self.d, self.nu, self.log_det)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Gaussian scale-mixture draw: mu + sqrt(nu / g) L u, g ~ Gamma(nu/2, rate nu/2)."""
        n = 1 if size is None else int(size)
        g = rng.gamma(shape=0.5 * self.nu, scale=2.0 / self.nu, size=n)
        u = rng.standard_normal((n, self.d))
        z = self.mu + np.sqrt(1.0 / g)[:, None] * (u @ self.chol.T)
        return z[0] if size is None else z

    def covariance(self) -> np.ndarray:
        """nu/(nu-2) sigma for nu > 2, otherwise sigma (the heavy-tail fallback used by the RW step)."""
        if self.nu > 2:
            return self.nu / (self.nu - 2.0) * self.sigma
        return np.array(self.sigma)

    def with_nu(self, nu: float) -> 'StudentT':
        return StudentT(self.mu, self.sigma, nu)

    def to_dict(self) -> Dict[str, Any]:
        return {'mu': self.mu.tolist(), 'sigma': self.sigma.tolist(), 'nu': self.nu}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'StudentT':
        return cls(data['mu'], data['sigma'], data['nu'])

    def __repr__(self) -> str:
        return f'StudentT(d={self.d}, nu={self.nu:g})'


class TMixture:
    """Weighted mixture g_M = sum_k w_k t_d(mu_k, sigma_k, nu_k)."""

    def __init__(self, weights: Sequence[float], components: Sequence[StudentT]):
        w = np.atleast_1d(np.asarray(weights, dtype=float)).copy()
        comps = list(components)
        if len(comps) < 1 or w.shape != (len(comps),):
            raise ValueError('weights and components must be nonempty and of equal length')
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError('mixture weights must be finite and nonnegative')
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f'mixture weights sum to {total}, expected 1')
        w = w / total
        d = comps[0].d
        if any(c.d != d for c in comps):
            raise ValueError('all components must share the same dimension')
        w.setflags(write=False)
        self.weights = w
        self.components: Tuple[StudentT, ...] = tuple(comps)
        with np.errstate(divide='ignore'):
            self._log_weights = np.log(w)

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def G(self) -> int:
        return len(self.components)

    def weighted_logpdfs(self, x: Any) -> np.ndarray:
        """log w_k + log zeta_k(x), shape (n, G) (or (G,) for a single point)."""
        pts, single = _as_points(x, self.d)
        cols = [np.atleast_1d(c.logpdf(pts)) for c in self.components]
        out = np.stack(cols, axis=1) + self._log_weights
        return out[0] if single else out

    def logpdf(self, x: Any) -> np.ndarray | float:
        out = logsumexp(self.weighted_logpdfs(x), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def responsibilities(self, x: Any) -> np.ndarray:
        lw = self.weighted_logpdfs(x)
        norm = logsumexp(lw, axis=-1, keepdims=True)
        if not np.all(np.isfinite(norm)):
            raise DegeneratePointError('all component densities underflow at the evaluation point')
        r = np.exp(lw - norm)
        return r / r.sum(axis=-1, keepdims=True)

    def khat(self, x: Any) -> int | np.ndarray:
        """argmax_k w_k zeta_k(x); numpy's argmax keeps the lowest index on ties."""
        lw = self.weighted_logpdfs(x)
        out = np.argmax(lw, axis=-1)
        return int(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        labels = rng.choice(self.G, size=n, p=self.weights)
        out = np.empty((n, self.d))
        for k in range(self.G):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = self.components[k].sample(rng, idx.size)
        return out[0] if size is None else out

    def with_nu(self, nu: float) -> 'TMixture':
        return TMixture(self.weights, [c.with_nu(nu) for c in self.components])

    def to_dict(self) -> Dict[str, Any]:
        return {'weights': self.weights.tolist(), 'components': [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TMixture':
        return cls(data['weights'], [StudentT.from_dict(c) for c in data['components']])

    def to_json(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding='utf-8')

    @classmethod
    def from_json(cls, path: Path | str) -> 'TMixture':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))

    def __repr__(self) -> str:
        return f'TMixture(G={self.G}, d={self.d})'


@dataclass(frozen=True)
class Partition:
    """Coordinate split z = (z_A, z_B): block A is redrawn, block B is held.

    Block A must be nonempty. An empty block B is the degenerate split in which
    the block step redraws every coordinate from the selected component.
    """
    indexA: Tuple[int, ...]
    indexB: Tuple[int, ...]

    def __post_init__(self):
        a, b = tuple(int(i) for i in self.indexA), tuple(int(i) for i in self.indexB)
        object.__setattr__(self, 'indexA', a)
        object.__setattr__(self, 'indexB', b)
        if not a:
            raise ValueError('partition block A must be nonempty')
        joined = sorted(a + b)
        if joined != list(range(len(joined))) or len(set(joined)) != len(joined):
            raise ValueError('partition blocks must be disjoint and cover 0..d-1')

    @property
    def d(self) -> int:
        return len(self.indexA) + len(self.indexB)

    @classmethod
    def from_mask(cls, in_b: Sequence[bool]) -> 'Partition':
        mask = np.asarray(in_b, dtype=bool)
        return cls(tuple(np.flatnonzero(~mask)), tuple(np.flatnonzero(mask)))


def conditional_t(p: StudentT, part: Partition, xB: Any, unscaled: bool = False) -> StudentT:
    """Law of z_A given z_B = xB under t_d(mu, sigma, nu).

    The exact conditional has location mu_A + S_AB S_BB^{-1}(xB - mu_B),
    scale (nu + delta_B)/(nu + d_B) times the Schur complement and nu + d_B
    degrees of freedom. ``unscaled=True`` returns the variant with the plain
    Schur complement and nu + d_A degrees of freedom; it is not a conditional
    of the joint and breaks detailed balance of the block kernel.
    """
    if part.d != p.d:
        raise ValueError('partition dimension does not match the distribution')
    a, b = list(part.indexA), list(part.indexB)
    if not b:
        raise ValueError('conditioning block B must be nonempty')
    xb = np.asarray(xB, dtype=float).reshape(-1)
    if xb.shape[0] != len(b):
        raise ValueError('xB dimension does not match block B')
    s = p.sigma
    s_aa, s_ab, s_bb = s[np.ix_(a, a)], s[np.ix_(a, b)], s[np.ix_(b, b)]
    try:
        chol_bb = linalg.cho_factor(s_bb, lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError('sigma_BB is singular') from exc
    diff = xb - p.mu[b]
    gain = linalg.cho_solve(chol_bb, s_ab.T).T
    loc = p.mu[a] + gain @ diff
    schur = s_aa - gain @ s_ab.T
    schur = 0.5 * (schur + schur.T)
    if unscaled:
        return StudentT(loc, schur, p.nu + len(a))
    delta_b = float(diff @ linalg.cho_solve(chol_bb, diff))
    factor = (p.nu + delta_b) / (p.nu + len(b))
    return StudentT(loc, factor * schur, p.nu + len(b))


def marginal_t(p: StudentT, index: Sequence[int]) -> StudentT:
    """Marginal of a sub-vector of a t vector: same nu, sub-blocks of mu and sigma."""
    idx = list(index)
    return StudentT(p.mu[idx], p.sigma[np.ix_(idx, idx)], p.nu)


# Module-level operations mirroring the methods above

def t_logpdf(x: Any, p: StudentT) -> float | np.ndarray:
    return p.logpdf(x)


def t_sample(p: StudentT, rng: np.random.Generator) -> np.ndarray:
    return p.sample(rng)


def mixture_logpdf(x: Any, m: TMixture) -> float | np.ndarray:
    return m.logpdf(x)


def responsibilities(x: Any, m: TMixture) -> np.ndarray:
    return m.responsibilities(x)


def khat(x: Any, m: TMixture) -> int | np.ndarray:
    return m.khat(x)


def single_component(p: StudentT) -> TMixture:
    return TMixture([1.0], [p])


def default_envelope(m: TMixture) -> TMixture:
    """The initial mixture with every component's degrees of freedom set to 1."""
    return m.with_nu(1.0)


__all__ = [
    'StudentT', 'TMixture', 'Partition', 'WEIGHT_SUM_TOL',
    't_logpdf', 't_sample', 'mixture_logpdf', 'responsibilities', 'conditional_t', 'khat',
    'marginal_t', 'single_component', 'default_envelope', 't_logpdf_from_mahalanobis',
]
