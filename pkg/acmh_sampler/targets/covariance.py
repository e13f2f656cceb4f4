"""Posterior of a covariance matrix under a truncated reference prior.

Data rows y_t ~ N(0, Sigma). The prior is 1 / (|Sigma| prod_{i<j} (r_i - r_j))
over the eigenvalues r_1 > ... > r_p of Sigma, restricted to matrices whose
eigenvalue gaps all exceed ``eps``. The sampler works on the lower triangle of
Sigma* = log(Sigma), so d = p(p+1)/2.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import csv
import logging
import math

import numpy as np
from scipy.stats import invwishart

from ..mixture_t import TMixture
from .base import Target

_logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6


def dim_for(p: int) -> int:
    return p * (p + 1) // 2


def order_for(d: int) -> int:
    """Matrix order p with p(p+1)/2 == d."""
    p = int(round((math.sqrt(8 * d + 1) - 1) / 2))
    if dim_for(p) != d:
        raise ValueError(f'{d} is not a triangular number')
    return p


def vech(M: Any) -> np.ndarray:
    """Lower triangle (row-major, diagonal included) of one matrix or a stack."""
    M = np.asarray(M, dtype=float)
    rows, cols = np.tril_indices(M.shape[-1])
    return M[..., rows, cols]


def unvech(v: Any, p: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    p = p or order_for(v.shape[-1])
    rows, cols = np.tril_indices(p)
    out = np.zeros(v.shape[:-1] + (p, p))
    out[..., rows, cols] = v
    out[..., cols, rows] = v
    return out


def sym_exp(S: Any) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    return (V * np.exp(w)[..., None, :]) @ np.swapaxes(V, -1, -2)


def sym_log(S: Any) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    if np.any(w <= 0):
        raise ValueError('matrix logarithm needs an SPD matrix')
    return (V * np.log(w)[..., None, :]) @ np.swapaxes(V, -1, -2)


def log_exp_jacobian(log_eigs: np.ndarray) -> np.ndarray:
    """log |d exp(S*)/d S*| on symmetric matrices, from the eigenvalues r* of S*.

    sum_i r*_i + sum_{i<j} log((e^{r*_i} - e^{r*_j}) / (r*_i - r*_j)).
    """
    r = np.sort(np.atleast_2d(log_eigs), axis=-1)[..., ::-1]
    p = r.shape[-1]
    iu, ju = np.triu_indices(p, k=1)
    hi, lo = r[..., iu], r[..., ju]
    h = hi - lo
    with np.errstate(divide='ignore', invalid='ignore'):
        rel = np.where(h > 0, np.log(np.expm1(h) / np.where(h > 0, h, 1.0)), 0.0)
    return r.sum(axis=-1) + (lo + rel).sum(axis=-1)


class LogSpaceInverseWishart:
    """Inverse Wishart on Sigma, carried to the vech(log Sigma) coordinates."""

    def __init__(self, df: float, scale: np.ndarray):
        self.p = scale.shape[0]
        self.d = dim_for(self.p)
        self.dist = invwishart(df=df, scale=scale)

    def logpdf(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        w, V = np.linalg.eigh(unvech(pts, self.p))
        with np.errstate(over='ignore'):
            mats = (V * np.exp(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
        out = np.full(pts.shape[0], -np.inf)
        ok = np.all(np.isfinite(mats), axis=(1, 2))
        if np.any(ok):
            lp = np.atleast_1d(self.dist.logpdf(np.moveaxis(mats[ok], 0, -1)))
            out[ok] = lp + log_exp_jacobian(w[ok])
        return float(out[0]) if np.ndim(x) == 1 else out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        mats = np.asarray(self.dist.rvs(size=n, random_state=rng)).reshape(n, self.p, self.p)
        out = vech(sym_log(mats))
        return out[0] if size is None else out


class CovarianceTarget(Target):
    name = 'covariance'
    is_data_target = True

    def __init__(self, data: Any, eps: float = DEFAULT_EPS, jacobian: bool = True):
        Y = np.asarray(data, dtype=float)
        if Y.ndim != 2:
            raise ValueError('data must be an (N, p) matrix')
        N, p = Y.shape
        if N <= p:
            raise ValueError(f'need N > p, got N={N}, p={p}')
        if not eps > 0:
            raise ValueError('eps must be positive')
        S = Y.T @ Y
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise ValueError('data matrix is not of full column rank') from exc
        super().__init__(dim_for(p))
        self.p, self.N = p, N
        self.S = S
        self.eps = float(eps)
        self.jacobian = bool(jacobian)
        df = N - p + 1
        if df <= p - 1:
            _logger.warning('Inverse Wishart df %d too small for p=%d; using %d', df, p, p)
            df = p
        self._g0 = LogSpaceInverseWishart(df, S)

    def log_density(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        w, V = np.linalg.eigh(unvech(pts, self.p))
        with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
            r = np.exp(w)
            # tr(Sigma^{-1} S) = sum_k (v_k' S v_k) / r_k
            quad = np.einsum('nik,ij,njk->nk', V, self.S, V)
            out = -0.5 * (quad / r).sum(axis=1) - (0.5 * self.N + 1.0) * w.sum(axis=1)
            iu, ju = np.triu_indices(self.p, k=1)
            gaps = np.abs(r[:, iu] - r[:, ju])
            if iu.size:
                out = out - np.log(gaps).sum(axis=1)
                out = np.where(gaps.min(axis=1) > self.eps, out, -np.inf)
            if self.jacobian:
                out = out + log_exp_jacobian(w)
        out = np.where(np.isfinite(out) & np.all(np.isfinite(r), axis=1), out, -np.inf)
        return float(out[0]) if np.ndim(x) == 1 else out

    def envelope(self, initial: Optional[TMixture] = None) -> LogSpaceInverseWishart:
        return self._g0

    def initial_point(self) -> np.ndarray:
        return vech(sym_log(self.S / self.N))

    def sigma(self, x: Any) -> np.ndarray:
        """Map sampler coordinates back to Sigma."""
        return sym_exp(unvech(x, self.p))

    def to_config(self) -> Dict[str, Any]:
        return {'name': self.name, 'dim': self.dim, 'p': self.p, 'N': self.N,
                'eps': self.eps, 'jacobian': self.jacobian}


def covariance_target(data: Any, eps: float = DEFAULT_EPS, jacobian: bool = True) -> CovarianceTarget:
    return CovarianceTarget(data, eps, jacobian)


def toy_data(p: int, N: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """N zero-mean normal rows with a random well-conditioned covariance; returns (data, true Sigma)."""
    A = rng.standard_normal((p, p))
    sigma = A @ A.T / p + np.diag(np.linspace(1.0, 2.0, p))
    return rng.multivariate_normal(np.zeros(p), sigma, size=N), sigma


def load_csv(path: Any) -> np.ndarray:
    """Read a header CSV of numeric columns (one row per observation)."""
    path = Path(path)
    with path.open('r', encoding='utf-8', newline='') as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f'{path}: empty file or missing header')
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as exc:
            raise ValueError(f'{path}: non-numeric entry: {exc}') from exc
    if any(len(r) != len(header) for r in rows):
        raise ValueError(f'{path}: ragged rows')
    return np.array(rows, dtype=float).reshape(len(rows), len(header))
