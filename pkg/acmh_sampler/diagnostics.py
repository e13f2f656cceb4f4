"""Sampler performance metrics.

Per-coordinate IACT and squared jumping distance, Gaussian-kernel density
estimates of chain marginals and the scores built on them (log predictive
density, censored likelihood score), Bernoulli CRPS, and the run summary
written to report.json.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.special import logsumexp, ndtr

from .errors import DegenerateSeriesError
from .settings import section

_logger = logging.getLogger(__name__)

_DIAG = section('diagnostics')

LOG_DENSITY_FLOOR = float(_DIAG['log_density_floor'])
IACT_MAX_LAG = int(_DIAG['iact_max_lag'])

_CHUNK = 2048
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

Interval = Tuple[float, float]


def _series(s: Any, min_len: int) -> np.ndarray:
    x = np.asarray(s, dtype=float).reshape(-1)
    if x.shape[0] < min_len:
        raise ValueError(f'series needs at least {min_len} values, got {x.shape[0]}')
    if not np.all(np.isfinite(x)):
        raise ValueError('series contains non-finite values')
    return x


def autocorrelation(s: Any, max_lag: Optional[int] = None) -> np.ndarray:
    """rho_t for t = 0..max_lag, biased autocovariance (divide by n) via FFT."""
    x = _series(s, 2)
    n = x.shape[0]
    centered = x - x.mean()
    size = next_fast_len(2 * n)
    f = rfft(centered, n=size)
    acov = irfft(f * np.conjugate(f), n=size)[:n] / n
    if acov[0] <= 0:
        raise DegenerateSeriesError('constant series has no autocorrelation')
    rho = acov / acov[0]
    top = n - 1 if max_lag is None else min(max_lag, n - 1)
    return rho[: top + 1]


def iact(s: Any, max_lag: int = IACT_MAX_LAG) -> float:
    """1 + 2 sum_{t <= L*} rho_t, L* = min(max_lag, L).

    L is the first lag with |rho_t| <= 2/sqrt(n - t), or n - 1 when no lag qualifies.
    """
    x = _series(s, 10)
    n = x.shape[0]
    rho = autocorrelation(x)
    lags = np.arange(1, n)
    inside = np.abs(rho[1:]) <= 2.0 / np.sqrt(n - lags)
    L = int(lags[np.argmax(inside)]) if inside.any() else n - 1
    L_star = min(max_lag, L)
    return float(1.0 + 2.0 * rho[1:L_star + 1].sum())


def sq_jump(s: Any) -> float:
    """Mean squared successive difference."""
    x = _series(s, 2)
    return float(np.mean(np.diff(x) ** 2))


def silverman_bandwidth(sample: Any) -> float:
    """1.06 * min(sd, IQR/1.34) * n**(-1/5)."""
    x = np.asarray(sample, dtype=float).reshape(-1)
    sd = float(np.std(x, ddof=1)) if x.shape[0] > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25) / 1.34
    spread = min(sd, iqr) if sd > 0 and iqr > 0 else max(sd, iqr)
    if spread <= 0:
        spread = 1e-8 * max(1.0, float(np.abs(x).max()))
        _logger.warning('Degenerate KDE sample of size %d; using bandwidth floor', x.shape[0])
    return 1.06 * spread * x.shape[0] ** (-0.2)


@dataclass(frozen=True)
class KDE:
    """Gaussian-kernel density estimate of a 1-D sample."""
    sample: np.ndarray
    bandwidth: float

    def __post_init__(self):
        arr = np.asarray(self.sample, dtype=float).reshape(-1)
        if arr.shape[0] == 0:
            raise ValueError('KDE sample must be nonempty')
        if not self.bandwidth > 0:
            raise ValueError('KDE bandwidth must be positive')
        arr.setflags(write=False)
        object.__setattr__(self, 'sample', arr)

    @classmethod
    def from_sample(cls, sample: Any, bandwidth: Optional[float] = None) -> 'KDE':
        arr = np.asarray(sample, dtype=float).reshape(-1)
        return cls(arr, bandwidth if bandwidth is not None else silverman_bandwidth(arr))

    def logpdf(self, x: Any) -> np.ndarray | float:
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        h, n = self.bandwidth, self.sample.shape[0]
        norm = math.log(n * h) + _LOG_SQRT_2PI
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], _CHUNK):
            block = pts[start:start + _CHUNK]
            u = (block[:, None] - self.sample[None, :]) / h
            out[start:start + _CHUNK] = logsumexp(-0.5 * u * u, axis=1) - norm
        return float(out[0]) if np.ndim(x) == 0 else out

    def cdf(self, x: Any) -> np.ndarray | float:
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(pts.shape[0])
        for start in range(0, pts.shape[0], _CHUNK):
            block = pts[start:start + _CHUNK]
            out[start:start + _CHUNK] = ndtr((block[:, None] - self.sample[None, :]) / self.bandwidth).mean(axis=1)
        return float(out[0]) if np.ndim(x) == 0 else out

    def mass(self, region: Sequence[Interval]) -> float:
        """KDE probability of a union of intervals."""
        total = 0.0
        for lo, hi in normalize_region(region):
            total += float(self.cdf(hi)) - float(self.cdf(lo))
        return min(max(total, 0.0), 1.0)


def kde_logpdf(k: KDE, x: Any) -> np.ndarray | float:
    return k.logpdf(x)


def normalize_region(region: Sequence[Interval]) -> List[Interval]:
    """Sort and merge intervals; empty intervals are dropped."""
    pieces = sorted((float(lo), float(hi)) for lo, hi in region if float(hi) > float(lo))
    merged: List[Interval] = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def complement(region: Sequence[Interval]) -> List[Interval]:
    out: List[Interval] = []
    edge = -math.inf
    for lo, hi in normalize_region(region):
        if lo > edge:
            out.append((edge, lo))
        edge = hi
    if edge < math.inf:
        out.append((edge, math.inf))
    return out


def in_region(x: Any, region: Sequence[Interval]) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    hit = np.zeros(pts.shape[0], dtype=bool)
    for lo, hi in normalize_region(region):
        hit |= (pts >= lo) & (pts <= hi)
    return hit


def tails_region(threshold: float) -> List[Interval]:
    """{x < -threshold} U {x > threshold}."""
    return [(-math.inf, -threshold), (threshold, math.inf)]


def censored_score(k: KDE, data: Any, region: Sequence[Interval]) -> float:
    """(1/n) sum_i [1{x_i in A} log f(x_i) + 1{x_i not in A} log F(A^c)]."""
    x = np.atleast_1d(np.asarray(data, dtype=float))
    if x.shape[0] == 0:
        raise ValueError('censored score needs at least one data point')
    hit = in_region(x, region)
    total = 0.0
    if hit.any():
        total += float(np.sum(np.maximum(k.logpdf(x[hit]), LOG_DENSITY_FLOOR)))
    if (~hit).any():
        outside = k.mass(complement(region))
        total += (~hit).sum() * (math.log(outside) if outside > 0 else LOG_DENSITY_FLOOR)
    return total / x.shape[0]


def lpds(chain: Any, test: Any, floor: float = LOG_DENSITY_FLOOR, return_floor_count: bool = False):
    """Average over marginals of the mean log KDE density of test points.

    ``chain`` is a ChainOutput or an iterate matrix. Log densities below
    ``floor`` are replaced by it and counted.
    """
    X = np.asarray(getattr(chain, 'iterates', chain), dtype=float)
    T = np.asarray(test, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    T = T[:, None] if T.ndim == 1 else T
    if T.shape[0] < 100:
        raise ValueError(f'LPDS needs at least 100 test points, got {T.shape[0]}')
    if T.shape[1] != X.shape[1]:
        raise ValueError('test points and chain have different dimensions')
    scores = []
    floored = 0
    for i in range(X.shape[1]):
        values = np.asarray(KDE.from_sample(X[:, i]).logpdf(T[:, i]))
        low = values < floor
        floored += int(low.sum())
        scores.append(float(np.mean(np.where(low, floor, values))))
    if floored:
        _logger.info('LPDS: %d test log densities hit the floor %.1f', floored, floor)
    score = float(np.mean(scores))
    return (score, floored) if return_floor_count else score


def crps_bernoulli(mu: float, y: int) -> float:
    """mu**2 when y = 0, (1 - mu)**2 when y = 1."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f'mu must be a probability, got {mu}')
    if y not in (0, 1):
        raise ValueError('y must be 0 or 1')
    return mu * mu if y == 0 else (1.0 - mu) ** 2


def crps_total(mu: Any, y: Any) -> float:
    """Sum of Bernoulli CRPS over test pairs."""
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(y, dtype=int)
    if mu.shape != y.shape:
        raise ValueError('mu and y must have the same shape')
    if np.any((mu < 0) | (mu > 1)) or np.any((y != 0) & (y != 1)):
        raise ValueError('mu must lie in [0, 1] and y in {0, 1}')
    return float(np.sum(np.where(y == 0, mu * mu, (1.0 - mu) ** 2)))


def _safe_iact(values: np.ndarray, max_lag: int, column: int) -> float:
    try:
        return iact(values, max_lag)
    except DegenerateSeriesError:
        _logger.warning('Coordinate %d is constant; IACT undefined', column)
        return float('nan')


def summarize(
    chain: Any,
    test: Any = None,
    max_lag: int = IACT_MAX_LAG,
    crps: Optional[float] = None,
    censored: Optional[float] = None,
) -> Dict[str, Any]:
    """report.json fields for one chain.

    ``acc_over_iact`` is 1000 * (acceptance rate in percent) / IACT, the
    scale used by the benchmark tables; ``acc_rate`` itself is a fraction.
    """
    X = np.asarray(chain.iterates, dtype=float)
    n, d = X.shape
    acc = float(chain.accept_rate)
    iacts = np.array([_safe_iact(X[:, j], max_lag, j) for j in range(d)])
    jumps = np.array([sq_jump(X[:, j]) for j in range(d)])
    iact_avg = float(np.nanmean(iacts)) if np.isfinite(iacts).any() else float('nan')
    iact_max = float(np.nanmax(iacts)) if np.isfinite(iacts).any() else float('nan')
    cpu = float(chain.cpu_seconds)

    def ratio(num: float, den: float) -> float:
        return num / den if den and math.isfinite(den) and den > 0 else float('nan')

    report: Dict[str, Any] = {
        'n_iterations': n,
        'acc_rate': acc,
        'iact_avg': iact_avg,
        'iact_max': iact_max,
        'sqdist_avg': float(np.mean(jumps)),
        'sqdist_min': float(np.min(jumps)),
        'cpu_seconds': cpu,
        'ii_per_time': ratio(n, iact_avg * cpu),
        'min_ii_per_time': ratio(n, iact_max * cpu),
        'acc_over_iact': ratio(1000.0 * 100.0 * acc, iact_avg),
        'min_acc_over_iact': ratio(1000.0 * 100.0 * acc, iact_max),
        'iact': iacts.tolist(),
    }
    if test is not None:
        score, floored = lpds(X, test, return_floor_count=True)
        report['lpds'] = score
        report['lpds_floor_count'] = floored
    if crps is not None:
        report['crps'] = crps
    if censored is not None:
        report['censored_score'] = censored
    return report


__all__ = [
    'KDE', 'autocorrelation', 'iact', 'sq_jump', 'silverman_bandwidth', 'kde_logpdf', 'lpds',
    'censored_score', 'crps_bernoulli', 'crps_total', 'summarize', 'normalize_region',
    'complement', 'in_region', 'tails_region', 'LOG_DENSITY_FLOOR',
]
