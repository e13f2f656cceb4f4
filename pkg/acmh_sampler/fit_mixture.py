"""Fit a mixture of multivariate t densities to the sampler history.

EM through the Gaussian scale-mixture representation of the t density, with
each component's degrees of freedom profiled over a fixed grid after every
sweep. The number of components is chosen by greedy kill / merge / split
moves accepted on a BIC-style penalized log-likelihood, which is the
reported ``objective``. That penalized likelihood is a surrogate for a
variational lower bound and is labelled as such in ``FitReport``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from .errors import InsufficientDataError
from .mixture_t import StudentT, TMixture, t_logpdf_from_mahalanobis
from .settings import section

_logger = logging.getLogger(__name__)

_FIT = section('fit')

MIN_STATES_PER_DIM = 10

OBJECTIVE_KIND = 'penalized log-likelihood (BIC-style surrogate for the variational lower bound)'

_REG_SUBSAMPLE = 500
_MONOTONE_SLACK = 1e-8
_MAX_STRUCTURAL_ROUNDS = 50


@dataclass(frozen=True)
class FitConfig:
    max_components: int = int(_FIT['max_components'])
    nu_grid: Tuple[float, ...] = tuple(float(v) for v in _FIT['nu_grid'])
    weight_floor: float = float(_FIT['weight_floor'])
    max_iters: int = int(_FIT['max_iters'])
    tol: float = float(_FIT['tol'])
    fixed_G: Optional[int] = None
    init_components: int = int(_FIT['init_components'])
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(v) for v in self.nu_grid)
        object.__setattr__(self, 'nu_grid', grid)
        if not grid or any(v <= 0 for v in grid) or list(grid) != sorted(set(grid)):
            raise ValueError('nu_grid must be a nonempty strictly ascending list of positive values')
        if self.max_components < 1 or self.init_components < 1:
            raise ValueError('component counts must be at least 1')
        if not 0.0 <= self.weight_floor < 1.0 / self.max_components:
            raise ValueError('weight_floor must lie in [0, 1/max_components)')
        if self.fixed_G is not None and self.fixed_G < 1:
            raise ValueError('fixed_G must be at least 1')
        if self.max_iters < 1 or not self.tol > 0:
            raise ValueError('max_iters must be >= 1 and tol positive')

    def locked(self, G: int) -> 'FitConfig':
        """Same settings with the component count fixed to G."""
        data = asdict(self)
        data['fixed_G'] = int(G)
        return FitConfig(**data)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['nu_grid'] = list(self.nu_grid)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FitConfig':
        return cls(**data)


@dataclass
class FitReport:
    objective_trace: List[float] = field(default_factory=list)
    G_selected: int = 0
    split_merge_log: List[Dict[str, Any]] = field(default_factory=list)
    structural_events: List[int] = field(default_factory=list)
    n_points: int = 0
    degenerate: bool = False
    objective_kind: str = OBJECTIVE_KIND

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class _Params:
    weights: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    nus: np.ndarray

    @property
    def G(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> '_Params':
        return _Params(self.weights.copy(), self.means.copy(), self.scales.copy(), self.nus.copy())

    def to_mixture(self) -> TMixture:
        comps = [StudentT(self.means[k], self.scales[k], self.nus[k]) for k in range(self.G)]
        return TMixture(self.weights / self.weights.sum(), comps)

    @classmethod
    def from_mixture(cls, m: TMixture) -> '_Params':
        return cls(
            np.array(m.weights, dtype=float),
            np.array([c.mu for c in m.components]),
            np.array([c.sigma for c in m.components]),
            np.array([c.nu for c in m.components], dtype=float),
        )


def penalty(G: int, d: int, n: int) -> float:
    """0.5 * G * (d + d(d+1)/2 + 2) * log n."""
    return 0.5 * G * (d + d * (d + 1) / 2.0 + 2.0) * math.log(max(n, 1))


def objective(m: TMixture, data: Any) -> float:
    """sum_i log g_M(x_i) - penalty(G); higher is better."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] == 0:
        raise ValueError('objective needs at least one data point')
    loglik = float(np.sum(np.atleast_1d(m.logpdf(X))))
    return loglik - penalty(m.G, m.d, X.shape[0])


def _components(params: _Params) -> List[StudentT]:
    return [StudentT(params.means[k], params.scales[k], params.nus[k]) for k in range(params.G)]


def _mahalanobis(X: np.ndarray, comps: Sequence[StudentT]) -> np.ndarray:
    return np.stack([np.atleast_1d(c.mahalanobis(X)) for c in comps], axis=1)


def _weighted_logs(X: np.ndarray, params: _Params, comps: Sequence[StudentT], maha: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    cols = [t_logpdf_from_mahalanobis(maha[:, k], d, params.nus[k], comps[k].log_det) for k in range(params.G)]
    with np.errstate(divide='ignore'):
        return np.stack(cols, axis=1) + np.log(params.weights)


def _loglik(X: np.ndarray, params: _Params) -> float:
    comps = _components(params)
    return float(np.sum(logsumexp(_weighted_logs(X, params, comps, _mahalanobis(X, comps)), axis=1)))


def _em_sweep(X: np.ndarray, params: _Params, nu_grid: Sequence[float], reg: float) -> _Params:
    """One E/M pass at fixed nu followed by a per-component nu profile over the grid."""
    n, d = X.shape
    comps = _components(params)
    maha = _mahalanobis(X, comps)
    lw = _weighted_logs(X, params, comps, maha)
    tau = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    u = (params.nus + d) / (params.nus + maha)
    tau_sum = tau.sum(axis=0)
    tu = tau * u

    out = params.copy()
    out.weights = np.maximum(tau_sum / n, 1e-300)
    out.weights = out.weights / out.weights.sum()
    eye = np.eye(d)
    for k in range(params.G):
        if tau_sum[k] <= 1e-12:
            continue
        mu = tu[:, k] @ X / tu[:, k].sum()
        diff = X - mu
        cov = (tu[:, k, None] * diff).T @ diff / tau_sum[k]
        out.means[k] = mu
        out.scales[k] = 0.5 * (cov + cov.T) + reg * eye
    return _profile_nu(X, out, nu_grid)


def _profile_nu(X: np.ndarray, params: _Params, nu_grid: Sequence[float]) -> _Params:
    """Coordinate ascent of the observed log-likelihood over each component's nu."""
    d = X.shape[1]
    comps = _components(params)
    maha = _mahalanobis(X, comps)
    lw = _weighted_logs(X, params, comps, maha)
    out = params.copy()
    for k in range(params.G):
        others = np.delete(lw, k, axis=1)
        rest = logsumexp(others, axis=1) if others.shape[1] else np.full(X.shape[0], -np.inf)
        log_wk = math.log(out.weights[k])
        best_nu, best_ll = out.nus[k], -math.inf
        for nu in sorted(set(nu_grid) | {float(out.nus[k])}):
            col = log_wk + t_logpdf_from_mahalanobis(maha[:, k], d, nu, comps[k].log_det)
            ll = float(np.sum(np.logaddexp(rest, col)))
            if ll > best_ll:
                best_nu, best_ll = nu, ll
        out.nus[k] = best_nu
        lw[:, k] = log_wk + t_logpdf_from_mahalanobis(maha[:, k], d, best_nu, comps[k].log_det)
    return out


def _run_em(X: np.ndarray, params: _Params, cfg: FitConfig, reg: float) -> Tuple[_Params, List[float]]:
    """EM sweeps until the per-point change drops below tol; never accepts a decrease."""
    n = X.shape[0]
    current = params
    ll = _loglik(X, current)
    trace = [ll]
    for _ in range(cfg.max_iters):
        try:
            candidate = _em_sweep(X, current, cfg.nu_grid, reg)
            new_ll = _loglik(X, candidate)
        except (ValueError, linalg.LinAlgError) as exc:
            _logger.debug('EM sweep failed, keeping previous parameters: %s', exc)
            break
        if not math.isfinite(new_ll) or new_ll < ll - _MONOTONE_SLACK:
            break
        improved = new_ll - ll
        current, ll = candidate, new_ll
        trace.append(ll)
        if improved / n < cfg.tol:
            break
    return current, trace


def _regularization(X: np.ndarray, rng: np.random.Generator) -> float:
    """1e-6 * (median pairwise squared distance) / d, from at most 500 points."""
    n, d = X.shape
    sub = X if n <= _REG_SUBSAMPLE else X[np.sort(rng.choice(n, _REG_SUBSAMPLE, replace=False))]
    sq = pdist(sub, 'sqeuclidean')
    med = float(np.median(sq)) if sq.size else 0.0
    if med <= 0:
        med = float(np.mean(sq)) if sq.size else 0.0
    return 1e-6 * med / d


def _init_params(X: np.ndarray, k: int, nu0: float, reg: float, seed: int) -> _Params:
    """k-means++ seeds, hard assignment, per-cluster moments."""
    n, d = X.shape
    k = max(1, min(k, n))
    centers, _ = kmeans_plusplus(X, n_clusters=k, random_state=seed)
    labels = np.argmin(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
    global_cov = np.cov(X, rowvar=False).reshape(d, d) + reg * np.eye(d)
    weights = np.empty(k)
    scales = np.empty((k, d, d))
    means = np.array(centers, dtype=float)
    for j in range(k):
        members = X[labels == j]
        weights[j] = max(members.shape[0], 1)
        if members.shape[0] > d + 1:
            means[j] = members.mean(axis=0)
            scales[j] = np.cov(members, rowvar=False).reshape(d, d) + reg * np.eye(d)
        else:
            scales[j] = global_cov
    return _Params(weights / weights.sum(), means, scales, np.full(k, nu0))


def _kill(params: _Params, floor: float) -> Tuple[_Params, List[int]]:
    keep = params.weights >= floor
    if keep.all() or not keep.any():
        return params, []
    killed = [int(i) for i in np.flatnonzero(~keep)]
    w = params.weights[keep]
    return _Params(w / w.sum(), params.means[keep], params.scales[keep], params.nus[keep]), killed


def _gaussian_cov(scale: np.ndarray, nu: float) -> np.ndarray:
    return scale * (nu / (nu - 2.0)) if nu > 2 else scale


def _bhattacharyya(m1, s1, m2, s2) -> float:
    s = 0.5 * (s1 + s2)
    diff = m1 - m2
    _, ld = np.linalg.slogdet(s)
    _, ld1 = np.linalg.slogdet(s1)
    _, ld2 = np.linalg.slogdet(s2)
    return float(0.125 * diff @ linalg.solve(s, diff, assume_a='pos') + 0.5 * (ld - 0.5 * (ld1 + ld2)))


def _merge_candidate(params: _Params) -> Tuple[_Params, Tuple[int, int]]:
    """Merge the pair with the smallest Bhattacharyya distance, moment matched."""
    G = params.G
    covs = [_gaussian_cov(params.scales[k], params.nus[k]) for k in range(G)]
    best, pair = math.inf, (0, 1)
    for i in range(G):
        for j in range(i + 1, G):
            dist = _bhattacharyya(params.means[i], covs[i], params.means[j], covs[j])
            if dist < best:
                best, pair = dist, (i, j)
    i, j = pair
    wi, wj = params.weights[i], params.weights[j]
    w = wi + wj
    mu = (wi * params.means[i] + wj * params.means[j]) / w
    cov = sum(
        wk / w * (covs[k] + np.outer(params.means[k] - mu, params.means[k] - mu))
        for k, wk in ((i, wi), (j, wj))
    )
    nu = float(min(params.nus[i], params.nus[j]))
    scale = cov * ((nu - 2.0) / nu) if nu > 2 else cov
    keep = [k for k in range(G) if k not in pair]
    merged = _Params(
        np.append(params.weights[keep], w),
        np.vstack([params.means[keep], mu[None, :]]),
        np.concatenate([params.scales[keep], scale[None, :, :]]),
        np.append(params.nus[keep], nu),
    )
    return merged, pair


def _split_order(X: np.ndarray, params: _Params) -> List[int]:
    """Components ranked by within-component deviance sum_i tau_ik * delta_ik, largest first."""
    comps = _components(params)
    maha = _mahalanobis(X, comps)
    lw = _weighted_logs(X, params, comps, maha)
    tau = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    deviance = (tau * maha).sum(axis=0)
    return [int(k) for k in np.argsort(-deviance, kind='stable')]


def _split(params: _Params, k: int) -> _Params:
    """Replace component k by two halves placed at mu +- sqrt(lambda) v along its principal axis."""
    evals, evecs = np.linalg.eigh(params.scales[k])
    lam, v = float(evals[-1]), evecs[:, -1]
    offset = math.sqrt(max(lam, 0.0)) * v
    scale = params.scales[k] - 0.75 * lam * np.outer(v, v)
    scale = 0.5 * (scale + scale.T)
    keep = [j for j in range(params.G) if j != k]
    half = 0.5 * params.weights[k]
    return _Params(
        np.concatenate([params.weights[keep], [half, half]]),
        np.vstack([params.means[keep], params.means[k] + offset, params.means[k] - offset]),
        np.concatenate([params.scales[keep], scale[None], scale[None]]),
        np.concatenate([params.nus[keep], [params.nus[k], params.nus[k]]]),
    )


def _penalized(ll: float, G: int, d: int, n: int) -> float:
    return ll - penalty(G, d, n)


def _floor_weights(params: _Params, floor: float) -> _Params:
    """Map weights so that none falls below floor/2 (used when G is locked)."""
    G = params.G
    if floor <= 0 or params.weights.min() >= floor / 2.0:
        return params
    out = params.copy()
    out.weights = floor / 2.0 + (1.0 - G * floor / 2.0) * params.weights
    return out


def _degenerate_fit(X: np.ndarray, cfg: FitConfig) -> Tuple[TMixture, FitReport]:
    d = X.shape[1]
    x0 = X[0]
    jitter = 1e-6 * max(1.0, float(np.mean(x0 * x0)))
    G = cfg.fixed_G or 1
    comp = StudentT(x0, jitter * np.eye(d), cfg.nu_grid[0])
    mixture = TMixture(np.full(G, 1.0 / G), [comp] * G)
    _logger.warning('All %d history states are identical; using a jittered single-component fit', X.shape[0])
    report = FitReport(
        objective_trace=[objective(mixture, X)], G_selected=G, n_points=X.shape[0], degenerate=True,
    )
    return mixture, report


def fit(history: Any, cfg: Optional[FitConfig] = None, init: Optional[TMixture] = None) -> Tuple[TMixture, FitReport]:
    """Fit a t mixture to ``history`` (n x d).

    ``init`` warm-starts EM from an existing mixture; it is used only when its
    component count is compatible with ``cfg.fixed_G``.
    """
    cfg = cfg or FitConfig()
    X = np.atleast_2d(np.asarray(history, dtype=float))
    n, d = X.shape
    if n < MIN_STATES_PER_DIM * d:
        raise InsufficientDataError(f'need at least {MIN_STATES_PER_DIM * d} history states to fit in dimension {d}, got {n}')
    if not np.all(np.isfinite(X)):
        raise ValueError('history contains non-finite values')
    if np.all(X == X[0]):
        return _degenerate_fit(X, cfg)

    rng = np.random.default_rng(cfg.seed)
    reg = _regularization(X, rng)
    if reg <= 0:
        return _degenerate_fit(X, cfg)

    if init is not None and init.d == d and (cfg.fixed_G is None or init.G == cfg.fixed_G):
        params = _Params.from_mixture(init)
    else:
        k = cfg.fixed_G or min(cfg.max_components, cfg.init_components)
        nu0 = cfg.nu_grid[len(cfg.nu_grid) // 2]
        params = _init_params(X, k, nu0, reg, cfg.seed)
        if params.G < k and cfg.fixed_G is not None:
            raise InsufficientDataError(f'cannot seed {k} components from {n} points')

    report = FitReport(n_points=n)
    params, lls = _run_em(X, params, cfg, reg)
    report.objective_trace.extend(_penalized(ll, params.G, d, n) for ll in lls)

    if cfg.fixed_G is None:
        params = _structural_search(X, params, cfg, reg, report)

    params = _floor_weights(params, cfg.weight_floor)
    mixture = params.to_mixture()
    report.G_selected = mixture.G
    _logger.debug('Fitted %d-component t mixture to %d states (objective %.6g)',
                  mixture.G, n, report.objective_trace[-1])
    return mixture, report


def _record(report: FitReport, lls: Sequence[float], G: int, d: int, n: int, event: Dict[str, Any]) -> None:
    report.structural_events.append(len(report.objective_trace))
    report.objective_trace.extend(_penalized(ll, G, d, n) for ll in lls)
    report.split_merge_log.append(event)


def _structural_search(X: np.ndarray, params: _Params, cfg: FitConfig, reg: float, report: FitReport) -> _Params:
    n, d = X.shape
    current = params
    current_obj = report.objective_trace[-1]
    for _ in range(_MAX_STRUCTURAL_ROUNDS):
        pruned, killed = _kill(current, cfg.weight_floor)
        if killed:
            current, lls = _run_em(X, pruned, cfg, reg)
            current_obj = _penalized(lls[-1], current.G, d, n)
            _record(report, lls, current.G, d, n, {'move': 'kill', 'components': killed, 'G': current.G,
                                                   'objective': current_obj})
            continue

        accepted = False
        if current.G > 1:
            merged, pair = _merge_candidate(current)
            cand, lls = _run_em(X, merged, cfg, reg)
            cand_obj = _penalized(lls[-1], cand.G, d, n)
            if cand_obj > current_obj:
                current, current_obj, accepted = cand, cand_obj, True
                _record(report, lls, cand.G, d, n, {'move': 'merge', 'components': list(pair), 'G': cand.G,
                                                    'objective': cand_obj})
        if not accepted and current.G < cfg.max_components:
            for k in _split_order(X, current):
                cand, lls = _run_em(X, _split(current, k), cfg, reg)
                cand_obj = _penalized(lls[-1], cand.G, d, n)
                if cand_obj > current_obj:
                    current, current_obj, accepted = cand, cand_obj, True
                    _record(report, lls, cand.G, d, n, {'move': 'split', 'components': [k], 'G': cand.G,
                                                        'objective': cand_obj})
                    break
        if not accepted:
            break
    return current


__all__ = ['FitConfig', 'FitReport', 'fit', 'objective', 'penalty', 'OBJECTIVE_KIND', 'MIN_STATES_PER_DIM']
