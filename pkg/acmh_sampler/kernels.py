"""Reversible t-mixture transition kernels and the composed ACMH proposal.

Every kernel here is reversible with respect to a known density (a t
component, the fitted mixture g_M, or the heavy-tailed mixture q*), so the
Metropolis-Hastings ratio only needs q* at the current and proposed points.
The transition densities of the correlated kernels are never evaluated by
the sampler; ``reversible_t_logpdf`` exists for audits at a fixed rho.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Protocol, Tuple
import logging
import math

import numpy as np

from .errors import DegeneratePointError
from .mixture_t import Partition, StudentT, TMixture, conditional_t
from .settings import section

_logger = logging.getLogger(__name__)

_PROPOSAL = section('proposal')

RHO_MAX = 1.0 - 1e-12

BRANCH_G0 = 'independent-g0'
BRANCH_GM = 'independent-gM'
BRANCH_CMH = 'cmh'
BRANCH_BLOCK = 'block'
BRANCH_RW = 'rw'
BRANCHES = (BRANCH_G0, BRANCH_GM, BRANCH_CMH, BRANCH_BLOCK, BRANCH_RW)


class Envelope(Protocol):
    """Anything with a log density and a sampler, e.g. a StudentT or TMixture."""

    def logpdf(self, x: Any) -> Any: ...

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray: ...


@dataclass(frozen=True)
class RhoLaw:
    """Mixing law for the correlation rho: Beta(a, b), or a point mass at ``fixed``."""
    a: float = float(_PROPOSAL['rho_beta'][0])
    b: float = float(_PROPOSAL['rho_beta'][1])
    fixed: Optional[float] = None

    def __post_init__(self):
        if self.fixed is not None:
            if not 0.0 <= self.fixed < 1.0:
                raise ValueError(f'fixed rho must lie in [0, 1), got {self.fixed}')
        elif not (self.a > 0 and self.b > 0):
            raise ValueError('Beta parameters of the rho law must be positive')

    def sample(self, rng: np.random.Generator) -> float:
        if self.fixed is not None:
            return float(self.fixed)
        return min(float(rng.beta(self.a, self.b)), RHO_MAX)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RhoLaw':
        return cls(**data)


@dataclass(frozen=True)
class ProposalConfig:
    """Tuning of the composed proposal.

    ``pB`` and ``kappa`` left as None resolve per dimension to
    ``max(0, 1 - block_target_size/d)`` and ``2.38**2/d``.
    """
    beta0: float = float(_PROPOSAL['beta0'])
    gamma: float = float(_PROPOSAL['gamma'])
    delta: float = 0.0
    iota_rw: int = int(_PROPOSAL['iota_rw'])
    pB: Optional[float] = None
    rho_law: RhoLaw = field(default_factory=RhoLaw)
    kappa: Optional[float] = None
    block_target_size: int = int(_PROPOSAL['block_target_size'])

    def __post_init__(self):
        for name in ('beta0', 'gamma', 'delta'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f'{name} must be a probability, got {value}')
        if self.pB is not None and not 0.0 <= self.pB < 1.0:
            raise ValueError(f'pB must lie in [0, 1), got {self.pB}')
        if self.iota_rw < 1:
            raise ValueError('iota_rw must be at least 1')
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError('kappa must be positive')
        if self.block_target_size < 1:
            raise ValueError('block_target_size must be at least 1')

    def pB_for(self, d: int) -> float:
        if self.pB is not None:
            return self.pB
        return max(0.0, 1.0 - self.block_target_size / d)

    def kappa_for(self, d: int) -> float:
        return self.kappa if self.kappa is not None else 2.38 ** 2 / d

    def with_delta(self, delta: float) -> 'ProposalConfig':
        return replace(self, delta=delta)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['rho_law'] = self.rho_law.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ProposalConfig':
        data = dict(data)
        if isinstance(data.get('rho_law'), dict):
            data['rho_law'] = RhoLaw.from_dict(data['rho_law'])
        return cls(**data)


@dataclass(frozen=True)
class ProposalDraw:
    z: np.ndarray
    branch: str


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < 1.0:
        raise ValueError(f'rho must lie in [0, 1), got {rho}')


def _reversible_t_params(x: np.ndarray, p: StudentT, rho: float) -> Tuple[np.ndarray, float]:
    """Location and the scalar multiplying sigma in the transition from x."""
    d, nu = p.d, p.nu
    delta = p.mahalanobis(x)
    loc = (1.0 - rho) * p.mu + rho * x
    scale = nu / (nu + d) * (1.0 - rho * rho) * (1.0 + delta / nu)
    return loc, scale


def draw_reversible_t(x: Any, p: StudentT, rho: float, rng: np.random.Generator) -> np.ndarray:
    """One draw from the t transition that leaves ``p`` invariant and is reversible for it."""
    _check_rho(rho)
    x = np.asarray(x, dtype=float)
    if x.shape != (p.d,):
        raise ValueError(f'x has shape {x.shape}, expected {(p.d,)}')
    loc, scale = _reversible_t_params(x, p, rho)
    nu_new = p.nu + p.d
    g = rng.gamma(shape=0.5 * nu_new, scale=2.0 / nu_new)
    u = rng.standard_normal(p.d)
    return loc + math.sqrt(scale / g) * (p.chol @ u)


def reversible_t_logpdf(z: Any, x: Any, p: StudentT, rho: float) -> float:
    """log T(z | x; rho) for the transition above at a fixed rho."""
    _check_rho(rho)
    x = np.asarray(x, dtype=float)
    loc, scale = _reversible_t_params(x, p, rho)
    if scale <= 0:
        raise ValueError('transition scale collapsed; rho too close to 1')
    return float(StudentT(loc, scale * p.sigma, p.nu + p.d).logpdf(z))


def _pick_component(x: np.ndarray, m: TMixture, rng: np.random.Generator) -> int:
    w = m.responsibilities(x)
    return int(rng.choice(m.G, p=w))


def draw_cmh(x: Any, m: TMixture, law: RhoLaw, rng: np.random.Generator) -> np.ndarray:
    """Mixture of reversible t transitions: k ~ omega(k|x), rho ~ law, then a t transition under component k."""
    x = np.asarray(x, dtype=float)
    k = _pick_component(x, m, rng)
    return draw_reversible_t(x, m.components[k], law.sample(rng), rng)


def draw_block(x: Any, m: TMixture, part: Partition, rng: np.random.Generator) -> np.ndarray:
    """Hold z_B = x_B and redraw z_A from the selected component's conditional given x_B."""
    x = np.asarray(x, dtype=float)
    if part.d != m.d:
        raise ValueError('partition dimension does not match the mixture')
    k = _pick_component(x, m, rng)
    comp = m.components[k]
    if not part.indexB:
        return comp.sample(rng)
    cond = conditional_t(comp, part, x[list(part.indexB)])
    z = x.copy()
    z[list(part.indexA)] = cond.sample(rng)
    return z


def select_partition(d: int, pB: float, rng: np.random.Generator) -> Partition:
    """Each coordinate joins B with probability pB; redraw until A is nonempty."""
    if d < 1:
        raise ValueError('dimension must be positive')
    if not 0.0 <= pB < 1.0:
        raise ValueError(f'pB must lie in [0, 1), got {pB}')
    if d == 1:
        return Partition((0,), ())
    while True:
        in_b = rng.random(d) < pB
        if not in_b.all():
            return Partition.from_mask(in_b)


def _log_weights(beta0: float) -> Tuple[float, float]:
    lb0 = math.log(beta0) if beta0 > 0 else -math.inf
    lb1 = math.log1p(-beta0) if beta0 < 1 else -math.inf
    return lb0, lb1


def log_q_star(x: Any, m: TMixture, g0: Envelope, beta0: float) -> Tuple[float, float, float]:
    """Return ``(log q*(x), log g0(x), log gM(x))`` with q* = beta0 g0 + (1 - beta0) gM."""
    lg0 = float(g0.logpdf(x)) if beta0 > 0 else -math.inf
    lgm = float(m.logpdf(x)) if beta0 < 1 else -math.inf
    return _combine(lg0, lgm, beta0), lg0, lgm


def _combine(lg0: float, lgm: float, beta0: float) -> float:
    lb0, lb1 = _log_weights(beta0)
    return float(np.logaddexp(lb0 + lg0, lb1 + lgm))


def draw_acmh(
    x: Any,
    m: TMixture,
    g0: Envelope,
    cfg: ProposalConfig,
    rng: np.random.Generator,
    cache: Optional[Tuple[float, float]] = None,
    partition: Optional[Partition] = None,
) -> ProposalDraw:
    """Draw from the composed proposal at the current delta in ``cfg``.

    ``cache`` is ``(log g0(x), log gM(x))`` when the caller already holds them.
    A block step draws a fresh partition unless ``partition`` is given.
    """
    x = np.asarray(x, dtype=float)
    beta0 = cfg.beta0
    if rng.random() < cfg.delta:
        if rng.random() < beta0:
            return ProposalDraw(np.asarray(g0.sample(rng), dtype=float), BRANCH_G0)
        return ProposalDraw(m.sample(rng), BRANCH_GM)

    if cache is None:
        _, lg0, lgm = log_q_star(x, m, g0, beta0)
    else:
        lg0, lgm = cache
    lq = _combine(lg0, lgm, beta0)
    if not math.isfinite(lq):
        raise DegeneratePointError('q* underflows at the current point')
    lb0, _ = _log_weights(beta0)
    p_g0 = math.exp(min(0.0, lb0 + lg0 - lq))
    if rng.random() < p_g0:
        return ProposalDraw(np.asarray(g0.sample(rng), dtype=float), BRANCH_G0)
    if rng.random() < cfg.gamma:
        part = partition if partition is not None else select_partition(m.d, cfg.pB_for(m.d), rng)
        return ProposalDraw(draw_block(x, m, part, rng), BRANCH_BLOCK)
    return ProposalDraw(draw_cmh(x, m, cfg.rho_law, rng), BRANCH_CMH)


def branch_probabilities(x: Any, m: TMixture, g0: Envelope, cfg: ProposalConfig) -> Dict[str, float]:
    """Analytic probability of each reversible branch of ``draw_acmh`` at x."""
    lq, lg0, _ = log_q_star(x, m, g0, cfg.beta0)
    lb0, _ = _log_weights(cfg.beta0)
    p_g0 = math.exp(min(0.0, lb0 + lg0 - lq)) if math.isfinite(lq) else 0.0
    delta, gamma = cfg.delta, cfg.gamma
    rest = (1.0 - delta) * (1.0 - p_g0)
    return {
        BRANCH_G0: delta * cfg.beta0 + (1.0 - delta) * p_g0,
        BRANCH_GM: delta * (1.0 - cfg.beta0),
        BRANCH_CMH: rest * (1.0 - gamma),
        BRANCH_BLOCK: rest * gamma,
    }


def log_ratio_from_values(log_pi_x: float, log_pi_z: float, log_q_x: float, log_q_z: float) -> float:
    """Unclipped log MH ratio for a q*-reversible proposal."""
    if not math.isfinite(log_pi_x):
        raise ValueError('log target density must be finite at the current point')
    if log_pi_z == -math.inf or math.isnan(log_pi_z):
        return -math.inf
    if log_q_z == -math.inf:
        return math.inf
    return (log_pi_z - log_pi_x) + (log_q_x - log_q_z)


def acmh_log_ratio(
    x: Any,
    z: Any,
    log_pi: Callable[[Any], float],
    m: TMixture,
    g0: Envelope,
    beta0: float,
) -> float:
    """log pi(z) - log pi(x) + log q*(x) - log q*(z), without clipping."""
    lpx = float(log_pi(x))
    lpz = float(log_pi(z))
    lqx = log_q_star(x, m, g0, beta0)[0]
    lqz = log_q_star(z, m, g0, beta0)[0] if lpz != -math.inf else -math.inf
    return log_ratio_from_values(lpx, lpz, lqx, lqz)


def acmh_log_accept(
    x: Any,
    z: Any,
    log_pi: Callable[[Any], float],
    m: TMixture,
    g0: Envelope,
    beta0: float,
) -> float:
    return min(0.0, acmh_log_ratio(x, z, log_pi, m, g0, beta0))


def rw_scale_factor(p: StudentT) -> float:
    """Multiplier turning sigma into the step covariance base: nu/(nu-2) when nu > 2, else 1."""
    return p.nu / (p.nu - 2.0) if p.nu > 2 else 1.0


def draw_rw(x: Any, m: TMixture, cfg: ProposalConfig, rng: np.random.Generator) -> np.ndarray:
    """Gaussian random-walk step with covariance kappa * Sigma~ of the component nearest x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.d,):
        raise ValueError(f'x has shape {x.shape}, expected {(m.d,)}')
    comp = m.components[m.khat(x)]
    scale = math.sqrt(cfg.kappa_for(m.d) * rw_scale_factor(comp))
    return x + scale * (comp.chol @ rng.standard_normal(m.d))


def rw_log_accept(log_pi_x: float, log_pi_z: float) -> float:
    # Plain pi(z)/pi(x) ratio. The draw_rw step covariance follows khat(x), so the
    # move is symmetric, and the ratio exact, only when khat(z) == khat(x).
    if log_pi_z == -math.inf or math.isnan(log_pi_z):
        return -math.inf
    return min(0.0, log_pi_z - log_pi_x)


__all__ = [
    'RhoLaw', 'ProposalConfig', 'ProposalDraw', 'Envelope', 'BRANCHES',
    'BRANCH_G0', 'BRANCH_GM', 'BRANCH_CMH', 'BRANCH_BLOCK', 'BRANCH_RW',
    'draw_reversible_t', 'reversible_t_logpdf', 'draw_cmh', 'draw_block', 'select_partition',
    'log_q_star', 'draw_acmh', 'branch_probabilities', 'log_ratio_from_values',
    'acmh_log_ratio', 'acmh_log_accept', 'draw_rw', 'rw_log_accept', 'rw_scale_factor',
]
