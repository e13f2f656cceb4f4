"""Two-chain adaptive ACMH runner.

A trial chain builds the history that every mixture refit reads; the main
chain only ever consumes mixtures fitted to that history, never its own
iterates. Within iteration n both chains propose from the mixture fitted to
the history as of iteration n - 1; history appends and refits happen after
both updates.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple
import logging
import math
import time

import numpy as np

from .errors import DegeneratePointError, InsufficientDataError
from .fit_mixture import MIN_STATES_PER_DIM, FitConfig, fit
from .kernels import (
    BRANCH_RW, Envelope, ProposalConfig, draw_acmh, draw_rw, log_q_star, log_ratio_from_values,
    rw_log_accept, select_partition,
)
from .mixture_t import TMixture
from .records import ChainOutput, History
from .settings import section
from .smc_init import SMCConfig, anneal

_logger = logging.getLogger(__name__)

_RUN = section('run')

HISTORY_RULES = ('previous', 'accepted')


@dataclass(frozen=True)
class RunConfig:
    """Schedule and tuning of one two-chain run.

    ``history_rule`` 'previous' appends the trial chain's pre-move state on
    acceptance; 'accepted' appends the accepted proposal instead.
    ``fixed_delta`` pins the independent-step probability for every iteration.
    """
    n_burnin: int = int(_RUN['n_burnin'])
    n_sample: int = int(_RUN['n_sample'])
    refit_stage1: int = int(_RUN['refit_stage1'])
    refit_stage2: int = int(_RUN['refit_stage2'])
    a_n: int = int(_RUN['a_n'])
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    smc: SMCConfig = field(default_factory=SMCConfig)
    seed: int = 0
    record_trial: bool = True
    history_rule: str = 'previous'
    adapt_after_burnin: bool = True
    fixed_delta: Optional[float] = None
    use_rw: bool = True

    def __post_init__(self):
        if self.n_burnin < 0 or self.n_sample < 1:
            raise ValueError('n_burnin must be >= 0 and n_sample >= 1')
        if self.a_n < 1 or self.n_sample % self.a_n:
            raise ValueError(f'n_sample ({self.n_sample}) must be divisible by a_n ({self.a_n})')
        if self.refit_stage1 < 1 or self.refit_stage2 < 1:
            raise ValueError('refit cadences must be at least 1')
        if self.history_rule not in HISTORY_RULES:
            raise ValueError(f'history_rule must be one of {HISTORY_RULES}')
        if self.fixed_delta is not None and not 0.0 <= self.fixed_delta <= 1.0:
            raise ValueError('fixed_delta must be a probability')

    @property
    def b_n(self) -> int:
        return self.n_sample // self.a_n

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['proposal'] = self.proposal.to_dict()
        out['fit'] = self.fit.to_dict()
        out['smc'] = self.smc.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        data = dict(data)
        if isinstance(data.get('proposal'), dict):
            data['proposal'] = ProposalConfig.from_dict(data['proposal'])
        if isinstance(data.get('fit'), dict):
            data['fit'] = FitConfig.from_dict(data['fit'])
        if isinstance(data.get('smc'), dict):
            data['smc'] = SMCConfig.from_dict(data['smc'])
        return cls(**data)


def spawn_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (smc, trial, main) random streams from one seed."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def initial_smc_config(d: int, smc: SMCConfig) -> SMCConfig:
    """SMC config whose particle count covers the 10·d states a fit needs."""
    needed = MIN_STATES_PER_DIM * d
    if smc.n_particles >= needed:
        return smc
    _logger.info('Raising SMC particle count from %d to %d for d=%d', smc.n_particles, needed, d)
    return replace(smc, n_particles=needed)


def delta_at(n: int, cfg: RunConfig) -> float:
    """Staircase (k + 1)/a_N for sampling iteration n in block k of length b_N."""
    if not 1 <= n <= cfg.n_sample:
        raise ValueError(f'sampling iteration {n} outside 1..{cfg.n_sample}')
    k = (n - 1) // cfg.b_n
    return (k + 1) / cfg.a_n


@dataclass
class EnvelopeReport:
    """Probe audit of g0(z) >= beta0 pi(z). A ratio above 1 proves a violation; at most 1 is evidence only."""
    max_ratio: float
    violation: bool
    n_probes: int
    argmax: Optional[List[float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def check_envelope(target: Any, g0: Envelope, beta0: float, probe_points: Any) -> EnvelopeReport:
    """Largest beta0 * pi(z) / g0(z) over the probes; pi must be normalized for the ratio to be meaningful."""
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if not np.all(np.isfinite(pts)):
        raise ValueError('probe points must be finite')
    if pts.shape[0] == 0:
        return EnvelopeReport(max_ratio=0.0, violation=False, n_probes=0)
    lp = np.atleast_1d(np.asarray(target.log_density(pts), dtype=float))
    lg = np.atleast_1d(np.asarray(g0.logpdf(pts), dtype=float))
    log_beta0 = math.log(beta0) if beta0 > 0 else -math.inf
    with np.errstate(invalid='ignore'):
        log_ratio = log_beta0 + lp - lg
    log_ratio[np.isnan(log_ratio)] = -np.inf
    i = int(np.argmax(log_ratio))
    max_ratio = float(np.exp(log_ratio[i]))
    return EnvelopeReport(
        max_ratio=max_ratio,
        violation=bool(log_ratio[i] > 1e-12),
        n_probes=pts.shape[0],
        argmax=pts[i].tolist(),
    )


class _ChainState:
    """Current point of one chain with cached log pi, log g0 and log gM."""

    def __init__(self, x: np.ndarray, log_pi: float):
        self.x = x
        self.log_pi = log_pi
        self.lg0 = -math.inf
        self.lgm = -math.inf
        self.lq = -math.inf

    def refresh(self, m: TMixture, g0: Envelope, beta0: float) -> None:
        self.lq, self.lg0, self.lgm = log_q_star(self.x, m, g0, beta0)


class _Recorder:
    def __init__(self, n: int, d: int, burnin: int):
        self.iterates = np.empty((n, d))
        self.flags = np.zeros(n, dtype=bool)
        self.rw_flags = np.full(n, -1, dtype=np.int8)
        self.tags: List[str] = []
        self.burnin = burnin
        self.burn_acc = 0

    def record(self, n: int, state: _ChainState, accepted: bool, tag: str, rw: Optional[bool]) -> None:
        if n <= self.burnin:
            self.burn_acc += accepted
            return
        i = n - self.burnin - 1
        self.iterates[i] = state.x
        self.flags[i] = accepted
        self.tags.append(tag)
        if rw is not None:
            self.rw_flags[i] = int(rw)

    def output(
        self,
        snapshots: Dict[int, TMixture],
        cpu: float,
        refits: List[Dict[str, Any]],
        fit_reports: Dict[int, Dict[str, Any]],
    ) -> ChainOutput:
        return ChainOutput(
            iterates=self.iterates,
            accept_flags=self.flags,
            branch_tags=self.tags,
            mixture_snapshots=dict(snapshots),
            rw_accept_flags=self.rw_flags,
            burnin_accept_rate=self.burn_acc / self.burnin if self.burnin else float('nan'),
            cpu_seconds=cpu,
            refits=list(refits),
            fit_reports=dict(fit_reports),
        )


def _start_points(particles: np.ndarray, log_density: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two distinct particles of highest target density, ties broken by index."""
    order = np.argsort(-log_density, kind='stable')
    first = particles[order[0]]
    for j in order[1:]:
        if not np.array_equal(particles[j], first):
            return first.copy(), particles[j].copy()
    return first.copy(), first.copy()


def _mh_update(
    state: _ChainState,
    target: Any,
    m: TMixture,
    g0: Envelope,
    cfg: ProposalConfig,
    rng: np.random.Generator,
) -> Tuple[bool, str, np.ndarray, np.ndarray]:
    """One reversible ACMH step; returns (accepted, branch, pre-move state, proposal)."""
    previous = state.x
    draw = draw_acmh(state.x, m, g0, cfg, rng, cache=(state.lg0, state.lgm))
    log_pi_z = float(target.log_density(draw.z))
    if math.isfinite(log_pi_z):
        lqz, lg0z, lgmz = log_q_star(draw.z, m, g0, cfg.beta0)
    else:
        lqz, lg0z, lgmz = -math.inf, -math.inf, -math.inf
    ratio = log_ratio_from_values(state.log_pi, log_pi_z, state.lq, lqz)
    accepted = math.log(rng.random()) < ratio
    if accepted:
        state.x, state.log_pi = draw.z, log_pi_z
        state.lq, state.lg0, state.lgm = lqz, lg0z, lgmz
    return accepted, draw.branch, previous, draw.z


def _rw_update(
    state: _ChainState,
    target: Any,
    m: TMixture,
    g0: Envelope,
    cfg: ProposalConfig,
    rng: np.random.Generator,
) -> bool:
    z = draw_rw(state.x, m, cfg, rng)
    log_pi_z = float(target.log_density(z))
    accepted = math.log(rng.random()) < rw_log_accept(state.log_pi, log_pi_z)
    if accepted:
        state.x, state.log_pi = z, log_pi_z
        state.refresh(m, g0, cfg.beta0)
    return accepted


def run(
    target: Any,
    cfg: Optional[RunConfig] = None,
    history: Any = None,
    mixture: Optional[TMixture] = None,
    start: Any = None,
    adapt: bool = True,
) -> Tuple[ChainOutput, ChainOutput]:
    """Run the trial and main chains for n_burnin + n_sample iterations.

    ``history`` is the initial history (n0 x d); without it the annealed SMC
    sampler produces one. ``mixture`` skips the initial fit. ``start`` sets
    both chains' starting point. ``adapt=False`` freezes the mixture.
    """
    cfg = cfg or RunConfig()
    smc_rng, trial_rng, main_rng = spawn_streams(cfg.seed)

    if history is None:
        particles = anneal(target, initial_smc_config(target.dim, cfg.smc), smc_rng)
        init_states, init_lp = particles.particles, particles.log_density
    else:
        init_states = np.atleast_2d(np.asarray(history, dtype=float))
        init_lp = np.asarray(target.log_density(init_states), dtype=float)
    hist = History(init_states)

    fit_reports: Dict[int, Dict[str, Any]] = {}
    if mixture is None:
        mixture, report = fit(hist.states, cfg.fit)
        fit_reports[0] = report.to_dict()
        _logger.info('Initial mixture: G=%d from %d states', mixture.G, len(hist))
    m = mixture
    g0 = target.envelope(m)
    beta0 = cfg.proposal.beta0

    if start is not None:
        x0 = np.asarray(start, dtype=float).copy()
        x0_trial = x0.copy()
    else:
        x0, x0_trial = _start_points(init_states, init_lp)
    main = _ChainState(x0, float(target.log_density(x0)))
    trial = _ChainState(x0_trial, float(target.log_density(x0_trial)))
    if not (math.isfinite(main.log_pi) and math.isfinite(trial.log_pi)):
        raise ValueError('log density is not finite at the start point')
    main.refresh(m, g0, beta0)
    trial.refresh(m, g0, beta0)

    d = x0.shape[0]
    main_rec = _Recorder(cfg.n_sample, d, cfg.n_burnin)
    trial_rec = _Recorder(cfg.n_sample if cfg.record_trial else 0, d, cfg.n_burnin)
    snapshots: Dict[int, TMixture] = {0: m}
    refits: List[Dict[str, Any]] = []
    locked_G: Optional[int] = None
    proposal_by_delta: Dict[float, ProposalConfig] = {}
    total = cfg.n_burnin + cfg.n_sample

    t0 = time.perf_counter()
    for n in range(1, total + 1):
        if cfg.fixed_delta is not None:
            delta = cfg.fixed_delta
        elif n <= cfg.n_burnin:
            delta = 1.0 / cfg.a_n
        else:
            delta = delta_at(n - cfg.n_burnin, cfg)
        pcfg = proposal_by_delta.get(delta)
        if pcfg is None:
            pcfg = proposal_by_delta[delta] = cfg.proposal.with_delta(delta)
        with_rw = cfg.use_rw and n % pcfg.iota_rw == 0

        t_acc, t_branch, t_prev, t_z = _mh_update(trial, target, m, g0, pcfg, trial_rng)
        t_rw = _rw_update(trial, target, m, g0, pcfg, trial_rng) if with_rw else None
        m_acc, m_branch, _, _ = _mh_update(main, target, m, g0, pcfg, main_rng)
        m_rw = _rw_update(main, target, m, g0, pcfg, main_rng) if with_rw else None

        if t_acc:
            hist.append(t_prev if cfg.history_rule == 'previous' else t_z)
        suffix = '+' + BRANCH_RW if with_rw else ''
        main_rec.record(n, main, m_acc, m_branch + suffix, m_rw)
        if cfg.record_trial:
            trial_rec.record(n, trial, t_acc, t_branch + suffix, t_rw)

        if adapt and _refit_due(n, cfg):
            fit_cfg = cfg.fit if n <= cfg.n_burnin else cfg.fit.locked(locked_G if locked_G is not None else m.G)
            new_m = _refit(hist, fit_cfg, m, n, refits, fit_reports)
            if new_m is not None:
                m = new_m
                snapshots[n] = m
                main.refresh(m, g0, beta0)
                trial.refresh(m, g0, beta0)
        if n == cfg.n_burnin:
            locked_G = m.G
            _logger.info('Burn-in finished: G=%d, history size %d', m.G, len(hist))
    cpu = time.perf_counter() - t0

    return (main_rec.output(snapshots, cpu, refits, fit_reports),
            trial_rec.output(snapshots, cpu, refits, fit_reports))


def _refit_due(n: int, cfg: RunConfig) -> bool:
    if n <= cfg.n_burnin:
        return n % cfg.refit_stage1 == 0
    if not cfg.adapt_after_burnin:
        return False
    return (n - cfg.n_burnin) % cfg.refit_stage2 == 0


def _refit(
    hist: History,
    fit_cfg: FitConfig,
    current: TMixture,
    n: int,
    refits: List[Dict[str, Any]],
    fit_reports: Dict[int, Dict[str, Any]],
) -> Optional[TMixture]:
    """Fit to the trial history; on failure keep the current mixture."""
    digest = hist.digest()
    try:
        new_m, report = fit(hist.states, fit_cfg, init=current)
    except (InsufficientDataError, DegeneratePointError, ValueError, np.linalg.LinAlgError) as exc:
        _logger.warning('Refit at iteration %d failed (%s); keeping previous mixture', n, exc)
        refits.append({'iteration': n, 'ok': False, 'history_size': len(hist), 'digest': digest, 'error': str(exc)})
        return None
    _logger.debug('Refit at iteration %d: G=%d from %d states', n, new_m.G, len(hist))
    fit_reports[n] = report.to_dict()
    refits.append({
        'iteration': n, 'ok': True, 'G': new_m.G, 'history_size': len(hist), 'digest': digest,
        'objective': report.objective_trace[-1] if report.objective_trace else None,
        'degenerate': report.degenerate,
    })
    return new_m


__all__ = [
    'History', 'RunConfig', 'ChainOutput', 'EnvelopeReport',
    'run', 'delta_at', 'check_envelope', 'select_partition', 'spawn_streams', 'initial_smc_config',
]
