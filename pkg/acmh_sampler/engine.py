"""Experiment engine: run sampler variants over replications and write run directories.

Each replication r runs with seed ``seed + r`` and writes into
``<out>/<variant>/rep_<r>/``; the per-replication summary rows plus their
mean go to ``<out>/<variant>/summary.csv``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import logging
import math

import numpy as np

from .baselines import run_arwmh
from .chain import RunConfig, initial_smc_config, run, spawn_streams
from .diagnostics import KDE, censored_score, crps_total, summarize, tails_region
from .settings import section
from .smc_init import anneal
from .targets.all_targets import TARGET_BY_NAME, make_target
from .targets.base import Target
from .targets.covariance import load_csv as load_matrix_csv
from .targets.logistic import load_csv as load_logistic_csv, train_test_split
from .utils import run_io

_logger = logging.getLogger(__name__)

_DIAG = section('diagnostics')

VARIANTS = ('acmh', 'arwmh', 'acmh-indep', 'acmh-no-rw', 'acmh-no-block')


@dataclass(frozen=True)
class ExperimentConfig:
    """One target, one sampler variant, ``replications`` independent runs.

    ``censor_threshold`` scores the first marginal on {|x| > threshold} when
    the target has an exact sampler; ``test_fraction`` holds out logistic rows
    for the CRPS.
    """
    target: str
    dim: Optional[int] = None
    target_params: Dict[str, Any] = field(default_factory=dict)
    variant: str = 'acmh'
    run: RunConfig = field(default_factory=RunConfig)
    replications: int = 1
    out_dir: str = 'runs'
    data_path: Optional[str] = None
    test_fraction: Optional[float] = None
    censor_threshold: Optional[float] = 15.0
    lpds_test_size: int = int(_DIAG['lpds_test_size'])
    acf_lags: int = int(_DIAG['acf_lags'])
    trace_columns: int = int(_DIAG['trace_columns'])
    workers: int = 1

    def __post_init__(self):
        if self.target not in TARGET_BY_NAME:
            raise ValueError(f'unknown target {self.target!r}; choose from {sorted(TARGET_BY_NAME)}')
        if self.variant not in VARIANTS:
            raise ValueError(f'unknown variant {self.variant!r}; choose from {list(VARIANTS)}')
        if self.replications < 1:
            raise ValueError('replications must be at least 1')
        if self.workers < 1:
            raise ValueError('workers must be at least 1')
        if TARGET_BY_NAME[self.target].is_data_target and not self.data_path:
            raise ValueError(f'target {self.target!r} needs --data')
        if self.test_fraction is not None and not 0.0 <= self.test_fraction < 1.0:
            raise ValueError('test_fraction must be in [0, 1)')

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['run'] = self.run.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        data = dict(data)
        if isinstance(data.get('run'), dict):
            data['run'] = RunConfig.from_dict(data['run'])
        return cls(**data)


def variant_run_config(variant: str, base: RunConfig) -> RunConfig:
    """The RunConfig a variant actually uses."""
    if variant == 'acmh-indep':
        return replace(base, fixed_delta=1.0)
    if variant == 'acmh-no-rw':
        return replace(base, use_rw=False)
    if variant == 'acmh-no-block':
        return replace(base, proposal=replace(base.proposal, gamma=0.0))
    return base


def _aux_rng(seed: int) -> np.random.Generator:
    """Stream for data splits and evaluation draws, independent of the sampler streams."""
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])


def build_target(cfg: ExperimentConfig, rng: np.random.Generator) -> Tuple[Target, Optional[Tuple[np.ndarray, np.ndarray]]]:
    """Target plus the held-out (X, y) rows for logistic CRPS, if any."""
    if cfg.target == 'logistic':
        X, y, _ = load_logistic_csv(cfg.data_path)
        holdout = None
        if cfg.test_fraction:
            (X, y), holdout = train_test_split(X, y, cfg.test_fraction, rng)
        return make_target('logistic', data=(X, y)), holdout
    if cfg.target == 'covariance':
        return make_target('covariance', data=load_matrix_csv(cfg.data_path), params=cfg.target_params), None
    return make_target(cfg.target, dim=cfg.dim, params=cfg.target_params), None


def run_replication(cfg: ExperimentConfig, r: int) -> Dict[str, Any]:
    """Run replication r and write its run directory; returns the report."""
    seed = cfg.run.seed + r
    rcfg = replace(variant_run_config(cfg.variant, cfg.run), seed=seed)
    aux = _aux_rng(seed)
    target, holdout = build_target(cfg, aux)
    rep_dir = Path(cfg.out_dir) / cfg.variant / f'rep_{r}'
    rep_dir.mkdir(parents=True, exist_ok=True)

    resolved = cfg.to_dict()
    resolved.update({'replication': r, 'run': rcfg.to_dict(), 'target_config': target.to_config()})
    run_io.write_json(rep_dir / 'config.json', resolved)

    smc_rng, _, main_rng = spawn_streams(seed)
    if cfg.variant == 'arwmh':
        main = run_arwmh(target, rcfg.n_burnin, rcfg.n_sample, main_rng, start=target.initial_point())
        trial = None
    else:
        particles = anneal(target, initial_smc_config(target.dim, rcfg.smc), smc_rng)
        run_io.write_matrix_csv(rep_dir / 'particles.csv', particles.particles)
        main, trial = run(target, rcfg, history=particles.particles)
        for iteration, m in sorted(main.mixture_snapshots.items()):
            m.to_json(rep_dir / f'mixture_{iteration}.json')
        for iteration, fit_report in sorted(main.fit_reports.items()):
            run_io.write_json(rep_dir / f'fit_report_{iteration}.json', _jsonable(fit_report))

    run_io.write_chain_csv(rep_dir / 'chain_main.csv', main)
    if trial is not None and trial.n:
        run_io.write_chain_csv(rep_dir / 'chain_trial.csv', trial)
    run_io.write_trace_csv(rep_dir / 'trace.csv', main.iterates, cfg.trace_columns)
    run_io.write_acf_csv(rep_dir / 'acf.csv', main.iterates, cfg.acf_lags)

    test = censored = crps = None
    if target.has_exact_sampler:
        test = target.sample(aux, cfg.lpds_test_size)
        if cfg.censor_threshold is not None:
            kde = KDE.from_sample(main.iterates[:, 0])
            censored = censored_score(kde, test[:, 0], tails_region(cfg.censor_threshold))
    if holdout is not None and holdout[0].shape[0]:
        X_test, y_test = holdout
        crps = crps_total(target.predictive_mean(main.iterates, X_test), y_test)

    report = summarize(main, test, crps=crps, censored=censored)
    report.update({
        'replication': r, 'variant': cfg.variant, 'target': target.name, 'd': target.dim, 'seed': seed,
        'burnin_accept_rate': main.burnin_accept_rate,
        'cpu_scope': 'sampling loop wall-clock, SMC initialization excluded',
        'refits': main.refits,
    })
    run_io.write_json(rep_dir / 'report.json', _jsonable(report))
    _logger.info('%s rep %d on %s (d=%d): acc=%.3f iact=%.2f lpds=%s', cfg.variant, r, target.name,
                 target.dim, report['acc_rate'], report['iact_avg'], report.get('lpds'))
    return report


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run all replications; 0 when every replication succeeded, 1 otherwise."""
    out = Path(cfg.out_dir) / cfg.variant
    out.mkdir(parents=True, exist_ok=True)
    reports: Dict[int, Dict[str, Any]] = {}
    failed: List[int] = []

    if cfg.workers > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {r: pool.submit(run_replication, cfg, r) for r in range(cfg.replications)}
            for r, fut in futures.items():
                try:
                    reports[r] = fut.result()
                except Exception:
                    _logger.exception('Replication %d failed', r)
                    failed.append(r)
    else:
        for r in range(cfg.replications):
            try:
                reports[r] = run_replication(cfg, r)
            except Exception:
                _logger.exception('Replication %d failed', r)
                failed.append(r)

    rows = [reports[r] for r in sorted(reports)]
    run_io.write_summary_csv(out / 'summary.csv', rows)
    if failed:
        _logger.error('%d of %d replications failed: %s', len(failed), cfg.replications, failed)
        return 1
    return 0


__all__ = ['ExperimentConfig', 'VARIANTS', 'variant_run_config', 'build_target', 'run_replication', 'run_experiment']
