"""Run a sampler variant on a benchmark target and save run directories.

Usage:
  python main.py --target msn --dim 2 --variant acmh --reps 5 --out runs
  python main.py --target logistic --data spam.csv --test-fraction 0.5
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from acmh_sampler.chain import RunConfig
from acmh_sampler.engine import VARIANTS, ExperimentConfig, run_experiment
from acmh_sampler.settings import section
from acmh_sampler.targets.all_targets import TARGET_BY_NAME

_RUN = section('run')


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description='Adaptive correlated Metropolis-Hastings benchmark runner')
    p.add_argument('--target', '-t', choices=sorted(TARGET_BY_NAME), help='Target distribution')
    p.add_argument('--variant', '-v', default='acmh', choices=VARIANTS, help='Sampler variant')
    p.add_argument('--dim', '-d', type=int, default=None, help='Dimension (synthetic targets)')
    p.add_argument('--iters', type=int, default=int(_RUN['n_sample']), help='Sampling iterations')
    p.add_argument('--burnin', type=int, default=int(_RUN['n_burnin']), help='Burn-in iterations')
    p.add_argument('--reps', type=int, default=1, help='Replications')
    p.add_argument('--seed', type=int, default=0, help='Base seed; replication r uses seed + r')
    p.add_argument('--config', '-c', default=None, help='JSON config; its values override flags')
    p.add_argument('--out', '-o', default='runs', help='Output directory')
    p.add_argument('--data', default=None, help='CSV data for logistic/covariance targets')
    p.add_argument('--test-fraction', type=float, default=None, help='Held-out share of logistic rows')
    p.add_argument('--workers', type=int, default=1, help='Replications run in parallel')
    p.add_argument('--log-level', default='INFO', help='Logging level')
    return p


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flags first, then the JSON config on top."""
    run_cfg = RunConfig(n_burnin=args.burnin, n_sample=args.iters, seed=args.seed).to_dict()
    data = {
        'target': args.target, 'dim': args.dim, 'variant': args.variant, 'run': run_cfg,
        'replications': args.reps, 'out_dir': args.out, 'data_path': args.data,
        'test_fraction': args.test_fraction, 'workers': args.workers,
    }
    if args.config:
        with Path(args.config).open('r', encoding='utf-8') as fh:
            data = _merge(data, json.load(fh))
    if not data.get('target'):
        raise ValueError('no target given (use --target or the config file)')
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        cfg = resolve_config(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        logging.error('Invalid configuration: %s', exc)
        return 2
    status = run_experiment(cfg)
    print(f"Saved summary to: {Path(cfg.out_dir) / cfg.variant / 'summary.csv'}")
    return status


if __name__ == '__main__':
    sys.exit(main())
