"""Best-effort reruns of the benchmark tables at a configurable scale.

Usage:
  python scripts/reproduce_tables.py --scale 0.1 --reps 2 --out tables
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from acmh_sampler.chain import RunConfig  # noqa: E402
from acmh_sampler.engine import ExperimentConfig, run_experiment  # noqa: E402

# (label, target, dims, variants)
TABLES = [
    ('mixture', 'msn', (2, 5, 10), ('acmh', 'arwmh')),
    ('banana', 'banana', (5, 10, 20, 40), ('acmh', 'arwmh')),
    ('component_wise', 'banana', (10,), ('acmh', 'acmh-no-block')),
    ('correlated_step', 'msn', (10,), ('acmh', 'acmh-indep')),
    ('random_walk', 'msn', (1,), ('acmh', 'acmh-no-rw')),
]


def main() -> int:
    p = argparse.ArgumentParser(description='Rerun the benchmark tables')
    p.add_argument('--scale', type=float, default=1.0, help='Fraction of 50k+50k iterations')
    p.add_argument('--reps', type=int, default=5)
    p.add_argument('--workers', type=int, default=1)
    p.add_argument('--out', default='tables')
    p.add_argument('--only', default=None, help='Run a single table by label')
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    base = RunConfig()
    n = max(base.a_n, int(round(base.n_sample * args.scale / base.a_n)) * base.a_n)
    run_cfg = replace(base, n_sample=n, n_burnin=int(round(base.n_burnin * args.scale)))
    status = 0
    for label, target, dims, variants in TABLES:
        if args.only and label != args.only:
            continue
        for d in dims:
            for variant in variants:
                out = Path(args.out) / label / f'{target}_d{d}'
                cfg = ExperimentConfig(target=target, dim=d, variant=variant, run=run_cfg,
                                       replications=args.reps, out_dir=str(out), workers=args.workers)
                print(f'{label}: {variant} on {target} d={d} -> {out}')
                status |= run_experiment(cfg)
    return status


if __name__ == '__main__':
    sys.exit(main())
